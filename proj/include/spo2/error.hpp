#pragma once

#include <stdexcept>
#include <string>

namespace spo2 {

// All library failures surface as spo2::Error. The message starts with a
// short stable phrase ("insufficient samples", "invalid band", ...) that
// callers and tests can match on; extra detail may follow after ": ".
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Raised by the study pipeline; carries the stage and record that failed.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string record_id, const std::string& cause)
      : Error(stage + " [" + record_id + "]: " + cause),
        stage_(std::move(stage)),
        record_id_(std::move(record_id)) {}

  const std::string& stage() const noexcept { return stage_; }
  const std::string& record_id() const noexcept { return record_id_; }

 private:
  std::string stage_;
  std::string record_id_;
};

}  // namespace spo2
