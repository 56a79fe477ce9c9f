#pragma once

#include <stdexcept>
#include <string>

namespace sirius {

/// Root of every error raised by the library. The CLI maps ConfigError to
/// exit code 2 and everything else to 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptyDataset : public Error {
 public:
  EmptyDataset() : Error("dataset has no samples") {}
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class EpisodeOver : public Error {
 public:
  EpisodeOver() : Error("step called on a finished episode") {}
};

class DemoFailed : public Error {
 public:
  using Error::Error;
};

class InfeasibleTarget : public Error {
 public:
  using Error::Error;
};

class MissingClass : public Error {
 public:
  using Error::Error;
};

class DivisionByZeroClass : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class InsufficientCheckpoints : public Error {
 public:
  using Error::Error;
};

class CapacityInfeasible : public Error {
 public:
  using Error::Error;
};

class EmptyRound : public Error {
 public:
  EmptyRound() : Error("round has no trajectories") {}
};

class MismatchedConfigs : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// The live session was shut down while an episode was waiting on it.
class SessionClosed : public Error {
 public:
  using Error::Error;
};

/// Raised by the deployment loop with the failing round attached.
class RoundAborted : public Error {
 public:
  RoundAborted(int round, const std::string& what)
      : Error("round " + std::to_string(round) + ": " + what), round_(round) {}
  int round() const { return round_; }

 private:
  int round_;
};

}  // namespace sirius
