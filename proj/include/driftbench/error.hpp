#pragma once

#include <stdexcept>
#include <string>

namespace driftbench {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad flags, bad subcommands, unusable argument combinations. Exit code 2.
class UsageError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

// Malformed input data; carries the 1-based line number when known.
class ParseError : public Error {
public:
  ParseError(const std::string& message, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  int line() const { return line_; }

private:
  int line_;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

// Base for errors raised while talking to a model backend. The orchestrator
// retries only when retryable() is true.
class BackendError : public Error {
public:
  using Error::Error;
  virtual bool retryable() const { return false; }
};

// Connection failures, timeouts, and HTTP 429/5xx responses.
class TransportError : public BackendError {
public:
  explicit TransportError(const std::string& message, int status = 0)
      : BackendError(message), status_(status) {}

  bool retryable() const override { return true; }
  int status() const { return status_; }

private:
  int status_;
};

// The backend answered, but the body does not follow the expected protocol.
class ProtocolError : public BackendError {
public:
  using BackendError::BackendError;
};

// The model cannot supply what the harness needs (e.g. no token logprobs).
// Not retryable and not recoverable per-record: the whole run is off.
class CapabilityError : public BackendError {
public:
  using BackendError::BackendError;
};

}  // namespace driftbench
