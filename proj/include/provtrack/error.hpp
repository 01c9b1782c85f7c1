#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace provtrack {

// Exit-code families used by the command line front end.
enum class ErrorKind { validation = 2, runtime = 3, integrity = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind), msg_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }
  const char* what() const noexcept override { return msg_.c_str(); }

  // Prefixes the message with where the error happened, e.g. "step 3".
  void add_context(const std::string& where) { msg_ = where + ": " + msg_; }

 private:
  ErrorKind kind_;
  std::string msg_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

// Expression text that does not match the grammar. offset is a byte offset into the input.
class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& what, std::size_t offset)
      : Error(ErrorKind::validation, what + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class UnknownFeature : public Error {
 public:
  explicit UnknownFeature(const std::string& feature)
      : Error(ErrorKind::validation, "unknown feature '" + feature + "'"), feature_(feature) {}

  const std::string& feature() const noexcept { return feature_; }

 private:
  std::string feature_;
};

class TypeError : public Error {
 public:
  explicit TypeError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

// Malformed input data or an operator applied to data it cannot handle.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

// Observed step changed rows and columns at once; no single template applies.
class AmbiguousChange : public Error {
 public:
  explicit AmbiguousChange(const std::string& what) : Error(ErrorKind::runtime, what) {}
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error(ErrorKind::integrity, what) {}
};

}  // namespace provtrack
