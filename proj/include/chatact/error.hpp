#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace chatact {

// Base of every error the core throws. The C API maps the concrete type to a
// status code, the CLI maps it to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input data: bad records, unknown labels, invalid spans.
class DataError : public Error {
 public:
  using Error::Error;
};

// A parse failure tied to one line of a line-delimited input.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Taxonomy configuration problems. `offender` names the label (or rule) that
// failed validation.
class TaxonomyError : public DataError {
 public:
  enum class Kind { kCycle, kDanglingParent, kDuplicateId, kMissingMember, kMissingRoot, kBadId, kFormat };

  TaxonomyError(Kind kind, std::string offender, const std::string& what)
      : DataError(what), kind_(kind), offender_(std::move(offender)) {}

  Kind kind() const noexcept { return kind_; }
  const std::string& offender() const noexcept { return offender_; }

 private:
  Kind kind_;
  std::string offender_;
};

// Annotation records that point at sentences which do not exist.
class DanglingReferenceError : public DataError {
 public:
  explicit DanglingReferenceError(std::vector<std::string> ids);

  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::vector<std::string> ids_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Model and store disagree on the taxonomy they are bound to.
class ConflictError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace chatact
