#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace oddstop {

// Input outside the mathematical domain of an operation (p not in (0,1), s > t, ...).
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what, std::ptrdiff_t index = -1)
      : std::domain_error(what), index_(index) {}

  // Zero-based position of the offending entry, or -1 when not positional.
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  std::ptrdiff_t index_;
};

// Refused because the requested enumeration or search is too large.
class CostError : public std::length_error {
 public:
  using std::length_error::length_error;
};

// Query needs at least one observation.
class NoDataError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration document; path is a JSON pointer to the field.
class ValidationError : public std::invalid_argument {
 public:
  ValidationError(std::string path, const std::string& what)
      : std::invalid_argument(what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class NotFoundError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation not allowed in the current session state.
class ConflictError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace oddstop
