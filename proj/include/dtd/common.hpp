#pragma once

#include <stdexcept>
#include <string>

namespace dtd {

struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommutationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedShape : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedNoncentrality : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IsotropicError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dtd
