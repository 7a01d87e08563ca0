#ifndef PATHREC_ERRORS_H_
#define PATHREC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace pathrec {

// Bad caller input: unknown ids, malformed files, invalid configuration.
class InputError : public std::invalid_argument {
 public:
  explicit InputError(const std::string& what) : std::invalid_argument(what) {}
};

// A documented precondition between modules was broken (e.g. stepping the
// environment with an action outside the pruned set).
class ContractError : public std::logic_error {
 public:
  explicit ContractError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace pathrec

#endif  // PATHREC_ERRORS_H_
