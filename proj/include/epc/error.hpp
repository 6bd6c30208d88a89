#pragma once

#include <stdexcept>
#include <string>

namespace epc {

// Categories map one-to-one onto the status codes of the C API.
enum class ErrorKind {
  kShape = 1,
  kEmptyReduction,
  kParse,
  kRange,
  kFormat,
  kLength,
  kPartition,
  kCache,
  kBudget,
  kDomain,
  kConfig,
  kIo,
  kInvalidArgument,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace epc
