#pragma once

#include <stdexcept>
#include <string>

namespace blift {

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorCode {
  InvalidArgument,
  Parse,
  Validation,
  Io,
  Estimation,
  Internal,
};

/// All recoverable failures in the library surface as Error; the C API maps
/// the code to a status enum and preserves the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace blift
