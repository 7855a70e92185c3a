#pragma once

#include <stdexcept>
#include <string>

namespace biotwin {

enum class ErrorCode {
  InvalidArgument,
  Degenerate,
  Mapping,
  Parse,
  Io,
  NoSubject,
};

// Every failure in the core carries a code and, where one exists, a locator:
// a JSON field path ("markers[3].vertex") or a text position ("line 7").
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string locator = {})
      : std::runtime_error(locator.empty() ? message : locator + ": " + message),
        code_(code),
        message_(std::move(message)),
        locator_(std::move(locator)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the locator prefix.
  const std::string& message() const noexcept { return message_; }
  const std::string& locator() const noexcept { return locator_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::string locator_;
};

}  // namespace biotwin
