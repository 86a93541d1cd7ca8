#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vrpc {

// Each code maps to a distinct process exit status in the CLI.
enum class ErrorCode {
  kIo,
  kParse,
  kShape,
  kRange,
  kConfig,
  kNumeric,
  kHashMismatch,
  kCorrupt,
  kState,
};

std::string_view to_string(ErrorCode code);
int exit_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vrpc
