#pragma once

#include <stdexcept>
#include <string>

namespace scenedialog {

// Process exit codes used by the CLI.
enum class ExitCode : int {
  Ok = 0,
  Failure = 1,
  Usage = 2,
  Validation = 3,
  Backend = 4,
  Parse = 5,
};

// Root of every error the engine raises. `kind()` is the stable machine-readable
// name written into error JSON; `exit_code()` is the CLI category.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, ExitCode code, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)), code_(code) {}

  const std::string& kind() const noexcept { return kind_; }
  ExitCode exit_code() const noexcept { return code_; }

 private:
  std::string kind_;
  ExitCode code_;
};

#define SCENEDIALOG_DEFINE_ERROR(Name, Code)                              \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message)                             \
        : Error(#Name, ExitCode::Code, message) {}                        \
  };

// usage
SCENEDIALOG_DEFINE_ERROR(UsageError, Usage)
SCENEDIALOG_DEFINE_ERROR(PreconditionError, Usage)

// input / validation
SCENEDIALOG_DEFINE_ERROR(IoError, Validation)
SCENEDIALOG_DEFINE_ERROR(SchemaError, Validation)
SCENEDIALOG_DEFINE_ERROR(ValidationError, Validation)
SCENEDIALOG_DEFINE_ERROR(LengthMismatch, Validation)
SCENEDIALOG_DEFINE_ERROR(EmptyTranscript, Validation)
SCENEDIALOG_DEFINE_ERROR(NoFramesAvailable, Validation)
SCENEDIALOG_DEFINE_ERROR(RoundMismatch, Validation)
SCENEDIALOG_DEFINE_ERROR(MissingBinding, Validation)

// backends
SCENEDIALOG_DEFINE_ERROR(TransportError, Backend)
SCENEDIALOG_DEFINE_ERROR(AuthError, Backend)
SCENEDIALOG_DEFINE_ERROR(MalformedResponseError, Backend)
SCENEDIALOG_DEFINE_ERROR(FrameNotFound, Backend)
SCENEDIALOG_DEFINE_ERROR(BackendUnavailable, Backend)
SCENEDIALOG_DEFINE_ERROR(ScriptExhausted, Backend)
SCENEDIALOG_DEFINE_ERROR(ToolNotFound, Backend)

// model output parsing
SCENEDIALOG_DEFINE_ERROR(ParseError, Parse)
SCENEDIALOG_DEFINE_ERROR(EmptyGeneration, Parse)

#undef SCENEDIALOG_DEFINE_ERROR

}  // namespace scenedialog
