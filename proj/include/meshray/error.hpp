#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace meshray {

enum class ErrorCode {
    NonComposableScale,
    EmptyMesh,
    EmptyInput,
    UncommittedSubScene,
    UnsupportedNesting,
    UnknownId,
    IndexOutOfRange,
    DirtyScene,
    CountMismatch,
    ResolutionOutOfRange,
    InvalidModel,
    EmptyPoseBatch,
    EmptySelection,
    MissingAttributes,
    InvalidSpec,
    ParseError,
    UnsupportedFeature,
    UnknownObjectName,
    NonUnitQuaternion,
    Io,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported as this exception; `code()` identifies the
// condition, `what()` carries the human-readable detail.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace meshray
