#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hsic_psi {

enum class ErrorCode {
    AllIdentical,
    NonFinite,
    SizeMismatch,
    TooFewSamples,
    DuplicateIndex,
    BlockTooSmall,
    NotSymmetric,
    TooFewSummands,
    NotPD,
    DegenerateFolds,
    LambdaZero,
    NotSelected,
    IndexOutOfRange,
    DegenerateDirection,
    EmptyInterval,
    OutsideInterval,
    FoldTooSmall,
    InvalidArgument,
    Ingestion,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. The code lets callers (notably the CLI) map
/// failures onto exit statuses without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace hsic_psi
