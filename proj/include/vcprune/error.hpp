#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vcprune {

enum class ErrorKind {
    io,
    missing_file,
    missing_name,
    dtype_mismatch,
    rank_mismatch,
    malformed_file,
    non_finite,
    dimension_mismatch,
    invalid_argument,
    missing_stats,
    empty_input,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. The kind is stable and is what the CLI
/// prints in its machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace vcprune
