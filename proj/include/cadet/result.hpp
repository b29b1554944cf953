#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <variant>

namespace cadet {

enum class ErrorCode {
    LexError,
    UnbalancedDelimiter,
    ParseError,
    SchemaViolation,
    EmptySlice,
    AmbiguousSlice,
    EmptyInput,
    IoError,
    AuthError,
    MalformedResponse,
    NetworkError,
    CorruptArchive,
};

const char* to_string(ErrorCode code);

struct Error {
    ErrorCode code;
    std::string message;
    // Source line for parse errors, record index for interchange errors; -1 if unknown.
    std::int64_t location = -1;

    std::string describe() const;
};

// Minimal value-or-error carrier; std::expected is not available in C++20.
template <typename T>
class Result {
public:
    Result(T value) : state_(std::move(value)) {}
    Result(Error error) : state_(std::move(error)) {}

    bool ok() const noexcept { return state_.index() == 0; }
    explicit operator bool() const noexcept { return ok(); }

    T& value() & { return std::get<0>(state_); }
    const T& value() const& { return std::get<0>(state_); }
    T&& value() && { return std::get<0>(std::move(state_)); }
    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }
    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }

    const Error& error() const { return std::get<1>(state_); }

private:
    std::variant<T, Error> state_;
};

inline Error make_error(ErrorCode code, std::string message, std::int64_t location = -1)
{
    return Error{code, std::move(message), location};
}

} // namespace cadet
