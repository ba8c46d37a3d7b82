#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace scod {

// Exit-code categories used by the CLI: config=2, data=3, numerical=4.
enum class ErrorClass { Config = 2, Data = 3, Numerical = 4 };

class Error : public std::runtime_error {
public:
    Error(ErrorClass cls, std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), cls_(cls), code_(std::move(code)) {}

    ErrorClass error_class() const noexcept { return cls_; }

    // Stable machine-checkable identifier, e.g. "bad_magic", "ragged_row".
    const std::string& code() const noexcept { return code_; }

private:
    ErrorClass cls_;
    std::string code_;
};

class ConfigError : public Error {
public:
    ConfigError(std::string code, const std::string& message)
        : Error(ErrorClass::Config, std::move(code), message) {}
};

class DataError : public Error {
public:
    DataError(std::string code, const std::string& message, std::size_t byte_offset = npos)
        : Error(ErrorClass::Data, std::move(code),
                byte_offset == npos ? message : message + " (at byte " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::size_t byte_offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class NumericalError : public Error {
public:
    NumericalError(std::string code, const std::string& message)
        : Error(ErrorClass::Numerical, std::move(code), message) {}
};

}  // namespace scod
