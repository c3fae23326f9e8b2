#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace amr {

// Base for everything the library throws on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad dimensions, out-of-range hyperparameters, malformed config files.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Caller broke an operation's precondition (empty batch, duplicate task, ...).
class UsageError : public Error {
public:
    using Error::Error;
};

// A loss or activation went non-finite, or training diverged.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& what, std::optional<std::int64_t> example_id = std::nullopt)
        : Error(example_id ? what + " (example_id " + std::to_string(*example_id) + ")" : what),
          example_id_(example_id) {}

    std::optional<std::int64_t> example_id() const noexcept { return example_id_; }

private:
    std::optional<std::int64_t> example_id_;
};

// Task files or manifests that cannot be read. Carries the file and line.
class LoadError : public Error {
public:
    LoadError(const std::string& file, std::size_t line, const std::string& what)
        : Error(file + (line > 0 ? ":" + std::to_string(line) : std::string{}) + ": " + what),
          file_(file), line_(line) {}

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }

private:
    std::string file_;
    std::size_t line_;
};

}  // namespace amr
