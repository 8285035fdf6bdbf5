#pragma once

#include <stdexcept>
#include <string>

namespace stefan {

/// Process exit codes shared by the library's error types and the CLI.
enum class ExitCode : int {
    ok = 0,
    config = 2,
    numerical = 3,
    tolerance_miss = 4,
};

/// Base class for every error raised by the library. `tag()` is a stable
/// machine-readable identifier recorded in run manifests.
class Error : public std::runtime_error {
public:
    Error(ExitCode code, std::string tag, const std::string& what)
        : std::runtime_error(what), code_(code), tag_(std::move(tag)) {}

    ExitCode code() const noexcept { return code_; }
    const std::string& tag() const noexcept { return tag_; }

private:
    ExitCode code_;
    std::string tag_;
};

/// Invalid parameters, malformed configuration, or violated preconditions.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, std::string tag = "config.validation")
        : Error(ExitCode::config, std::move(tag), what) {}
};

/// Failures detected while computing: singular systems, blow-up, ill-conditioning.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what, std::string tag = "numerical.failure")
        : Error(ExitCode::numerical, std::move(tag), what) {}
};

} // namespace stefan
