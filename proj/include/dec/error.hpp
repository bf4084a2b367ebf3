#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace dec {

/// Failure classes, mapped to CLI exit codes (usage=1, data=2, backend=3;
/// parse failures of model output are reported as backend failures).
enum class ErrorKind { usage, data, backend, parse };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::string template_name = {},
          std::string detail = {}, bool transient = false)
        : std::runtime_error(std::move(message)),
          kind_(kind),
          template_name_(std::move(template_name)),
          detail_(std::move(detail)),
          transient_(transient) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Prompt template involved in a failed model call, when applicable.
    const std::string& template_name() const noexcept { return template_name_; }

    /// Raw payload kept for diagnosis (e.g. unparsable model output).
    const std::string& detail() const noexcept { return detail_; }

    /// Transient failures (transport) are eligible for one retry.
    bool transient() const noexcept { return transient_; }

private:
    ErrorKind kind_;
    std::string template_name_;
    std::string detail_;
    bool transient_;
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::usage: return 1;
        case ErrorKind::data: return 2;
        case ErrorKind::backend: return 3;
        case ErrorKind::parse: return 3;
    }
    return 3;
}

} // namespace dec
