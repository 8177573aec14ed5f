#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unprompt {

// Categories surface verbatim on the CLI error line, so keep them stable.
enum class ErrorKind {
    Parse,
    MalformedGraph,
    Shape,
    Rank,
    Label,
    Metric,
    Config,
    Spec,
    Io,
    Version,
    CorruptPayload,
    NonFinite,
    Probe,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Parse: return "parse";
        case ErrorKind::MalformedGraph: return "malformed-graph";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Rank: return "rank";
        case ErrorKind::Label: return "label";
        case ErrorKind::Metric: return "metric";
        case ErrorKind::Config: return "config";
        case ErrorKind::Spec: return "spec";
        case ErrorKind::Io: return "io";
        case ErrorKind::Version: return "version";
        case ErrorKind::CorruptPayload: return "corrupt-payload";
        case ErrorKind::NonFinite: return "non-finite";
        case ErrorKind::Probe: return "probe";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace unprompt
