#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace emaint {

enum class Severity { Error, Warning };

/// A source location inside an authored text file (1-based).
struct SourcePosition {
    std::size_t line = 0;
    std::size_t column = 0;
    bool operator==(const SourcePosition&) const = default;
};

/// One authoring problem. `path` names the offending node id or the
/// document path (e.g. `bindings[2].leaf`).
struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;
    std::string path;
    std::string message;
    std::optional<SourcePosition> position;

    bool operator==(const Diagnostic&) const = default;
};

inline const char* to_string(Severity s) { return s == Severity::Error ? "ERROR" : "WARNING"; }

/// `SEVERITY path: message`, the line format used by the CLI.
inline std::string format_diagnostic(const Diagnostic& d) {
    std::string out = to_string(d.severity);
    out += ' ';
    out += d.path.empty() ? std::string("<model>") : d.path;
    out += ": ";
    out += d.message;
    if (d.position) {
        out += " (line " + std::to_string(d.position->line) + ", column " +
               std::to_string(d.position->column) + ")";
    }
    return out;
}

using Diagnostics = std::vector<Diagnostic>;

}  // namespace emaint
