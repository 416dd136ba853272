#pragma once

#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace rkit {

enum class ErrorKind {
    ParseError,
    UnknownIdentifier,
    DomainFault,
    DomainExit,
    SingularMetric,
    UnknownBuiltin,
    BadParam,
    BadDimension,
    DegeneratePlane,
    NoConvergence,
    StepFault,
    ConjugatePresent,
    ConjugateNotFound,
    InputOrderViolated,
    BadProfile,
    BarrierNotTransversal,
    Io,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::UnknownIdentifier: return "UnknownIdentifier";
        case ErrorKind::DomainFault: return "DomainFault";
        case ErrorKind::DomainExit: return "DomainExit";
        case ErrorKind::SingularMetric: return "SingularMetric";
        case ErrorKind::UnknownBuiltin: return "UnknownBuiltin";
        case ErrorKind::BadParam: return "BadParam";
        case ErrorKind::BadDimension: return "BadDimension";
        case ErrorKind::DegeneratePlane: return "DegeneratePlane";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::StepFault: return "StepFault";
        case ErrorKind::ConjugatePresent: return "ConjugatePresent";
        case ErrorKind::ConjugateNotFound: return "ConjugateNotFound";
        case ErrorKind::InputOrderViolated: return "InputOrderViolated";
        case ErrorKind::BadProfile: return "BadProfile";
        case ErrorKind::BarrierNotTransversal: return "BarrierNotTransversal";
        case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

/// Base of every engine failure. `kind()` is stable and is what reports serialize.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ParseError : public Error {
public:
    ParseError(int line, int column, std::vector<std::string> expected, const std::string& msg)
        : Error(ErrorKind::ParseError, msg + " at line " + std::to_string(line) + ", column " +
                                           std::to_string(column)),
          line_(line), column_(column), expected_(std::move(expected)), message_(msg) {}

    [[nodiscard]] int line() const noexcept { return line_; }
    /// The message without the location suffix.
    [[nodiscard]] const std::string& message() const noexcept { return message_; }
    [[nodiscard]] int column() const noexcept { return column_; }
    [[nodiscard]] const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    int line_;
    int column_;
    std::vector<std::string> expected_;
    std::string message_;
};

/// Raised when an integration or evaluation leaves the chart. Carries the last
/// interior state so callers can re-seed elsewhere.
class DomainExit : public Error {
public:
    DomainExit(const std::string& msg, double t_exit = 0.0, std::vector<double> last_state = {})
        : Error(ErrorKind::DomainExit, msg), t_exit_(t_exit), last_state_(std::move(last_state)) {}

    [[nodiscard]] double t_exit() const noexcept { return t_exit_; }
    [[nodiscard]] const std::vector<double>& last_state() const noexcept { return last_state_; }

private:
    double t_exit_;
    std::vector<double> last_state_;
};

class NoConvergence : public Error {
public:
    NoConvergence(const std::string& msg, double best_residual)
        : Error(ErrorKind::NoConvergence, msg + " (best residual " + short_num(best_residual) + ")"),
          best_residual_(best_residual) {}

    [[nodiscard]] double best_residual() const noexcept { return best_residual_; }

private:
    static std::string short_num(double x) {
        std::ostringstream os;
        os << std::setprecision(3) << x;
        return os.str();
    }

    double best_residual_;
};

}  // namespace rkit
