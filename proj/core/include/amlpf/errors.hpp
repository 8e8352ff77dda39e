#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace amlpf {

// Every library error carries a module-qualified code ("filter.collapse", ...)
// so the CLI can surface a single machine-parseable line.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Caller broke a precondition (wrong dimension, level 0 where l >= 1 is needed).
class ContractViolation : public Error {
public:
    ContractViolation(const std::string& module, const std::string& message)
        : Error(module + ".contract", message) {}
};

// Bad user input: unknown model name, epsilon out of range, malformed config.
class UsageError : public Error {
public:
    UsageError(const std::string& module, const std::string& message)
        : Error(module + ".usage", message) {}
};

class PropagationError : public Error {
public:
    PropagationError(std::size_t step, const std::string& message)
        : Error("scheme.nonfinite", message + " at substep " + std::to_string(step)),
          step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class DegenerateWeights : public Error {
public:
    explicit DegenerateWeights(const std::string& message)
        : Error("resample.degenerate", message) {}
};

class FilterCollapse : public Error {
public:
    FilterCollapse(int time, std::string marginal)
        : Error("filter.collapse",
                "all particle weights vanished in the " + marginal + " marginal at time " +
                    std::to_string(time)),
          time_(time),
          marginal_(std::move(marginal)) {}

    int time() const noexcept { return time_; }
    const std::string& marginal() const noexcept { return marginal_; }

private:
    int time_;
    std::string marginal_;
};

class LevelCollapse : public Error {
public:
    LevelCollapse(int level, const std::string& cause)
        : Error("multilevel.collapse", "level " + std::to_string(level) + ": " + cause),
          level_(level) {}

    int level() const noexcept { return level_; }

private:
    int level_;
};

class ReferencePrecisionError : public Error {
public:
    explicit ReferencePrecisionError(const std::string& message)
        : Error("bench.reference_precision", message) {}
};

}  // namespace amlpf
