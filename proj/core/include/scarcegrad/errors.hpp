#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace scarcegrad {

// Shape mismatch in a tape primitive or matrix operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A documented precondition was violated by the caller.
class ContractError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An entrywise primitive was fed values outside its domain (log of a
// non-positive entry, sqrt of a negative entry, exp overflow).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Inner training produced a non-finite loss. Carries the step index.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration(iteration) {}
    int iteration;
};

// Neumann expansion cannot converge (spectral ratio too close to 1).
class ConvergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A numerically verified internal fact (e.g. an eigenvalue bound) failed
// beyond tolerance; indicates a bug rather than bad input.
class InternalConsistencyError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Malformed input file. Carries the 1-based line number when known.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, long line = 0)
        : std::runtime_error(line > 0 ? what + " (line " + std::to_string(line) + ")" : what),
          line(line) {}
    long line;
};

// Invalid experiment configuration; lists every violated field.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations(std::move(violations)) {}
    std::vector<std::string> violations;

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string s = "invalid configuration:";
        for (const auto& item : v) s += "\n  - " + item;
        return s;
    }
};

}  // namespace scarcegrad
