#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace parrep {

// Non-finite drift encountered while integrating. Carries the offending point.
class IntegrationFault : public std::runtime_error {
public:
    IntegrationFault(const std::string& what, std::vector<double> where)
        : std::runtime_error(what), position(std::move(where)) {}
    std::vector<double> position;
};

class LabelingFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class PreconditionViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Every Fleming-Viot replica left the state in the same step.
class ExtinctionFault : public std::runtime_error {
public:
    ExtinctionFault(const std::string& what, std::uint64_t at_step)
        : std::runtime_error(what), step(at_step) {}
    std::uint64_t step;
};

class DiagnosticsFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class OracleFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ArgumentFault : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace parrep
