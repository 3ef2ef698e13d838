#pragma once

#include <stdexcept>
#include <string>

namespace siv1 {

/// Input outside the domain of an operation (negative rate, bad ordering, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// An inversion has no solution for the given inputs.
class NoSolutionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A closed-form expression would divide by zero.
class DivisionByZeroError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Requested integrator step does not resolve the fastest time scale.
class StepSizeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Steady state of a generator is not unique.
class NonUniqueSteadyStateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameter cannot be determined from the supplied data.
class UnidentifiableError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-dataset decay constants disagree beyond their uncertainties.
class InconsistentDecayError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Physical inputs that contradict each other beyond tolerance.
class InconsistencyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or unknown configuration entries.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be read or written.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace siv1
