#pragma once

#include <stdexcept>
#include <string>

namespace qpnls {

/// Pipeline stage that raised an error; carried into CLI reports and exit codes.
enum class Stage { Config, Lattice, Field, Nonlinear, Linop, Newton, Resonance, Linflow, Cauchy };

std::string to_string(Stage s);

class Error : public std::runtime_error {
public:
    Error(Stage stage, const std::string& what) : std::runtime_error(what), stage_(stage) {}
    Stage stage() const noexcept { return stage_; }

private:
    Stage stage_;
};

// Site count or key range exceeded a configured budget.
class CapacityError : public Error {
public:
    using Error::Error;
};

class TruncationAsymmetryError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// The restricted linearized operator is (numerically) singular; the amplitude
/// vector lies in an excised set.
class SingularOperatorError : public Error {
public:
    SingularOperatorError(Stage stage, const std::string& what, double smallest)
        : Error(stage, what), smallest_(smallest) {}
    double smallest() const noexcept { return smallest_; }

private:
    double smallest_;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

class GenericityError : public Error {
public:
    using Error::Error;
};

/// A measured quantity left its admissible envelope.
class EnvelopeError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(Stage::Config, what) {}
};

}  // namespace qpnls
