#pragma once

#include <stdexcept>
#include <string>

namespace catephi {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input vector/matrix shape does not match a model or operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// Invalid option, unknown key, or unsupported combination in a config.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Too few records to fit a model (e.g. a treatment arm below the minimum).
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// Loss became NaN during training.
class TrainingDivergedError : public Error {
public:
    TrainingDivergedError(const std::string& msg, int epoch)
        : Error(msg), epoch_(epoch) {}
    int epoch() const { return epoch_; }

private:
    int epoch_;
};

// Infeasible annotation target or bad sampling policy.
class PolicyError : public Error {
public:
    using Error::Error;
};

// Empty inputs or an empty subgroup during evaluation.
class EvalError : public Error {
public:
    using Error::Error;
};

// File could not be read, written, or parsed.
class IoError : public Error {
public:
    using Error::Error;
};

// A caller broke a documented call contract.
class ContractError : public Error {
public:
    using Error::Error;
};

}  // namespace catephi
