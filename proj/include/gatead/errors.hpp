#pragma once

#include <stdexcept>
#include <string>

namespace gatead {

/// Base class for every error raised by the engine.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// I/O and container errors.
class IoError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class UnsupportedVersion : public FormatError { public: using FormatError::FormatError; };
class TruncationError : public FormatError { public: using FormatError::FormatError; };
class DataError : public FormatError { public: using FormatError::FormatError; };

// Validation errors.
class DimensionError : public Error { public: using Error::Error; };
class IndexError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class DegenerateLabelsError : public Error { public: using Error::Error; };

/// Raised by training when the loss stops being finite.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t epoch)
        : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
    std::size_t epoch() const noexcept { return epoch_; }

private:
    std::size_t epoch_;
};

}  // namespace gatead
