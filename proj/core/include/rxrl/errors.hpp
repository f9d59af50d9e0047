#pragma once

#include <stdexcept>
#include <string>

namespace rxrl {

// Base of everything the library throws on a contract violation.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ValidationError : public Error {
public:
    ValidationError(const std::string& patient_id, const std::string& what)
        : Error("patient '" + patient_id + "': " + what), patient_id_(patient_id) {}
    const std::string& patient_id() const noexcept { return patient_id_; }

private:
    std::string patient_id_;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class StateError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class EmptyDatasetError : public InputError {
public:
    using InputError::InputError;
};

class DivergenceError : public Error {
public:
    DivergenceError(long iteration)
        : Error("non-finite loss at iteration " + std::to_string(iteration)),
          iteration_(iteration) {}
    long iteration() const noexcept { return iteration_; }

private:
    long iteration_;
};

class DegenerateDataError : public Error {
public:
    using Error::Error;
};

class UnsupportedActionError : public Error {
public:
    explicit UnsupportedActionError(int action_id)
        : Error("no logged encounter with action " + std::to_string(action_id)),
          action_id_(action_id) {}
    int action_id() const noexcept { return action_id_; }

private:
    int action_id_;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Model file load failures. Each failure mode has its own type.
class ModelFormatError : public Error {
public:
    using Error::Error;
};
class ModelVersionError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class ModelTruncatedError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class ModelShapeError : public ModelFormatError {
public:
    using ModelFormatError::ModelFormatError;
};
class VocabularyMismatchError : public Error {
public:
    using Error::Error;
};

}  // namespace rxrl
