#pragma once

#include <stdexcept>
#include <string>

namespace lqg {

// Shape mismatch between operands; the message names both shapes.
class DimensionError : public std::invalid_argument {
public:
    explicit DimensionError(const std::string& what) : std::invalid_argument(what) {}
};

// A factorization hit a non-positive pivot; carries the pivot index.
class SingularMatrixError : public std::runtime_error {
public:
    SingularMatrixError(const std::string& what, int pivot_index)
        : std::runtime_error(what), pivot_index_(pivot_index) {}
    int pivot_index() const { return pivot_index_; }

private:
    int pivot_index_;
};

// Configuration file could not be parsed; the message carries the line number.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Training hit a non-finite loss or gradient; carries the iteration index.
class TrainingDivergedError : public std::runtime_error {
public:
    TrainingDivergedError(const std::string& what, int iteration)
        : std::runtime_error(what), iteration_(iteration) {}
    int iteration() const { return iteration_; }

private:
    int iteration_;
};

}  // namespace lqg
