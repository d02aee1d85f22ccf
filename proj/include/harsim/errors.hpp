#pragma once

#include <stdexcept>
#include <string>

namespace harsim {

// Artifact or input failed schema/consistency checks (CLI exit code 2).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An accumulator exceeded its declared width.
class OverflowError : public std::overflow_error {
public:
    using std::overflow_error::overflow_error;
};

// Tensor shapes disagree with the model description.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace harsim
