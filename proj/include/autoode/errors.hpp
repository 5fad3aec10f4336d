#pragma once

#include <stdexcept>
#include <string>

namespace autoode {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Primitive applied outside its domain (log of a nonpositive value, division
// by zero, sqrt of a negative, pow of a nonpositive base with a variable
// exponent).
struct DomainError : Error {
    using Error::Error;
};

// Two variables from different tapes combined in one expression.
struct TapeMismatch : Error {
    using Error::Error;
};

// NaN or Inf showed up where a finite value is required (values at variable
// creation, gradients entering an optimizer step, losses).
struct NonFiniteError : Error {
    using Error::Error;
};

// Integration produced a non-finite state. Carries the step index at which
// the state first left the finite range.
struct DivergedError : Error {
    int step;
    explicit DivergedError(int step_index)
        : Error("integration diverged at step " + std::to_string(step_index)),
          step(step_index) {}
};

// Inconsistent dimensions between containers that must agree.
struct ShapeMismatch : Error {
    using Error::Error;
};

// A structurally invalid specification (non-increasing breakpoints, empty
// quantile list, bad split fractions, ...).
struct BadSpec : Error {
    using Error::Error;
};

// Text input that could not be parsed; carries file and 1-based line.
struct ParseError : Error {
    std::string file;
    int line;
    ParseError(std::string file_, int line_, const std::string& what_)
        : Error(file_ + ":" + std::to_string(line_) + ": " + what_),
          file(std::move(file_)),
          line(line_) {}
};

// Data errors raised by the covid pipeline.
struct DateGap : Error {
    using Error::Error;
};
struct UnknownState : Error {
    using Error::Error;
};
struct InsufficientHistory : Error {
    using Error::Error;
};

// Every restart of a fit failed (integration diverged or loss went
// non-finite in all of them).
struct AllRestartsFailed : Error {
    using Error::Error;
};

}  // namespace autoode
