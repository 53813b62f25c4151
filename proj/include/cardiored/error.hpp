#pragma once

#include <stdexcept>
#include <string>

namespace cardiored {

// Precondition violations on public entry points.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Mesh file could not be parsed; `line` is 1-based, 0 when not line-specific.
class LoadError : public std::runtime_error {
public:
    LoadError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
          line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class AssemblyError : public std::runtime_error {
public:
    AssemblyError(const std::string& what, std::size_t element)
        : std::runtime_error(what + " (element " + std::to_string(element) + ")"),
          element_(element) {}
    std::size_t element() const noexcept { return element_; }

private:
    std::size_t element_;
};

// Linear solver failure inside a time loop; `step` is the step being computed.
class SolveError : public std::runtime_error {
public:
    SolveError(const std::string& what, long step)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

class DegenerateBasisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace cardiored
