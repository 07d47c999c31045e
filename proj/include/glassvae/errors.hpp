#pragma once

#include <stdexcept>
#include <string>

namespace glassvae {

// Bad argument or violated precondition.
class ArgumentError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Incompatible tensor or matrix shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Malformed input text. `line` is 1-based, 0 when unknown.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Input parses but describes something the pipeline does not handle
// (triclinic cells, inconsistent atom counts, ...).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Missing key in a keyed lookup (energy table, species map).
class LookupError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

// Graph on which the model is undefined (no edges, coincident atoms, ...).
class DegenerateGraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Non-finite loss during training. `term` names the offending component.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& term, const std::string& detail)
        : std::runtime_error("training diverged: non-finite " + term + " loss" + (detail.empty() ? "" : " (" + detail + ")")),
          term_(term) {}
    const std::string& term() const noexcept { return term_; }

private:
    std::string term_;
};

// Non-finite objective during latent refinement.
class RefinementError : public std::runtime_error {
public:
    RefinementError(std::size_t step, const std::string& detail)
        : std::runtime_error("latent refinement diverged at step " + std::to_string(step) + ": " + detail), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace glassvae
