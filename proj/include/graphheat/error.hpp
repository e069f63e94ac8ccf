#ifndef GRAPHHEAT_ERROR_HPP
#define GRAPHHEAT_ERROR_HPP

#include <stdexcept>
#include <string>

namespace graphheat {

class error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A graph or metric violates one of the structural axioms. `axiom()` carries
// the short axiom name (e.g. "symmetry", "connected").
class graph_error : public error {
public:
  graph_error(std::string axiom, const std::string& detail)
      : error(axiom + ": " + detail), axiom_(std::move(axiom)) {}

  const std::string& axiom() const noexcept { return axiom_; }

private:
  std::string axiom_;
};

// A parameter lies outside the range an inequality requires.
class precondition_error : public error {
public:
  using error::error;
};

// Malformed input document (file formats, CLI values).
class input_error : public error {
public:
  using error::error;
};

} // namespace graphheat

#endif
