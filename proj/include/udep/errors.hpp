#pragma once

#include <stdexcept>
#include <string>

namespace udep {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input text (CoNLL-U lines, vector files). Message carries a line number.
struct ParseError : Error {
  using Error::Error;
};

// Structurally well-formed data that violates a domain invariant
// (head out of range, multiple roots, cyclic head graph).
struct ValidationError : Error {
  using Error::Error;
};

// Bad user-supplied configuration: ratios, scenario files, CLI flags.
struct ConfigError : Error {
  using Error::Error;
};

// Tensor shape incompatibility inside the autodiff layer.
struct ShapeError : Error {
  using Error::Error;
};

// A caller broke an API precondition (non-scalar loss, mismatched grads, ...).
struct ContractError : Error {
  using Error::Error;
};

// Input too large for an operation with an explicit size bound.
struct SizeError : Error {
  using Error::Error;
};

// Unreadable, truncated, or wrong-format checkpoint files.
struct CheckpointError : Error {
  using Error::Error;
};

// Gold/predicted treebanks that do not line up sentence-for-sentence.
struct AlignmentError : Error {
  using Error::Error;
};

// Filesystem problems while reading or writing data files.
struct IoError : Error {
  using Error::Error;
};

}  // namespace udep
