#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace demoscore {

// Precondition or shape violation in a library call.
struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid configuration (bad field value, violated config invariant).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed serialized input. line is 1-based, 0 when not line oriented.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, std::size_t line_no)
      : std::runtime_error(line_no ? "line " + std::to_string(line_no) + ": " + what : what),
        line(line_no) {}
  std::size_t line;
};

// Loaded data violates a dataset invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss.
struct DivergenceError : std::runtime_error {
  DivergenceError(const std::string& what, long at_step)
      : std::runtime_error(what + " at step " + std::to_string(at_step)), step(at_step) {}
  long step;
};

// Environment or demonstrator cannot deliver what the config promises.
struct CalibrationError : std::runtime_error {
  explicit CalibrationError(const std::string& what) : std::runtime_error(what) {}
};

// Filtering kept almost nothing; carries a 10-bin histogram of episode scores.
struct DegenerateFilterError : std::runtime_error {
  DegenerateFilterError(const std::string& what, std::vector<int> score_histogram)
      : std::runtime_error(what), histogram(std::move(score_histogram)) {}
  std::vector<int> histogram;
};

}  // namespace demoscore
