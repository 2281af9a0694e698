// Exception types shared by all vibronix modules.
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace vibronix {

/// Argument outside the domain of an operation (negative S, n out of range, ...).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Structured input-file error carrying the 1-based line it was found on.
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Iterative fit stopped without meeting its tolerances.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double residual_norm, int iterations)
      : std::runtime_error(what + " (residual norm " + std::to_string(residual_norm) + " after " +
                           std::to_string(iterations) + " iterations)"),
        residual_norm_(residual_norm), iterations_(iterations) {}
  double residual_norm() const noexcept { return residual_norm_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_norm_;
  int iterations_;
};

/// Model parameters are not separately identifiable from the data.
class DegeneracyError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Design matrix too poorly conditioned for a meaningful fit.
class IllConditionedError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Detected peaks do not form a vibronic ladder.
class NotALadderError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Spectral grid misses one or more requested peaks.
class GridCoverageError : public std::runtime_error {
public:
  GridCoverageError(const std::string& what, std::vector<int> missing)
      : std::runtime_error(what), missing_(std::move(missing)) {}
  const std::vector<int>& missing_peaks() const noexcept { return missing_; }

private:
  std::vector<int> missing_;
};

}  // namespace vibronix
