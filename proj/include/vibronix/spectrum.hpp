// Sampled spectrum: the common currency of synthesis and fitting.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vibronix {

enum class AxisKind { Wavelength, Energy };  // nm or eV

const char* axis_kind_name(AxisKind kind);
AxisKind parse_axis_kind(const std::string& name);

struct Spectrum {
  AxisKind kind = AxisKind::Wavelength;
  std::vector<double> axis;
  std::vector<double> intensity;  // counts per sample
  std::optional<double> temperature_k;
  std::map<std::string, std::string> metadata;

  std::size_t size() const { return axis.size(); }

  /// Throws DomainError unless the axis is strictly monotone, lengths match,
  /// intensities are finite and non-negative and the axis values are positive.
  void validate() const;
};

/// Uniform grid from `first` to `last` inclusive with the given step.
std::vector<double> uniform_grid(double first, double last, double step);

}  // namespace vibronix
