#include "vibronix/spectrum.hpp"

#include "vibronix/errors.hpp"

#include <cmath>

namespace vibronix {

const char* axis_kind_name(AxisKind kind) {
  return kind == AxisKind::Wavelength ? "wavelength_nm" : "energy_ev";
}

AxisKind parse_axis_kind(const std::string& name) {
  if (name == "wavelength" || name == "wavelength_nm" || name == "nm") return AxisKind::Wavelength;
  if (name == "energy" || name == "energy_ev" || name == "ev") return AxisKind::Energy;
  throw DomainError("unknown axis kind '" + name + "'");
}

void Spectrum::validate() const {
  if (axis.size() != intensity.size()) throw DomainError("axis and intensity lengths differ");
  if (axis.size() < 2) throw DomainError("spectrum needs at least two samples");
  const bool ascending = axis[1] > axis[0];
  for (std::size_t i = 0; i < axis.size(); ++i) {
    if (!std::isfinite(axis[i]) || axis[i] <= 0.0) throw DomainError("axis values must be positive");
    if (!std::isfinite(intensity[i]) || intensity[i] < 0.0) {
      throw DomainError("intensity must be finite and non-negative at sample " + std::to_string(i));
    }
    if (i > 0 && ((axis[i] > axis[i - 1]) != ascending || axis[i] == axis[i - 1])) {
      throw DomainError("axis not strictly monotone at sample " + std::to_string(i));
    }
  }
}

std::vector<double> uniform_grid(double first, double last, double step) {
  if (!(step > 0.0) || !(last > first)) throw DomainError("uniform_grid needs first < last and step > 0");
  const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9)) + 1;
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = first + step * static_cast<double>(i);
  return g;
}

}  // namespace vibronix
