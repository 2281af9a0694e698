// Physical constants and unit conversions.
#pragma once

#include <cmath>

namespace vibronix::units {

/// hc in eV*nm; E[eV] = kHcEvNm / lambda[nm].
inline constexpr double kHcEvNm = 1239.8419;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kHbarEvS = 6.582119569e-16;      // eV s
inline constexpr double kHbarJS = 1.054571817e-34;       // J s
inline constexpr double kElementaryCharge = 1.602176634e-19;  // C, also J per eV
inline constexpr double kEpsilon0 = 8.8541878128e-12;    // F/m
inline constexpr double kSpeedOfLight = 299792458.0;     // m/s
inline constexpr double kAmuKg = 1.66053906660e-27;
inline constexpr double kDebyeCm = 3.33564095198e-30;    // C m

inline double nm_to_ev(double lambda_nm) { return kHcEvNm / lambda_nm; }
inline double ev_to_nm(double energy_ev) { return kHcEvNm / energy_ev; }

/// Narrow-line width conversion at a given center: dE = hc * dlambda / lambda^2.
inline double width_nm_to_mev(double width_nm, double center_nm) {
  return 1e3 * kHcEvNm * width_nm / (center_nm * center_nm);
}
inline double width_mev_to_nm(double width_mev, double center_nm) {
  return 1e-3 * width_mev * center_nm * center_nm / kHcEvNm;
}

/// hbar * sqrt(k/m) in meV for k in eV/A^2 and m in amu.
inline double spring_frequency_mev(double eigenvalue_ev_per_a2_amu) {
  const double omega = std::sqrt(eigenvalue_ev_per_a2_amu * kElementaryCharge / (1e-20 * kAmuKg));
  return 1e3 * kHbarEvS * omega;
}

}  // namespace vibronix::units
