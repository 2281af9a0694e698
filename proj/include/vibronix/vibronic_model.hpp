// Forward model of a narrowband emitter coupled to one localized vibrational
// mode: vibronic ladder, Franck-Condon weights, temperature-dependent widths,
// Huang-Rhys bookkeeping and radiative-rate estimates.
#pragma once

#include "vibronix/spectrum.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace vibronix::vibronic {

struct VibronicParams {
  double e_zpl_ev = 2.27;
  double lvm_quantum_mev = 187.0;
  double anharmonicity_mev = 1.2;  // per-level shrinkage of the spacing
  double s_total = 0.9676;
  double gamma_zpl_mev = 1.28;     // ZPL FWHM at the reference temperature
  double gamma_vib_mev = 0.26;     // LVM decay rate, adds to each successive peak width
  int n_peaks = 4;

  /// Throws DomainError on any violated invariant.
  void validate() const;
};

/// FWHM(T, n) = alpha*T^3 + n*gamma_vib + resolution; ZPL shift a*T^4 + b*T^2.
struct TemperatureModel {
  double alpha_mev_per_k3 = 0.0;
  double a_nm_per_k4 = 0.0;
  double b_nm_per_k2 = 0.0;
  double lambda0_nm = 0.0;
  double resolution_mev = 0.0;  // optional instrument floor, zero by default

  void validate() const;

  /// alpha such that alpha*T^3 equals `fwhm_mev` at temperature `t_k`.
  static double alpha_for(double fwhm_mev, double t_k);
};

struct ModeDisplacement {
  double mode_energy_mev = 0.0;
  double mass_weighted_displacement = 0.0;  // amu^1/2 * Angstrom
};

/// Poisson Franck-Condon weight e^-S S^n / n!.
double fc_weight(double s_total, int n);

/// E_n = E_zpl - n*hw + chi*n(n-1)/2 in eV.
double peak_energy(const VibronicParams& params, int n);

/// alpha*T^3 + n*gamma_vib (+ resolution) in meV.
double peak_fwhm(const VibronicParams& params, const TemperatureModel& temp, double t_k, int n);

double debye_waller(double s_total);
double huang_rhys_from_dw(double dw);

struct SynthesisOptions {
  double photon_budget = 1e6;
  std::optional<std::uint64_t> noise_seed;  // Poisson noise per sample when set
  double truncation_fwhm = 200.0;           // Lorentzians cut at +/- this many FWHM
};

/// Sum of area-weighted Lorentzians on `grid` (wavelength or energy axis).
/// Peak n has area photon_budget * fc_weight(S, n) counts; each truncated
/// Lorentzian is renormalized to unit area, so with noise off the sample sum
/// equals photon_budget * sum_n fc_weight(S, n) whenever the grid spans the
/// truncation window. Orders n >= n_peaks are not synthesized.
/// On a wavelength grid centers are hc/E_n and widths use the narrow-line
/// conversion dlambda = lambda^2 dE / hc, so each line is an exact Lorentzian
/// in the grid's own coordinate.
Spectrum synthesize_spectrum(const VibronicParams& params, const TemperatureModel& temp, double t_k,
                             AxisKind kind, const std::vector<double>& grid,
                             const SynthesisOptions& options = {});

double zpl_shift(const TemperatureModel& temp, double t_k);
double shift_slope(const TemperatureModel& temp, double t_k);

struct HuangRhysBreakdown {
  std::vector<double> per_mode;
  double total = 0.0;
};

/// S_k = omega_k q_k^2 / (2 hbar), q in amu^1/2 A, omega from meV.
HuangRhysBreakdown partial_huang_rhys(const std::vector<ModeDisplacement>& modes);

/// Conversion factor c in S = c * E[meV] * q^2[amu A^2].
double huang_rhys_prefactor();

/// Spontaneous-emission rate medium_factor * w^3 mu^2 / (3 pi eps0 hbar c^3) in 1/ns.
double radiative_rate(double dipole_debye, double transition_ev, double medium_factor);
double radiative_lifetime(double dipole_debye, double transition_ev, double medium_factor);

/// dE = susceptibility * strain (eV).
double strain_zpl_shift(double susceptibility_ev, double strain);

}  // namespace vibronix::vibronic
