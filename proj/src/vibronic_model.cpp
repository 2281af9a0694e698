#include "vibronix/vibronic_model.hpp"

#include "vibronix/errors.hpp"
#include "vibronix/units.hpp"

#include <algorithm>
#include <cmath>
#include "vibronix/rng.hpp"
#include <sstream>

namespace vibronix::vibronic {

void VibronicParams::validate() const {
  if (!(e_zpl_ev > 0.0)) throw DomainError("e_zpl must be positive");
  if (!(lvm_quantum_mev > 0.0)) throw DomainError("lvm_quantum must be positive");
  if (!(s_total >= 0.0)) throw DomainError("Huang-Rhys factor must be non-negative");
  if (!(gamma_zpl_mev > 0.0)) throw DomainError("ZPL width must be positive");
  if (!(gamma_vib_mev >= 0.0)) throw DomainError("gamma_vib must be non-negative");
  if (n_peaks < 1) throw DomainError("n_peaks must be at least 1");
  if (!(anharmonicity_mev < lvm_quantum_mev / n_peaks)) {
    throw DomainError("anharmonicity must stay below lvm_quantum / n_peaks");
  }
  const double e_last = peak_energy(*this, n_peaks - 1);
  if (!(e_last > 0.0)) throw DomainError("lowest vibronic peak energy is not positive");
}

void TemperatureModel::validate() const {
  if (!(alpha_mev_per_k3 >= 0.0)) throw DomainError("alpha must be non-negative");
  if (!(resolution_mev >= 0.0)) throw DomainError("resolution floor must be non-negative");
}

double TemperatureModel::alpha_for(double fwhm_mev, double t_k) {
  if (!(t_k > 0.0)) throw DomainError("calibration temperature must be positive");
  return fwhm_mev / (t_k * t_k * t_k);
}

double fc_weight(double s_total, int n) {
  if (!(s_total >= 0.0) || n < 0) throw DomainError("fc_weight needs S >= 0 and n >= 0");
  if (s_total == 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(-s_total + n * std::log(s_total) - std::lgamma(n + 1.0));
}

double peak_energy(const VibronicParams& params, int n) {
  if (n < 0 || n >= params.n_peaks) {
    throw DomainError("peak index " + std::to_string(n) + " outside [0, " + std::to_string(params.n_peaks - 1) + "]");
  }
  const double shift_mev = -n * params.lvm_quantum_mev + params.anharmonicity_mev * n * (n - 1) / 2.0;
  return params.e_zpl_ev + 1e-3 * shift_mev;
}

double peak_fwhm(const VibronicParams& params, const TemperatureModel& temp, double t_k, int n) {
  if (!(t_k >= 0.0)) throw DomainError("temperature must be non-negative");
  if (n < 0) throw DomainError("peak index must be non-negative");
  return temp.alpha_mev_per_k3 * t_k * t_k * t_k + n * params.gamma_vib_mev + temp.resolution_mev;
}

double debye_waller(double s_total) {
  if (!(s_total >= 0.0)) throw DomainError("Huang-Rhys factor must be non-negative");
  return std::exp(-s_total);
}

double huang_rhys_from_dw(double dw) {
  if (!(dw > 0.0 && dw <= 1.0)) throw DomainError("Debye-Waller factor must lie in (0, 1]");
  return -std::log(dw);
}

namespace {

struct Line {
  double center;
  double fwhm;
  double area;
};

}  // namespace

Spectrum synthesize_spectrum(const VibronicParams& params, const TemperatureModel& temp, double t_k,
                             AxisKind kind, const std::vector<double>& grid, const SynthesisOptions& options) {
  params.validate();
  temp.validate();
  if (grid.size() < 2) throw DomainError("grid needs at least two samples");
  if (!(options.photon_budget >= 0.0)) throw DomainError("photon budget must be non-negative");
  if (!(options.truncation_fwhm > 0.0)) throw DomainError("truncation width must be positive");

  const bool ascending = grid[1] > grid[0];
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if ((grid[i] > grid[i - 1]) != ascending || grid[i] == grid[i - 1]) {
      throw DomainError("grid not strictly monotone");
    }
  }
  const double lo = std::min(grid.front(), grid.back());
  const double hi = std::max(grid.front(), grid.back());

  std::vector<Line> lines;
  std::vector<int> missing;
  const int n_lines = params.s_total == 0.0 ? 1 : params.n_peaks;
  for (int n = 0; n < n_lines; ++n) {
    const double e = peak_energy(params, n);
    const double w_mev = peak_fwhm(params, temp, t_k, n);
    if (!(w_mev > 0.0)) throw DomainError("peak width vanishes; use T > 0 or a resolution floor");
    Line line{};
    if (kind == AxisKind::Energy) {
      line.center = e;
      line.fwhm = 1e-3 * w_mev;
    } else {
      line.center = units::ev_to_nm(e);
      line.fwhm = units::width_mev_to_nm(w_mev, line.center);
    }
    line.area = options.photon_budget * fc_weight(params.s_total, n);
    if (line.center < lo || line.center > hi) missing.push_back(n);
    lines.push_back(line);
  }
  if (!missing.empty()) {
    std::ostringstream msg;
    msg << "grid [" << lo << ", " << hi << "] does not cover peak(s)";
    for (int n : missing) msg << ' ' << n;
    throw GridCoverageError(msg.str(), missing);
  }

  // Truncated Lorentzian keeps (2/pi) atan(2 * cut) of its area; scale back to 1.
  const double kept = 2.0 / units::kPi * std::atan(2.0 * options.truncation_fwhm);

  Spectrum s;
  s.kind = kind;
  s.axis = grid;
  s.intensity.assign(grid.size(), 0.0);
  s.temperature_k = t_k;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double left = i > 0 ? std::abs(grid[i] - grid[i - 1]) : std::abs(grid[1] - grid[0]);
    const double right = i + 1 < grid.size() ? std::abs(grid[i + 1] - grid[i]) : left;
    const double cell = 0.5 * (left + right);
    double density = 0.0;
    for (const Line& line : lines) {
      const double dx = grid[i] - line.center;
      if (std::abs(dx) > options.truncation_fwhm * line.fwhm) continue;
      const double hw = 0.5 * line.fwhm;
      density += line.area / kept * (hw / units::kPi) / (dx * dx + hw * hw);
    }
    s.intensity[i] = density * cell;
  }

  if (options.noise_seed) {
    Rng rng(*options.noise_seed);
    for (double& v : s.intensity) v = static_cast<double>(rng.poisson(v));
  }
  s.metadata["model"] = "vibronic_ladder";
  s.metadata["photon_budget"] = std::to_string(options.photon_budget);
  s.metadata["truncation_fwhm"] = std::to_string(options.truncation_fwhm);
  return s;
}

double zpl_shift(const TemperatureModel& temp, double t_k) {
  if (!(t_k >= 0.0)) throw DomainError("temperature must be non-negative");
  const double t2 = t_k * t_k;
  return temp.a_nm_per_k4 * t2 * t2 + temp.b_nm_per_k2 * t2;
}

double shift_slope(const TemperatureModel& temp, double t_k) {
  if (!(t_k >= 0.0)) throw DomainError("temperature must be non-negative");
  return 4.0 * temp.a_nm_per_k4 * t_k * t_k * t_k + 2.0 * temp.b_nm_per_k2 * t_k;
}

double huang_rhys_prefactor() {
  // S = E q^2 / (2 hbar^2) with E in J and q in kg^1/2 m.
  return 1e-3 * units::kElementaryCharge * units::kAmuKg * 1e-20 / (2.0 * units::kHbarJS * units::kHbarJS);
}

HuangRhysBreakdown partial_huang_rhys(const std::vector<ModeDisplacement>& modes) {
  HuangRhysBreakdown out;
  out.per_mode.reserve(modes.size());
  const double c = huang_rhys_prefactor();
  for (const ModeDisplacement& m : modes) {
    if (!(m.mode_energy_mev > 0.0)) throw DomainError("mode energies must be positive");
    const double s = c * m.mode_energy_mev * m.mass_weighted_displacement * m.mass_weighted_displacement;
    out.per_mode.push_back(s);
    out.total += s;
  }
  return out;
}

double radiative_rate(double dipole_debye, double transition_ev, double medium_factor) {
  if (!(transition_ev > 0.0) || !(medium_factor > 0.0)) {
    throw DomainError("transition energy and medium factor must be positive");
  }
  if (!(dipole_debye > 0.0)) throw DomainError("dipole moment must be positive (zero gives no emission)");
  const double omega = transition_ev / units::kHbarEvS;
  const double mu = dipole_debye * units::kDebyeCm;
  const double c = units::kSpeedOfLight;
  const double gamma = medium_factor * omega * omega * omega * mu * mu /
                       (3.0 * units::kPi * units::kEpsilon0 * units::kHbarJS * c * c * c);
  return gamma * 1e-9;
}

double radiative_lifetime(double dipole_debye, double transition_ev, double medium_factor) {
  return 1.0 / radiative_rate(dipole_debye, transition_ev, medium_factor);
}

double strain_zpl_shift(double susceptibility_ev, double strain) { return susceptibility_ev * strain; }

}  // namespace vibronix::vibronic
