#pragma once

#include "params.hpp"
#include "vibronix/cli.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vibronix::cli {

struct SynthOptions {
  std::string preset;
  double e_zpl_ev = 2.27;
  double lvm_quantum_mev = 187.0;
  double anharmonicity_mev = 1.2;
  std::optional<double> s_factor;
  double debye_waller = 0.38;  // used when s_factor is unset
  double zpl_fwhm_mev = 1.28;  // at 300 K, sets the T^3 coefficient
  double gamma_vib_mev = 0.26;
  int n_peaks = 4;
  double temperature = 300.0;
  double resolution_mev = 0.0;
  double photon_budget = 1e6;
  std::string axis = "wavelength_nm";
  std::optional<double> grid_min;
  std::optional<double> grid_max;
  std::optional<double> grid_step;
  bool noise = true;  // Poisson noise when a seed is available
};

struct FitOptions {
  std::vector<std::string> input;
  std::string axis = "wavelength_nm";
  std::string background = "none";
  int background_window = 50;
  double min_prominence = 0.02;  // fraction of the spectrum maximum
  double min_separation = 5.0;   // axis units
  int smoothing = 5;
  double spacing_tolerance = 0.15;
  std::optional<double> g2_0;
  std::optional<double> raman_shift_cm;
};

struct McOptions {
  std::string preset;
  double lifetime_ns = 2.4;
  double internal_quantum_yield = 1.0;
  double psat_mw = 3.6;
  double i_inf_cps = 12.5e6;
  double setup_efficiency = 0.038;
  std::optional<double> reported_qy;
  double visibility = 0.67;
  double polarization_theta0_deg = 30.0;
  double polarization_counts = 1e5;
  double shelving_k_isc = 0.0;
  double shelving_k_reset = 0.0;
  std::optional<double> power_mw;
  double duration_s = 0.2;
  double g2_binwidth_ns = 0.25;
  double g2_window_ns = 30.0;
  double g2_precision = 0.05;
  std::vector<double> saturation_factors = {0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
  double saturation_duration_s = 0.05;
  double background_cps_per_mw = 0.0;
  double rep_rate_mhz = 80.0;
  double irf_sigma_ps = 30.0;
  double lifetime_duration_s = 0.05;
  std::vector<double> blinking_bins_ms = {1.0};
};

struct PhononOptions {
  std::string lattice = "chain";
  int size = 100;
  std::string defect = "none";
  double defect_stiffness_scale = 1.0;
  bool periodic = false;
  double mass_amu = 12.011;
  double stiffness = 1.0;
  double impurity_mass_ratio = 0.5;
  bool calibrate_band = false;
  double band_target_mev = 165.0;
  std::optional<double> target_lvm_mev;
  std::optional<double> band_max_mev;
  double ipr_threshold = 0.1;
  std::string lattice_file;
};

struct StatsOptions {
  std::vector<std::string> input;
  int synthetic = 0;
  std::uint64_t synthetic_seed = 2024;
  double synthetic_mean_ev = 2.25;
  double synthetic_sd_ev = 0.016;
};

void register_synth(ParamSet& p, SynthOptions& o);
void register_fit(ParamSet& p, FitOptions& o);
void register_mc(ParamSet& p, McOptions& o);
void register_phonon(ParamSet& p, PhononOptions& o);
void register_stats(ParamSet& p, StatsOptions& o);

void apply_preset(const std::string& name, SynthOptions& o);
void apply_preset(const std::string& name, McOptions& o);

int run_synth(const Context& ctx, const SynthOptions& o);
int run_fit(const Context& ctx, const FitOptions& o);
int run_mc(const Context& ctx, const McOptions& o);
int run_phonon(const Context& ctx, const PhononOptions& o);
int run_stats(const Context& ctx, const StatsOptions& o);

}  // namespace vibronix::cli
