// Kinetic Monte Carlo of a two/three-level emitter and the estimators used to
// characterize it: g2(tau), saturation, lifetime with IRF, polarization,
// blinking and quantum yield.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vibronix::photon {

struct Shelving {
  double k_isc_per_ns = 0.0;    // excited -> dark
  double k_reset_per_ns = 0.0;  // dark -> ground
};

struct EmitterModel {
  double gamma_rad_per_ns = 0.0;
  double gamma_nr_per_ns = 0.0;
  std::optional<double> pump_rate_at_psat_per_ns;  // defaults to the total decay rate
  double psat_mw = 1.0;
  std::optional<Shelving> shelving;
  double detection_efficiency = 1.0;

  void validate() const;
  double gamma_total() const { return gamma_rad_per_ns + gamma_nr_per_ns; }
  double quantum_yield() const { return gamma_rad_per_ns / gamma_total(); }
  double lifetime_ns() const { return 1.0 / gamma_total(); }
  /// r(P) = r_sat * P / Psat in 1/ns.
  double pump_rate(double power_mw) const;
  /// Detected two-level steady-state rate eta * gamma_rad * r / (r + gamma) in counts/s.
  double expected_rate_cps(double power_mw) const;
};

struct PhotonStream {
  std::vector<std::int64_t> timestamps_ps;
  int channel = 0;
  double duration_s = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t size() const { return timestamps_ps.size(); }
  double rate_cps() const { return duration_s > 0.0 ? static_cast<double>(size()) / duration_s : 0.0; }
};

/// Exact stochastic (Gillespie) simulation under CW pumping. Only detected
/// radiative decays are recorded.
PhotonStream simulate_cw(const EmitterModel& model, double power_mw, double duration_s, std::uint64_t seed);

/// Homogeneous Poisson arrivals (coherent-light reference).
PhotonStream simulate_poisson(double rate_cps, double duration_s, std::uint64_t seed);

/// Two-state blinking source: Poisson arrivals whose rate switches between
/// `on_rate_cps` and `off_rate_cps` with exponential dwell times.
PhotonStream simulate_telegraph(double on_rate_cps, double off_rate_cps, double mean_dwell_s, double duration_s,
                                std::uint64_t seed);

struct G2Histogram {
  std::vector<double> tau_ns;        // bin centers
  std::vector<double> coincidences;  // raw counts
  std::vector<double> normalized;    // g2(tau)
  std::vector<double> sigma;         // 1-sigma of normalized, from counting statistics
  double binwidth_ns = 0.0;
  double normalization = 0.0;        // N1 * N2 * binwidth / duration
};

/// 50/50 beamsplitter (per-photon Bernoulli routing) followed by a
/// cross-channel start-stop-free coincidence histogram over |tau| <= window.
G2Histogram hbt_correlate(const PhotonStream& stream, std::uint64_t splitter_seed, double binwidth_ns,
                          double window_ns);

/// Build a histogram from a g2 curve, e.g. an analytic one. Counts are
/// normalized * normalization.
G2Histogram make_g2_histogram(std::vector<double> tau_ns, std::vector<double> g2, double normalization);

/// g2(tau) = 1 - (1 + a) exp(-|tau|/tau1) + a exp(-|tau|/tau2).
double g2_model(double tau_ns, double a, double tau1_ns, double tau2_ns);

struct G2Fit {
  double g2_0 = 0.0;
  double antibunching_time_ns = 0.0;
  double bunching_amplitude = 0.0;
  double bunching_time_ns = 0.0;
  double antibunching_time_err = 0.0;
  double bunching_amplitude_err = 0.0;
  bool two_level = true;  // bunching amplitude below threshold (0 when the term is not retained)
  double residual_norm = 0.0;
  int iterations = 0;
};

struct G2FitOptions {
  double bunching_threshold = 0.05;
  double min_chi2_drop = 25.0;  // chi^2 improvement needed to keep the bunching term
  int max_iterations = 500;
};

G2Fit fit_g2(const G2Histogram& hist, const G2FitOptions& options = {});

struct SaturationPoint {
  double power_mw = 0.0;
  double rate_cps = 0.0;
};

enum class BackgroundModel { None, Linear };

struct SaturationFit {
  double i_inf_cps = 0.0;
  double psat_mw = 0.0;
  double bg_slope_cps_per_mw = 0.0;
  double i_inf_err = 0.0;
  double psat_err = 0.0;
  double bg_slope_err = 0.0;
  double residual_norm = 0.0;

  double rate(double power_mw) const {
    return i_inf_cps * power_mw / (psat_mw + power_mw) + bg_slope_cps_per_mw * power_mw;
  }
};

/// I(P) = I_inf P / (Psat + P) [+ bg * P].
SaturationFit fit_saturation(const std::vector<SaturationPoint>& points, BackgroundModel background);

struct DecayHistogram {
  double bin_width_ps = 0.0;
  double period_ps = 0.0;  // 0 for a non-periodic axis
  std::vector<double> counts;
  std::vector<std::string> warnings;

  double bin_center_ps(std::size_t i) const { return (static_cast<double>(i) + 0.5) * bin_width_ps; }
};

struct PulsedOptions {
  double bin_width_ps = 16.0;
  double excitation_probability = 1.0;
};

/// TCSPC under pulsed excitation: per-pulse excitation, exponential decay,
/// Gaussian timing jitter on each detection, delays folded into one period.
DecayHistogram simulate_pulsed(const EmitterModel& model, double rep_rate_mhz, double irf_sigma_ps,
                               double duration_s, std::uint64_t seed, const PulsedOptions& options = {});

struct GaussianIrf {
  double sigma_ps = 0.0;
  double t0_ps = 0.0;
};

/// Measured IRF sampled on the decay histogram's bins.
struct MeasuredIrf {
  std::vector<double> curve;
};

using Irf = std::variant<GaussianIrf, MeasuredIrf>;

struct LifetimeFit {
  int components = 1;
  double tau1_ns = 0.0;  // dominant-first ordering is NOT implied; see tau_dominant
  double tau2_ns = 0.0;
  double amplitude1 = 0.0;  // counts/bin at t = 0 of the unconvolved decay
  double amplitude2 = 0.0;
  double background = 0.0;
  double tau_dominant_ns = 0.0;
  double tau_dominant_err_ns = 0.0;
  double reduced_chi2 = 0.0;
  int iterations = 0;
};

/// Fits (single or double exponential) convolved with the IRF plus a flat
/// background; the double model is kept only if it lowers chi^2 significantly.
LifetimeFit fit_lifetime(const DecayHistogram& histogram, const Irf& irf);

/// Expected counts per bin for given components, used by the fit and tests.
std::vector<double> lifetime_model(const DecayHistogram& axis, const Irf& irf,
                                   const std::vector<std::pair<double, double>>& amp_tau_ns, double background);

struct QuantumYield {
  double value = 0.0;
  bool clamped = false;
  std::vector<std::string> warnings;
};

/// QY = (I_inf / eta) * tau_total: the saturated emission rate equals gamma_rad.
QuantumYield quantum_yield(double i_inf_detected_cps, double setup_efficiency, double total_lifetime_ns);

/// Warning text when `value` differs from a separately reported yield by more than `tolerance`.
std::optional<std::string> compare_quantum_yield(double value, double reported, double tolerance = 0.02);

struct PolarizationPoint {
  double theta_deg = 0.0;
  double intensity = 0.0;
};

struct PolarizationFit {
  double visibility = 0.0;
  double theta0_deg = 0.0;
  double i_min = 0.0;
  double i_max = 0.0;
  double i_off = 0.0;
  double amplitude = 0.0;
  double theta0_err_deg = 0.0;
  bool theta0_undetermined = false;
};

/// Linear least squares of I = I_off + A sin^2(theta - theta0).
PolarizationFit fit_polarization(const std::vector<PolarizationPoint>& points);

struct BlinkingBinStats {
  double bin_ms = 0.0;
  std::size_t n_bins = 0;
  double mean = 0.0;
  double variance = 0.0;
  double max_deviation_sigma = 0.0;
  double dip = 0.0;
  double dip_p_value = 1.0;
  bool poisson_flag = false;
  bool bimodal_flag = false;
};

struct BlinkingReport {
  bool flagged = false;
  std::vector<BlinkingBinStats> per_bin;
};

struct BlinkingOptions {
  double sigma_threshold = 5.0;
  double dip_alpha = 0.01;
  int dip_replicates = 200;
  std::uint64_t seed = 0x5eedb1;
};

BlinkingReport detect_blinking(const PhotonStream& stream, const std::vector<double>& bin_sizes_ms,
                               const BlinkingOptions& options = {});

/// Dip-type unimodality statistic of a sample (half the smallest sup-gap
/// between the ECDF and its left convex / right concave hulls over all mode
/// positions). Input need not be sorted.
double dip_statistic(std::vector<double> sample);

enum class StreamFormat { Binary, Text };

/// Binary: consecutive little-endian signed 64-bit picosecond stamps, no header.
/// Text: one decimal picosecond stamp per line, '#' comments allowed.
void write_stream(const PhotonStream& stream, const std::filesystem::path& path, StreamFormat format);
PhotonStream read_stream(const std::filesystem::path& path, StreamFormat format,
                         std::optional<double> duration_s = std::nullopt, int channel = 0);

}  // namespace vibronix::photon
