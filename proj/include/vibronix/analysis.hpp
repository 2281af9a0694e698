// Inverse pipeline: spectra in, emitter parameters and ensemble statistics out.
#pragma once

#include "vibronix/spectrum.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace vibronix::analysis {

// ------------------------------------------------------------------ spectra

/// Two-column CSV (axis, counts); '#' comments and one optional header row.
/// Rows are sorted ascending by axis. Throws ParseError with line numbers.
Spectrum parse_spectrum_csv(std::istream& in, AxisKind kind);
Spectrum load_spectrum(const std::filesystem::path& path, AxisKind kind);
void write_spectrum_csv(const Spectrum& spectrum, std::ostream& out);

/// Maps the axis through E = hc / lambda and re-sorts ascending. With
/// `jacobian` set, intensities are multiplied by lambda^2 (to energy) or
/// E^2 (to wavelength) and rescaled to preserve the total; off by default.
Spectrum convert_axis(const Spectrum& spectrum, AxisKind target, bool jacobian = false);

enum class BackgroundMethod { LinearBaseline, RollingMedian };

struct BackgroundResult {
  Spectrum spectrum;
  std::size_t clamped = 0;  // samples raised to zero after subtraction
};

/// LinearBaseline: straight line through the medians of the first and last
/// `window` samples. RollingMedian: running median over `window` samples.
BackgroundResult subtract_background(const Spectrum& spectrum, BackgroundMethod method, std::size_t window);

struct PeakCandidate {
  std::size_t index = 0;
  double position = 0.0;
  double height = 0.0;
  double prominence = 0.0;
};

/// Local maxima of the spectrum after a centred moving average of
/// `smoothing` samples, kept when their topographic prominence reaches
/// `min_prominence` and greedily thinned (most prominent first) to
/// `min_separation` axis units. Returned in ascending axis order.
std::vector<PeakCandidate> detect_peaks(const Spectrum& spectrum, double min_prominence, double min_separation,
                                        std::size_t smoothing = 5);

struct PeakGuess {
  double center = 0.0;
  double fwhm = 0.0;
  double area = 0.0;
};

/// Half-maximum width and area estimates around each candidate.
std::vector<PeakGuess> guesses_from_candidates(const Spectrum& spectrum, const std::vector<PeakCandidate>& candidates);

struct PeakFit {
  double center_nm = 0.0;
  double center_ev = 0.0;
  double fwhm_nm = 0.0;
  double fwhm_mev = 0.0;
  double area = 0.0;       // intensity x axis unit
  double amplitude = 0.0;  // peak height above offset, counts
  double center_err = 0.0; // in the fit axis unit
  double fwhm_err = 0.0;
  double area_err = 0.0;
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (center, fwhm, area) in fit-axis units
  AxisKind fit_axis = AxisKind::Wavelength;
  double residual_norm = 0.0;
};

struct MultiLorentzianFit {
  std::vector<PeakFit> peaks;  // in the order of the guesses
  double offset = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  std::vector<double> accepted_costs;
};

/// Levenberg-Marquardt fit of sum_k area_k L(x; center_k, fwhm_k) + offset.
MultiLorentzianFit fit_multilorentzian(const Spectrum& spectrum, const std::vector<PeakGuess>& guesses);

/// Area-normalized Lorentzian.
double lorentzian(double x, double center, double fwhm, double area);

// ------------------------------------------------------------------ emitters

struct EmitterRecord {
  std::string source_id;
  int n_peaks = 0;
  double zpl_energy_ev = 0.0;
  double zpl_wavelength_nm = 0.0;
  double zpl_fwhm_mev = 0.0;
  double zpl_fwhm_nm = 0.0;
  double lvm_quantum_mev = 0.0;   // E_0 - E_1 of the fitted ladder
  double mean_spacing_mev = 0.0;
  double anharmonicity_mev = 0.0;
  double debye_waller = 0.0;      // area_0 / sum of observed areas
  double huang_rhys = 0.0;        // Poisson S consistent with the observed area split
  double debye_waller_poisson = 0.0;  // exp(-huang_rhys), corrects for unobserved orders
  double gamma_vib_mev = 0.0;
  std::optional<double> g2_0;
  std::optional<double> raman_shift_cm;

  double zpl_energy_err = 0.0;
  double lvm_quantum_err = 0.0;
  double anharmonicity_err = 0.0;
  double debye_waller_err = 0.0;
  double gamma_vib_err = 0.0;
};

/// Ladder parameters from >= 3 fitted peaks. Throws NotALadderError when the
/// spacings deviate from their mean by more than `spacing_tolerance`.
EmitterRecord extract_ladder(std::vector<PeakFit> peaks, double spacing_tolerance = 0.15);

struct FingerprintVerdict {
  bool is_il1 = false;
  std::vector<std::string> reasons;  // one entry per failed criterion
};

FingerprintVerdict classify_fingerprint(const EmitterRecord& record);

// ------------------------------------------------------------------ temperature laws

struct WidthPoint {
  double t_k = 0.0;
  double fwhm_mev = 0.0;
  int peak_index = 0;
};

struct TemperatureFitOptions {
  double t_min = 0.0;
  double t_max = 1e9;
  bool shared_alpha = true;  // false: separate alpha per peak index
};

struct TemperatureFit {
  double alpha = 0.0;  // meV / K^3
  double gamma_vib_mev = 0.0;
  double alpha_err = 0.0;
  double gamma_vib_err = 0.0;
  std::map<int, double> alpha_per_peak;  // filled when shared_alpha is false
  int points_used = 0;
};

/// FWHM_n(T) = alpha T^3 + n gamma_vib by linear least squares.
TemperatureFit fit_temperature_series(const std::vector<WidthPoint>& points, const TemperatureFitOptions& options = {});

struct ShiftPoint {
  double t_k = 0.0;
  double lambda_nm = 0.0;
};

struct LineshiftFit {
  double lambda0_nm = 0.0;
  double a = 0.0;  // nm / K^4
  double b = 0.0;  // nm / K^2
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();  // (lambda0, a, b)

  double slope_at(double t_k) const { return 4.0 * a * t_k * t_k * t_k + 2.0 * b * t_k; }
  double slope_err(double t_k) const;
};

/// lambda(T) = lambda0 + a T^4 + b T^2. Throws IllConditionedError when the
/// temperatures span less than 50 K.
LineshiftFit fit_lineshift_series(const std::vector<ShiftPoint>& points);

// ------------------------------------------------------------------ strain

inline constexpr double kRamanUnstrainedCm = 1332.5;
inline constexpr double kStressPerShiftGpa = 0.34;
inline constexpr double kDiamondYoungGpa = 1100.0;

struct RamanStrain {
  double stress_gpa = 0.0;  // negative: tensile
  double strain = 0.0;      // |stress| / E
  bool tensile = false;
  std::optional<std::string> warning;
};

RamanStrain raman_strain(double raman_shift_cm);

struct StrainRange {
  double lower = 0.0;  // from the mean line shift
  double upper = 0.0;  // from the largest linewidth treated as a shift excursion
  std::string note;
};

StrainRange strain_range(double mean_raman_shift_cm, double max_raman_fwhm_cm);

// ------------------------------------------------------------------ statistics

struct RegressionResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_err = 0.0;
  double intercept_err = 0.0;
  double covariance = 0.0;  // cov(slope, intercept)
  double r2 = 0.0;
  double t_quantile = 0.0;  // two-sided 95 %
  double wh_factor = 0.0;   // Working-Hotelling sqrt(2 F(0.95; 2, n-2))
  double residual_sd = 0.0;
  std::size_t n = 0;
  double x_mean = 0.0;
  double sxx = 0.0;
  std::vector<double> grid;
  std::vector<double> band_lo;
  std::vector<double> band_hi;

  double predict(double x) const { return intercept + slope * x; }
  /// Half-width of the 95 % confidence band for the mean response at x.
  double band_half_width(double x) const;
  /// Half-width of the simultaneous 95 % band (holds for every x at once).
  double simultaneous_half_width(double x) const;
  double slope_ci_lo() const { return slope - t_quantile * slope_err; }
  double slope_ci_hi() const { return slope + t_quantile * slope_err; }
};

/// OLS with a pointwise 95 % confidence band (Student t, n-2 dof) on a grid
/// spanning the data. The simultaneous band is available on request.
RegressionResult regress_with_ci(const std::vector<double>& x, const std::vector<double>& y,
                                 std::size_t grid_points = 50);

/// Two-sided Student t quantile.
double student_t_quantile(double probability, double dof);

struct FieldStats {
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1)
  double min = 0.0;
  double max = 0.0;
};

struct EnsembleSummary {
  std::size_t count = 0;
  std::map<std::string, FieldStats> fields;
  bool zpl_in_range = true;  // every ZPL wavelength inside [544, 560] nm
  std::vector<std::string> out_of_range;
};

EnsembleSummary ensemble_stats(const std::vector<EmitterRecord>& records);

/// Deterministic synthetic population: ZPL energies with sample mean and
/// standard deviation exactly `mean_ev` and `sd_ev`, all within 544-560 nm,
/// ZPL widths below 0.6 nm shrinking with energy, LVM quantum and
/// anharmonicity growing with energy.
std::vector<EmitterRecord> synthetic_ensemble(std::size_t count = 40, std::uint64_t seed = 2024,
                                              double mean_ev = 2.25, double sd_ev = 0.016);

/// Shot-noise-limited centroid thermometry: fwhm / (dlambda/dT sqrt(rate)), K / sqrt(Hz).
double thermometry_sensitivity(double zpl_fwhm_nm, double dlambda_dt_nm_per_k, double photon_rate_cps);

// ------------------------------------------------------------------ JSON

inline constexpr const char* kSchema = "vibronix/1";

nlohmann::json to_json(const EmitterRecord& record);
/// Missing numeric fields load as NaN; zpl_energy_ev is required.
EmitterRecord record_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PeakFit& peak);
nlohmann::json to_json(const EnsembleSummary& summary);
nlohmann::json to_json(const RegressionResult& regression);

}  // namespace vibronix::analysis
