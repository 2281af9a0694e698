#include "vibronix/analysis.hpp"
#include "vibronix/errors.hpp"
#include "vibronix/least_squares.hpp"
#include "vibronix/units.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace vibronix::analysis {

namespace {

// Energy (meV) of a fitted peak and its 1-sigma error.
std::pair<double, double> energy_mev(const PeakFit& p) {
  const double e = 1e3 * p.center_ev;
  double err = p.center_err;
  if (p.fit_axis == AxisKind::Wavelength) {
    err = 1e3 * units::kHcEvNm * p.center_err / (p.center_nm * p.center_nm);
  } else {
    err *= 1e3;
  }
  return {e, err};
}

double fwhm_err_mev(const PeakFit& p) {
  if (p.fit_axis == AxisKind::Wavelength) return units::width_nm_to_mev(p.fwhm_err, p.center_nm);
  return 1e3 * p.fwhm_err;
}

// S such that exp(-S) / (exp(-S) sum_{n<N} S^n/n!) = dw, i.e. the Poisson
// factor whose first N orders split their area the way the fit did.
double huang_rhys_truncated(double dw, int orders) {
  if (!(dw > 0.0) || dw >= 1.0) return dw >= 1.0 ? 0.0 : std::numeric_limits<double>::infinity();
  const auto partial = [orders](double s) {
    double term = 1.0, sum = 1.0;
    for (int n = 1; n < orders; ++n) {
      term *= s / n;
      sum += term;
    }
    return sum;
  };
  double lo = 0.0, hi = 1.0;
  while (partial(hi) < 1.0 / dw && hi < 1e3) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (partial(mid) < 1.0 / dw ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

EmitterRecord extract_ladder(std::vector<PeakFit> peaks, double spacing_tolerance) {
  if (peaks.size() < 3) throw NotALadderError("a ladder needs at least 3 peaks, found " + std::to_string(peaks.size()));
  std::sort(peaks.begin(), peaks.end(), [](const PeakFit& a, const PeakFit& b) { return a.center_ev > b.center_ev; });
  const std::size_t n = peaks.size();
  const std::size_t k = n - 1;  // spacings

  std::vector<double> e(n), e_err(n);
  for (std::size_t i = 0; i < n; ++i) std::tie(e[i], e_err[i]) = energy_mev(peaks[i]);

  std::vector<double> spacing(k);
  double mean = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    spacing[i] = e[i] - e[i + 1];
    mean += spacing[i] / static_cast<double>(k);
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (!(spacing[i] > 0.0) || std::abs(spacing[i] - mean) > spacing_tolerance * mean) {
      std::ostringstream msg;
      msg << "spacing " << i << " is " << spacing[i] << " meV against a mean of " << mean << " meV";
      throw NotALadderError(msg.str());
    }
  }

  // spacing_i = quantum - chi * i; both are linear maps of the energies.
  const double i_mean = 0.5 * static_cast<double>(k - 1);
  double sii = 0.0;
  for (std::size_t i = 0; i < k; ++i) sii += (i - i_mean) * (i - i_mean);
  Eigen::MatrixXd map(2, static_cast<Eigen::Index>(n));  // rows: quantum, chi
  map.setZero();
  for (std::size_t i = 0; i < k; ++i) {
    const double w_slope = sii > 0.0 ? (i - i_mean) / sii : 0.0;
    const double w_icpt = 1.0 / static_cast<double>(k) - i_mean * w_slope;
    // spacing_i = e_i - e_{i+1}
    map(0, static_cast<Eigen::Index>(i)) += w_icpt;
    map(0, static_cast<Eigen::Index>(i + 1)) -= w_icpt;
    map(1, static_cast<Eigen::Index>(i)) -= w_slope;
    map(1, static_cast<Eigen::Index>(i + 1)) += w_slope;
  }
  Eigen::VectorXd ev(static_cast<Eigen::Index>(n)), var(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    ev(static_cast<Eigen::Index>(i)) = e[i];
    var(static_cast<Eigen::Index>(i)) = e_err[i] * e_err[i];
  }
  const Eigen::Vector2d qc = map * ev;
  const Eigen::Matrix2d qc_cov = map * var.asDiagonal() * map.transpose();

  EmitterRecord rec;
  rec.n_peaks = static_cast<int>(n);
  rec.zpl_energy_ev = peaks[0].center_ev;
  rec.zpl_wavelength_nm = peaks[0].center_nm;
  rec.zpl_fwhm_mev = peaks[0].fwhm_mev;
  rec.zpl_fwhm_nm = peaks[0].fwhm_nm;
  rec.zpl_energy_err = 1e-3 * e_err[0];
  rec.mean_spacing_mev = mean;
  rec.lvm_quantum_mev = qc(0);
  rec.anharmonicity_mev = k > 1 ? qc(1) : 0.0;
  rec.lvm_quantum_err = std::sqrt(std::max(0.0, qc_cov(0, 0)));
  rec.anharmonicity_err = k > 1 ? std::sqrt(std::max(0.0, qc_cov(1, 1))) : 0.0;

  double total = 0.0;
  for (const auto& p : peaks) total += p.area;
  rec.debye_waller = peaks[0].area / total;
  double dw_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = i == 0 ? (total - peaks[0].area) / (total * total) : -peaks[0].area / (total * total);
    dw_var += d * d * peaks[i].area_err * peaks[i].area_err;
  }
  rec.debye_waller_err = std::sqrt(dw_var);
  rec.huang_rhys = huang_rhys_truncated(rec.debye_waller, static_cast<int>(n));
  rec.debye_waller_poisson = std::exp(-rec.huang_rhys);

  const double n_mean = 0.5 * static_cast<double>(n - 1);
  double snn = 0.0, slope = 0.0, slope_var = 0.0;
  for (std::size_t i = 0; i < n; ++i) snn += (i - n_mean) * (i - n_mean);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = (i - n_mean) / snn;
    slope += c * peaks[i].fwhm_mev;
    const double err = fwhm_err_mev(peaks[i]);
    slope_var += c * c * err * err;
  }
  rec.gamma_vib_mev = slope;
  rec.gamma_vib_err = std::sqrt(slope_var);
  return rec;
}

FingerprintVerdict classify_fingerprint(const EmitterRecord& record) {
  FingerprintVerdict v;
  std::ostringstream msg;
  if (record.n_peaks != 4) {
    v.reasons.push_back("peak count: " + std::to_string(record.n_peaks) + " lines, expected 4");
  }
  if (!(record.lvm_quantum_mev >= 165.0 && record.lvm_quantum_mev <= 210.0)) {
    msg << "lvm: quantum " << record.lvm_quantum_mev << " meV outside [165, 210] meV";
    v.reasons.push_back(msg.str());
    msg.str("");
  }
  if (!(record.zpl_wavelength_nm >= 544.0 && record.zpl_wavelength_nm <= 560.0)) {
    msg << "wavelength: ZPL at " << record.zpl_wavelength_nm << " nm outside [544, 560] nm";
    v.reasons.push_back(msg.str());
    msg.str("");
  }
  if (!(record.zpl_fwhm_nm <= 0.6)) {
    msg << "linewidth: ZPL FWHM " << record.zpl_fwhm_nm << " nm above 0.6 nm";
    v.reasons.push_back(msg.str());
    msg.str("");
  }
  if (record.g2_0 && !(*record.g2_0 < 0.5)) {
    msg << "antibunching: g2(0) = " << *record.g2_0 << " not below 0.5";
    v.reasons.push_back(msg.str());
  }
  v.is_il1 = v.reasons.empty();
  return v;
}

TemperatureFit fit_temperature_series(const std::vector<WidthPoint>& points, const TemperatureFitOptions& options) {
  std::vector<WidthPoint> used;
  std::set<double> temps;
  std::set<int> indices;
  for (const auto& p : points) {
    if (p.t_k < options.t_min || p.t_k > options.t_max) continue;
    if (p.t_k < 0.0 || p.peak_index < 0) throw DomainError("temperature and peak index must be non-negative");
    used.push_back(p);
    temps.insert(p.t_k);
    indices.insert(p.peak_index);
  }
  if (temps.size() < 3) throw DomainError("temperature fit needs at least 3 temperatures in range");
  if (indices.size() < 2) {
    throw DegeneracyError("gamma_vib is unidentifiable from a single peak index");
  }
  const std::vector<int> idx(indices.begin(), indices.end());
  const std::size_t n_alpha = options.shared_alpha ? 1 : idx.size();
  const auto cols = static_cast<Eigen::Index>(n_alpha + 1);
  if (used.size() <= n_alpha + 1) throw DomainError("fewer points than free parameters");

  Eigen::MatrixXd design = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(used.size()), cols);
  Eigen::VectorXd y(static_cast<Eigen::Index>(used.size()));
  for (std::size_t r = 0; r < used.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const double t3 = used[r].t_k * used[r].t_k * used[r].t_k;
    std::size_t col = 0;
    if (!options.shared_alpha) {
      col = static_cast<std::size_t>(std::find(idx.begin(), idx.end(), used[r].peak_index) - idx.begin());
    }
    design(row, static_cast<Eigen::Index>(col)) = t3;
    design(row, cols - 1) = used[r].peak_index;
    y(row) = used[r].fwhm_mev;
  }
  const LinearFit lf = linear_least_squares(design, y);
  TemperatureFit fit;
  fit.points_used = static_cast<int>(used.size());
  fit.gamma_vib_mev = lf.beta(cols - 1);
  fit.gamma_vib_err = std::sqrt(std::max(0.0, lf.covariance(cols - 1, cols - 1)));
  fit.alpha = lf.beta(0);
  fit.alpha_err = std::sqrt(std::max(0.0, lf.covariance(0, 0)));
  if (!options.shared_alpha) {
    for (std::size_t i = 0; i < idx.size(); ++i) fit.alpha_per_peak[idx[i]] = lf.beta(static_cast<Eigen::Index>(i));
  }
  return fit;
}

double LineshiftFit::slope_err(double t_k) const {
  const Eigen::Vector3d g(0.0, 4.0 * t_k * t_k * t_k, 2.0 * t_k);
  return std::sqrt(std::max(0.0, g.dot(covariance * g)));
}

LineshiftFit fit_lineshift_series(const std::vector<ShiftPoint>& points) {
  std::set<double> temps;
  for (const auto& p : points) temps.insert(p.t_k);
  if (temps.size() < 4) throw DomainError("line-shift fit needs at least 4 temperatures");
  if (*temps.rbegin() - *temps.begin() < 50.0) {
    throw IllConditionedError("temperature span below 50 K cannot separate the T^2 and T^4 terms");
  }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(points.size()), 3);
  Eigen::VectorXd y(static_cast<Eigen::Index>(points.size()));
  for (std::size_t r = 0; r < points.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    const double t2 = points[r].t_k * points[r].t_k;
    design(row, 0) = 1.0;
    design(row, 1) = t2 * t2;
    design(row, 2) = t2;
    y(row) = points[r].lambda_nm;
  }
  const LinearFit lf = linear_least_squares(design, y);
  LineshiftFit fit;
  fit.lambda0_nm = lf.beta(0);
  fit.a = lf.beta(1);
  fit.b = lf.beta(2);
  fit.covariance = lf.covariance;
  return fit;
}

RamanStrain raman_strain(double raman_shift_cm) {
  RamanStrain r;
  r.stress_gpa = kStressPerShiftGpa * (raman_shift_cm - kRamanUnstrainedCm);
  r.strain = std::abs(r.stress_gpa) / kDiamondYoungGpa;
  r.tensile = r.stress_gpa < 0.0;
  if (raman_shift_cm < 1300.0 || raman_shift_cm > 1360.0) {
    r.warning = "Raman shift " + std::to_string(raman_shift_cm) + " cm-1 outside the [1300, 1360] cm-1 window";
  }
  return r;
}

StrainRange strain_range(double mean_raman_shift_cm, double max_raman_fwhm_cm) {
  if (!(max_raman_fwhm_cm >= 0.0)) throw DomainError("Raman linewidth must be non-negative");
  StrainRange s;
  s.lower = raman_strain(mean_raman_shift_cm).strain;
  s.upper = kStressPerShiftGpa * max_raman_fwhm_cm / kDiamondYoungGpa;
  s.note = "upper bound treats the largest Raman FWHM as a shift excursion (interpretation)";
  return s;
}

}  // namespace vibronix::analysis
