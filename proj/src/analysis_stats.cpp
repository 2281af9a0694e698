#include "vibronix/analysis.hpp"
#include "vibronix/errors.hpp"
#include "vibronix/rng.hpp"
#include "vibronix/units.hpp"

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace vibronix::analysis {

double student_t_quantile(double probability, double dof) {
  if (!(probability > 0.0 && probability < 1.0) || !(dof > 0.0)) throw DomainError("invalid t quantile request");
  const boost::math::students_t dist(dof);
  return boost::math::quantile(dist, 1.0 - 0.5 * (1.0 - probability));
}

double RegressionResult::band_half_width(double x) const {
  const double d = x - x_mean;
  return t_quantile * residual_sd * std::sqrt(1.0 / static_cast<double>(n) + d * d / sxx);
}

double RegressionResult::simultaneous_half_width(double x) const {
  const double d = x - x_mean;
  return wh_factor * residual_sd * std::sqrt(1.0 / static_cast<double>(n) + d * d / sxx);
}

RegressionResult regress_with_ci(const std::vector<double>& x, const std::vector<double>& y, std::size_t grid_points) {
  if (x.size() != y.size()) throw DomainError("x and y differ in length");
  if (x.size() < 3) throw DomainError("regression needs at least 3 points");
  if (grid_points < 2) throw DomainError("regression grid needs at least 2 points");
  RegressionResult r;
  r.n = x.size();
  const double nd = static_cast<double>(r.n);
  r.x_mean = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    r.sxx += (x[i] - r.x_mean) * (x[i] - r.x_mean);
    sxy += (x[i] - r.x_mean) * (y[i] - y_mean);
    syy += (y[i] - y_mean) * (y[i] - y_mean);
  }
  const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
  if (!(r.sxx > 0.0) || *xmax - *xmin <= 1e-12 * std::max(std::abs(*xmax), 1.0)) {
    throw DegeneracyError("regression x values are all equal");
  }
  r.slope = sxy / r.sxx;
  r.intercept = y_mean - r.slope * r.x_mean;
  double rss = 0.0;
  for (std::size_t i = 0; i < r.n; ++i) {
    const double e = y[i] - r.predict(x[i]);
    rss += e * e;
  }
  const double dof = nd - 2.0;
  r.residual_sd = std::sqrt(rss / dof);
  r.r2 = syy > 0.0 ? 1.0 - rss / syy : 1.0;
  const double s2 = rss / dof;
  r.slope_err = std::sqrt(s2 / r.sxx);
  r.intercept_err = std::sqrt(s2 * (1.0 / nd + r.x_mean * r.x_mean / r.sxx));
  r.covariance = -r.x_mean * s2 / r.sxx;
  r.t_quantile = student_t_quantile(0.95, dof);
  const boost::math::fisher_f f(2.0, dof);
  r.wh_factor = std::sqrt(2.0 * boost::math::quantile(f, 0.95));

  for (std::size_t g = 0; g < grid_points; ++g) {
    const double gx = *xmin + (*xmax - *xmin) * static_cast<double>(g) / static_cast<double>(grid_points - 1);
    const double h = r.band_half_width(gx);
    r.grid.push_back(gx);
    r.band_lo.push_back(r.predict(gx) - h);
    r.band_hi.push_back(r.predict(gx) + h);
  }
  return r;
}

namespace {

using Getter = std::optional<double> (*)(const EmitterRecord&);

std::optional<double> finite(double v) {
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

const std::vector<std::pair<const char*, Getter>>& ensemble_fields() {
  static const std::vector<std::pair<const char*, Getter>> fields = {
      {"zpl_energy_ev", [](const EmitterRecord& r) { return finite(r.zpl_energy_ev); }},
      {"zpl_wavelength_nm", [](const EmitterRecord& r) { return finite(r.zpl_wavelength_nm); }},
      {"zpl_fwhm_mev", [](const EmitterRecord& r) { return finite(r.zpl_fwhm_mev); }},
      {"zpl_fwhm_nm", [](const EmitterRecord& r) { return finite(r.zpl_fwhm_nm); }},
      {"lvm_quantum_mev", [](const EmitterRecord& r) { return finite(r.lvm_quantum_mev); }},
      {"anharmonicity_mev", [](const EmitterRecord& r) { return finite(r.anharmonicity_mev); }},
      {"debye_waller", [](const EmitterRecord& r) { return finite(r.debye_waller); }},
      {"gamma_vib_mev", [](const EmitterRecord& r) { return finite(r.gamma_vib_mev); }},
      {"g2_0", [](const EmitterRecord& r) { return r.g2_0 ? finite(*r.g2_0) : std::nullopt; }},
      {"raman_shift_cm", [](const EmitterRecord& r) { return r.raman_shift_cm ? finite(*r.raman_shift_cm) : std::nullopt; }},
  };
  return fields;
}

}  // namespace

EnsembleSummary ensemble_stats(const std::vector<EmitterRecord>& records) {
  if (records.empty()) throw DomainError("ensemble statistics need at least one record");
  EnsembleSummary s;
  s.count = records.size();
  for (const auto& [name, get] : ensemble_fields()) {
    std::vector<double> values;
    for (const auto& r : records) {
      if (auto v = get(r)) values.push_back(*v);
    }
    if (values.empty()) continue;
    FieldStats fs;
    fs.n = values.size();
    fs.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(fs.n);
    double ss = 0.0;
    for (double v : values) ss += (v - fs.mean) * (v - fs.mean);
    fs.sd = fs.n > 1 ? std::sqrt(ss / static_cast<double>(fs.n - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    fs.min = *lo;
    fs.max = *hi;
    s.fields[name] = fs;
  }
  for (const auto& r : records) {
    if (!(r.zpl_wavelength_nm >= 544.0 && r.zpl_wavelength_nm <= 560.0)) {
      s.zpl_in_range = false;
      s.out_of_range.push_back(r.source_id);
    }
  }
  return s;
}

std::vector<EmitterRecord> synthetic_ensemble(std::size_t count, std::uint64_t seed, double mean_ev, double sd_ev) {
  if (count < 2) throw DomainError("synthetic ensemble needs at least 2 emitters");
  if (!(sd_ev > 0.0)) throw DomainError("ensemble spread must be positive");
  const double e_lo = units::nm_to_ev(560.0), e_hi = units::nm_to_ev(544.0);
  if (mean_ev <= e_lo || mean_ev >= e_hi) throw DomainError("ensemble mean outside the 544-560 nm window");

  Rng rng(seed, 0);
  std::vector<double> energy(count);
  // Redraw until the exactly standardized sample fits the wavelength window.
  for (int attempt = 0;; ++attempt) {
    if (attempt > 10000) throw DomainError("cannot place the ensemble inside the 544-560 nm window");
    for (double& z : energy) z = rng.normal();
    const double m = std::accumulate(energy.begin(), energy.end(), 0.0) / static_cast<double>(count);
    double ss = 0.0;
    for (double z : energy) ss += (z - m) * (z - m);
    const double sd = std::sqrt(ss / static_cast<double>(count - 1));
    for (double& z : energy) z = mean_ev + sd_ev * (z - m) / sd;
    const auto [lo, hi] = std::minmax_element(energy.begin(), energy.end());
    if (*lo > e_lo && *hi < e_hi) break;
  }

  std::vector<EmitterRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double e = energy[i];
    const double de = e - mean_ev;
    EmitterRecord r;
    char id[32];
    std::snprintf(id, sizeof id, "synthetic-%02zu", i + 1);
    r.source_id = id;
    r.n_peaks = 4;
    r.zpl_energy_ev = e;
    r.zpl_wavelength_nm = units::ev_to_nm(e);
    r.zpl_fwhm_nm = std::clamp(0.37 - 4.0 * de + 0.03 * rng.normal(), 0.15, 0.58);
    r.zpl_fwhm_mev = units::width_nm_to_mev(r.zpl_fwhm_nm, r.zpl_wavelength_nm);
    r.anharmonicity_mev = 1.2 + 20.0 * de + 0.08 * rng.normal();
    r.lvm_quantum_mev = 187.0 + 300.0 * de + 1.5 * rng.normal();
    r.mean_spacing_mev = r.lvm_quantum_mev - r.anharmonicity_mev;
    r.debye_waller = std::clamp(0.38 + 0.03 * rng.normal(), 0.2, 0.6);
    r.huang_rhys = -std::log(r.debye_waller);
    r.debye_waller_poisson = r.debye_waller;
    r.gamma_vib_mev = 0.26 + 0.02 * rng.normal();
    r.g2_0 = std::clamp(0.1 + 0.03 * rng.normal(), 0.0, 0.45);
    r.raman_shift_cm = 1331.96 + 0.4 * rng.normal();
    out.push_back(r);
  }
  return out;
}

double thermometry_sensitivity(double zpl_fwhm_nm, double dlambda_dt_nm_per_k, double photon_rate_cps) {
  if (!(zpl_fwhm_nm > 0.0) || !(dlambda_dt_nm_per_k > 0.0) || !(photon_rate_cps > 0.0)) {
    throw DomainError("thermometry inputs must be positive");
  }
  return zpl_fwhm_nm / (dlambda_dt_nm_per_k * std::sqrt(photon_rate_cps));
}

// ------------------------------------------------------------------ JSON

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double get_num(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (!j.at(key).is_number()) throw DomainError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::optional<double> get_opt(const nlohmann::json& j, const char* key) {
  const double v = get_num(j, key);
  return std::isfinite(v) ? std::optional<double>(v) : std::nullopt;
}

}  // namespace

nlohmann::json to_json(const EmitterRecord& r) {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["source_id"] = r.source_id;
  j["n_peaks"] = r.n_peaks;
  j["zpl_energy_ev"] = num(r.zpl_energy_ev);
  j["zpl_wavelength_nm"] = num(r.zpl_wavelength_nm);
  j["zpl_fwhm_mev"] = num(r.zpl_fwhm_mev);
  j["zpl_fwhm_nm"] = num(r.zpl_fwhm_nm);
  j["lvm_quantum_mev"] = num(r.lvm_quantum_mev);
  j["mean_spacing_mev"] = num(r.mean_spacing_mev);
  j["anharmonicity_mev"] = num(r.anharmonicity_mev);
  j["debye_waller"] = num(r.debye_waller);
  j["huang_rhys"] = num(r.huang_rhys);
  j["debye_waller_poisson"] = num(r.debye_waller_poisson);
  j["gamma_vib_mev"] = num(r.gamma_vib_mev);
  j["g2_0"] = r.g2_0 ? num(*r.g2_0) : nlohmann::json(nullptr);
  j["raman_shift_cm"] = r.raman_shift_cm ? num(*r.raman_shift_cm) : nlohmann::json(nullptr);
  j["errors"] = {{"zpl_energy_ev", num(r.zpl_energy_err)},
                 {"lvm_quantum_mev", num(r.lvm_quantum_err)},
                 {"anharmonicity_mev", num(r.anharmonicity_err)},
                 {"debye_waller", num(r.debye_waller_err)},
                 {"gamma_vib_mev", num(r.gamma_vib_err)}};
  return j;
}

EmitterRecord record_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DomainError("emitter record must be a JSON object");
  if (j.contains("schema") && j.at("schema") != kSchema) {
    throw DomainError("unsupported schema " + j.at("schema").dump());
  }
  EmitterRecord r;
  r.zpl_energy_ev = get_num(j, "zpl_energy_ev");
  if (!std::isfinite(r.zpl_energy_ev)) throw DomainError("emitter record lacks zpl_energy_ev");
  r.source_id = j.value("source_id", std::string{});
  r.n_peaks = j.contains("n_peaks") && j.at("n_peaks").is_number_integer() ? j.at("n_peaks").get<int>() : 0;
  r.zpl_wavelength_nm = get_num(j, "zpl_wavelength_nm");
  if (!std::isfinite(r.zpl_wavelength_nm)) r.zpl_wavelength_nm = units::ev_to_nm(r.zpl_energy_ev);
  r.zpl_fwhm_mev = get_num(j, "zpl_fwhm_mev");
  r.zpl_fwhm_nm = get_num(j, "zpl_fwhm_nm");
  r.lvm_quantum_mev = get_num(j, "lvm_quantum_mev");
  r.mean_spacing_mev = get_num(j, "mean_spacing_mev");
  r.anharmonicity_mev = get_num(j, "anharmonicity_mev");
  r.debye_waller = get_num(j, "debye_waller");
  r.huang_rhys = get_num(j, "huang_rhys");
  r.debye_waller_poisson = get_num(j, "debye_waller_poisson");
  r.gamma_vib_mev = get_num(j, "gamma_vib_mev");
  r.g2_0 = get_opt(j, "g2_0");
  r.raman_shift_cm = get_opt(j, "raman_shift_cm");
  if (j.contains("errors") && j.at("errors").is_object()) {
    const auto& e = j.at("errors");
    r.zpl_energy_err = get_num(e, "zpl_energy_ev");
    r.lvm_quantum_err = get_num(e, "lvm_quantum_mev");
    r.anharmonicity_err = get_num(e, "anharmonicity_mev");
    r.debye_waller_err = get_num(e, "debye_waller");
    r.gamma_vib_err = get_num(e, "gamma_vib_mev");
  }
  return r;
}

nlohmann::json to_json(const PeakFit& p) {
  return {{"center_nm", num(p.center_nm)},   {"center_ev", num(p.center_ev)}, {"fwhm_nm", num(p.fwhm_nm)},
          {"fwhm_mev", num(p.fwhm_mev)},     {"area", num(p.area)},           {"amplitude", num(p.amplitude)},
          {"center_err", num(p.center_err)}, {"fwhm_err", num(p.fwhm_err)},   {"area_err", num(p.area_err)},
          {"fit_axis", axis_kind_name(p.fit_axis)}};
}

nlohmann::json to_json(const EnsembleSummary& s) {
  nlohmann::json j;
  j["schema"] = kSchema;
  j["count"] = s.count;
  j["zpl_in_range"] = s.zpl_in_range;
  j["out_of_range"] = s.out_of_range;
  nlohmann::json fields = nlohmann::json::object();
  for (const auto& [name, f] : s.fields) {
    fields[name] = {{"n", f.n}, {"mean", num(f.mean)}, {"sd", num(f.sd)}, {"min", num(f.min)}, {"max", num(f.max)}};
  }
  j["fields"] = fields;
  return j;
}

nlohmann::json to_json(const RegressionResult& r) {
  return {{"slope", num(r.slope)},
          {"intercept", num(r.intercept)},
          {"slope_err", num(r.slope_err)},
          {"intercept_err", num(r.intercept_err)},
          {"r2", num(r.r2)},
          {"n", r.n},
          {"slope_ci95", {num(r.slope_ci_lo()), num(r.slope_ci_hi())}}};
}

}  // namespace vibronix::analysis
