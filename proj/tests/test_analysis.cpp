#include "oracles.hpp"
#include "pipeline.hpp"

#include "vibronix/analysis.hpp"
#include "vibronix/errors.hpp"
#include "vibronix/rng.hpp"
#include "vibronix/units.hpp"

#include <doctest.h>

#include <limits>
#include <numeric>
#include <sstream>

using namespace vibronix;
using namespace vibronix::analysis;

namespace {

PeakFit peak_at(double e_ev, double fwhm_mev, double area) {
  PeakFit p;
  p.fit_axis = AxisKind::Energy;
  p.center_ev = e_ev;
  p.center_nm = units::ev_to_nm(e_ev);
  p.fwhm_mev = fwhm_mev;
  p.fwhm_nm = units::width_mev_to_nm(fwhm_mev, p.center_nm);
  p.area = area;
  p.center_err = 1e-7;
  p.fwhm_err = 1e-6;
  p.area_err = 1.0;
  return p;
}

std::vector<PeakFit> ladder(double e0, double quantum_mev, double chi_mev, std::vector<double> widths,
                            std::vector<double> areas) {
  std::vector<PeakFit> out;
  for (std::size_t n = 0; n < widths.size(); ++n) {
    const double nn = static_cast<double>(n);
    const double e = e0 + 1e-3 * (-nn * quantum_mev + chi_mev * nn * (nn - 1.0) / 2.0);
    out.push_back(peak_at(e, widths[n], areas[n]));
  }
  return out;
}

Spectrum parse(const std::string& text) {
  std::istringstream in(text);
  return parse_spectrum_csv(in, AxisKind::Wavelength);
}

std::size_t parse_error_line(const std::string& text) {
  try {
    parse(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return 0;
}

EmitterRecord typical_record() {
  EmitterRecord r;
  r.n_peaks = 4;
  r.zpl_wavelength_nm = 547.5;
  r.zpl_energy_ev = units::nm_to_ev(547.5);
  r.zpl_fwhm_nm = 0.31;
  r.lvm_quantum_mev = 187.0;
  r.g2_0 = 0.1;
  return r;
}

bool has_reason(const FingerprintVerdict& v, const std::string& prefix) {
  for (const auto& r : v.reasons) {
    if (r.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("CSV parsing") {
  const auto s = parse("# comment\nwavelength,counts\n550.2, 3\n550.0,1\n550.1 2\n");
  REQUIRE(s.size() == 3);
  CHECK(s.axis == std::vector<double>{550.0, 550.1, 550.2});
  CHECK(s.intensity == std::vector<double>{1, 2, 3});

  CHECK(parse_error_line("550,1\n551,-2\n") == 2);
  CHECK(parse_error_line("550,1\n551,x\n552,3\n") == 2);
  CHECK(parse_error_line("#c\n550,1\n552,2\n550,4\n") == 4);
  CHECK(parse_error_line("550,1\n551\n") == 2);
  CHECK(parse_error_line("550,1\n") > 0);
  CHECK(parse_error_line("0,1\n1,2\n") == 1);

  std::ostringstream out;
  write_spectrum_csv(s, out);
  const auto back = parse(out.str());
  CHECK(back.axis == s.axis);
  CHECK(back.intensity == s.intensity);
}

TEST_CASE("axis conversion") {
  Spectrum s;
  s.axis = uniform_grid(540.0, 560.0, 0.5);
  s.intensity.assign(s.axis.size(), 1.0);
  for (std::size_t i = 0; i < s.size(); ++i) s.intensity[i] += static_cast<double>(i);
  const auto e = convert_axis(s, AxisKind::Energy);
  CHECK(e.kind == AxisKind::Energy);
  CHECK(std::is_sorted(e.axis.begin(), e.axis.end()));
  CHECK(e.axis.front() == doctest::Approx(units::nm_to_ev(560.0)).epsilon(1e-14));
  CHECK(e.intensity.front() == s.intensity.back());
  const auto back = convert_axis(e, AxisKind::Wavelength);
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(std::abs(back.axis[i] - s.axis[i]) / s.axis[i] < 1e-10);
    CHECK(back.intensity[i] == s.intensity[i]);
  }
  const auto j = convert_axis(s, AxisKind::Energy, true);
  const double t0 = std::accumulate(s.intensity.begin(), s.intensity.end(), 0.0);
  CHECK(std::accumulate(j.intensity.begin(), j.intensity.end(), 0.0) == doctest::Approx(t0).epsilon(1e-12));
  // lambda^2 weighting: long-wavelength end gains relative to the short one.
  CHECK(j.intensity.front() / j.intensity.back() >
        e.intensity.front() / e.intensity.back() * (560.0 * 560.0) / (540.0 * 540.0) * 0.999);
}

TEST_CASE("background subtraction") {
  Spectrum zero;
  zero.axis = uniform_grid(500.0, 600.0, 0.1);
  zero.intensity.assign(zero.size(), 0.0);
  const auto z = subtract_background(zero, BackgroundMethod::LinearBaseline, 20);
  CHECK(std::all_of(z.spectrum.intensity.begin(), z.spectrum.intensity.end(), [](double v) { return v == 0.0; }));
  CHECK(z.clamped == 0);

  Spectrum ramp = zero;
  std::vector<double> peak(ramp.size());
  for (std::size_t i = 0; i < ramp.size(); ++i) {
    peak[i] = lorentzian(ramp.axis[i], 550.0, 0.3, 1e4) * 0.1;
    ramp.intensity[i] = peak[i] + 100.0 + 2.0 * (ramp.axis[i] - 500.0);
  }
  const auto r = subtract_background(ramp, BackgroundMethod::LinearBaseline, 50);
  double worst = 0.0;
  for (std::size_t i = 0; i < ramp.size(); ++i) worst = std::max(worst, std::abs(r.spectrum.intensity[i] - peak[i]));
  CHECK(worst < 0.01 * 200.0);

  Spectrum flat = zero;
  for (std::size_t i = 0; i < flat.size(); ++i) flat.intensity[i] = 40.0 + peak[i];
  const auto m = subtract_background(flat, BackgroundMethod::RollingMedian, 101);
  CHECK(std::abs(m.spectrum.intensity[10]) < 0.05);  // offset gone far from the line
  CHECK(m.spectrum.intensity[500] > 0.5 * peak[500]);

  CHECK_THROWS_AS(subtract_background(zero, BackgroundMethod::LinearBaseline, 600), DomainError);
}

TEST_CASE("flat offset leaves fitted areas unchanged") {
  const auto clean = pipeline::il1_spectrum(std::nullopt);
  auto shifted = clean;
  for (double& v : shifted.intensity) v += 50.0;
  const auto sub = subtract_background(shifted, BackgroundMethod::LinearBaseline, 50);
  const auto a = pipeline::analyze(clean);
  const auto b = pipeline::analyze(sub.spectrum);
  REQUIRE(a.fit.peaks.size() == 4);
  REQUIRE(b.fit.peaks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(b.fit.peaks[k].area == doctest::Approx(a.fit.peaks[k].area).epsilon(0.005));
  }
}

TEST_CASE("peak detection") {
  const auto s = pipeline::il1_spectrum(std::nullopt);
  const double max = *std::max_element(s.intensity.begin(), s.intensity.end());
  const auto c = detect_peaks(s, 0.02 * max, 5.0);
  REQUIRE(c.size() == 4);
  const auto truth = pipeline::il1_truth_nm();
  for (std::size_t k = 0; k < 4; ++k) CHECK(std::abs(c[k].position - truth[k].first) <= 0.02 + 1e-9);

  Spectrum flat;
  flat.axis = uniform_grid(500.0, 510.0, 0.01);
  flat.intensity.assign(flat.size(), 7.0);
  CHECK(detect_peaks(flat, 0.1, 1.0).empty());

  Spectrum one = flat;
  for (std::size_t i = 0; i < one.size(); ++i) one.intensity[i] = lorentzian(one.axis[i], 505.0, 0.4, 100.0);
  const auto single = detect_peaks(one, 1.0, 1.0);
  REQUIRE(single.size() == 1);
  CHECK(single[0].position == doctest::Approx(505.0).epsilon(1e-4));
}

TEST_CASE("noise-free fit is exact") {
  const auto s = pipeline::il1_spectrum(std::nullopt, 1e6, std::numeric_limits<double>::infinity());
  const auto a = pipeline::analyze(s);
  const auto truth = pipeline::il1_truth_nm();
  const auto p = pipeline::il1_params();
  REQUIRE(a.fit.peaks.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& f = a.fit.peaks[k];
    CHECK(f.center_nm == doctest::Approx(truth[k].first).epsilon(1e-6));
    CHECK(f.fwhm_nm == doctest::Approx(truth[k].second).epsilon(1e-6));
    // Peak area in counts x nm: budget x weight x grid step.
    CHECK(f.area == doctest::Approx(1e6 * vibronic::fc_weight(p.s_total, static_cast<int>(k)) * 0.02).epsilon(1e-6));
  }
  CHECK(std::abs(a.fit.offset) < 1e-6);
  for (std::size_t i = 1; i < a.fit.accepted_costs.size(); ++i) {
    CHECK(a.fit.accepted_costs[i] <= a.fit.accepted_costs[i - 1]);
  }
  const auto& r = a.record;
  CHECK(r.zpl_energy_ev == doctest::Approx(2.27).epsilon(1e-8));
  CHECK(r.lvm_quantum_mev == doctest::Approx(187.0).epsilon(1e-6));
  CHECK(r.anharmonicity_mev == doctest::Approx(1.2).epsilon(1e-5));
  CHECK(r.gamma_vib_mev == doctest::Approx(0.26).epsilon(1e-4));
  CHECK(r.debye_waller_poisson == doctest::Approx(0.38).epsilon(0.01));
  double w_sum = 0.0;
  for (int n = 0; n < 4; ++n) w_sum += vibronic::fc_weight(p.s_total, n);
  CHECK(r.debye_waller == doctest::Approx(0.38 / w_sum).epsilon(1e-6));
  CHECK(r.n_peaks == 4);
}

TEST_CASE("noisy fits") {
  const auto truth = pipeline::il1_truth_nm();
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto a = pipeline::analyze(pipeline::il1_spectrum(seed));
    REQUIRE(a.fit.peaks.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(a.fit.peaks[k].center_nm - truth[k].first) < 0.02);
      CHECK(a.fit.peaks[k].fwhm_nm == doctest::Approx(truth[k].second).epsilon(0.05));
      CHECK(a.fit.peaks[k].center_err > 0.0);
    }
  }
}

TEST_CASE("unresolved peaks are reported") {
  Spectrum s;
  s.axis = uniform_grid(545.0, 555.0, 0.01);
  for (double x : s.axis) s.intensity.push_back(lorentzian(x, 550.0, 0.3, 500.0) + lorentzian(x, 550.075, 0.3, 500.0));
  const std::vector<PeakGuess> guesses = {{549.9, 0.3, 400.0}, {550.2, 0.3, 400.0}};
  bool reported = false;
  try {
    fit_multilorentzian(s, guesses);
  } catch (const DegeneracyError&) {
    reported = true;
  } catch (const ConvergenceError&) {
    reported = true;
  }
  CHECK(reported);
  CHECK_THROWS_AS(fit_multilorentzian(s, {}), DomainError);
  CHECK_THROWS_AS(fit_multilorentzian(s, {{600.0, 0.3, 1.0}}), DomainError);
}

TEST_CASE("ladder extraction") {
  const auto w = ladder(2.27, 187.0, 0.0, {1.5, 1.8, 2.1, 2.4}, {38, 37, 18, 6});
  const auto r = extract_ladder(w);
  CHECK(r.gamma_vib_mev == doctest::Approx(0.3).epsilon(1e-9));
  CHECK(std::abs(r.anharmonicity_mev) < 1e-6);
  CHECK(r.lvm_quantum_mev == doctest::Approx(187.0).epsilon(1e-9));
  CHECK(r.mean_spacing_mev == doctest::Approx(187.0).epsilon(1e-9));
  CHECK(r.debye_waller == doctest::Approx(38.0 / 99.0).epsilon(1e-12));

  // Input order does not matter.
  auto shuffled = ladder(2.27, 187.0, 1.2, {1.28, 1.54, 1.80, 2.06}, {38, 36.8, 17.8, 5.7});
  std::swap(shuffled[0], shuffled[2]);
  const auto s = extract_ladder(shuffled);
  CHECK(s.zpl_energy_ev == doctest::Approx(2.27).epsilon(1e-12));
  CHECK(s.anharmonicity_mev == doctest::Approx(1.2).epsilon(1e-9));
  CHECK(s.gamma_vib_mev == doctest::Approx(0.26).epsilon(1e-9));
  CHECK(s.lvm_quantum_err > 0.0);

  auto broken = ladder(2.27, 187.0, 0.0, {1, 1, 1, 1}, {1, 1, 1, 1});
  broken[2].center_ev += 0.06;
  CHECK_THROWS_AS(extract_ladder(broken), NotALadderError);
  CHECK_THROWS_AS(extract_ladder({w[0], w[1]}), NotALadderError);
}

TEST_CASE("fingerprint classification") {
  const auto ok = classify_fingerprint(typical_record());
  CHECK(ok.is_il1);
  CHECK(ok.reasons.empty());

  auto nv = typical_record();
  nv.zpl_fwhm_mev = 100.0;
  nv.zpl_fwhm_nm = units::width_mev_to_nm(100.0, 547.5);
  const auto v_nv = classify_fingerprint(nv);
  CHECK_FALSE(v_nv.is_il1);
  CHECK(has_reason(v_nv, "linewidth:"));

  auto bright = typical_record();
  bright.g2_0 = 0.7;
  const auto v_g2 = classify_fingerprint(bright);
  CHECK_FALSE(v_g2.is_il1);
  CHECK(v_g2.reasons.size() == 1);
  CHECK(has_reason(v_g2, "antibunching:"));

  auto many = typical_record();
  many.n_peaks = 3;
  many.lvm_quantum_mev = 150.0;
  many.zpl_wavelength_nm = 600.0;
  many.g2_0.reset();
  const auto v_many = classify_fingerprint(many);
  CHECK(v_many.reasons.size() == 3);
  CHECK(has_reason(v_many, "peak count:"));
  CHECK(has_reason(v_many, "lvm:"));
  CHECK(has_reason(v_many, "wavelength:"));
}

TEST_CASE("temperature series") {
  const double alpha = vibronic::TemperatureModel::alpha_for(1.28, 300.0);
  std::vector<WidthPoint> exact, noisy;
  Rng rng(17);
  for (double t = 100.0; t <= 300.0; t += 20.0) {
    for (int n = 0; n < 3; ++n) {
      const double w = alpha * t * t * t + n * 0.26;
      exact.push_back({t, w, n});
      noisy.push_back({t, w * (1.0 + 0.03 * rng.normal()), n});
    }
  }
  const auto e = fit_temperature_series(exact);
  CHECK(e.alpha == doctest::Approx(alpha).epsilon(1e-10));
  CHECK(e.gamma_vib_mev == doctest::Approx(0.26).epsilon(1e-10));
  CHECK(e.points_used == 33);
  const auto f = fit_temperature_series(noisy);
  CHECK(f.alpha == doctest::Approx(alpha).epsilon(0.1));
  CHECK(f.gamma_vib_mev == doctest::Approx(0.26).epsilon(0.1));
  CHECK(f.alpha_err > 0.0);

  TemperatureFitOptions hot;
  hot.t_min = 200.0;
  CHECK(fit_temperature_series(exact, hot).points_used == 18);
  TemperatureFitOptions sep;
  sep.shared_alpha = false;
  const auto per = fit_temperature_series(exact, sep);
  REQUIRE(per.alpha_per_peak.size() == 3);
  CHECK(per.alpha_per_peak.at(2) == doctest::Approx(alpha).epsilon(1e-9));

  std::vector<WidthPoint> one_index;
  for (const auto& p : exact) {
    if (p.peak_index == 0) one_index.push_back(p);
  }
  CHECK_THROWS_AS(fit_temperature_series(one_index), DegeneracyError);
  CHECK_THROWS_AS(fit_temperature_series({{100, 1, 0}, {100, 1.26, 1}, {200, 1, 0}}), DomainError);
}

TEST_CASE("line shift series") {
  const double b = 5e-6, a = (0.007 - 2.0 * b * 290.0) / (4.0 * 290.0 * 290.0 * 290.0);
  std::vector<ShiftPoint> pts, flat, square;
  Rng rng(23);
  for (double t = 80.0; t <= 300.0; t += 10.0) {
    const double t2 = t * t;
    pts.push_back({t, 547.0 + a * t2 * t2 + b * t2 + 0.002 * rng.normal()});
    flat.push_back({t, 547.0});
    square.push_back({t, 547.0 + b * t2 + 0.002 * rng.normal()});
  }
  const auto f = fit_lineshift_series(pts);
  CHECK(f.slope_at(290.0) == doctest::Approx(0.007).epsilon(0.1));
  CHECK(f.lambda0_nm == doctest::Approx(547.0).epsilon(1e-5));
  CHECK(f.slope_err(290.0) > 0.0);
  CHECK(std::abs(fit_lineshift_series(flat).slope_at(290.0)) < 1e-12);
  const auto q = fit_lineshift_series(square);
  CHECK(std::abs(q.a) < 3.0 * std::sqrt(q.covariance(1, 1)));
  CHECK_THROWS_AS(fit_lineshift_series({{280, 1}, {290, 1}, {300, 1}, {310, 1}}), IllConditionedError);
  CHECK_THROWS_AS(fit_lineshift_series({{100, 1}, {200, 1}, {300, 1}}), DomainError);
}

TEST_CASE("Raman strain") {
  const auto zero = raman_strain(1332.5);
  CHECK(zero.stress_gpa == 0.0);
  CHECK(zero.strain == 0.0);
  const auto lo = raman_strain(1331.96);
  CHECK(lo.stress_gpa == doctest::Approx(-0.1836).epsilon(1e-9));
  CHECK(lo.strain == doctest::Approx(1.67e-4).epsilon(2e-3));
  CHECK(lo.tensile);
  CHECK_FALSE(lo.warning.has_value());
  const auto hi = raman_strain(1327.1);
  CHECK(hi.strain * 100.0 == doctest::Approx(0.167).epsilon(1e-3));
  CHECK_FALSE(raman_strain(1335.0).tensile);
  CHECK(raman_strain(1250.0).warning.has_value());
  // Affine in the shift with the stated coefficients.
  for (double nu : {1320.0, 1331.0, 1333.7, 1350.0}) {
    CHECK(raman_strain(nu).stress_gpa == doctest::Approx(0.34 * (nu - 1332.5)).epsilon(1e-14));
  }
  const double s1 = raman_strain(1325.0).stress_gpa, s2 = raman_strain(1345.0).stress_gpa;
  CHECK(raman_strain(1335.0).stress_gpa == doctest::Approx(0.5 * (s1 + s2)).epsilon(1e-12));

  const auto range = strain_range(1331.96, 5.4);
  CHECK(range.lower == doctest::Approx(lo.strain).epsilon(1e-12));
  CHECK(range.upper == doctest::Approx(0.34 * 5.4 / 1100.0).epsilon(1e-12));
  CHECK_FALSE(range.note.empty());
}

TEST_CASE("regression with confidence band") {
  const std::vector<double> x = {0, 1, 2, 3, 4, 5};
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 * v + 1.0);
  const auto r = regress_with_ci(x, y);
  CHECK(r.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.band_half_width(2.5) < 1e-10);
  CHECK(r.r2 == doctest::Approx(1.0));
  CHECK(r.grid.size() == 50);

  CHECK(student_t_quantile(0.95, 10.0) == doctest::Approx(2.228139).epsilon(1e-6));
  CHECK(student_t_quantile(0.95, 1e6) == doctest::Approx(1.959966).epsilon(1e-5));

  Rng rng(4);
  std::vector<double> xn, yn;
  for (int i = 0; i < 30; ++i) {
    xn.push_back(i * 0.1);
    yn.push_back(0.5 - 1.5 * xn.back() + 0.2 * rng.normal());
  }
  const auto n = regress_with_ci(xn, yn);
  const auto [b0, b1] = oracle::ols(xn, yn);
  CHECK(n.slope == doctest::Approx(b1).epsilon(1e-10));
  CHECK(n.intercept == doctest::Approx(b0).epsilon(1e-10));
  CHECK(n.slope_ci_hi() < 0.0);
  CHECK(n.simultaneous_half_width(1.0) > n.band_half_width(1.0));
  CHECK(n.band_lo.front() < n.predict(n.grid.front()));

  CHECK_THROWS_AS(regress_with_ci({1, 1, 1}, {1, 2, 3}), DegeneracyError);
  CHECK_THROWS(regress_with_ci({1, 2}, {1, 2}));
}

TEST_CASE("ensemble statistics") {
  const auto pop = synthetic_ensemble(40, 2024);
  REQUIRE(pop.size() == 40);
  const auto s = ensemble_stats(pop);
  CHECK(s.count == 40);
  CHECK(s.fields.at("zpl_energy_ev").mean == doctest::Approx(2.25).epsilon(1e-12));
  CHECK(s.fields.at("zpl_energy_ev").sd == doctest::Approx(0.016).epsilon(1e-10));
  CHECK(s.fields.at("zpl_fwhm_nm").max < 0.6);
  CHECK(s.zpl_in_range);
  CHECK(synthetic_ensemble(40, 2024)[7].zpl_energy_ev == pop[7].zpl_energy_ev);

  const auto one = ensemble_stats({pop[0]});
  CHECK(one.fields.at("zpl_energy_ev").sd == 0.0);
  const auto same = ensemble_stats({pop[3], pop[3], pop[3]});
  const auto& f = same.fields.at("lvm_quantum_mev");
  CHECK(f.min == f.mean);
  CHECK(f.max == f.mean);
  CHECK_THROWS_AS(ensemble_stats({}), DomainError);

  auto out = pop[0];
  out.source_id = "stray";
  out.zpl_wavelength_nm = 570.0;
  const auto flagged = ensemble_stats({pop[1], out});
  CHECK_FALSE(flagged.zpl_in_range);
  CHECK(flagged.out_of_range == std::vector<std::string>{"stray"});
}

TEST_CASE("thermometry sensitivity") {
  const double base = thermometry_sensitivity(0.31, 0.007, 12.5e6);
  CHECK(base * 1e3 == doctest::Approx(12.5).epsilon(0.01));
  CHECK(thermometry_sensitivity(0.31, 0.007, 50e6) == doctest::Approx(base / 2.0).epsilon(1e-12));
  CHECK(thermometry_sensitivity(0.31, 0.014, 12.5e6) == doctest::Approx(base / 2.0).epsilon(1e-12));
}

TEST_CASE("record JSON round trip") {
  auto r = pipeline::analyze(pipeline::il1_spectrum(9)).record;
  r.source_id = "sample-9";
  r.g2_0 = 0.12;
  const auto j = to_json(r);
  CHECK(j.at("schema") == kSchema);
  const auto back = record_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.source_id == "sample-9");
  CHECK(back.zpl_energy_ev == r.zpl_energy_ev);
  CHECK(back.lvm_quantum_mev == r.lvm_quantum_mev);
  CHECK(back.debye_waller_err == r.debye_waller_err);
  REQUIRE(back.g2_0.has_value());
  CHECK(*back.g2_0 == 0.12);
  CHECK_FALSE(back.raman_shift_cm.has_value());

  const auto minimal = record_from_json(nlohmann::json::parse(R"({"zpl_energy_ev": 2.26})"));
  CHECK(minimal.zpl_wavelength_nm == doctest::Approx(units::ev_to_nm(2.26)));
  CHECK(std::isnan(minimal.lvm_quantum_mev));
  CHECK_THROWS(record_from_json(nlohmann::json::parse(R"({"lvm_quantum_mev": 187})")));
  CHECK(to_json(regress_with_ci({0, 1, 2}, {0, 1, 2.1})).contains("slope_ci95"));
}
