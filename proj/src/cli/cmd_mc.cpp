#include "vibronix/analysis.hpp"
#include "vibronix/photon_stats.hpp"
#include "vibronix/rng.hpp"
#include "vibronix/svg.hpp"

#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

namespace vibronix::cli {

void register_mc(ParamSet& p, McOptions& o) {
  p.add("preset", o.preset, "parameter preset (il1)");
  p.add("lifetime_ns", o.lifetime_ns, "excited-state lifetime (ns)");
  p.add("internal_quantum_yield", o.internal_quantum_yield, "gamma_rad / gamma_total of the simulated emitter");
  p.add("psat_mw", o.psat_mw, "saturation power (mW)");
  p.add("i_inf_cps", o.i_inf_cps, "detected saturated count rate (cps)");
  p.add("setup_efficiency", o.setup_efficiency, "setup efficiency used for the quantum yield");
  p.add("reported_qy", o.reported_qy, "independently reported quantum yield to compare against");
  p.add("visibility", o.visibility, "polarization visibility of the simulated dipole");
  p.add("polarization_theta0_deg", o.polarization_theta0_deg, "dipole angle (deg)");
  p.add("polarization_counts", o.polarization_counts, "counts at the polarization maximum");
  p.add("shelving_k_isc", o.shelving_k_isc, "excited -> dark rate (1/ns), 0 disables shelving");
  p.add("shelving_k_reset", o.shelving_k_reset, "dark -> ground rate (1/ns)");
  p.add("power_mw", o.power_mw, "pump power for the g2 run (default Psat)");
  p.add("duration_s", o.duration_s, "g2 acquisition time (s)");
  p.add("g2_binwidth_ns", o.g2_binwidth_ns, "g2 bin width (ns)");
  p.add("g2_window_ns", o.g2_window_ns, "g2 delay window (ns)");
  p.add("g2_precision", o.g2_precision, "target relative error of the g2 plateau");
  p.add("saturation_factors", o.saturation_factors, "powers as multiples of Psat");
  p.add("saturation_duration_s", o.saturation_duration_s, "acquisition per saturation point (s)");
  p.add("background_cps_per_mw", o.background_cps_per_mw, "linear background added to saturation counts");
  p.add("rep_rate_mhz", o.rep_rate_mhz, "pulsed repetition rate (MHz)");
  p.add("irf_sigma_ps", o.irf_sigma_ps, "Gaussian IRF sigma (ps)");
  p.add("lifetime_duration_s", o.lifetime_duration_s, "pulsed acquisition time (s)");
  p.add("blinking_bins_ms", o.blinking_bins_ms, "bin sizes for the blinking test (ms)");
}

namespace {

void write_rows(const std::filesystem::path& path, const std::string& header,
                const std::vector<std::vector<double>>& columns) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << header << '\n';
  char buf[48];
  for (std::size_t r = 0; r < columns.front().size(); ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", columns[c][r]);
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
}

}  // namespace

int run_mc(const Context& ctx, const McOptions& o) {
  if (ctx.global.jobs < 1) throw ConfigError("jobs must be at least 1");
  const std::uint64_t seed = require_seed(ctx.global, "mc");
  if (!(o.lifetime_ns > 0.0)) throw ConfigError("lifetime_ns must be positive");
  if (!(o.internal_quantum_yield > 0.0 && o.internal_quantum_yield <= 1.0)) {
    throw ConfigError("internal_quantum_yield must lie in (0, 1]");
  }
  if (!(o.duration_s > 0.0 && o.saturation_duration_s > 0.0 && o.lifetime_duration_s > 0.0)) {
    throw ConfigError("durations must be positive");
  }
  if (o.saturation_factors.size() < 4) throw ConfigError("saturation needs at least 4 powers");
  if (!(o.visibility >= 0.0 && o.visibility <= 1.0)) throw ConfigError("visibility must lie in [0, 1]");

  photon::EmitterModel model;
  model.gamma_rad_per_ns = o.internal_quantum_yield / o.lifetime_ns;
  model.gamma_nr_per_ns = (1.0 - o.internal_quantum_yield) / o.lifetime_ns;
  model.psat_mw = o.psat_mw;
  model.detection_efficiency = o.i_inf_cps / (model.gamma_rad_per_ns * 1e9);
  if (o.shelving_k_isc > 0.0) model.shelving = photon::Shelving{o.shelving_k_isc, o.shelving_k_reset};
  if (!(model.detection_efficiency > 0.0 && model.detection_efficiency <= 1.0)) {
    throw ConfigError("i_inf_cps exceeds the photon rate the emitter can produce");
  }
  model.validate();
  const double power = o.power_mw.value_or(o.psat_mw);

  const std::size_t n_sat = o.saturation_factors.size();
  const std::size_t task_pulsed = n_sat + 1, task_pol = n_sat + 2;
  photon::G2Histogram g2;
  photon::BlinkingReport blinking;
  std::vector<photon::SaturationPoint> sat(n_sat);
  photon::DecayHistogram decay;
  std::vector<photon::PolarizationPoint> pol;

  parallel_for(n_sat + 3, ctx.global.jobs, [&](std::size_t task) {
    const std::uint64_t s = child_seed(seed, task);
    if (task == 0) {
      const auto stream = photon::simulate_cw(model, power, o.duration_s, s);
      g2 = photon::hbt_correlate(stream, child_seed(s, 1), o.g2_binwidth_ns, o.g2_window_ns);
      photon::BlinkingOptions bo;
      bo.seed = child_seed(s, 2);
      blinking = photon::detect_blinking(stream, o.blinking_bins_ms, bo);
    } else if (task <= n_sat) {
      const double p = o.saturation_factors[task - 1] * o.psat_mw;
      const auto stream = photon::simulate_cw(model, p, o.saturation_duration_s, s);
      double counts = static_cast<double>(stream.size());
      if (o.background_cps_per_mw > 0.0) {
        Rng rng(s, 7);
        counts += static_cast<double>(rng.poisson(o.background_cps_per_mw * p * o.saturation_duration_s));
      }
      sat[task - 1] = {p, counts / o.saturation_duration_s};
    } else if (task == task_pulsed) {
      decay = photon::simulate_pulsed(model, o.rep_rate_mhz, o.irf_sigma_ps, o.lifetime_duration_s, s);
    } else if (task == task_pol) {
      Rng rng(s, 0);
      const double i_max = o.polarization_counts;
      const double i_min = i_max * (1.0 - o.visibility) / (1.0 + o.visibility);
      for (int deg = 0; deg < 360; deg += 10) {
        const double d = (deg - o.polarization_theta0_deg) * 3.14159265358979323846 / 180.0;
        const double mean = i_min + (i_max - i_min) * std::sin(d) * std::sin(d);
        pol.push_back({static_cast<double>(deg), static_cast<double>(rng.poisson(mean))});
      }
    }
  });

  nlohmann::json warnings = nlohmann::json::array();
  const auto g2fit = photon::fit_g2(g2);
  const double g2_rel_err = g2.normalization > 0.0 ? 1.0 / std::sqrt(g2.normalization) : INFINITY;
  if (g2_rel_err > o.g2_precision) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "duration %.3g s too short: g2 plateau error %.3g exceeds requested %.3g",
                  o.duration_s, g2_rel_err, o.g2_precision);
    warnings.push_back(buf);
  }
  const auto satfit = photon::fit_saturation(
      sat, o.background_cps_per_mw > 0.0 ? photon::BackgroundModel::Linear : photon::BackgroundModel::None);
  const photon::Irf irf = photon::GaussianIrf{o.irf_sigma_ps, 0.0};
  const auto life = photon::fit_lifetime(decay, irf);
  for (const auto& w : decay.warnings) warnings.push_back(w);
  const auto polfit = photon::fit_polarization(pol);
  const auto qy = photon::quantum_yield(satfit.i_inf_cps, o.setup_efficiency, life.tau_dominant_ns);
  for (const auto& w : qy.warnings) warnings.push_back(w);
  if (o.reported_qy) {
    if (auto w = photon::compare_quantum_yield(qy.value, *o.reported_qy)) warnings.push_back(*w);
  }

  const auto dir = prepare_output_dir(ctx.global);
  write_rows(dir / "g2.csv", "tau_ns,coincidences,g2,sigma", {g2.tau_ns, g2.coincidences, g2.normalized, g2.sigma});
  std::vector<double> sp, sr, sf;
  for (const auto& pt : sat) {
    sp.push_back(pt.power_mw);
    sr.push_back(pt.rate_cps);
    sf.push_back(satfit.rate(pt.power_mw));
  }
  write_rows(dir / "saturation.csv", "power_mw,rate_cps,fit_cps", {sp, sr, sf});
  std::vector<std::pair<double, double>> comps = {{life.amplitude1, life.tau1_ns}};
  if (life.components == 2) comps.emplace_back(life.amplitude2, life.tau2_ns);
  const auto model_counts = photon::lifetime_model(decay, irf, comps, life.background);
  std::vector<double> t_ns(decay.counts.size());
  for (std::size_t i = 0; i < t_ns.size(); ++i) t_ns[i] = 1e-3 * decay.bin_center_ps(i);
  write_rows(dir / "lifetime.csv", "t_ns,counts,model", {t_ns, decay.counts, model_counts});
  std::vector<double> pa, pc;
  for (const auto& pt : pol) {
    pa.push_back(pt.theta_deg);
    pc.push_back(pt.intensity);
  }
  write_rows(dir / "polarization.csv", "theta_deg,counts", {pa, pc});

  const double r = model.pump_rate(power);
  nlohmann::json summary;
  summary["schema"] = analysis::kSchema;
  summary["seed"] = seed;
  summary["g2_0"] = g2fit.g2_0;
  summary["psat"] = satfit.psat_mw;
  summary["i_inf"] = satfit.i_inf_cps;
  summary["tau"] = life.tau_dominant_ns;
  summary["visibility"] = polfit.visibility;
  summary["qy"] = qy.value;
  summary["details"] = {
      {"g2", {{"antibunching_time_ns", g2fit.antibunching_time_ns},
              {"expected_antibunching_time_ns", 1.0 / (r + model.gamma_total())},
              {"bunching_amplitude", g2fit.bunching_amplitude},
              {"two_level", g2fit.two_level},
              {"power_mw", power}}},
      {"saturation", {{"psat_err", satfit.psat_err}, {"i_inf_err", satfit.i_inf_err},
                      {"bg_slope_cps_per_mw", satfit.bg_slope_cps_per_mw}}},
      {"lifetime", {{"components", life.components}, {"tau_err", life.tau_dominant_err_ns},
                    {"reduced_chi2", life.reduced_chi2}}},
      {"polarization", {{"theta0_deg", polfit.theta0_deg}}},
      {"blinking", {{"flagged", blinking.flagged}}},
      {"quantum_yield", {{"clamped", qy.clamped}, {"setup_efficiency", o.setup_efficiency}}}};
  summary["warnings"] = warnings;
  write_json(dir / "summary.json", summary);

  if (ctx.global.plot) {
    svg::Plot pg{"g2(tau)", "tau (ns)", "g2", {}};
    pg.series.push_back({"g2", g2.tau_ns, g2.normalized, {}, svg::Style::Line, "#1f77b4"});
    pg.write(dir / "g2.svg");
    svg::Plot ps{"Saturation", "power (mW)", "rate (cps)", {}};
    ps.series.push_back({"measured", sp, sr, {}, svg::Style::Points, "#1f77b4"});
    ps.series.push_back({"fit", sp, sf, {}, svg::Style::Line, "#d62728"});
    ps.write(dir / "saturation.svg");
    svg::Plot pl{"Lifetime", "delay (ns)", "counts", {}};
    pl.log_y = true;
    pl.series.push_back({"counts", t_ns, decay.counts, {}, svg::Style::Points, "#1f77b4"});
    pl.series.push_back({"fit", t_ns, model_counts, {}, svg::Style::Line, "#d62728"});
    pl.write(dir / "lifetime.svg");
  }
  for (const auto& w : warnings) *ctx.err << "warning: " << w.get<std::string>() << '\n';
  char line[200];
  std::snprintf(line, sizeof line, "mc: g2(0)=%.4f psat=%.4g mW i_inf=%.4g cps tau=%.4f ns V=%.3f qy=%.4f\n",
                g2fit.g2_0, satfit.psat_mw, satfit.i_inf_cps, life.tau_dominant_ns, polfit.visibility, qy.value);
  *ctx.out << line;
  return kExitOk;
}

}  // namespace vibronix::cli
