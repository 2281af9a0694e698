#include "vibronix/analysis.hpp"
#include "vibronix/errors.hpp"
#include "vibronix/svg.hpp"

#include "commands.hpp"

#include <algorithm>
#include <ostream>

namespace vibronix::cli {

void register_fit(ParamSet& p, FitOptions& o) {
  p.add("input", o.input, "spectrum CSV files");
  p.add("axis", o.axis, "axis of the input files: wavelength_nm or energy_ev");
  p.add("background", o.background, "none, linear_baseline or rolling_median");
  p.add("background_window", o.background_window, "samples per baseline window");
  p.add("min_prominence", o.min_prominence, "peak prominence as a fraction of the maximum");
  p.add("min_separation", o.min_separation, "minimum peak separation (axis units)");
  p.add("smoothing", o.smoothing, "moving-average samples for peak detection");
  p.add("spacing_tolerance", o.spacing_tolerance, "allowed spacing deviation from the mean");
  p.add("g2_0", o.g2_0, "measured g2(0) to attach to the record");
  p.add("raman_shift_cm", o.raman_shift_cm, "measured Raman line to attach to the record");
}

namespace {

struct FitOutcome {
  int code = kExitOk;
  std::string message;
};

FitOutcome fit_one(const Context& ctx, const FitOptions& o, const std::filesystem::path& input,
                   const std::filesystem::path& dir) {
  const AxisKind kind = parse_axis_kind(o.axis);
  Spectrum spectrum = analysis::load_spectrum(input, kind);  // ParseError propagates as exit 2
  const std::string stem = input.stem().string();
  FitOutcome outcome;
  std::size_t clamped = 0;
  if (o.background != "none") {
    analysis::BackgroundMethod method;
    if (o.background == "linear_baseline") {
      method = analysis::BackgroundMethod::LinearBaseline;
    } else if (o.background == "rolling_median") {
      method = analysis::BackgroundMethod::RollingMedian;
    } else {
      throw ConfigError("unknown background method '" + o.background + "'");
    }
    if (o.background_window < 1) throw ConfigError("background_window must be positive");
    auto bg = analysis::subtract_background(spectrum, method, static_cast<std::size_t>(o.background_window));
    spectrum = std::move(bg.spectrum);
    clamped = bg.clamped;
  }
  const double max = *std::max_element(spectrum.intensity.begin(), spectrum.intensity.end());
  const auto candidates = analysis::detect_peaks(spectrum, o.min_prominence * max, o.min_separation,
                                                 static_cast<std::size_t>(std::max(1, o.smoothing)));
  nlohmann::json report;
  report["schema"] = analysis::kSchema;
  report["source_id"] = stem;
  report["candidates"] = candidates.size();
  try {
    if (candidates.size() < 3) {
      throw NotALadderError(std::to_string(candidates.size()) + " peak(s) detected, a ladder needs 3");
    }
    const auto guesses = analysis::guesses_from_candidates(spectrum, candidates);
    const auto fit = analysis::fit_multilorentzian(spectrum, guesses);
    auto record = analysis::extract_ladder(fit.peaks, o.spacing_tolerance);
    record.source_id = stem;
    record.g2_0 = o.g2_0;
    record.raman_shift_cm = o.raman_shift_cm;
    const auto verdict = analysis::classify_fingerprint(record);

    report = analysis::to_json(record);
    nlohmann::json peaks = nlohmann::json::array();
    for (const auto& pk : fit.peaks) peaks.push_back(analysis::to_json(pk));
    report["peaks"] = peaks;
    report["fingerprint"] = {{"is_il1", verdict.is_il1}, {"reasons", verdict.reasons}};
    report["diagnostics"] = {{"residual_norm", fit.residual_norm},
                             {"iterations", fit.iterations},
                             {"offset", fit.offset},
                             {"background", o.background},
                             {"clamped_samples", clamped}};

    if (ctx.global.plot) {
      std::vector<double> model(spectrum.size()), resid(spectrum.size());
      for (std::size_t i = 0; i < spectrum.size(); ++i) {
        double m = fit.offset;
        for (const auto& pk : fit.peaks) {
          const bool nm = pk.fit_axis == AxisKind::Wavelength;
          m += analysis::lorentzian(spectrum.axis[i], nm ? pk.center_nm : pk.center_ev,
                                    nm ? pk.fwhm_nm : 1e-3 * pk.fwhm_mev, pk.area);
        }
        model[i] = m;
        resid[i] = spectrum.intensity[i] - m;
      }
      svg::Plot plot;
      plot.title = "Fit of " + stem;
      plot.x_label = kind == AxisKind::Wavelength ? "wavelength (nm)" : "energy (eV)";
      plot.y_label = "counts";
      plot.series.push_back({"data", spectrum.axis, spectrum.intensity, {}, svg::Style::Line, "#7f7f7f"});
      plot.series.push_back({"model", spectrum.axis, model, {}, svg::Style::Line, "#d62728"});
      plot.series.push_back({"residual", spectrum.axis, resid, {}, svg::Style::Line, "#1f77b4"});
      plot.write(dir / (stem + "_residual.svg"));
    }
    outcome.message = stem + ": " + std::to_string(fit.peaks.size()) + " lines, " +
                      (verdict.is_il1 ? "IL1 fingerprint" : "not an IL1 fingerprint");
  } catch (const NotALadderError& e) {
    report["error"] = std::string("not a ladder: ") + e.what();
    outcome = {kExitNotALadder, stem + ": not a ladder: " + e.what()};
  } catch (const DegeneracyError& e) {
    report["error"] = std::string("degenerate fit: ") + e.what();
    outcome = {kExitNotALadder, stem + ": degenerate fit: " + e.what()};
  } catch (const ConvergenceError& e) {
    report["error"] = std::string("no convergence: ") + e.what();
    outcome = {kExitNotALadder, stem + ": no convergence: " + e.what()};
  }
  write_json(dir / (stem + ".record.json"), report);
  return outcome;
}

}  // namespace

int run_fit(const Context& ctx, const FitOptions& o) {
  if (ctx.global.jobs < 1) throw ConfigError("jobs must be at least 1");
  if (o.input.empty()) throw ConfigError("fit needs at least one --input file");
  parse_axis_kind(o.axis);
  const auto dir = prepare_output_dir(ctx.global);
  std::vector<FitOutcome> outcomes(o.input.size());
  parallel_for(o.input.size(), ctx.global.jobs,
               [&](std::size_t i) { outcomes[i] = fit_one(ctx, o, o.input[i], dir); });
  int code = kExitOk;
  for (const auto& r : outcomes) {
    (r.code == kExitOk ? *ctx.out : *ctx.err) << r.message << '\n';
    code = std::max(code, r.code);
  }
  return code;
}

}  // namespace vibronix::cli
