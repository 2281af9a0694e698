#include "vibronix/analysis.hpp"
#include "vibronix/svg.hpp"
#include "vibronix/units.hpp"
#include "vibronix/vibronic_model.hpp"

#include "commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace vibronix::cli {

// IL1 headline numbers shared by synth and mc.
//   ZPL energy            2.27 eV
//   LVM quantum           187 meV
//   anharmonicity         1.2 meV per level
//   Debye-Waller factor   0.38
//   ZPL FWHM (300 K)      1.28 meV
//   gamma_vib             0.26 meV
//   excited-state tau     2.4 ns
//   Psat                  3.6 mW
//   I_inf                 12.5e6 cps
//   setup efficiency      0.038
//   visibility            0.67
//   reported QY           0.92
void apply_preset(const std::string& name, SynthOptions& o) {
  if (name != "il1") throw ConfigError("unknown preset '" + name + "' (available: il1)");
  o.e_zpl_ev = 2.27;
  o.lvm_quantum_mev = 187.0;
  o.anharmonicity_mev = 1.2;
  o.s_factor.reset();
  o.debye_waller = 0.38;
  o.zpl_fwhm_mev = 1.28;
  o.gamma_vib_mev = 0.26;
  o.n_peaks = 4;
}

void apply_preset(const std::string& name, McOptions& o) {
  if (name != "il1") throw ConfigError("unknown preset '" + name + "' (available: il1)");
  o.lifetime_ns = 2.4;
  o.internal_quantum_yield = 1.0;
  o.psat_mw = 3.6;
  o.i_inf_cps = 12.5e6;
  o.setup_efficiency = 0.038;
  o.visibility = 0.67;
  o.reported_qy = 0.92;
}

void register_synth(ParamSet& p, SynthOptions& o) {
  p.add("preset", o.preset, "parameter preset (il1)");
  p.add("e_zpl_ev", o.e_zpl_ev, "ZPL energy (eV)");
  p.add("lvm_quantum_mev", o.lvm_quantum_mev, "LVM quantum (meV)");
  p.add("anharmonicity_mev", o.anharmonicity_mev, "spacing shrinkage per level (meV)");
  p.add("s_factor", o.s_factor, "Huang-Rhys factor (overrides debye_waller)");
  p.add("debye_waller", o.debye_waller, "Debye-Waller factor, sets S = -ln DW");
  p.add("zpl_fwhm_mev", o.zpl_fwhm_mev, "ZPL FWHM at 300 K (meV)");
  p.add("gamma_vib_mev", o.gamma_vib_mev, "width added per vibronic order (meV)");
  p.add("n_peaks", o.n_peaks, "number of ladder lines");
  p.add("temperature", o.temperature, "temperature (K)");
  p.add("resolution_mev", o.resolution_mev, "instrument width floor (meV)");
  p.add("photon_budget", o.photon_budget, "expected photons in a Poisson weight of one");
  p.add("axis", o.axis, "wavelength_nm or energy_ev");
  p.add("grid_min", o.grid_min, "grid start (axis units)");
  p.add("grid_max", o.grid_max, "grid end (axis units)");
  p.add("grid_step", o.grid_step, "grid step (axis units)");
  p.add("noise", o.noise, "Poisson noise when seeded");
}

int run_synth(const Context& ctx, const SynthOptions& o) {
  if (ctx.global.jobs < 1) throw ConfigError("jobs must be at least 1");
  vibronic::VibronicParams params;
  params.e_zpl_ev = o.e_zpl_ev;
  params.lvm_quantum_mev = o.lvm_quantum_mev;
  params.anharmonicity_mev = o.anharmonicity_mev;
  if (o.s_factor) {
    params.s_total = *o.s_factor;
  } else {
    if (!(o.debye_waller > 0.0 && o.debye_waller <= 1.0)) throw ConfigError("debye_waller must lie in (0, 1]");
    params.s_total = vibronic::huang_rhys_from_dw(o.debye_waller);
  }
  params.gamma_zpl_mev = o.zpl_fwhm_mev;
  params.gamma_vib_mev = o.gamma_vib_mev;
  params.n_peaks = o.n_peaks;
  params.validate();
  const int orders = params.s_total == 0.0 ? 1 : params.n_peaks;

  vibronic::TemperatureModel temp;
  temp.alpha_mev_per_k3 = vibronic::TemperatureModel::alpha_for(o.zpl_fwhm_mev, 300.0);
  temp.resolution_mev = o.resolution_mev;
  temp.validate();
  if (!(o.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(o.photon_budget > 0.0)) throw ConfigError("photon_budget must be positive");

  const AxisKind kind = parse_axis_kind(o.axis);
  double lo = 0.0, hi = 0.0, step = 0.0;
  double widest_mev = 0.0;
  for (int n = 0; n < orders; ++n) widest_mev = std::max(widest_mev, vibronic::peak_fwhm(params, temp, o.temperature, n));
  const double e_hi = vibronic::peak_energy(params, 0);
  const double e_lo = vibronic::peak_energy(params, orders - 1);
  if (kind == AxisKind::Wavelength) {
    const double margin = std::max(15.0, 10.0 * units::width_mev_to_nm(widest_mev, units::ev_to_nm(e_lo)));
    lo = std::floor(units::ev_to_nm(e_hi) - margin);
    hi = std::ceil(units::ev_to_nm(e_lo) + margin);
    step = 0.02;
  } else {
    const double margin = std::max(0.05, 10.0 * widest_mev * 1e-3);
    lo = std::floor((e_lo - margin) * 100.0) / 100.0;
    hi = std::ceil((e_hi + margin) * 100.0) / 100.0;
    step = 5e-5;
  }
  lo = o.grid_min.value_or(lo);
  hi = o.grid_max.value_or(hi);
  step = o.grid_step.value_or(step);
  if (!(step > 0.0) || !(hi > lo)) throw ConfigError("grid needs grid_max > grid_min and a positive step");
  if ((hi - lo) / step > 5e6) throw ConfigError("grid has more than 5e6 samples");
  const auto grid = uniform_grid(lo, hi, step);

  const auto seed = resolve_seed(ctx.global);
  vibronic::SynthesisOptions so;
  so.photon_budget = o.photon_budget;
  if (seed && o.noise) so.noise_seed = *seed;
  Spectrum spectrum = vibronic::synthesize_spectrum(params, temp, o.temperature, kind, grid, so);
  spectrum.temperature_k = o.temperature;

  const auto dir = prepare_output_dir(ctx.global);
  {
    std::ofstream csv(dir / "spectrum.csv", std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write spectrum.csv");
    analysis::write_spectrum_csv(spectrum, csv);
  }

  nlohmann::json truth;
  truth["schema"] = analysis::kSchema;
  truth["params"] = {{"e_zpl_ev", params.e_zpl_ev},
                     {"lvm_quantum_mev", params.lvm_quantum_mev},
                     {"anharmonicity_mev", params.anharmonicity_mev},
                     {"s_factor", params.s_total},
                     {"debye_waller", vibronic::debye_waller(params.s_total)},
                     {"zpl_fwhm_mev_300k", params.gamma_zpl_mev},
                     {"gamma_vib_mev", params.gamma_vib_mev},
                     {"n_peaks", orders}};
  truth["temperature_k"] = o.temperature;
  truth["alpha_mev_per_k3"] = temp.alpha_mev_per_k3;
  truth["resolution_mev"] = temp.resolution_mev;
  truth["axis"] = axis_kind_name(kind);
  truth["grid"] = {{"min", lo}, {"max", hi}, {"step", step}, {"samples", grid.size()}};
  truth["photon_budget"] = o.photon_budget;
  truth["noise_seed"] = so.noise_seed ? nlohmann::json(*so.noise_seed) : nlohmann::json(nullptr);
  nlohmann::json peaks = nlohmann::json::array();
  for (int n = 0; n < orders; ++n) {
    const double e = vibronic::peak_energy(params, n);
    const double w = vibronic::peak_fwhm(params, temp, o.temperature, n);
    peaks.push_back({{"order", n},
                     {"energy_ev", e},
                     {"wavelength_nm", units::ev_to_nm(e)},
                     {"fwhm_mev", w},
                     {"fwhm_nm", units::width_mev_to_nm(w, units::ev_to_nm(e))},
                     {"weight", vibronic::fc_weight(params.s_total, n)}});
  }
  truth["peaks"] = peaks;
  write_json(dir / "truth.json", truth);

  if (ctx.global.plot) {
    svg::Plot plot;
    plot.title = "Synthesized spectrum";
    plot.x_label = kind == AxisKind::Wavelength ? "wavelength (nm)" : "energy (eV)";
    plot.y_label = "counts";
    plot.series.push_back({"spectrum", spectrum.axis, spectrum.intensity, {}, svg::Style::Line, "#1f77b4"});
    plot.write(dir / "spectrum.svg");
  }
  *ctx.out << "synth: " << grid.size() << " samples, " << orders << " lines -> " << (dir / "spectrum.csv").string()
           << '\n';
  return kExitOk;
}

}  // namespace vibronix::cli
