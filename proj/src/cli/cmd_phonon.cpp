#include "vibronix/analysis.hpp"
#include "vibronix/lattice_phonon.hpp"
#include "vibronix/svg.hpp"

#include "commands.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace vibronix::cli {

void register_phonon(ParamSet& p, PhononOptions& o) {
  p.add("lattice", o.lattice, "chain or diamond_cubic");
  p.add("size", o.size, "atoms (chain) or conventional cells per edge (diamond)");
  p.add("defect", o.defect, "none, vacancy, split_interstitial, triple_interstitial or mass_impurity");
  p.add("defect_stiffness_scale", o.defect_stiffness_scale, "stiffness multiplier for defect springs");
  p.add("periodic", o.periodic, "periodic boundary");
  p.add("mass_amu", o.mass_amu, "host atom mass (amu)");
  p.add("stiffness", o.stiffness, "bulk spring stiffness (eV/A^2)");
  p.add("impurity_mass_ratio", o.impurity_mass_ratio, "impurity mass / host mass");
  p.add("calibrate_band", o.calibrate_band, "rescale the stiffness so the bulk band ends at band_target_mev");
  p.add("band_target_mev", o.band_target_mev, "bulk band maximum used by calibrate_band (meV)");
  p.add("target_lvm_mev", o.target_lvm_mev, "choose defect_stiffness_scale so the top mode sits here (meV)");
  p.add("band_max_mev", o.band_max_mev, "bulk band maximum for LVM classification (meV)");
  p.add("ipr_threshold", o.ipr_threshold, "IPR below which a mode above the band counts as localized");
  p.add("lattice_file", o.lattice_file, "JSON lattice model instead of a generated one");
}

int run_phonon(const Context& ctx, const PhononOptions& o) {
  if (ctx.global.jobs < 1) throw ConfigError("jobs must be at least 1");
  lattice::LatticeModel model;
  double band_max = 0.0;
  nlohmann::json info;
  if (!o.lattice_file.empty()) {
    std::ifstream in(o.lattice_file);
    if (!in) throw ConfigError("cannot open lattice file " + o.lattice_file);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("lattice file " + o.lattice_file + ": " + e.what());
    }
    model = lattice::lattice_from_json(j);
    model.validate();
    if (!o.band_max_mev) throw ConfigError("band_max_mev is required with lattice_file");
    band_max = *o.band_max_mev;
    info["source"] = std::filesystem::path(o.lattice_file).filename().string();
  } else {
    lattice::LatticeSpec spec;
    spec.kind = lattice::parse_lattice_kind(o.lattice);
    spec.size = o.size;
    spec.defect = lattice::parse_defect_kind(o.defect);
    spec.defect_stiffness_scale = o.defect_stiffness_scale;
    spec.periodic = o.periodic;
    spec.mass_amu = o.mass_amu;
    spec.stiffness = o.stiffness;
    spec.impurity_mass_ratio = o.impurity_mass_ratio;
    if (o.calibrate_band) spec.stiffness = lattice::calibrated_stiffness(spec, o.band_target_mev);
    if (o.target_lvm_mev) spec.defect_stiffness_scale = lattice::calibrate_defect_scale(spec, *o.target_lvm_mev);
    model = lattice::build_lattice(spec);
    band_max = o.band_max_mev.value_or(lattice::reference_band_max(spec));
    info["lattice"] = o.lattice;
    info["size"] = spec.size;
    info["defect"] = lattice::defect_kind_name(spec.defect);
    info["stiffness"] = spec.stiffness;
    info["defect_stiffness_scale"] = spec.defect_stiffness_scale;
    info["periodic"] = spec.periodic;
  }
  const auto modes = lattice::solve_modes(model);
  const auto lvms = lattice::classify_lvm(modes, band_max, o.ipr_threshold);

  const auto dir = prepare_output_dir(ctx.global);
  lattice::write_mode_table(modes, lvms, dir / "modes.csv");
  nlohmann::json summary;
  summary["schema"] = analysis::kSchema;
  summary["model"] = info;
  summary["n_atoms"] = modes.n_atoms;
  summary["n_modes"] = modes.frequencies_mev.size();
  summary["zero_modes"] = modes.zero_modes;
  summary["band_max_mev"] = band_max;
  summary["max_frequency_mev"] = modes.frequencies_mev.empty() ? 0.0 : modes.frequencies_mev.back();
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& l : lvms) lv.push_back({{"mode", l.mode_index}, {"frequency_mev", l.frequency_mev}, {"ipr", l.ipr}});
  summary["lvms"] = lv;
  write_json(dir / "phonon.json", summary);

  if (ctx.global.plot) {
    svg::Plot plot{"Phonon modes", "frequency (meV)", "IPR", {}};
    std::vector<double> f, ipr, lf, lipr;
    for (std::size_t i = 0; i < modes.frequencies_mev.size(); ++i) {
      f.push_back(modes.frequencies_mev[i]);
      ipr.push_back(modes.ipr[i]);
    }
    for (const auto& l : lvms) {
      lf.push_back(l.frequency_mev);
      lipr.push_back(l.ipr);
    }
    plot.series.push_back({"modes", f, ipr, {}, svg::Style::Points, "#1f77b4"});
    plot.series.push_back({"LVM", lf, lipr, {}, svg::Style::Points, "#d62728"});
    plot.series.push_back({"band edge", {band_max, band_max}, {0.0, 1.0}, {}, svg::Style::Line, "#7f7f7f"});
    plot.write(dir / "ipr.svg");
  }
  char line[160];
  std::snprintf(line, sizeof line, "phonon: %d atoms, %zu modes, band max %.3f meV, %zu LVM(s)\n", modes.n_atoms,
                modes.frequencies_mev.size(), band_max, lvms.size());
  *ctx.out << line;
  return kExitOk;
}

}  // namespace vibronix::cli
