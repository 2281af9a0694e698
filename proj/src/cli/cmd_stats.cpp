#include "vibronix/analysis.hpp"
#include "vibronix/svg.hpp"

#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>

namespace vibronix::cli {

void register_stats(ParamSet& p, StatsOptions& o) {
  p.add("input", o.input, "record JSON files or directories of them");
  p.add("synthetic", o.synthetic, "generate this many synthetic records instead of reading files");
  p.add("synthetic_seed", o.synthetic_seed, "seed of the synthetic population");
  p.add("synthetic_mean_ev", o.synthetic_mean_ev, "mean ZPL energy of the synthetic population (eV)");
  p.add("synthetic_sd_ev", o.synthetic_sd_ev, "ZPL energy spread of the synthetic population (eV)");
}

namespace {

std::vector<std::filesystem::path> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<std::filesystem::path> files;
  for (const auto& in : inputs) {
    const std::filesystem::path p(in);
    if (std::filesystem::is_directory(p)) {
      std::vector<std::filesystem::path> found;
      for (const auto& e : std::filesystem::directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".json") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.push_back(p);
    }
  }
  return files;
}

analysis::EmitterRecord read_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open record " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("record " + path.string() + ": " + e.what());
  }
  try {
    auto r = analysis::record_from_json(j);
    if (r.source_id.empty()) r.source_id = path.stem().string();
    return r;
  } catch (const std::exception& e) {
    throw ConfigError("record " + path.string() + ": " + e.what());
  }
}

struct RegressionSpec {
  const char* name;
  const char* y_label;
  double analysis::EmitterRecord::*field;
};

}  // namespace

int run_stats(const Context& ctx, const StatsOptions& o) {
  if (ctx.global.jobs < 1) throw ConfigError("jobs must be at least 1");
  std::vector<analysis::EmitterRecord> records;
  if (o.synthetic > 0) {
    if (!o.input.empty()) throw ConfigError("use either input or synthetic, not both");
    records = analysis::synthetic_ensemble(static_cast<std::size_t>(o.synthetic), o.synthetic_seed,
                                           o.synthetic_mean_ev, o.synthetic_sd_ev);
  } else {
    const auto files = expand_inputs(o.input);
    if (files.empty()) throw ConfigError("stats needs at least one record");
    records.resize(files.size());
    parallel_for(files.size(), ctx.global.jobs, [&](std::size_t i) { records[i] = read_record(files[i]); });
  }
  const auto summary = analysis::ensemble_stats(records);

  const std::vector<RegressionSpec> specs = {
      {"fwhm_vs_energy", "ZPL FWHM (nm)", &analysis::EmitterRecord::zpl_fwhm_nm},
      {"lvm_vs_energy", "LVM quantum (meV)", &analysis::EmitterRecord::lvm_quantum_mev},
      {"anharmonicity_vs_energy", "anharmonicity (meV)", &analysis::EmitterRecord::anharmonicity_mev},
  };
  const auto dir = prepare_output_dir(ctx.global);
  nlohmann::json out = analysis::to_json(summary);
  nlohmann::json regressions = nlohmann::json::object();
  nlohmann::json notices = nlohmann::json::array();
  for (const auto& spec : specs) {
    std::vector<double> x, y;
    for (const auto& r : records) {
      const double v = r.*spec.field;
      if (std::isfinite(r.zpl_energy_ev) && std::isfinite(v)) {
        x.push_back(r.zpl_energy_ev);
        y.push_back(v);
      }
    }
    const bool spread = !x.empty() && *std::max_element(x.begin(), x.end()) > *std::min_element(x.begin(), x.end());
    if (x.size() < 3 || !spread) {
      regressions[spec.name] = nullptr;
      notices.push_back(std::string(spec.name) + " skipped: " + std::to_string(x.size()) +
                        " usable record(s), need 3 with distinct energies");
      continue;
    }
    const auto reg = analysis::regress_with_ci(x, y);
    nlohmann::json rj = analysis::to_json(reg);
    rj["slope_excludes_zero"] = reg.slope_ci_lo() > 0.0 || reg.slope_ci_hi() < 0.0;
    regressions[spec.name] = rj;
    if (ctx.global.plot) {
      svg::Plot plot{spec.name, "ZPL energy (eV)", spec.y_label, {}};
      std::vector<double> line;
      for (double g : reg.grid) line.push_back(reg.predict(g));
      plot.series.push_back({"95% band", reg.grid, reg.band_lo, reg.band_hi, svg::Style::Band, "#ff7f0e"});
      plot.series.push_back({"regression", reg.grid, line, {}, svg::Style::Line, "#d62728"});
      plot.series.push_back({"emitters", x, y, {}, svg::Style::Points, "#1f77b4"});
      plot.write(dir / (std::string(spec.name) + ".svg"));
    }
  }
  out["regressions"] = regressions;
  out["notices"] = notices;
  write_json(dir / "ensemble.json", out);
  for (const auto& n : notices) *ctx.err << "notice: " << n.get<std::string>() << '\n';
  const auto& e = summary.fields.at("zpl_energy_ev");
  char line[160];
  std::snprintf(line, sizeof line, "stats: %zu records, ZPL %.4f +/- %.4f eV\n", summary.count, e.mean, e.sd);
  *ctx.out << line;
  return kExitOk;
}

}  // namespace vibronix::cli
