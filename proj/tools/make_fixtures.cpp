// Regenerates the bundled sample data under the given directory (default: data).
//   data/il1_sample.csv        IL1-like four-line spectrum, 300 K, Poisson noise
//   data/broad_emitter.csv     broad phonon-sideband emitter without a resolvable ladder
//   data/ensemble40/*.json     synthetic 40-emitter population records

#include "vibronix/analysis.hpp"
#include "vibronix/vibronic_model.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>

using namespace vibronix;
namespace fs = std::filesystem;

namespace {

void write_csv(const Spectrum& s, const fs::path& path) {
  std::ofstream out(path);
  analysis::write_spectrum_csv(s, out);
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Spectrum il1_sample() {
  vibronic::VibronicParams p;
  p.s_total = vibronic::huang_rhys_from_dw(0.38);
  vibronic::TemperatureModel t;
  t.alpha_mev_per_k3 = vibronic::TemperatureModel::alpha_for(p.gamma_zpl_mev, 300.0);
  vibronic::SynthesisOptions opt;
  opt.noise_seed = 7;
  return vibronic::synthesize_spectrum(p, t, 300.0, AxisKind::Wavelength, uniform_grid(530.0, 740.0, 0.02), opt);
}

Spectrum broad_sample() {
  // NV-like: strong coupling to a soft mode, lines much wider than their spacing.
  vibronic::VibronicParams p;
  p.e_zpl_ev = 1.945;
  p.lvm_quantum_mev = 65.0;
  p.anharmonicity_mev = 0.0;
  p.s_total = 3.5;
  p.gamma_zpl_mev = 100.0;
  p.gamma_vib_mev = 10.0;
  p.n_peaks = 8;
  vibronic::TemperatureModel t;
  t.alpha_mev_per_k3 = vibronic::TemperatureModel::alpha_for(p.gamma_zpl_mev, 300.0);
  vibronic::SynthesisOptions opt;
  opt.photon_budget = 1e8;
  opt.noise_seed = 11;
  return vibronic::synthesize_spectrum(p, t, 300.0, AxisKind::Wavelength, uniform_grid(580.0, 880.0, 0.1), opt);
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path root = argc > 1 ? fs::path(argv[1]) : fs::path("data");
  try {
    fs::create_directories(root / "ensemble40");
    write_csv(il1_sample(), root / "il1_sample.csv");
    write_csv(broad_sample(), root / "broad_emitter.csv");
    for (const auto& r : analysis::synthetic_ensemble(40, 2024)) {
      std::ofstream out(root / "ensemble40" / (r.source_id + ".json"));
      out << analysis::to_json(r).dump(2) << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "make_fixtures: " << e.what() << '\n';
    return 1;
  }
  std::cout << "fixtures written to " << root.string() << '\n';
  return 0;
}
