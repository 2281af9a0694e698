#include "vibronix/cli.hpp"
#include "vibronix/errors.hpp"

#include "commands.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <mutex>

namespace vibronix::cli {

std::optional<std::uint64_t> resolve_seed(const Global& g) {
  std::optional<std::uint64_t> seed = g.seed;
  if (!seed) {
    if (const char* env = std::getenv("VIBRONIX_SEED"); env && *env) {
      char* end = nullptr;
      const unsigned long long v = std::strtoull(env, &end, 10);
      if (*end != '\0') throw ConfigError(std::string("VIBRONIX_SEED is not an integer: ") + env);
      seed = v;
    }
  }
  if (seed && *seed == 0) throw ConfigError("seed 0 is reserved; pass an explicit non-zero seed");
  return seed;
}

std::uint64_t require_seed(const Global& g, const char* command) {
  const auto seed = resolve_seed(g);
  if (!seed) throw ConfigError(std::string(command) + " needs --seed (or VIBRONIX_SEED)");
  return *seed;
}

std::uint64_t child_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  std::atomic<std::size_t> next{0};
  const auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::filesystem::path prepare_output_dir(const Global& g) {
  std::filesystem::path dir(g.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  return dir;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vibronix: vibronic spectra, photon statistics and lattice phonons"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "vibronix 1.0.0");

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;

  SynthOptions synth;
  FitOptions fit;
  McOptions mc;
  PhononOptions phonon;
  StatsOptions stats;
  Global g_synth, g_fit, g_mc, g_phonon, g_stats;

  auto* c_synth = app.add_subcommand("synth", "synthesize a vibronic spectrum and its ground truth");
  auto* c_fit = app.add_subcommand("fit", "fit spectra and extract emitter records");
  auto* c_mc = app.add_subcommand("mc", "photon-statistics Monte Carlo and fits");
  auto* c_phonon = app.add_subcommand("phonon", "lattice phonon modes and localized-mode analysis");
  auto* c_stats = app.add_subcommand("stats", "ensemble statistics and regressions");

  ParamSet p_synth(c_synth), p_fit(c_fit), p_mc(c_mc), p_phonon(c_phonon), p_stats(c_stats);
  p_synth.add_global(g_synth);
  p_fit.add_global(g_fit);
  p_mc.add_global(g_mc);
  p_phonon.add_global(g_phonon);
  p_stats.add_global(g_stats);
  register_synth(p_synth, synth);
  register_fit(p_fit, fit);
  register_mc(p_mc, mc);
  register_phonon(p_phonon, phonon);
  register_stats(p_stats, stats);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << '\n';
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }

  const auto preset_hook = [](ParamSet& p, auto& opts) {
    return [&p, &opts](const nlohmann::json& config) {
      p.apply_flag("preset");
      if (!p.flag_given("preset") && config.contains("preset")) {
        if (!config.at("preset").is_string()) throw ConfigError("config key 'preset' must be a string");
        opts.preset = config.at("preset").get<std::string>();
      }
      if (!opts.preset.empty()) apply_preset(opts.preset, opts);
    };
  };

  try {
    if (c_synth->parsed()) {
      p_synth.resolve(preset_hook(p_synth, synth));
      ctx.global = g_synth;
      return run_synth(ctx, synth);
    }
    if (c_fit->parsed()) {
      p_fit.resolve();
      ctx.global = g_fit;
      return run_fit(ctx, fit);
    }
    if (c_mc->parsed()) {
      p_mc.resolve(preset_hook(p_mc, mc));
      ctx.global = g_mc;
      return run_mc(ctx, mc);
    }
    if (c_phonon->parsed()) {
      p_phonon.resolve();
      ctx.global = g_phonon;
      return run_phonon(ctx, phonon);
    }
    p_stats.resolve();
    ctx.global = g_stats;
    return run_stats(ctx, stats);
  } catch (const NotALadderError& e) {
    err << "not a ladder: " << e.what() << '\n';
    return kExitNotALadder;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace vibronix::cli
