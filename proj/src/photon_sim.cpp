#include "vibronix/errors.hpp"
#include "vibronix/photon_stats.hpp"
#include "vibronix/rng.hpp"

#include <algorithm>
#include <cmath>

namespace vibronix::photon {

void EmitterModel::validate() const {
  if (!(gamma_rad_per_ns >= 0.0) || !(gamma_nr_per_ns >= 0.0)) throw DomainError("decay rates must be non-negative");
  if (!(gamma_total() > 0.0)) throw DomainError("total decay rate must be positive");
  if (pump_rate_at_psat_per_ns && !(*pump_rate_at_psat_per_ns >= 0.0)) {
    throw DomainError("pump rate at Psat must be non-negative");
  }
  if (!(psat_mw > 0.0)) throw DomainError("Psat must be positive");
  if (!(detection_efficiency > 0.0 && detection_efficiency <= 1.0)) {
    throw DomainError("detection efficiency must lie in (0, 1]");
  }
  if (shelving && (!(shelving->k_isc_per_ns >= 0.0) || !(shelving->k_reset_per_ns > 0.0))) {
    throw DomainError("shelving rates: k_isc >= 0 and k_reset > 0 required");
  }
}

double EmitterModel::pump_rate(double power_mw) const {
  if (!(power_mw >= 0.0)) throw DomainError("power must be non-negative");
  return pump_rate_at_psat_per_ns.value_or(gamma_total()) * power_mw / psat_mw;
}

double EmitterModel::expected_rate_cps(double power_mw) const {
  const double r = pump_rate(power_mw);
  const double g = gamma_total();
  return 1e9 * detection_efficiency * gamma_rad_per_ns * r / (r + g);
}

void PhotonStream::validate() const {
  const auto limit = static_cast<std::int64_t>(std::llround(duration_s * 1e12));
  for (std::size_t i = 0; i < timestamps_ps.size(); ++i) {
    if (i > 0 && timestamps_ps[i] <= timestamps_ps[i - 1]) {
      throw DomainError("timestamps not strictly increasing at event " + std::to_string(i));
    }
    if (timestamps_ps[i] < 0 || timestamps_ps[i] > limit) {
      throw DomainError("timestamp outside [0, duration] at event " + std::to_string(i));
    }
  }
}

namespace {

void push_stamp(std::vector<std::int64_t>& out, double t_ns) {
  auto ps = static_cast<std::int64_t>(std::llround(t_ns * 1e3));
  if (!out.empty() && ps <= out.back()) ps = out.back() + 1;
  out.push_back(ps);
}

}  // namespace

PhotonStream simulate_cw(const EmitterModel& model, double power_mw, double duration_s, std::uint64_t seed) {
  model.validate();
  if (!(duration_s > 0.0)) throw DomainError("duration must be positive");
  PhotonStream out;
  out.duration_s = duration_s;
  out.seed = seed;
  const double r = model.pump_rate(power_mw);
  if (r == 0.0) return out;

  const double t_end = duration_s * 1e9;
  const double g_rad = model.gamma_rad_per_ns;
  const double g_nr = model.gamma_nr_per_ns;
  const double k_isc = model.shelving ? model.shelving->k_isc_per_ns : 0.0;
  const double k_reset = model.shelving ? model.shelving->k_reset_per_ns : 0.0;
  const double excited_out = g_rad + g_nr + k_isc;
  out.timestamps_ps.reserve(static_cast<std::size_t>(model.expected_rate_cps(power_mw) * duration_s * 1.1) + 16);

  Rng rng(seed);
  if (!model.shelving) {
    // Without a dark state every excitation cycle is an independent renewal:
    // draw the number of cycles up to the next detected photon and the summed
    // dwell times directly.
    const double p_detect = model.detection_efficiency * g_rad / excited_out;
    if (!(p_detect > 0.0)) return out;
    const double log_miss = std::log1p(-p_detect);
    double t = 0.0;
    for (;;) {
      double cycles = 1.0;
      if (p_detect < 1.0) cycles += std::floor(std::log(rng.uniform()) / log_miss);
      t += rng.gamma(cycles, r) + rng.gamma(cycles, excited_out);
      if (t > t_end) break;
      push_stamp(out.timestamps_ps, t);
    }
    return out;
  }
  enum class State { Ground, Excited, Dark };
  State state = State::Ground;
  double t = 0.0;
  for (;;) {
    switch (state) {
      case State::Ground:
        t += rng.exponential(r);
        state = State::Excited;
        break;
      case State::Excited: {
        t += rng.exponential(excited_out);
        const double u = rng.uniform() * excited_out;
        if (u < g_rad) {
          if (t <= t_end && rng.bernoulli(model.detection_efficiency)) push_stamp(out.timestamps_ps, t);
          state = State::Ground;
        } else if (u < g_rad + g_nr) {
          state = State::Ground;
        } else {
          state = State::Dark;
        }
        break;
      }
      case State::Dark:
        t += rng.exponential(k_reset);
        state = State::Ground;
        break;
    }
    if (t > t_end) break;
  }
  return out;
}

PhotonStream simulate_poisson(double rate_cps, double duration_s, std::uint64_t seed) {
  if (!(rate_cps >= 0.0) || !(duration_s > 0.0)) throw DomainError("rate >= 0 and duration > 0 required");
  PhotonStream out;
  out.duration_s = duration_s;
  out.seed = seed;
  if (rate_cps == 0.0) return out;
  Rng rng(seed);
  const double rate_ns = rate_cps * 1e-9;
  const double t_end = duration_s * 1e9;
  out.timestamps_ps.reserve(static_cast<std::size_t>(rate_cps * duration_s * 1.1) + 16);
  for (double t = rng.exponential(rate_ns); t <= t_end; t += rng.exponential(rate_ns)) push_stamp(out.timestamps_ps, t);
  return out;
}

PhotonStream simulate_telegraph(double on_rate_cps, double off_rate_cps, double mean_dwell_s, double duration_s,
                                std::uint64_t seed) {
  if (!(on_rate_cps >= 0.0) || !(off_rate_cps >= 0.0) || !(mean_dwell_s > 0.0) || !(duration_s > 0.0)) {
    throw DomainError("telegraph source needs non-negative rates and positive dwell and duration");
  }
  PhotonStream out;
  out.duration_s = duration_s;
  out.seed = seed;
  Rng rng(seed);
  const double t_end = duration_s * 1e9;
  const double dwell_rate = 1e-9 / mean_dwell_s;
  bool on = true;
  double t = 0.0;
  while (t < t_end) {
    const double switch_at = std::min(t + rng.exponential(dwell_rate), t_end);
    const double rate_ns = (on ? on_rate_cps : off_rate_cps) * 1e-9;
    if (rate_ns > 0.0) {
      for (double s = t + rng.exponential(rate_ns); s < switch_at; s += rng.exponential(rate_ns)) {
        push_stamp(out.timestamps_ps, s);
      }
    }
    t = switch_at;
    on = !on;
  }
  return out;
}

DecayHistogram simulate_pulsed(const EmitterModel& model, double rep_rate_mhz, double irf_sigma_ps,
                               double duration_s, std::uint64_t seed, const PulsedOptions& options) {
  model.validate();
  if (!(rep_rate_mhz > 0.0) || !(duration_s > 0.0) || !(irf_sigma_ps >= 0.0) || !(options.bin_width_ps > 0.0)) {
    throw DomainError("pulsed simulation needs positive repetition rate, duration, bin width and sigma >= 0");
  }
  if (!(options.excitation_probability > 0.0 && options.excitation_probability <= 1.0)) {
    throw DomainError("excitation probability must lie in (0, 1]");
  }
  DecayHistogram hist;
  hist.period_ps = 1e6 / rep_rate_mhz;
  // Whole number of bins per period; the requested width is adjusted slightly.
  const auto n_bins = static_cast<std::size_t>(std::max(1.0, std::round(hist.period_ps / options.bin_width_ps)));
  hist.bin_width_ps = hist.period_ps / static_cast<double>(n_bins);
  hist.counts.assign(n_bins, 0.0);
  const double lifetime_ps = 1e3 * model.lifetime_ns();
  if (hist.period_ps < 5.0 * lifetime_ps) {
    hist.warnings.push_back("repetition period shorter than five lifetimes; decays wrap into later pulses");
  }

  Rng rng(seed);
  const double gamma_ps = model.gamma_total() * 1e-3;
  const double qy = model.quantum_yield();
  const auto n_pulses = static_cast<std::int64_t>(std::floor(duration_s * rep_rate_mhz * 1e6));
  double busy_until = -1.0;
  for (std::int64_t k = 0; k < n_pulses; ++k) {
    const double pulse = static_cast<double>(k) * hist.period_ps;
    if (pulse < busy_until) continue;
    if (!rng.bernoulli(options.excitation_probability)) continue;
    const double decay = rng.exponential(gamma_ps);
    busy_until = pulse + decay;
    if (!rng.bernoulli(qy) || !rng.bernoulli(model.detection_efficiency)) continue;
    const double jitter = irf_sigma_ps > 0.0 ? irf_sigma_ps * rng.normal() : 0.0;
    double delay = std::fmod(decay + jitter, hist.period_ps);
    if (delay < 0.0) delay += hist.period_ps;
    auto bin = static_cast<std::size_t>(delay / hist.bin_width_ps);
    if (bin >= n_bins) bin = n_bins - 1;
    hist.counts[bin] += 1.0;
  }
  return hist;
}

}  // namespace vibronix::photon
