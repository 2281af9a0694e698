#include "vibronix/errors.hpp"
#include "vibronix/least_squares.hpp"
#include "vibronix/photon_stats.hpp"
#include "vibronix/rng.hpp"
#include "vibronix/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace vibronix::photon {

// ---------------------------------------------------------------- g2

G2Histogram hbt_correlate(const PhotonStream& stream, std::uint64_t splitter_seed, double binwidth_ns,
                          double window_ns) {
  if (!(binwidth_ns > 0.0) || !(window_ns > binwidth_ns)) throw DomainError("need binwidth > 0 and window > binwidth");
  if (stream.timestamps_ps.empty()) throw DomainError("cannot correlate an empty photon stream");
  if (!(stream.duration_s > 0.0)) throw DomainError("stream duration must be positive");

  Rng rng(splitter_seed);
  std::vector<std::int64_t> a, b;
  a.reserve(stream.size() / 2 + 16);
  b.reserve(stream.size() / 2 + 16);
  for (std::int64_t t : stream.timestamps_ps) (rng.bernoulli(0.5) ? a : b).push_back(t);

  const auto half = static_cast<long>(std::floor(window_ns / binwidth_ns + 1e-9));
  const std::size_t n_bins = 2 * static_cast<std::size_t>(half) + 1;
  std::vector<double> counts(n_bins, 0.0);
  const double bw_ps = binwidth_ns * 1e3;
  const auto reach = static_cast<std::int64_t>(std::ceil((static_cast<double>(half) + 0.5) * bw_ps));

  std::size_t lo = 0;
  for (std::int64_t ta : a) {
    while (lo < b.size() && b[lo] < ta - reach) ++lo;
    for (std::size_t j = lo; j < b.size() && b[j] <= ta + reach; ++j) {
      const double tau = static_cast<double>(b[j] - ta);
      const auto k = static_cast<long>(std::llround(tau / bw_ps));
      if (k >= -half && k <= half) counts[static_cast<std::size_t>(k + half)] += 1.0;
    }
  }

  const double duration_ns = stream.duration_s * 1e9;
  const double norm = static_cast<double>(a.size()) * static_cast<double>(b.size()) * binwidth_ns / duration_ns;
  G2Histogram h;
  h.binwidth_ns = binwidth_ns;
  h.normalization = norm;
  h.coincidences = counts;
  h.tau_ns.resize(n_bins);
  h.normalized.resize(n_bins);
  h.sigma.resize(n_bins);
  for (std::size_t i = 0; i < n_bins; ++i) {
    h.tau_ns[i] = (static_cast<double>(i) - static_cast<double>(half)) * binwidth_ns;
    h.normalized[i] = norm > 0.0 ? counts[i] / norm : 0.0;
    h.sigma[i] = norm > 0.0 ? std::sqrt(std::max(counts[i], 1.0)) / norm : 0.0;
  }
  return h;
}

G2Histogram make_g2_histogram(std::vector<double> tau_ns, std::vector<double> g2, double normalization) {
  if (tau_ns.size() != g2.size() || tau_ns.size() < 2) throw DomainError("tau and g2 must have equal length >= 2");
  G2Histogram h;
  h.binwidth_ns = std::abs(tau_ns[1] - tau_ns[0]);
  h.normalization = normalization;
  h.tau_ns = std::move(tau_ns);
  h.normalized = std::move(g2);
  for (double v : h.normalized) {
    h.coincidences.push_back(v * normalization);
    h.sigma.push_back(std::sqrt(std::max(v * normalization, 1.0)) / normalization);
  }
  return h;
}

double g2_model(double tau_ns, double a, double tau1_ns, double tau2_ns) {
  const double x = std::abs(tau_ns);
  return 1.0 - (1.0 + a) * std::exp(-x / tau1_ns) + a * std::exp(-x / tau2_ns);
}

G2Fit fit_g2(const G2Histogram& hist, const G2FitOptions& options) {
  const std::size_t n = hist.tau_ns.size();
  if (n < 5 || hist.normalized.size() != n) throw DomainError("g2 histogram too short to fit");
  std::vector<double> w(n, 1.0);
  if (hist.sigma.size() == n) {
    for (std::size_t i = 0; i < n; ++i) w[i] = hist.sigma[i] > 0.0 ? 1.0 / hist.sigma[i] : 1.0;
  }

  // Antibunching-only scan seeds tau1.
  double best_tau = 1.0, best_cost = std::numeric_limits<double>::infinity();
  const double tau_max = std::max(std::abs(hist.tau_ns.front()), std::abs(hist.tau_ns.back()));
  for (int k = 0; k <= 200; ++k) {
    const double tau = hist.binwidth_ns * 0.2 * std::pow(tau_max / (hist.binwidth_ns * 0.2), k / 200.0);
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = (g2_model(hist.tau_ns[i], 0.0, tau, 1.0) - hist.normalized[i]) * w[i];
      cost += r * r;
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_tau = tau;
    }
  }
  const double peak = *std::max_element(hist.normalized.begin(), hist.normalized.end());
  const double a0 = std::max(0.01, peak - 1.0);

  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double a = p(0), t1 = std::exp(p(1)), t2 = std::exp(p(2));
    if (!std::isfinite(t1) || !std::isfinite(t2)) return false;
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), 3);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = std::abs(hist.tau_ns[i]);
      const double e1 = std::exp(-x / t1), e2 = std::exp(-x / t2);
      const auto ii = static_cast<Eigen::Index>(i);
      r(ii) = (1.0 - (1.0 + a) * e1 + a * e2 - hist.normalized[i]) * w[i];
      if (jac) {
        (*jac)(ii, 0) = (-e1 + e2) * w[i];
        (*jac)(ii, 1) = -(1.0 + a) * e1 * (x / t1) * w[i];
        (*jac)(ii, 2) = a * e2 * (x / t2) * w[i];
      }
    }
    return true;
  };
  // Antibunching-only model (a = 0) as the nested reference.
  const ResidualFn fn1 = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    Eigen::VectorXd full(3);
    full << 0.0, p(0), p(0);
    Eigen::MatrixXd j3;
    if (!fn(full, r, jac ? &j3 : nullptr)) return false;
    if (jac) *jac = j3.col(1);
    return true;
  };
  LmOptions lm;
  lm.max_iterations = options.max_iterations;
  Eigen::VectorXd q0(1);
  q0 << std::log(best_tau);
  const LmResult plain = levenberg_marquardt(fn1, q0, lm);
  Eigen::VectorXd p0(3);
  p0 << a0, std::log(best_tau), std::log(std::min(10.0 * best_tau, tau_max));
  const LmResult full = levenberg_marquardt(fn, p0, lm);
  if (!plain.converged && !full.converged) {
    throw ConvergenceError("g2 fit did not converge", full.residual_norm(), full.iterations);
  }

  // The bunching term is kept only when it is distinct from the dip and
  // lowers chi^2 significantly; otherwise a trades off against tau2.
  bool bunching = false;
  if (full.converged) {
    const double t1 = std::exp(full.params(1)), t2 = std::exp(full.params(2));
    const double drop = plain.converged ? plain.cost - full.cost : std::numeric_limits<double>::infinity();
    bunching = drop > options.min_chi2_drop && std::abs(t2 - t1) > 0.5 * std::min(t1, t2);
  }

  G2Fit fit;
  if (bunching) {
    const LmResult& res = full;
    fit.bunching_amplitude = res.params(0);
    fit.antibunching_time_ns = std::exp(res.params(1));
    fit.bunching_time_ns = std::exp(res.params(2));
    fit.residual_norm = res.residual_norm();
    fit.iterations = plain.iterations + res.iterations;
    const Eigen::MatrixXd cov = res.covariance(false);
    fit.bunching_amplitude_err = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.antibunching_time_err = fit.antibunching_time_ns * std::sqrt(std::max(0.0, cov(1, 1)));
  } else {
    fit.antibunching_time_ns = std::exp(plain.params(0));
    fit.residual_norm = plain.residual_norm();
    fit.iterations = plain.iterations + full.iterations;
    const Eigen::MatrixXd cov = plain.covariance(false);
    fit.antibunching_time_err = fit.antibunching_time_ns * std::sqrt(std::max(0.0, cov(0, 0)));
  }
  fit.two_level = fit.bunching_amplitude < options.bunching_threshold;
  // g2(0) is read from the zero-delay bin; the model is zero there by construction.
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(hist.tau_ns[i]) < 0.5 * hist.binwidth_ns) {
      sum += hist.normalized[i];
      ++count;
    }
  }
  fit.g2_0 = count > 0 ? sum / count : 0.0;
  return fit;
}

// ---------------------------------------------------------------- saturation

SaturationFit fit_saturation(const std::vector<SaturationPoint>& points, BackgroundModel background) {
  if (points.size() < 4) throw DomainError("saturation fit needs at least 4 points");
  const bool with_bg = background == BackgroundModel::Linear;
  const std::size_t n = points.size();
  double p_min = std::numeric_limits<double>::infinity(), p_max = 0.0;
  for (const auto& pt : points) {
    if (!(pt.power_mw > 0.0) || !std::isfinite(pt.rate_cps)) throw DomainError("powers must be positive, rates finite");
    p_min = std::min(p_min, pt.power_mw);
    p_max = std::max(p_max, pt.power_mw);
  }
  const double scale = std::max_element(points.begin(), points.end(), [](auto& x, auto& y) {
                         return x.rate_cps < y.rate_cps;
                       })->rate_cps;
  if (!(scale > 0.0)) throw DomainError("all rates are zero");

  // Variable projection scan: for fixed Psat the model is linear.
  auto solve_linear = [&](double psat, double& rss) {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(n), with_bg ? 2 : 1);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      x(ii, 0) = points[i].power_mw / (psat + points[i].power_mw);
      if (with_bg) x(ii, 1) = points[i].power_mw;
      y(ii) = points[i].rate_cps / scale;
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    rss = (x * beta - y).squaredNorm();
    return beta;
  };
  double best_psat = p_min, best_rss = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 400; ++k) {
    const double psat = 0.01 * p_min * std::pow(100.0 * p_max / (0.01 * p_min), k / 400.0);
    double rss = 0.0;
    solve_linear(psat, rss);
    if (rss < best_rss) {
      best_rss = rss;
      best_psat = psat;
    }
  }
  double rss0 = 0.0;
  const Eigen::VectorXd beta0 = solve_linear(best_psat, rss0);

  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    const double iinf = p(0), psat = std::exp(p(1)), bg = with_bg ? p(2) : 0.0;
    r.resize(static_cast<Eigen::Index>(n));
    if (jac) jac->resize(static_cast<Eigen::Index>(n), p.size());
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double pw = points[i].power_mw;
      const double frac = pw / (psat + pw);
      r(ii) = iinf * frac + bg * pw - points[i].rate_cps / scale;
      if (jac) {
        (*jac)(ii, 0) = frac;
        (*jac)(ii, 1) = -iinf * pw / ((psat + pw) * (psat + pw)) * psat;
        if (with_bg) (*jac)(ii, 2) = pw;
      }
    }
    return true;
  };
  Eigen::VectorXd p0(with_bg ? 3 : 2);
  p0(0) = beta0(0);
  p0(1) = std::log(best_psat);
  if (with_bg) p0(2) = beta0(1);
  const LmResult res = levenberg_marquardt(fn, p0);
  if (!res.converged) {
    // Linear-regime data let Psat and I_inf run off together along a flat valley.
    if (std::exp(res.params(1)) > 2.0 * p_max) {
      std::ostringstream msg;
      msg << "saturation fit ill-conditioned: Psat drifted to " << std::exp(res.params(1)) << " mW above the highest power "
          << p_max << " mW (data stay in the linear regime)";
      throw IllConditionedError(msg.str());
    }
    throw ConvergenceError("saturation fit did not converge", res.residual_norm(), res.iterations);
  }

  SaturationFit fit;
  fit.i_inf_cps = res.params(0) * scale;
  fit.psat_mw = std::exp(res.params(1));
  fit.bg_slope_cps_per_mw = with_bg ? res.params(2) * scale : 0.0;
  fit.residual_norm = res.residual_norm() * scale;
  const Eigen::MatrixXd cov = res.covariance();
  fit.i_inf_err = std::sqrt(std::max(0.0, cov(0, 0))) * scale;
  fit.psat_err = fit.psat_mw * std::sqrt(std::max(0.0, cov(1, 1)));
  if (with_bg) fit.bg_slope_err = std::sqrt(std::max(0.0, cov(2, 2))) * scale;

  if (p_max < 0.5 * fit.psat_mw || !(fit.psat_err < 0.5 * fit.psat_mw)) {
    std::ostringstream msg;
    msg << "saturation fit ill-conditioned: highest power " << p_max << " mW vs fitted Psat " << fit.psat_mw
        << " +/- " << fit.psat_err << " mW (data stay in the linear regime)";
    throw IllConditionedError(msg.str());
  }
  return fit;
}

// ---------------------------------------------------------------- lifetime

namespace {

/// Exponential decay amp*exp(-u/tau) (u >= 0) convolved with a unit-area
/// Gaussian of width sigma, all times in ps.
double emg(double u, double amp, double tau, double sigma) {
  if (sigma <= 0.0) return u >= 0.0 ? amp * std::exp(-u / tau) : 0.0;
  const double z = (sigma * sigma / tau - u) / (std::sqrt(2.0) * sigma);
  if (z < 0.0) {
    return 0.5 * amp * std::exp(sigma * sigma / (2.0 * tau * tau) - u / tau) * std::erfc(z);
  }
  // exp(z^2) erfc(z), asymptotic beyond z = 10.
  double erfcx = 0.0;
  if (z < 10.0) {
    erfcx = std::exp(z * z) * std::erfc(z);
  } else {
    const double iz2 = 1.0 / (z * z);
    erfcx = (1.0 - 0.5 * iz2 + 0.75 * iz2 * iz2 - 1.875 * iz2 * iz2 * iz2) / (z * std::sqrt(units::kPi));
  }
  return 0.5 * amp * std::exp(-u * u / (2.0 * sigma * sigma)) * erfcx;
}

}  // namespace

std::vector<double> lifetime_model(const DecayHistogram& axis, const Irf& irf,
                                   const std::vector<std::pair<double, double>>& amp_tau_ns, double background) {
  const std::size_t n = axis.counts.size();
  std::vector<double> out(n, background);
  const double period = axis.period_ps;
  if (const auto* g = std::get_if<GaussianIrf>(&irf)) {
    for (const auto& [amp, tau_ns] : amp_tau_ns) {
      const double tau = tau_ns * 1e3;
      int wraps = 0;
      if (period > 0.0) wraps = std::min(200, static_cast<int>(std::ceil(30.0 * tau / period)) + 1);
      for (std::size_t i = 0; i < n; ++i) {
        const double u = axis.bin_center_ps(i) - g->t0_ps;
        double v = emg(u, amp, tau, g->sigma_ps);
        if (period > 0.0) {
          for (int k = 1; k <= wraps; ++k) v += emg(u + k * period, amp, tau, g->sigma_ps);
          v += emg(u - period, amp, tau, g->sigma_ps);
        }
        out[i] += v;
      }
    }
    return out;
  }
  const auto& curve = std::get<MeasuredIrf>(irf).curve;
  if (curve.size() != n) throw DomainError("measured IRF must be sampled on the histogram bins");
  const double irf_sum = std::accumulate(curve.begin(), curve.end(), 0.0);
  if (!(irf_sum > 0.0)) throw DomainError("measured IRF has no weight");
  std::vector<double> decay(n, 0.0);
  for (const auto& [amp, tau_ns] : amp_tau_ns) {
    const double tau = tau_ns * 1e3;
    const double fold = period > 0.0 ? 1.0 / (1.0 - std::exp(-period / tau)) : 1.0;
    for (std::size_t i = 0; i < n; ++i) decay[i] += amp * std::exp(-axis.bin_center_ps(i) / tau) * fold;
  }
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (curve[j] == 0.0) continue;
      if (j <= i) {
        v += curve[j] * decay[i - j];
      } else if (period > 0.0) {
        v += curve[j] * decay[n + i - j];
      }
    }
    out[i] += v / irf_sum;
  }
  return out;
}

namespace {

struct DecayFitResult {
  LmResult lm;
  double chi2 = 0.0;
};

DecayFitResult fit_decay(const DecayHistogram& h, const Irf& irf, int components, const Eigen::VectorXd& p0) {
  const std::size_t n = h.counts.size();
  std::vector<double> var(n);
  for (std::size_t i = 0; i < n; ++i) var[i] = std::max(h.counts[i], 1.0);

  auto unpack = [components](const Eigen::VectorXd& p) {
    std::vector<std::pair<double, double>> comps;
    for (int c = 0; c < components; ++c) comps.emplace_back(p(2 * c), p(2 * c + 1));
    return comps;
  };
  // Amplitudes and background enter linearly; only the lifetimes need a
  // difference quotient, taken on the unit-amplitude shape of one component.
  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (int c = 0; c < components; ++c) {
      if (!(p(2 * c + 1) > 1e-4)) return false;
    }
    const auto m = static_cast<Eigen::Index>(n);
    std::vector<double> model(n, p(2 * components));
    if (jac) jac->setZero(m, 2 * components + 1);
    for (int c = 0; c < components; ++c) {
      const double amp = p(2 * c), tau = p(2 * c + 1);
      const auto shape = lifetime_model(h, irf, {{1.0, tau}}, 0.0);
      for (std::size_t i = 0; i < n; ++i) model[i] += amp * shape[i];
      if (jac) {
        const double step = 1e-6 * tau;
        const auto up = lifetime_model(h, irf, {{1.0, tau + step}}, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          const auto row = static_cast<Eigen::Index>(i);
          const double w = 1.0 / std::sqrt(var[i]);
          (*jac)(row, 2 * c) = shape[i] * w;
          (*jac)(row, 2 * c + 1) = amp * (up[i] - shape[i]) / step * w;
        }
      }
    }
    r.resize(m);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = 1.0 / std::sqrt(var[i]);
      r(static_cast<Eigen::Index>(i)) = (model[i] - h.counts[i]) * w;
      if (jac) (*jac)(static_cast<Eigen::Index>(i), 2 * components) = w;
    }
    return true;
  };

  DecayFitResult out;
  out.lm = levenberg_marquardt(fn, p0);
  // Second pass with model-based (Pearson) variances removes the low-count bias.
  if (out.lm.converged) {
    const auto model = lifetime_model(h, irf, unpack(out.lm.params), out.lm.params(2 * components));
    for (std::size_t i = 0; i < n; ++i) var[i] = std::max(model[i], 1e-3);
    out.lm = levenberg_marquardt(fn, out.lm.params);
  }
  out.chi2 = out.lm.cost;
  return out;
}

}  // namespace

LifetimeFit fit_lifetime(const DecayHistogram& histogram, const Irf& irf) {
  const std::size_t n = histogram.counts.size();
  if (n < 8 || !(histogram.bin_width_ps > 0.0)) throw DomainError("decay histogram too short");
  if (const auto* m = std::get_if<MeasuredIrf>(&irf); m && m->curve.size() != n) {
    throw DomainError("IRF and histogram time axes differ");
  }
  std::vector<double> sorted = histogram.counts;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t low_n = std::max<std::size_t>(1, n / 20);
  const double bg0 = std::accumulate(sorted.begin(), sorted.begin() + static_cast<long>(low_n), 0.0) / low_n;
  const double peak = sorted.back() - bg0;
  if (!(peak > 0.0)) throw DomainError("decay histogram has no signal above background");
  double area = 0.0;
  for (double c : histogram.counts) area += std::max(0.0, c - bg0);
  const double tau0 = std::max(area / peak * histogram.bin_width_ps * 1e-3, 2.0 * histogram.bin_width_ps * 1e-3);

  Eigen::VectorXd p1(3);
  p1 << peak, tau0, bg0;
  const DecayFitResult single = fit_decay(histogram, irf, 1, p1);
  if (!single.lm.converged) {
    throw ConvergenceError("single-exponential lifetime fit did not converge", single.lm.residual_norm(),
                           single.lm.iterations);
  }
  const double ts = single.lm.params(1);
  Eigen::VectorXd p2(5);
  p2 << 0.6 * single.lm.params(0), 1.2 * ts, 0.6 * single.lm.params(0), 0.3 * ts, single.lm.params(2);
  const DecayFitResult dbl = fit_decay(histogram, irf, 2, p2);

  LifetimeFit fit;
  const LmResult* chosen = &single.lm;
  bool use_double = false;
  if (dbl.lm.converged && dbl.chi2 < single.chi2 - 25.0) {
    const double a1 = dbl.lm.params(0), t1 = dbl.lm.params(1), a2 = dbl.lm.params(2), t2 = dbl.lm.params(3);
    use_double = a1 > 0.0 && a2 > 0.0 && std::abs(t1 - t2) > 0.05 * std::max(t1, t2);
  }
  if (use_double) chosen = &dbl.lm;
  const Eigen::VectorXd& p = chosen->params;
  const int dof = std::max(1, chosen->dof());
  fit.reduced_chi2 = chosen->cost / dof;
  fit.iterations = single.lm.iterations + dbl.lm.iterations;
  Eigen::MatrixXd cov = chosen->covariance(false) * std::max(1.0, fit.reduced_chi2);
  if (use_double) {
    fit.components = 2;
    fit.amplitude1 = p(0);
    fit.tau1_ns = p(1);
    fit.amplitude2 = p(2);
    fit.tau2_ns = p(3);
    fit.background = p(4);
    const bool first = p(0) * p(1) >= p(2) * p(3);
    fit.tau_dominant_ns = first ? p(1) : p(3);
    fit.tau_dominant_err_ns = std::sqrt(std::max(0.0, first ? cov(1, 1) : cov(3, 3)));
  } else {
    fit.components = 1;
    fit.amplitude1 = p(0);
    fit.tau1_ns = p(1);
    fit.background = p(2);
    fit.tau_dominant_ns = p(1);
    fit.tau_dominant_err_ns = std::sqrt(std::max(0.0, cov(1, 1)));
  }
  return fit;
}

// ---------------------------------------------------------------- quantum yield

QuantumYield quantum_yield(double i_inf_detected_cps, double setup_efficiency, double total_lifetime_ns) {
  if (!(i_inf_detected_cps > 0.0) || !(total_lifetime_ns > 0.0)) {
    throw DomainError("saturated rate and lifetime must be positive");
  }
  if (!(setup_efficiency > 0.0 && setup_efficiency <= 1.0)) throw DomainError("setup efficiency must lie in (0, 1]");
  QuantumYield qy;
  qy.value = i_inf_detected_cps / setup_efficiency * total_lifetime_ns * 1e-9;
  if (qy.value > 1.05) {
    std::ostringstream msg;
    msg << "quantum yield " << qy.value << " exceeds 1: saturated rate, efficiency and lifetime are inconsistent";
    throw DomainError(msg.str());
  }
  if (qy.value > 1.0) {
    qy.warnings.push_back("quantum yield " + std::to_string(qy.value) + " clamped to 1");
    qy.value = 1.0;
    qy.clamped = true;
  }
  return qy;
}

std::optional<std::string> compare_quantum_yield(double value, double reported, double tolerance) {
  if (std::abs(value - reported) <= tolerance) return std::nullopt;
  std::ostringstream msg;
  msg << "two-level quantum yield " << value << " differs from the reported " << reported
      << "; the reported value relies on corrections not included in this model";
  return msg.str();
}

// ---------------------------------------------------------------- polarization

PolarizationFit fit_polarization(const std::vector<PolarizationPoint>& points) {
  if (points.size() < 8) throw DomainError("polarization fit needs at least 8 angles");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& pt : points) {
    lo = std::min(lo, pt.theta_deg);
    hi = std::max(hi, pt.theta_deg);
  }
  if (hi - lo < 180.0 - 1e-9) throw DomainError("polarization angles must span at least 180 degrees");

  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double th = points[static_cast<std::size_t>(i)].theta_deg * units::kPi / 180.0;
    x(i, 0) = 1.0;
    x(i, 1) = std::cos(2.0 * th);
    x(i, 2) = std::sin(2.0 * th);
    y(i) = points[static_cast<std::size_t>(i)].intensity;
  }
  const LinearFit lin = linear_least_squares(x, y);
  const double c0 = lin.beta(0), c1 = lin.beta(1), c2 = lin.beta(2);
  const double radius = std::hypot(c1, c2);

  PolarizationFit fit;
  fit.amplitude = 2.0 * radius;
  fit.i_off = c0 - radius;
  fit.i_min = fit.i_off;
  fit.i_max = fit.i_off + fit.amplitude;
  fit.visibility = (fit.i_max + fit.i_min) > 0.0 ? (fit.i_max - fit.i_min) / (fit.i_max + fit.i_min) : 0.0;
  double theta0 = radius > 0.0 ? 0.5 * std::atan2(-c2, -c1) * 180.0 / units::kPi : 0.0;
  if (theta0 < 0.0) theta0 += 180.0;
  fit.theta0_deg = theta0;
  const double sigma_c = std::sqrt(std::max(0.0, 0.5 * (lin.covariance(1, 1) + lin.covariance(2, 2))));
  if (radius > 0.0) {
    fit.theta0_err_deg = 0.5 * sigma_c / radius * 180.0 / units::kPi;
  } else {
    fit.theta0_err_deg = 90.0;
  }
  fit.theta0_undetermined = radius <= 2.0 * sigma_c || fit.theta0_err_deg > 45.0;
  if (fit.theta0_undetermined) fit.theta0_err_deg = std::max(fit.theta0_err_deg, 90.0);
  return fit;
}

}  // namespace vibronix::photon
