#include "vibronix/analysis.hpp"
#include "vibronix/errors.hpp"
#include "vibronix/least_squares.hpp"
#include "vibronix/units.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vibronix::analysis {

namespace {

bool parse_double(const std::string& text, double& out) {
  const auto first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return false;
  const auto last = text.find_last_not_of(" \t\r");
  const std::string trimmed = text.substr(first, last - first + 1);
  std::size_t used = 0;
  try {
    out = std::stod(trimmed, &used);
  } catch (const std::exception&) {
    return false;
  }
  return used == trimmed.size() && std::isfinite(out);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  if (line.find(',') != std::string::npos) {
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) fields.push_back(field);
  }
  return fields;
}

}  // namespace

Spectrum parse_spectrum_csv(std::istream& in, AxisKind kind) {
  struct Row {
    double x;
    double y;
    std::size_t line;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data_or_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto fields = split_fields(line);
    double x = 0.0, y = 0.0;
    const bool numeric = fields.size() == 2 && parse_double(fields[0], x) && parse_double(fields[1], y);
    if (!numeric) {
      if (!seen_data_or_header) {
        seen_data_or_header = true;  // header row
        continue;
      }
      throw ParseError(line_no, "expected two numeric columns (axis, counts), got '" + line + "'");
    }
    seen_data_or_header = true;
    if (y < 0.0) throw ParseError(line_no, "negative counts");
    if (!(x > 0.0)) throw ParseError(line_no, "axis value must be positive");
    rows.push_back({x, y, line_no});
  }
  if (rows.size() < 2) throw ParseError(line_no, "spectrum needs at least two data rows");
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.x < b.x; });
  Spectrum s;
  s.kind = kind;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i > 0 && rows[i].x == rows[i - 1].x) {
      throw ParseError(rows[i].line, "duplicate axis value (also on line " + std::to_string(rows[i - 1].line) + ")");
    }
    s.axis.push_back(rows[i].x);
    s.intensity.push_back(rows[i].y);
  }
  return s;
}

Spectrum load_spectrum(const std::filesystem::path& path, AxisKind kind) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  Spectrum s = parse_spectrum_csv(in, kind);
  s.metadata["source"] = path.filename().string();
  return s;
}

void write_spectrum_csv(const Spectrum& spectrum, std::ostream& out) {
  out << "# " << axis_kind_name(spectrum.kind) << ",counts\n";
  if (spectrum.temperature_k) out << "# temperature_k=" << *spectrum.temperature_k << '\n';
  for (const auto& [k, v] : spectrum.metadata) out << "# " << k << '=' << v << '\n';
  char buf[64];
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6f,%.6f\n", spectrum.axis[i], spectrum.intensity[i]);
    out << buf;
  }
}

Spectrum convert_axis(const Spectrum& spectrum, AxisKind target, bool jacobian) {
  spectrum.validate();
  if (spectrum.kind == target) return spectrum;
  Spectrum out = spectrum;
  out.kind = target;
  const std::size_t n = spectrum.size();
  double before = 0.0, after = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out.axis[i] = units::kHcEvNm / spectrum.axis[i];
    if (jacobian) {
      before += spectrum.intensity[i];
      out.intensity[i] = spectrum.intensity[i] * spectrum.axis[i] * spectrum.axis[i];
      after += out.intensity[i];
    }
  }
  if (jacobian && after > 0.0) {
    for (double& v : out.intensity) v *= before / after;
  }
  if (out.axis.size() > 1 && out.axis[1] < out.axis[0]) {
    std::reverse(out.axis.begin(), out.axis.end());
    std::reverse(out.intensity.begin(), out.intensity.end());
  }
  out.metadata["jacobian"] = jacobian ? "applied" : "off";
  return out;
}

namespace {

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<long>(mid)));
  }
  return m;
}

}  // namespace

BackgroundResult subtract_background(const Spectrum& spectrum, BackgroundMethod method, std::size_t window) {
  spectrum.validate();
  const std::size_t n = spectrum.size();
  if (window < 1) throw DomainError("background window must be at least one sample");
  const std::size_t needed = method == BackgroundMethod::LinearBaseline ? 2 * window : window;
  if (needed > n) throw DomainError("background window larger than the spectrum");

  std::vector<double> baseline(n);
  if (method == BackgroundMethod::LinearBaseline) {
    const std::vector<double> head(spectrum.intensity.begin(), spectrum.intensity.begin() + static_cast<long>(window));
    const std::vector<double> tail(spectrum.intensity.end() - static_cast<long>(window), spectrum.intensity.end());
    const double x0 = std::accumulate(spectrum.axis.begin(), spectrum.axis.begin() + static_cast<long>(window), 0.0) / window;
    const double x1 = std::accumulate(spectrum.axis.end() - static_cast<long>(window), spectrum.axis.end(), 0.0) / window;
    const double y0 = median(head), y1 = median(tail);
    for (std::size_t i = 0; i < n; ++i) baseline[i] = y0 + (y1 - y0) * (spectrum.axis[i] - x0) / (x1 - x0);
  } else {
    const std::size_t half = window / 2;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= half ? i - half : 0;
      const std::size_t hi = std::min(n, i + half + 1);
      baseline[i] = median(std::vector<double>(spectrum.intensity.begin() + static_cast<long>(lo),
                                               spectrum.intensity.begin() + static_cast<long>(hi)));
    }
  }
  BackgroundResult res;
  res.spectrum = spectrum;
  for (std::size_t i = 0; i < n; ++i) {
    double v = spectrum.intensity[i] - baseline[i];
    if (v < 0.0) {
      v = 0.0;
      ++res.clamped;
    }
    res.spectrum.intensity[i] = v;
  }
  res.spectrum.metadata["background"] = method == BackgroundMethod::LinearBaseline ? "linear_baseline" : "rolling_median";
  return res;
}

std::vector<PeakCandidate> detect_peaks(const Spectrum& spectrum, double min_prominence, double min_separation,
                                        std::size_t smoothing) {
  spectrum.validate();
  const std::size_t n = spectrum.size();
  std::vector<double> s(n);
  const std::size_t half = std::max<std::size_t>(smoothing, 1) / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += spectrum.intensity[k];
    s[i] = sum / static_cast<double>(hi - lo + 1);
  }

  std::vector<PeakCandidate> found;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(s[i] > s[i - 1] && s[i] >= s[i + 1])) continue;
    // Topographic prominence: descend each side until a higher sample.
    double left_min = s[i];
    for (std::size_t k = i; k-- > 0;) {
      if (s[k] > s[i]) break;
      left_min = std::min(left_min, s[k]);
    }
    double right_min = s[i];
    for (std::size_t k = i + 1; k < n; ++k) {
      if (s[k] > s[i]) break;
      right_min = std::min(right_min, s[k]);
    }
    const double prom = s[i] - std::max(left_min, right_min);
    if (prom >= min_prominence && prom > 0.0) found.push_back({i, spectrum.axis[i], s[i], prom});
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& b) { return a.prominence > b.prominence; });
  std::vector<PeakCandidate> kept;
  for (const auto& c : found) {
    const bool close = std::any_of(kept.begin(), kept.end(), [&](const auto& k) {
      return std::abs(k.position - c.position) < min_separation;
    });
    if (!close) kept.push_back(c);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.position < b.position; });
  return kept;
}

std::vector<PeakGuess> guesses_from_candidates(const Spectrum& spectrum, const std::vector<PeakCandidate>& candidates) {
  std::vector<PeakGuess> out;
  const std::size_t n = spectrum.size();
  const double step = std::abs(spectrum.axis[1] - spectrum.axis[0]);
  for (const auto& c : candidates) {
    const double peak = spectrum.intensity[c.index];
    const double base = peak - c.prominence;
    const double half = base + 0.5 * c.prominence;
    std::size_t l = c.index, r = c.index;
    while (l > 0 && spectrum.intensity[l] > half) --l;
    while (r + 1 < n && spectrum.intensity[r] > half) ++r;
    double fwhm = std::abs(spectrum.axis[r] - spectrum.axis[l]);
    fwhm = std::max(fwhm, 3.0 * step);
    PeakGuess g;
    g.center = c.position;
    g.fwhm = fwhm;
    g.area = std::max(c.prominence, 1e-12) * units::kPi * fwhm / 2.0;
    out.push_back(g);
  }
  return out;
}

double lorentzian(double x, double center, double fwhm, double area) {
  const double hw = 0.5 * fwhm;
  const double dx = x - center;
  return area * hw / units::kPi / (dx * dx + hw * hw);
}

MultiLorentzianFit fit_multilorentzian(const Spectrum& spectrum, const std::vector<PeakGuess>& guesses) {
  spectrum.validate();
  if (guesses.empty()) throw DomainError("fit needs at least one peak");
  const double lo = std::min(spectrum.axis.front(), spectrum.axis.back());
  const double hi = std::max(spectrum.axis.front(), spectrum.axis.back());
  for (const auto& g : guesses) {
    if (g.center < lo || g.center > hi) throw DomainError("initial centre outside the axis range");
    if (!(g.fwhm > 0.0)) throw DomainError("initial width must be positive");
  }
  const std::size_t k = guesses.size();
  const auto m = static_cast<Eigen::Index>(spectrum.size());
  const auto p_count = static_cast<Eigen::Index>(3 * k + 1);
  double step = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < spectrum.size(); ++i) step = std::min(step, std::abs(spectrum.axis[i] - spectrum.axis[i - 1]));

  const ResidualFn fn = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
    for (std::size_t j = 0; j < k; ++j) {
      if (!(p(3 * j + 1) > 0.0)) return false;
    }
    r.resize(m);
    if (jac) jac->resize(m, p_count);
    for (Eigen::Index i = 0; i < m; ++i) {
      const double x = spectrum.axis[static_cast<std::size_t>(i)];
      double model = p(p_count - 1);
      for (std::size_t j = 0; j < k; ++j) {
        const auto b = static_cast<Eigen::Index>(3 * j);
        const double c = p(b), w = p(b + 1), a = p(b + 2);
        const double hw = 0.5 * w;
        const double dx = x - c;
        const double den = dx * dx + hw * hw;
        const double shape = hw / units::kPi / den;  // unit-area Lorentzian
        model += a * shape;
        if (jac) {
          (*jac)(i, b) = a * shape * 2.0 * dx / den;
          (*jac)(i, b + 1) = a / units::kPi * 0.5 * (den - 2.0 * hw * hw) / (den * den);
          (*jac)(i, b + 2) = shape;
        }
      }
      if (jac) (*jac)(i, p_count - 1) = 1.0;
      r(i) = model - spectrum.intensity[static_cast<std::size_t>(i)];
    }
    return true;
  };

  Eigen::VectorXd p0(p_count);
  for (std::size_t j = 0; j < k; ++j) {
    p0(static_cast<Eigen::Index>(3 * j)) = guesses[j].center;
    p0(static_cast<Eigen::Index>(3 * j + 1)) = guesses[j].fwhm;
    p0(static_cast<Eigen::Index>(3 * j + 2)) = guesses[j].area;
  }
  p0(p_count - 1) = 0.0;
  const LmResult res = levenberg_marquardt(fn, p0);
  if (!res.converged) {
    throw ConvergenceError("multi-Lorentzian fit: " + res.stop_reason, res.residual_norm(), res.iterations);
  }

  const Eigen::VectorXd& p = res.params;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = p(static_cast<Eigen::Index>(3 * j + 1));
    if (w < 2.0 * step) {
      throw DegeneracyError("peak " + std::to_string(j) + " collapsed to a width of " + std::to_string(w) +
                            " (below two grid steps)");
    }
    if (!(p(static_cast<Eigen::Index>(3 * j + 2)) > 0.0)) {
      throw DegeneracyError("peak " + std::to_string(j) + " has non-positive area");
    }
    for (std::size_t l = j + 1; l < k; ++l) {
      const double sep = std::abs(p(static_cast<Eigen::Index>(3 * j)) - p(static_cast<Eigen::Index>(3 * l)));
      const double mean_w = 0.5 * (w + p(static_cast<Eigen::Index>(3 * l + 1)));
      if (sep < 0.5 * mean_w) {
        throw DegeneracyError("peaks " + std::to_string(j) + " and " + std::to_string(l) + " are unresolved (separation " +
                              std::to_string(sep) + " < half their mean width)");
      }
    }
  }

  const Eigen::MatrixXd cov = res.covariance();
  MultiLorentzianFit fit;
  fit.offset = p(p_count - 1);
  fit.residual_norm = res.residual_norm();
  fit.iterations = res.iterations;
  fit.accepted_costs = res.accepted_costs;
  for (std::size_t j = 0; j < k; ++j) {
    const auto b = static_cast<Eigen::Index>(3 * j);
    PeakFit pk;
    pk.fit_axis = spectrum.kind;
    const double c = p(b), w = p(b + 1), a = p(b + 2);
    if (spectrum.kind == AxisKind::Wavelength) {
      pk.center_nm = c;
      pk.fwhm_nm = w;
      pk.center_ev = units::nm_to_ev(c);
      pk.fwhm_mev = units::width_nm_to_mev(w, c);
    } else {
      pk.center_ev = c;
      pk.fwhm_mev = 1e3 * w;
      pk.center_nm = units::ev_to_nm(c);
      pk.fwhm_nm = units::width_mev_to_nm(pk.fwhm_mev, pk.center_nm);
    }
    pk.area = a;
    pk.amplitude = 2.0 * a / (units::kPi * w);
    pk.covariance = cov.block(b, b, 3, 3);
    pk.center_err = std::sqrt(std::max(0.0, cov(b, b)));
    pk.fwhm_err = std::sqrt(std::max(0.0, cov(b + 1, b + 1)));
    pk.area_err = std::sqrt(std::max(0.0, cov(b + 2, b + 2)));
    pk.residual_norm = fit.residual_norm;
    fit.peaks.push_back(pk);
  }
  return fit;
}

}  // namespace vibronix::analysis
