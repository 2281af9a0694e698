#include "vibronix/errors.hpp"
#include "vibronix/photon_stats.hpp"
#include "vibronix/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vibronix::photon {

namespace {

struct Pt {
  double x;
  double y;
};

double cross(const Pt& o, const Pt& a, const Pt& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

/// Lower (convex) hull of points sorted by x; `lower` false gives the upper hull.
std::vector<Pt> hull(const std::vector<Pt>& pts, bool lower) {
  std::vector<Pt> h;
  for (const Pt& p : pts) {
    while (h.size() >= 2) {
      const double c = cross(h[h.size() - 2], h.back(), p);
      if ((lower && c <= 0.0) || (!lower && c >= 0.0)) {
        h.pop_back();
      } else {
        break;
      }
    }
    h.push_back(p);
  }
  return h;
}

/// Max of sign*(f(x_i) - hull(x_i)) for the polyline hull evaluated at each x.
double max_gap(const std::vector<Pt>& values, const std::vector<Pt>& h, double sign) {
  double gap = 0.0;
  std::size_t seg = 0;
  for (const Pt& v : values) {
    while (seg + 1 < h.size() && h[seg + 1].x < v.x) ++seg;
    double hy = h[seg].y;
    if (seg + 1 < h.size() && h[seg + 1].x > h[seg].x) {
      const double t = (v.x - h[seg].x) / (h[seg + 1].x - h[seg].x);
      hy = h[seg].y + std::clamp(t, 0.0, 1.0) * (h[seg + 1].y - h[seg].y);
    }
    gap = std::max(gap, sign * (v.y - hy));
  }
  return gap;
}

}  // namespace

double dip_statistic(std::vector<double> sample) {
  const std::size_t n = sample.size();
  if (n < 2) return 0.0;
  std::sort(sample.begin(), sample.end());
  const double dn = static_cast<double>(n);
  double best = 1.0;
  std::vector<Pt> lower_pts, upper_vals, upper_pts, lower_vals;
  for (std::size_t m = 0; m < n; ++m) {
    // Left of the mode: ECDF must lie above a convex minorant.
    lower_pts.clear();
    upper_vals.clear();
    for (std::size_t i = 0; i <= m; ++i) {
      lower_pts.push_back({sample[i], static_cast<double>(i) / dn});
      upper_vals.push_back({sample[i], static_cast<double>(i + 1) / dn});
    }
    lower_pts.push_back({sample[m], static_cast<double>(m + 1) / dn});
    const double d_left = max_gap(upper_vals, hull(lower_pts, true), 1.0);
    if (d_left / 2.0 >= best) continue;
    // Right of the mode: ECDF must lie below a concave majorant.
    upper_pts.clear();
    lower_vals.clear();
    upper_pts.push_back({sample[m], static_cast<double>(m) / dn});
    for (std::size_t i = m; i < n; ++i) {
      upper_pts.push_back({sample[i], static_cast<double>(i + 1) / dn});
      lower_vals.push_back({sample[i], static_cast<double>(i) / dn});
    }
    const double d_right = max_gap(lower_vals, hull(upper_pts, false), -1.0);
    best = std::min(best, std::max(d_left, d_right) / 2.0);
  }
  return std::max(best, 1.0 / (2.0 * dn));
}

BlinkingReport detect_blinking(const PhotonStream& stream, const std::vector<double>& bin_sizes_ms,
                               const BlinkingOptions& options) {
  BlinkingReport report;
  const double duration_ms = stream.duration_s * 1e3;
  Rng jitter(options.seed, 1);
  for (double bin_ms : bin_sizes_ms) {
    if (!(bin_ms > 0.0)) throw DomainError("bin sizes must be positive");
    BlinkingBinStats st;
    st.bin_ms = bin_ms;
    st.n_bins = static_cast<std::size_t>(std::floor(duration_ms / bin_ms));
    if (st.n_bins < 8) {
      report.per_bin.push_back(st);
      continue;
    }
    std::vector<double> counts(st.n_bins, 0.0);
    const double bin_ps = bin_ms * 1e9;
    for (std::int64_t t : stream.timestamps_ps) {
      const auto k = static_cast<std::size_t>(static_cast<double>(t) / bin_ps);
      if (k < st.n_bins) counts[k] += 1.0;
    }
    double sum = 0.0, sum2 = 0.0;
    for (double c : counts) {
      sum += c;
      sum2 += c * c;
    }
    st.mean = sum / st.n_bins;
    st.variance = st.n_bins > 1 ? (sum2 - sum * sum / st.n_bins) / (st.n_bins - 1) : 0.0;
    const double sd = std::sqrt(std::max(st.mean, 1.0));
    for (double c : counts) st.max_deviation_sigma = std::max(st.max_deviation_sigma, std::abs(c - st.mean) / sd);
    st.poisson_flag = st.max_deviation_sigma > options.sigma_threshold;

    // Integer counts are dequantized before the unimodality test.
    std::vector<double> sample = counts;
    for (double& v : sample) v += jitter.uniform() - 0.5;
    const std::size_t cap = 4000;
    if (sample.size() > cap) sample.resize(cap);
    st.dip = dip_statistic(sample);
    const double obs = std::sqrt(static_cast<double>(sample.size())) * st.dip;
    // Null: uniform samples (least favourable unimodal law), sqrt(n)-scaled.
    const std::size_t m = std::min<std::size_t>(sample.size(), 400);
    Rng null_rng(options.seed, 2);
    int exceed = 0;
    std::vector<double> u(m);
    for (int r = 0; r < options.dip_replicates; ++r) {
      for (double& v : u) v = null_rng.uniform();
      if (std::sqrt(static_cast<double>(m)) * dip_statistic(u) >= obs) ++exceed;
    }
    st.dip_p_value = (1.0 + exceed) / (1.0 + options.dip_replicates);
    st.bimodal_flag = st.dip_p_value < options.dip_alpha;
    report.flagged = report.flagged || st.poisson_flag || st.bimodal_flag;
    report.per_bin.push_back(st);
  }
  return report;
}

// ---------------------------------------------------------------- I/O

void write_stream(const PhotonStream& stream, const std::filesystem::path& path, StreamFormat format) {
  if (format == StreamFormat::Binary) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::int64_t t : stream.timestamps_ps) {
      auto v = static_cast<std::uint64_t>(t);
      unsigned char bytes[8];
      for (int b = 0; b < 8; ++b) bytes[b] = static_cast<unsigned char>((v >> (8 * b)) & 0xffu);
      out.write(reinterpret_cast<const char*>(bytes), 8);
    }
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "# picosecond timestamps, channel " << stream.channel << "\n";
  for (std::int64_t t : stream.timestamps_ps) out << t << '\n';
}

PhotonStream read_stream(const std::filesystem::path& path, StreamFormat format, std::optional<double> duration_s,
                         int channel) {
  PhotonStream s;
  s.channel = channel;
  if (format == StreamFormat::Binary) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    unsigned char bytes[8];
    std::size_t record = 0;
    while (in.read(reinterpret_cast<char*>(bytes), 8)) {
      std::uint64_t v = 0;
      for (int b = 0; b < 8; ++b) v |= static_cast<std::uint64_t>(bytes[b]) << (8 * b);
      s.timestamps_ps.push_back(static_cast<std::int64_t>(v));
      ++record;
    }
    if (in.gcount() != 0) throw ParseError(record + 1, "truncated 64-bit record");
  } else {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos || line[first] == '#') continue;
      std::istringstream ss(line);
      long long v = 0;
      std::string rest;
      if (!(ss >> v) || (ss >> rest)) throw ParseError(line_no, "expected one integer timestamp");
      s.timestamps_ps.push_back(v);
    }
  }
  const double last_s = s.timestamps_ps.empty() ? 0.0 : static_cast<double>(s.timestamps_ps.back()) * 1e-12;
  s.duration_s = duration_s.value_or(last_s);
  s.validate();
  return s;
}

}  // namespace vibronix::photon
