#include "vibronix/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace vibronix::svg {

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo <= 0.0) {
      const double pad = lo != 0.0 ? 0.05 * std::abs(lo) : 1.0;
      lo -= pad;
      hi += pad;
    }
  }
};

}  // namespace

std::string Plot::render() const {
  const double left = 70.0, right = 20.0, top = 36.0, bottom = 50.0;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto ty = [this](double v) { return log_y ? (v > 0.0 ? std::log10(v) : std::nan("")) : v; };

  Range xr, yr;
  for (const auto& s : series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(ty(v));
    for (double v : s.y_upper) yr.add(ty(v));
  }
  xr.finish();
  yr.finish();
  const auto px = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * pw; };
  const auto py = [&](double v) { return top + ph - (ty(v) - yr.lo) / (yr.hi - yr.lo) * ph; };

  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width) << "\" height=\"" << fmt(height)
    << "\" viewBox=\"0 0 " << fmt(width) << ' ' << fmt(height) << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    << "<text x=\"" << fmt(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
    << escape(title) << "</text>\n";

  o << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n"
    << "<rect x=\"" << fmt(left) << "\" y=\"" << fmt(top) << "\" width=\"" << fmt(pw) << "\" height=\"" << fmt(ph)
    << "\"/>\n</g>\n<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xr.lo + (xr.hi - xr.lo) * i / 4.0;
    const double fy = yr.lo + (yr.hi - yr.lo) * i / 4.0;
    const double x = left + pw * i / 4.0, y = top + ph - ph * i / 4.0;
    o << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(top + ph + 14) << "\" text-anchor=\"middle\">" << tick_label(fx)
      << "</text>\n";
    o << "<text x=\"" << fmt(left - 4) << "\" y=\"" << fmt(y + 3) << "\" text-anchor=\"end\">"
      << (log_y ? "1e" + tick_label(fy) : tick_label(fy)) << "</text>\n";
  }
  o << "</g>\n";
  o << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(height - 10)
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(x_label) << "</text>\n";
  o << "<text x=\"14\" y=\"" << fmt(top + ph / 2) << "\" transform=\"rotate(-90 14 " << fmt(top + ph / 2)
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << escape(y_label) << "</text>\n";

  int idx = 0;
  for (const auto& s : series) {
    o << "<g class=\"dataset\" id=\"series-" << idx << "\" data-label=\"" << escape(s.label) << "\">\n";
    if (s.style == Style::Points) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        const double y = py(s.y[i]);
        if (!std::isfinite(y)) continue;
        o << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(y) << "\" r=\"2.5\" fill=\"" << s.color
          << "\"/>\n";
      }
    } else {
      std::ostringstream pts;
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        const double y = py(s.y[i]);
        if (std::isfinite(y)) pts << fmt(px(s.x[i])) << ',' << fmt(y) << ' ';
      }
      if (s.style == Style::Band) {
        for (std::size_t i = std::min(s.x.size(), s.y_upper.size()); i-- > 0;) {
          const double y = py(s.y_upper[i]);
          if (std::isfinite(y)) pts << fmt(px(s.x[i])) << ',' << fmt(y) << ' ';
        }
        o << "<polygon points=\"" << pts.str() << "\" fill=\"" << s.color << "\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
      } else {
        o << "<polyline points=\"" << pts.str() << "\" fill=\"none\" stroke=\"" << s.color
          << "\" stroke-width=\"1.2\"/>\n";
      }
    }
    o << "<text x=\"" << fmt(left + pw - 6) << "\" y=\"" << fmt(top + 14 + 14 * idx)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << s.color << "\">"
      << escape(s.label) << "</text>\n</g>\n";
    ++idx;
  }
  o << "</svg>\n";
  return o.str();
}

void Plot::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render();
}

}  // namespace vibronix::svg
