#include "fmim/cli/svg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

namespace fmim::cli {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 400;
constexpr double kLeft = 70;
constexpr double kRight = 160;
constexpr double kTop = 40;
constexpr double kBottom = 50;

const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fixed(double v, int digits = 2) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed, digits);
  return std::string(buf, r.ptr);
}

std::string escape(const std::string& s) {
  std::string out;
  for (const char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
      << escape(title) << "</text>\n";
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series) {
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return kTop + ph - (y - y0) / (y1 - y0) * ph; };

  std::ostringstream out;
  header(out, title);
  out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = x0 + (x1 - x0) * i / 4.0;
    const double fy = y0 + (y1 - y0) * i / 4.0;
    out << "<text x=\"" << fixed(px(fx)) << "\" y=\"" << kTop + ph + 16
        << "\" text-anchor=\"middle\">" << fixed(fx, std::abs(x1 - x0) >= 10 ? 0 : 2) << "</text>\n";
    out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(py(fy) + 4)
        << "\" text-anchor=\"end\">" << fixed(fy, 3) << "</text>\n";
    out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << fixed(py(fy))
        << "\" y2=\"" << fixed(py(fy)) << "\" stroke=\"#ddd\"/>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << escape(x_label) << "</text>\n";
  out << "<text transform=\"translate(16 " << kTop + ph / 2
      << ") rotate(-90)\" text-anchor=\"middle\">" << escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = kPalette[i % std::size(kPalette)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : series[i].points)
      if (std::isfinite(x) && std::isfinite(y)) out << fixed(px(x)) << ',' << fixed(py(y)) << ' ';
    out << "\"/>\n";
    if (series[i].points.size() == 1) {
      const auto [x, y] = series[i].points.front();
      out << "<circle cx=\"" << fixed(px(x)) << "\" cy=\"" << fixed(py(y)) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }
    const double ly = kTop + 14 + 18.0 * static_cast<double>(i);
    out << "<line x1=\"" << kLeft + pw + 12 << "\" x2=\"" << kLeft + pw + 32 << "\" y1=\"" << ly - 4
        << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n"
        << "<text x=\"" << kLeft + pw + 38 << "\" y=\"" << ly << "\">" << escape(series[i].name)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string stacked_bars(const std::string& title, const std::string& bar_label,
                         const std::vector<std::vector<std::size_t>>& counts) {
  std::size_t tallest = 1;
  std::size_t segments = 0;
  for (const auto& row : counts) {
    std::size_t total = 0;
    for (const auto c : row) total += c;
    tallest = std::max(tallest, total);
    segments = std::max(segments, row.size());
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  const double slot = counts.empty() ? pw : pw / static_cast<double>(counts.size());

  std::ostringstream out;
  header(out, title);
  out << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + pw << "\" y1=\"" << kTop + ph << "\" y2=\""
      << kTop + ph << "\" stroke=\"black\"/>\n";
  for (std::size_t k = 0; k < counts.size(); ++k) {
    double y = kTop + ph;
    const double x = kLeft + slot * static_cast<double>(k) + slot * 0.15;
    for (std::size_t j = 0; j < counts[k].size(); ++j) {
      const double h = ph * static_cast<double>(counts[k][j]) / static_cast<double>(tallest);
      y -= h;
      out << "<rect x=\"" << fixed(x) << "\" y=\"" << fixed(y) << "\" width=\"" << fixed(slot * 0.7)
          << "\" height=\"" << fixed(h) << "\" fill=\"" << kPalette[j % std::size(kPalette)]
          << "\"><title>" << bar_label << ' ' << k << ", class " << j << ": " << counts[k][j]
          << "</title></rect>\n";
    }
    out << "<text x=\"" << fixed(x + slot * 0.35) << "\" y=\"" << kTop + ph + 16
        << "\" text-anchor=\"middle\">" << k << "</text>\n";
  }
  out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 12
      << "\" text-anchor=\"middle\">" << escape(bar_label) << "</text>\n";
  out << "<text x=\"" << kLeft - 6 << "\" y=\"" << kTop + 4 << "\" text-anchor=\"end\">" << tallest
      << "</text>\n";
  for (std::size_t j = 0; j < segments; ++j) {
    const double ly = kTop + 14 + 18.0 * static_cast<double>(j);
    out << "<rect x=\"" << kLeft + pw + 12 << "\" y=\"" << ly - 10 << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[j % std::size(kPalette)] << "\"/>\n"
        << "<text x=\"" << kLeft + pw + 30 << "\" y=\"" << ly << "\">class " << j << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace fmim::cli
