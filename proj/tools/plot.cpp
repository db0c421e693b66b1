// SPDX-License-Identifier: Apache-2.0
#include "plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace genb::plot {
namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
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

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.1f", x);
  return buf;
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::string& y_label, const std::vector<Bar>& bars,
                          double y_max) {
  const double left = 70, right = 20, top = 40, bottom = 110;
  const double slot = 90;
  const double plot_h = 300;
  const double width = left + right + slot * std::max<std::size_t>(bars.size(), 1);
  const double height = top + plot_h + bottom;
  auto y_of = [&](double v) { return top + plot_h * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(title)
     << "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    double v = y_max * i / 5.0;
    double y = y_of(v);
    os << "<line x1=\"" << num(left) << "\" x2=\"" << num(width - right) << "\" y1=\"" << num(y) << "\" y2=\"" << num(y)
       << "\" stroke=\"#ddd\"/>\n";
    char label[32];
    std::snprintf(label, sizeof(label), "%.2f", v);
    os << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << label << "</text>\n";
  }
  os << "<text transform=\"translate(16," << num(top + plot_h / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const Bar& b = bars[i];
    double x = left + slot * static_cast<double>(i) + slot * 0.2;
    double w = slot * 0.6;
    double y = y_of(b.value);
    os << "<rect x=\"" << num(x) << "\" y=\"" << num(y) << "\" width=\"" << num(w) << "\" height=\""
       << num(top + plot_h - y) << "\" fill=\"#4c78a8\"/>\n";
    if (b.error > 0) {
      double cx = x + w / 2;
      os << "<line x1=\"" << num(cx) << "\" x2=\"" << num(cx) << "\" y1=\"" << num(y_of(b.value + b.error))
         << "\" y2=\"" << num(y_of(b.value - b.error)) << "\" stroke=\"black\"/>\n";
    }
    char value[32];
    std::snprintf(value, sizeof(value), "%.3f", b.value);
    os << "<text x=\"" << num(x + w / 2) << "\" y=\"" << num(y - 4) << "\" text-anchor=\"middle\">" << value
       << "</text>\n";
    os << "<text transform=\"translate(" << num(x + w / 2) << "," << num(top + plot_h + 14)
       << ") rotate(30)\" text-anchor=\"start\">" << escape(b.label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace genb::plot
