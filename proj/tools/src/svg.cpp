#include <algorithm>
#include <cmath>
#include <cstdio>

#include "vpt_cli/commands.hpp"

namespace vpt::cli {

namespace {

std::string
fmt(const char* spec, double v)
{
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string
escape(const std::string& s)
{
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

} // namespace

std::string
render_loss_svg(const std::vector<StepMetrics>& metrics, const std::string& title)
{
  constexpr double W = 640, H = 360, L = 60, R = 20, T = 30, B = 40;
  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"360\" "
                    "font-family=\"sans-serif\" font-size=\"11\">\n"
                    "<rect width=\"640\" height=\"360\" fill=\"white\"/>\n";
  svg += "<text x=\"" + fmt("%.0f", W / 2) + "\" y=\"18\" text-anchor=\"middle\">" + escape(title)
         + "</text>\n";
  svg += "<line x1=\"60\" y1=\"320\" x2=\"620\" y2=\"320\" stroke=\"black\"/>\n"
         "<line x1=\"60\" y1=\"30\" x2=\"60\" y2=\"320\" stroke=\"black\"/>\n";

  double lo = INFINITY, hi = -INFINITY;
  std::size_t last = 1;
  for (const auto& m : metrics) {
    if (std::isfinite(m.loss)) {
      lo = std::min(lo, m.loss);
      hi = std::max(hi, m.loss);
    }
    last = std::max(last, m.step);
  }
  if (!std::isfinite(lo)) {
    svg += "<text x=\"320\" y=\"180\" text-anchor=\"middle\">no data</text>\n</svg>\n";
    return svg;
  }
  if (hi - lo < 1e-12) {
    hi = lo + 1.0;
  }
  const auto x_of = [&](double step) {
    return L + (W - L - R) * (last > 1 ? (step - 1) / static_cast<double>(last - 1) : 0.5);
  };
  const auto y_of = [&](double loss) { return T + (H - T - B) * (hi - loss) / (hi - lo); };

  svg += "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& m : metrics) {
    if (std::isfinite(m.loss)) {
      svg += fmt("%.1f", x_of(static_cast<double>(m.step))) + ","
             + fmt("%.1f", y_of(m.loss)) + " ";
    }
  }
  svg += "\"/>\n";
  svg += "<text x=\"55\" y=\"" + fmt("%.0f", T + 4) + "\" text-anchor=\"end\">" + fmt("%.3g", hi)
         + "</text>\n";
  svg += "<text x=\"55\" y=\"" + fmt("%.0f", H - B) + "\" text-anchor=\"end\">" + fmt("%.3g", lo)
         + "</text>\n";
  svg += "<text x=\"60\" y=\"336\" text-anchor=\"middle\">1</text>\n";
  svg += "<text x=\"620\" y=\"336\" text-anchor=\"middle\">" + std::to_string(last) + "</text>\n";
  svg += "<text x=\"340\" y=\"352\" text-anchor=\"middle\">step</text>\n";
  svg += "<text x=\"16\" y=\"175\" text-anchor=\"middle\" transform=\"rotate(-90 16 175)\">loss</text>\n";
  svg += "</svg>\n";
  return svg;
}

} // namespace vpt::cli
