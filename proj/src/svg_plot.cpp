#include "miles/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "miles/errors.hpp"

namespace miles {
namespace {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> values;
  bool step = false;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

class Panel {
 public:
  Panel(double top, double lo, double hi, int epochs)
      : top_(top), lo_(lo), hi_(hi), epochs_(epochs) {
    if (!(hi_ > lo_)) {
      const double pad = std::max(std::abs(lo_) * 0.1, 1e-3);
      lo_ -= pad;
      hi_ += pad;
    }
  }

  double x(double epoch) const {
    const double span = std::max(1, epochs_ - 1);
    return PlotLayout::margin_left + (epoch - 1.0) / span * PlotLayout::plot_width();
  }
  double y(double v) const {
    return top_ + PlotLayout::panel_height * (1.0 - (v - lo_) / (hi_ - lo_));
  }

  void frame(std::ostringstream& svg, const std::string& title, const std::string& y_label) const {
    const double left = PlotLayout::margin_left;
    const double right = left + PlotLayout::plot_width();
    const double bottom = top_ + PlotLayout::panel_height;
    svg << "<g class=\"axes\" stroke=\"#333\" stroke-width=\"1\">\n";
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(bottom) << "\" x2=\"" << num(right)
        << "\" y2=\"" << num(bottom) << "\"/>\n";
    svg << "<line x1=\"" << num(left) << "\" y1=\"" << num(top_) << "\" x2=\"" << num(left)
        << "\" y2=\"" << num(bottom) << "\"/>\n";
    svg << "</g>\n";
    svg << "<text x=\"" << num(left) << "\" y=\"" << num(top_ - 8) << "\" font-size=\"13\">"
        << title << "</text>\n";
    svg << "<text transform=\"translate(" << num(left - 55) << "," << num(top_ + PlotLayout::panel_height / 2)
        << ") rotate(-90)\" font-size=\"11\" text-anchor=\"middle\">" << y_label << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double v = lo_ + (hi_ - lo_) * i / 4.0;
      svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y(v) + 4)
          << "\" font-size=\"10\" text-anchor=\"end\">" << tick_label(v) << "</text>\n";
    }
    const int step = std::max(1, epochs_ / 10);
    for (int e = 1; e <= epochs_; e += step) {
      svg << "<text x=\"" << num(x(e)) << "\" y=\"" << num(bottom + 14)
          << "\" font-size=\"10\" text-anchor=\"middle\">" << e << "</text>\n";
    }
    svg << "<text x=\"" << num(left + PlotLayout::plot_width() / 2) << "\" y=\"" << num(bottom + 30)
        << "\" font-size=\"11\" text-anchor=\"middle\">epoch</text>\n";
  }

  void draw(std::ostringstream& svg, const std::vector<int>& epochs, const Series& s,
            int legend_slot) const {
    svg << "<polyline class=\"series\" data-label=\"" << s.label << "\" fill=\"none\" stroke=\""
        << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      if (i) svg << ' ';
      if (s.step && i > 0) svg << num(x(epochs[i])) << ',' << num(y(s.values[i - 1])) << ' ';
      svg << num(x(epochs[i])) << ',' << num(y(s.values[i]));
    }
    svg << "\"/>\n";
    const double lx = PlotLayout::margin_left + PlotLayout::plot_width() + 15;
    const double ly = top_ + 12 + 18 * legend_slot;
    svg << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20)
        << "\" y2=\"" << num(ly) << "\" stroke=\"" << s.color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(lx + 26) << "\" y=\"" << num(ly + 4) << "\" font-size=\"11\">"
        << s.label << "</text>\n";
  }

 private:
  double top_;
  double lo_;
  double hi_;
  int epochs_;
};

std::pair<double, double> value_range(const std::vector<Series>& series) {
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : series) {
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  return {lo, hi};
}

}  // namespace

std::string render_svg(const RunLog& log) {
  if (log.epochs.empty()) throw InputError("plot: run log has no epochs");
  std::vector<int> epochs;
  Series u_a{"u_A", "#1f77b4", {}}, u_b{"u_B", "#d62728", {}}, delta{"delta_AB", "#2ca02c", {}};
  Series lr_a{"alpha_A", "#1f77b4", {}, true}, lr_b{"alpha_B", "#d62728", {}, true},
      lr_ab{"alpha_AB", "#7f7f7f", {}, true};
  Series m_ab{"AB", "#9467bd", {}}, m_a{"A", "#1f77b4", {}}, m_b{"B", "#d62728", {}};
  const auto val = static_cast<std::size_t>(Split::Validation);
  for (const EpochRecord& r : log.epochs) {
    epochs.push_back(r.epoch);
    u_a.values.push_back(r.u_a);
    u_b.values.push_back(r.u_b);
    delta.values.push_back(r.delta);
    lr_a.values.push_back(r.alpha_a);
    lr_b.values.push_back(r.alpha_b);
    lr_ab.values.push_back(r.alpha_ab);
    m_ab.values.push_back(r.metrics[val].fused);
    m_a.values.push_back(r.metrics[val].a);
    m_b.values.push_back(r.metrics[val].b);
  }
  const int last_epoch = epochs.back();
  const double panel_step = PlotLayout::panel_height + PlotLayout::panel_gap;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(PlotLayout::width)
      << "\" height=\"" << num(PlotLayout::height()) << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  const std::vector<std::pair<std::vector<Series>, std::array<std::string, 2>>> panels = {
      {{u_a, u_b, delta}, {"Conditional utilization", "utilization"}},
      {{lr_a, lr_b, lr_ab}, {"Learning rates", "learning rate"}},
      {{m_ab, m_a, m_b}, {"Validation " + std::string(to_string(log.metric)), std::string(to_string(log.metric))}},
  };
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& [series, titles] = panels[p];
    auto [lo, hi] = value_range(series);
    if (p == 1) lo = 0.0;
    if (p == 2) {
      lo = 0.0;
      hi = std::max(hi, 1.0);
    }
    const Panel panel(PlotLayout::margin_top + p * panel_step, lo, hi, last_epoch);
    svg << "<g class=\"panel\" id=\"panel" << p + 1 << "\">\n";
    panel.frame(svg, titles[0], titles[1]);
    for (std::size_t s = 0; s < series.size(); ++s) panel.draw(svg, epochs, series[s], static_cast<int>(s));
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void plot(const RunLog& log, const std::filesystem::path& path) {
  const std::string text = render_svg(log);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("plot: cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("plot: write to " + path.string() + " failed");
}

}  // namespace miles
