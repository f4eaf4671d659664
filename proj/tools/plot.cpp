#include "plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#17becf", "#bcbd22"};

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }
bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

bool is_belief(const std::string& c) {
  return starts_with(c, "beta_") || starts_with(c, "pi_") || starts_with(c, "wonham_") || starts_with(c, "bayes_");
}

bool is_position(const std::string& c) {
  if (starts_with(c, "meas")) return false;
  return ends_with(c, "_pos") || ends_with(c, "_x") || c == "grid_mean";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void draw_panel(std::ostringstream& svg, const CsvTable& table, const std::vector<std::size_t>& cols,
                std::size_t time_col, double top, const PlotOptions& opt) {
  constexpr double left = 60.0, right = 150.0, pad = 20.0;
  const double width = opt.width - left - right;
  const double height = opt.panel_height - 2 * pad;

  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin;
  double ymin = tmin, ymax = -tmin;
  for (const auto& row : table.rows) {
    tmin = std::min(tmin, row[time_col]);
    tmax = std::max(tmax, row[time_col]);
    for (std::size_t c : cols) {
      if (!std::isfinite(row[c])) continue;
      ymin = std::min(ymin, row[c]);
      ymax = std::max(ymax, row[c]);
    }
  }
  if (!(tmax > tmin)) tmax = tmin + 1.0;
  if (!(ymax > ymin)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double margin = 0.05 * (ymax - ymin);
  ymin -= margin;
  ymax += margin;
  auto px = [&](double t) { return left + (t - tmin) / (tmax - tmin) * width; };
  auto py = [&](double y) { return top + pad + (ymax - y) / (ymax - ymin) * height; };

  svg << "<rect x=\"" << left << "\" y=\"" << top + pad << "\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"none\" stroke=\"#444\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double t = tmin + (tmax - tmin) * i / 4.0;
    const double y = ymin + (ymax - ymin) * i / 4.0;
    svg << "<text x=\"" << px(t) << "\" y=\"" << top + pad + height + 14
        << "\" font-size=\"10\" text-anchor=\"middle\">" << num(t) << "</text>\n";
    svg << "<text x=\"" << left - 4 << "\" y=\"" << py(y) + 3 << "\" font-size=\"10\" text-anchor=\"end\">" << num(y)
        << "</text>\n";
  }
  for (std::size_t k = 0; k < cols.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    const bool dashed = starts_with(table.columns[cols[k]], "truth");
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\""
        << (dashed ? " stroke-dasharray=\"6,3\"" : "") << " points=\"";
    for (const auto& row : table.rows) {
      if (!std::isfinite(row[cols[k]])) continue;
      svg << num(px(row[time_col])) << ',' << num(py(row[cols[k]])) << ' ';
    }
    svg << "\"/>\n";
    const double ly = top + pad + 14.0 * static_cast<double>(k + 1);
    svg << "<line x1=\"" << left + width + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + width + 30 << "\" y2=\""
        << ly - 4 << "\" stroke=\"" << color << "\"" << (dashed ? " stroke-dasharray=\"6,3\"" : "") << "/>\n";
    svg << "<text x=\"" << left + width + 35 << "\" y=\"" << ly << "\" font-size=\"11\">" << table.columns[cols[k]]
        << "</text>\n";
  }
}

}  // namespace

std::string render_svg(const CsvTable& table, const PlotOptions& options) {
  const auto time_it = std::find(table.columns.begin(), table.columns.end(), "time");
  if (time_it == table.columns.end()) throw ConfigError("plot: the CSV has no time column");
  const auto time_col = static_cast<std::size_t>(time_it - table.columns.begin());

  std::vector<std::vector<std::size_t>> panels;
  if (!options.columns.empty()) {
    std::vector<std::size_t> chosen;
    for (const auto& name : options.columns) {
      const auto it = std::find(table.columns.begin(), table.columns.end(), name);
      if (it == table.columns.end()) throw ConfigError("plot: no column '" + name + "'");
      chosen.push_back(static_cast<std::size_t>(it - table.columns.begin()));
    }
    panels.push_back(chosen);
  } else {
    std::vector<std::size_t> positions, beliefs;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (is_position(table.columns[c])) positions.push_back(c);
      if (is_belief(table.columns[c])) beliefs.push_back(c);
    }
    if (!positions.empty()) panels.push_back(positions);
    if (!beliefs.empty()) panels.push_back(beliefs);
    if (panels.empty()) throw ConfigError("plot: no position or association columns found");
  }

  std::ostringstream svg;
  const int height = options.panel_height * static_cast<int>(panels.size());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    draw_panel(svg, table, panels[p], time_col, static_cast<double>(p * options.panel_height), options);
  }
  svg << "</svg>\n";
  return svg.str();
}

void plot_csv(const std::filesystem::path& in, const std::filesystem::path& out, const PlotOptions& options) {
  const std::string svg = render_svg(read_csv(in), options);
  std::ofstream file(out, std::ios::binary | std::ios::trunc);
  if (!file) throw IoError("cannot open " + out.string() + " for writing");
  file << svg;
  file.close();
  if (!file) throw IoError("failed to write " + out.string());
}

}  // namespace pdafpf
