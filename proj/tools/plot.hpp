#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pdafpf/harness.hpp"

namespace pdafpf {

struct PlotOptions {
  /// Columns to draw; empty selects the position columns of truth, estimate
  /// and oracles in a top panel and association probabilities below.
  std::vector<std::string> columns;
  int width = 800;
  int panel_height = 300;
};

std::string render_svg(const CsvTable& table, const PlotOptions& options = {});

void plot_csv(const std::filesystem::path& in, const std::filesystem::path& out, const PlotOptions& options = {});

}  // namespace pdafpf
