#include <cstdio>
#include <fstream>
#include <sstream>

#include "pdafpf/errors.hpp"
#include "pdafpf/harness.hpp"

namespace pdafpf {

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_table(std::ostream& out, const std::vector<std::string>& columns,
                 const std::vector<std::vector<double>>& rows) {
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << '\n';
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << format_double(row[c]);
    out << '\n';
  }
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  out.close();
  if (!out) throw IoError("failed to write " + path.string());
}

std::string figure_csv(const RunRecord& record) {
  const double dt = record.config.dt;
  const std::string pos = state_names(record.config.model.diffusion.size()).front();
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  if (!record.config.two_target()) {
    const int M = record.config.channels;
    columns = {"time", "truth_" + pos, "est_" + pos};
    for (int m = 1; m <= M; ++m) columns.push_back("meas_pos_" + std::to_string(m));
    columns.push_back("target_channel");
    const std::size_t time = record.column("time");
    const std::size_t truth = record.column("truth_" + pos);
    const std::size_t est = record.column("est_" + pos);
    const std::size_t meas = record.column("meas_1");
    for (std::size_t r = 0; r < record.rows.size(); ++r) {
      const auto& row = record.rows[r];
      std::vector<double> out{row[time], row[truth], row[est]};
      for (int m = 0; m < M; ++m) out.push_back(row[meas + static_cast<std::size_t>(m)] / dt);
      out.push_back(r < record.associations.size() ? record.associations[r] : 0);
      rows.push_back(std::move(out));
    }
  } else {
    columns = {"time", "truth1_" + pos, "truth2_" + pos, "est1_" + pos, "est2_" + pos, "pi_1", "pi_2"};
    std::vector<std::size_t> idx;
    for (const auto& c : columns) idx.push_back(record.column(c));
    for (const auto& row : record.rows) {
      std::vector<double> out;
      for (std::size_t i : idx) out.push_back(row[i]);
      rows.push_back(std::move(out));
    }
  }
  std::ostringstream text;
  write_table(text, columns, rows);
  return text.str();
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string record_to_csv(const RunRecord& record) {
  std::ostringstream text;
  write_table(text, record.columns, record.rows);
  return text.str();
}

void emit_outputs(const RunRecord& record, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_file(out_dir / "run.csv", record_to_csv(record));
  write_file(out_dir / "config.echo.json", config_to_json(record.config));
  write_file(out_dir / (record.config.two_target() ? "fig2.csv" : "fig1.csv"), figure_csv(record));
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw IoError(path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  table.columns = split(line);
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.columns.size()) {
      throw IoError(path.string() + ":" + std::to_string(number) + ": expected " +
                    std::to_string(table.columns.size()) + " fields, found " + std::to_string(cells.size()));
    }
    std::vector<double> row;
    for (const auto& cell : cells) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw IoError(path.string() + ":" + std::to_string(number) + ": not a number '" + cell + "'");
      }
    }
    table.rows.push_back(std::move(row));
  }
  if (in.bad()) throw IoError("failed to read " + path.string());
  return table;
}

}  // namespace pdafpf
