#include <cmath>
#include <limits>

#include "pdafpf/errors.hpp"
#include "pdafpf/harness.hpp"

namespace pdafpf {

namespace {

std::string position_column(const RunRecord& record, const std::string& prefix, int target) {
  const std::string first = state_names(record.config.model.diffusion.size()).front();
  if (!record.config.two_target()) {
    if (target != 1) throw ConfigError("single-target record has no target " + std::to_string(target));
    return prefix + "_" + first;
  }
  if (target != 1 && target != 2) throw ConfigError("two-target record has targets 1 and 2");
  return prefix + std::to_string(target) + "_" + first;
}

}  // namespace

double compute_rmse(const RunRecord& record, double t0, double t1, int target) {
  if (!(t1 >= t0)) throw ConfigError("compute_rmse: window end precedes its start");
  const std::size_t time = record.column("time");
  const std::size_t truth = record.column(position_column(record, "truth", target));
  const std::size_t est = record.column(position_column(record, "est", target));
  const double slack = 1e-9 * std::max(1.0, std::abs(t1));
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& row : record.rows) {
    if (row[time] < t0 - slack || row[time] > t1 + slack) continue;
    const double e = row[est] - row[truth];
    sum += e * e;
    ++count;
  }
  if (count == 0) throw ConfigError("compute_rmse: no rows in the window");
  return std::sqrt(sum / static_cast<double>(count));
}

CoalescenceMetric coalescence_metric(const RunRecord& record, double separation) {
  if (!record.config.two_target()) throw ConfigError("coalescence_metric: two-target record required");
  CoalescenceMetric metric;
  if (record.rows.empty()) return metric;

  const std::size_t time = record.column("time");
  const std::size_t t1 = record.column(position_column(record, "truth", 1));
  const std::size_t t2 = record.column(position_column(record, "truth", 2));
  const std::size_t e1 = record.column(position_column(record, "est", 1));
  const std::size_t e2 = record.column(position_column(record, "est", 2));

  const auto& first = record.rows.front();
  const double initial_sign = first[t1] - first[t2] >= 0.0 ? 1.0 : -1.0;
  std::size_t start = 0;
  for (std::size_t r = 0; r < record.rows.size(); ++r) {
    if ((record.rows[r][t1] - record.rows[r][t2]) * initial_sign < 0.0) {
      metric.crossed = true;
      metric.crossing_time = record.rows[r][time];
      start = r;
      break;
    }
  }
  if (metric.crossed) {
    while (start < record.rows.size() &&
           std::abs(record.rows[start][t1] - record.rows[start][t2]) < separation) {
      ++start;
    }
  }

  metric.min_distance = std::numeric_limits<double>::infinity();
  for (std::size_t r = start; r < record.rows.size(); ++r) {
    metric.min_distance = std::min(metric.min_distance, std::abs(record.rows[r][e1] - record.rows[r][e2]));
  }
  if (start == record.rows.size()) metric.min_distance = 0.0;

  const auto& last = record.rows.back();
  metric.identity_correct = std::abs(last[e1] - last[t1]) < std::abs(last[e1] - last[t2]) &&
                            std::abs(last[e2] - last[t2]) < std::abs(last[e2] - last[t1]);
  return metric;
}

}  // namespace pdafpf
