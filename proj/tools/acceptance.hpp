#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pdafpf::acceptance {

struct Options {
  int seeds = 20;
  std::uint64_t base_seed = 1;
  unsigned threads = 1;
};

struct Result {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<int> criterion_ids();
std::string criterion_name(int id);

/// Runs one criterion. Library errors are caught and reported as failures.
Result run_criterion(int id, const Options& options = {});

/// "PASS  3 particle-grid-consistency: <detail> [12.3 s]"
std::string format(const Result& result);

/// Runs the given criteria (all when empty), printing one line per criterion
/// to `out` as each finishes. Returns true when all passed.
bool run_suite(const std::vector<int>& ids, const Options& options, std::ostream& out);

}  // namespace pdafpf::acceptance
