#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gauge_ot::checks {

// One measured property. criterion is the acceptance criterion it belongs to (0: none).
struct Check {
  int criterion = 0;
  std::string suite;
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
  // wall-clock measurements; kept out of the deterministic report body
  bool timing = false;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> table;
};

struct Report {
  std::vector<Check> checks;
  bool passed() const;
};

enum class Size { Small, Medium };
Size size_from_string(const std::string& s);

// duality, conservation, submersion, rank1, oracle, appendixA
const std::vector<std::string>& suite_names();

// Runs one suite (or "all"). Independent trials run on up to `threads` threads; results are
// assembled in trial order so the report does not depend on scheduling.
Report run_suite(const std::string& suite, std::uint64_t seed, Size size, int threads = 1);

// GAUGE_OT_THREADS if set and positive, else the hardware concurrency.
int default_threads();

// Calls fn(i) for i in [0, n) on up to `threads` threads.
void parallel_for(int n, int threads, const std::function<void(int)>& fn);

}  // namespace gauge_ot::checks
