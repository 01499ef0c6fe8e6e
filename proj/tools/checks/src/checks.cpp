#include "gauge_ot_checks/checks.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <thread>

#include "common.hpp"

namespace gauge_ot::checks {

bool Report::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

Size size_from_string(const std::string& s) {
  if (s == "small") return Size::Small;
  if (s == "medium") return Size::Medium;
  throw std::invalid_argument("unknown size '" + s + "' (small, medium)");
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"duality", "conservation", "submersion",
                                                 "rank1",   "oracle",       "appendixA"};
  return names;
}

int default_threads() {
  if (const char* env = std::getenv("GAUGE_OT_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  threads = std::clamp(threads, 1, std::max(1, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::atomic<bool> failed{false};
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          if (!failed.exchange(true)) err = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (err) std::rethrow_exception(err);
}

Report run_suite(const std::string& suite, std::uint64_t seed, Size size, int threads) {
  using Fn = std::vector<Check> (*)(std::uint64_t, Size, int);
  auto pick = [](const std::string& s) -> Fn {
    if (s == "duality") return detail::duality_suite;
    if (s == "conservation") return detail::conservation_suite;
    if (s == "submersion") return detail::submersion_suite;
    if (s == "rank1") return detail::rank1_suite;
    if (s == "oracle") return detail::oracle_suite;
    if (s == "appendixA") return detail::appendix_suite;
    throw std::invalid_argument("unknown suite '" + s + "'");
  };
  Report r;
  const std::vector<std::string> run = suite == "all" ? suite_names() : std::vector<std::string>{suite};
  for (const auto& s : run) {
    const Fn fn = pick(s);
    auto part = fn(seed, size, threads);
    r.checks.insert(r.checks.end(), part.begin(), part.end());
  }
  return r;
}

}  // namespace gauge_ot::checks
