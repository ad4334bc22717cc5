#include "querydet/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "querydet/errors.hpp"

namespace qd {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lo + hi);
}

std::vector<BenchResult> run_benchmark(const FeaturePyramid& pyr, const HeadWeights& w,
                                       const std::vector<QueryConfig>& configs, int repeats, int warmup,
                                       BenchOrder order) {
  if (repeats < 5) throw ConfigError("benchmark repeats must be at least 5");
  if (warmup < 2) throw ConfigError("benchmark warmup must be at least 2");

  using period = std::chrono::steady_clock::period;
  const double resolution_ms = 1e3 * static_cast<double>(period::num) / static_cast<double>(period::den);

  std::vector<BenchResult> out(configs.size());
  std::vector<std::map<int, std::vector<double>>> per_level(configs.size());
  auto timed_run = [&](std::size_t i) {
    const CascadeResult res = run_pipeline(pyr, w, configs[i]);
    BenchResult& r = out[i];
    r.samples.push_back(res.total_millis);
    for (const LevelResult& l : res.levels) {
      per_level[i][l.level].push_back(l.millis);
      r.level_keys[l.level] = l.computed_keys.size();
      r.level_macs[l.level] = l.macs.total();
    }
  };

  if (order == BenchOrder::kSequential) {
    for (std::size_t i = 0; i < configs.size(); ++i) {
      for (int k = 0; k < warmup; ++k) (void)run_pipeline(pyr, w, configs[i]);
      for (int k = 0; k < repeats; ++k) timed_run(i);
    }
  } else {
    for (int k = 0; k < warmup; ++k)
      for (const QueryConfig& cfg : configs) (void)run_pipeline(pyr, w, cfg);
    for (int k = 0; k < repeats; ++k)
      for (std::size_t i = 0; i < configs.size(); ++i) timed_run(i);
  }

  for (std::size_t i = 0; i < configs.size(); ++i) {
    BenchResult& r = out[i];
    r.config = configs[i];
    r.repeats = repeats;
    r.warmup = warmup;
    for (auto& [l, v] : per_level[i]) r.level_millis[l] = median(v);
    r.end_to_end_millis = median(r.samples);
    r.timer_resolution_warning = resolution_ms > 0.01 * r.end_to_end_millis;
  }
  return out;
}

std::vector<double> sigma_sweep(double first, double step, double last) {
  std::vector<double> out;
  if (!(step > 0)) throw ConfigError("sigma sweep step must be positive");
  const long k0 = std::lround(first / step);
  const long k1 = std::lround(last / step);
  for (long k = k0; k <= k1; ++k) out.push_back(std::round(static_cast<double>(k) * step * 1e9) / 1e9);
  return out;
}

double paired_ratio(const BenchResult& later, const BenchResult& earlier) {
  if (later.samples.size() != earlier.samples.size() || later.samples.empty())
    throw ValidationError("paired_ratio needs equally many samples on both sides");
  std::vector<double> ratios;
  for (std::size_t k = 0; k < later.samples.size(); ++k) ratios.push_back(later.samples[k] / earlier.samples[k]);
  return median(std::move(ratios));
}

bool medians_disagree(double a, double b, double tolerance) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  return hi > lo * (1.0 + tolerance);
}

}  // namespace qd
