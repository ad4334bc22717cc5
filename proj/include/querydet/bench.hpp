#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "querydet/query.hpp"

namespace qd {

struct BenchResult {
  QueryConfig config;
  int repeats = 0;
  int warmup = 0;
  std::map<int, double> level_millis;  // median per level
  double end_to_end_millis = 0;        // median of whole-pipeline time
  std::vector<double> samples;         // end-to-end, measured runs only
  std::map<int, std::size_t> level_keys;
  std::map<int, std::uint64_t> level_macs;
  bool timer_resolution_warning = false;
};

double median(std::vector<double> v);

// kSequential finishes one config before the next. kInterleaved runs one
// pass over all configs per round, so slow drift of the machine hits every
// config alike.
enum class BenchOrder { kSequential, kInterleaved };

// One pipeline at a time: warmup runs discarded, then `repeats` timed runs per config.
// Throws ConfigError when repeats < 5 or warmup < 2.
std::vector<BenchResult> run_benchmark(const FeaturePyramid& pyr, const HeadWeights& w,
                                       const std::vector<QueryConfig>& configs, int repeats, int warmup = 2,
                                       BenchOrder order = BenchOrder::kSequential);

// first, first + step, ... up to last inclusive, computed as k * step to avoid drift.
std::vector<double> sigma_sweep(double first = 0.05, double step = 0.05, double last = 0.95);

// Median over rounds of later.samples[k] / earlier.samples[k]. Meant for
// interleaved runs, where sample k of neighbouring configs ran back to back.
double paired_ratio(const BenchResult& later, const BenchResult& earlier);

// True when two medians differ by more than `tolerance` of the smaller one.
bool medians_disagree(double a, double b, double tolerance = 0.2);

}  // namespace qd
