#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "querydet/flops.hpp"
#include "querydet/model.hpp"
#include "querydet/sparse.hpp"

namespace qd {

enum class Strategy { kDense, kCsq, kCq, kCcq };

std::string_view to_string(Strategy s);
// Throws ConfigError for an unknown name.
Strategy parse_strategy(std::string_view name);

struct QueryConfig {
  double sigma = 0.15;
  int start_level = 4;
  int min_level = 2;
  Strategy strategy = Strategy::kCsq;
  int cq_patch = 11;

  // Throws ConfigError when min_level > start_level, sigma is outside [0, 1]
  // or the crop patch side is not a positive odd number.
  void validate() const;
};

// Positions whose sigmoid score is strictly greater than sigma.
KeySet extract_queries(const DenseTensor& query_logits, int level, double sigma);
KeySet extract_queries(const SparseFeature& query_logits, double sigma);

// Each query (x, y) maps to {(2x+i, 2y+j) : i, j in {0, 1}} on the next finer
// level; children falling outside the child bounds are dropped.
KeySet map_queries_to_keys(const KeySet& queries, int child_height, int child_width);

struct LevelResult {
  int level = 0;
  int height = 0;
  int width = 0;
  bool dense = false;  // dense_out holds the full-map output
  DenseHeadOutput dense_out;
  SparseHeadOutput sparse_out;  // kept outputs for levels below start_level
  KeySet computed_keys;
  KeySet extracted_queries;
  std::size_t dense_positions = 0;
  std::size_t sparse_rows = 0;
  std::size_t patches = 0;
  std::size_t rulebook_entries = 0;
  HeadMacs macs;
  double millis = 0;
};

struct CascadeResult {
  QueryConfig config;
  HeadShape shape;
  std::vector<LevelResult> levels;  // descending level order
  double total_millis = 0;

  const LevelResult& level(int l) const;
  bool has_level(int l) const;
  HeadMacs total_macs() const;
};

// Every level dense; the reference pipeline with P_2 enabled.
CascadeResult run_dense_pipeline(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg);
// Cascade Sparse Query: sparse heads below start_level, queries re-extracted
// from each sparse level's own query rows.
CascadeResult run_cascade(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg);
// Crop Query baseline: per key, a cq_patch x cq_patch zero-padded crop through the dense head.
CascadeResult run_crop_query(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg);
// Complete Convolution Query baseline: dense everywhere, outputs kept at keys only.
CascadeResult run_full_conv_query(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg);

// Dispatches on cfg.strategy.
CascadeResult run_pipeline(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg);

// Crops a side x side window centered on (cx, cy), zero outside the map.
DenseTensor crop_patch(const DenseTensor& t, int cx, int cy, int side);

}  // namespace qd
