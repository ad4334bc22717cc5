#include "querydet/query.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>

#include "querydet/errors.hpp"

namespace qd {

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::kDense: return "dense";
    case Strategy::kCsq: return "csq";
    case Strategy::kCq: return "cq";
    case Strategy::kCcq: return "ccq";
  }
  return "?";
}

Strategy parse_strategy(std::string_view name) {
  for (Strategy s : {Strategy::kDense, Strategy::kCsq, Strategy::kCq, Strategy::kCcq})
    if (to_string(s) == name) return s;
  throw ConfigError("unknown strategy '" + std::string(name) + "' (expected dense, csq, cq or ccq)");
}

void QueryConfig::validate() const {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw ConfigError("sigma must lie in [0, 1]");
  if (min_level > start_level)
    throw ConfigError("min_level " + std::to_string(min_level) + " exceeds start_level " +
                      std::to_string(start_level));
  if (cq_patch <= 0 || cq_patch % 2 == 0) throw ConfigError("cq_patch must be a positive odd number");
}

KeySet extract_queries(const DenseTensor& query_logits, int level, double sigma) {
  if (query_logits.channels != 1) throw ValidationError("query map must have one channel");
  std::vector<GridPos> hits;
  for (int y = 0; y < query_logits.height; ++y)
    for (int x = 0; x < query_logits.width; ++x)
      if (static_cast<double>(sigmoid(query_logits.at(0, y, x))) > sigma) hits.push_back({x, y});
  return KeySet(level, query_logits.height, query_logits.width, std::move(hits));
}

KeySet extract_queries(const SparseFeature& query_logits, double sigma) {
  if (query_logits.channels != 1) throw ValidationError("query rows must have one channel");
  std::vector<GridPos> hits;
  for (std::size_t i = 0; i < query_logits.rows(); ++i)
    if (static_cast<double>(sigmoid(query_logits.row(i)[0])) > sigma) hits.push_back(query_logits.keys[i]);
  const KeySet& k = query_logits.keys;
  return KeySet(k.level(), k.height(), k.width(), std::move(hits));
}

KeySet map_queries_to_keys(const KeySet& queries, int child_height, int child_width) {
  std::vector<GridPos> children;
  children.reserve(queries.size() * 4);
  for (const GridPos& q : queries.positions())
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) {
        const GridPos c{2 * q.x + i, 2 * q.y + j};
        if (c.x < child_width && c.y < child_height) children.push_back(c);
      }
  return KeySet(queries.level() - 1, child_height, child_width, std::move(children));
}

const LevelResult& CascadeResult::level(int l) const {
  for (const LevelResult& r : levels)
    if (r.level == l) return r;
  throw ConfigError("cascade result has no level " + std::to_string(l));
}

bool CascadeResult::has_level(int l) const {
  for (const LevelResult& r : levels)
    if (r.level == l) return true;
  return false;
}

HeadMacs CascadeResult::total_macs() const {
  HeadMacs m;
  for (const LevelResult& r : levels) m += r.macs;
  return m;
}

DenseTensor crop_patch(const DenseTensor& t, int cx, int cy, int side) {
  const int half = side / 2;
  DenseTensor patch(t.channels, side, side);
  for (int c = 0; c < t.channels; ++c)
    for (int py = 0; py < side; ++py) {
      const int y = cy - half + py;
      if (y < 0 || y >= t.height) continue;
      for (int px = 0; px < side; ++px) {
        const int x = cx - half + px;
        if (x < 0 || x >= t.width) continue;
        patch.at(c, py, px) = t.at(c, y, x);
      }
    }
  return patch;
}

namespace {

using Clock = std::chrono::steady_clock;

double millis_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

HeadShape shape_of(const HeadWeights& w) { return HeadShape{w.channels, w.num_anchors, w.num_classes}; }

void check_inputs(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  cfg.validate();
  w.validate();
  pyr.validate();
  if (pyr.channels != w.channels)
    throw ConfigError("pyramid has " + std::to_string(pyr.channels) + " channels, head expects " +
                      std::to_string(w.channels));
  if (cfg.start_level > pyr.max_level())
    throw ConfigError("start_level " + std::to_string(cfg.start_level) + " is above the top pyramid level");
  for (int l = cfg.min_level; l <= pyr.max_level(); ++l)
    if (!pyr.has_level(l)) throw ConfigError("pyramid is missing level " + std::to_string(l));
}

LevelResult dense_level(const FeaturePyramid& pyr, const HeadWeights& w, int l) {
  const DenseTensor& feature = pyr.level(l);
  LevelResult r;
  r.level = l;
  r.height = feature.height;
  r.width = feature.width;
  r.dense = true;
  r.dense_out = run_dense_head(feature, w);
  r.computed_keys = KeySet::full(l, r.height, r.width);
  r.dense_positions = feature.plane();
  r.macs = head_flops_dense(r.height, r.width, shape_of(w));
  return r;
}

// Builds one level below start_level from its key set.
using SparseLevelFn = std::function<void(const DenseTensor& feature, LevelResult& r)>;

CascadeResult run_queried(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg,
                          const SparseLevelFn& lower) {
  check_inputs(pyr, w, cfg);
  const auto t_run = Clock::now();
  CascadeResult res;
  res.config = cfg;
  res.shape = shape_of(w);

  KeySet queries;
  for (int l = pyr.max_level(); l >= cfg.start_level; --l) {
    const auto t0 = Clock::now();
    LevelResult r = dense_level(pyr, w, l);
    if (l == cfg.start_level) {
      r.extracted_queries = extract_queries(r.dense_out.query_logits, l, cfg.sigma);
      queries = r.extracted_queries;
    }
    r.millis = millis_since(t0);
    res.levels.push_back(std::move(r));
  }

  for (int l = cfg.start_level - 1; l >= cfg.min_level; --l) {
    const auto t0 = Clock::now();
    const DenseTensor& feature = pyr.level(l);
    LevelResult r;
    r.level = l;
    r.height = feature.height;
    r.width = feature.width;
    r.computed_keys = map_queries_to_keys(queries, r.height, r.width);
    lower(feature, r);
    r.sparse_rows = r.computed_keys.size();
    r.extracted_queries = extract_queries(r.sparse_out.query_logits, cfg.sigma);
    queries = r.extracted_queries;
    r.millis = millis_since(t0);
    res.levels.push_back(std::move(r));
  }
  res.total_millis = millis_since(t_run);
  return res;
}

}  // namespace

CascadeResult run_dense_pipeline(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  check_inputs(pyr, w, cfg);
  const auto t_run = Clock::now();
  CascadeResult res;
  res.config = cfg;
  res.shape = shape_of(w);
  for (int l = pyr.max_level(); l >= cfg.min_level; --l) {
    const auto t0 = Clock::now();
    LevelResult r = dense_level(pyr, w, l);
    r.millis = millis_since(t0);
    res.levels.push_back(std::move(r));
  }
  res.total_millis = millis_since(t_run);
  return res;
}

CascadeResult run_cascade(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  const HeadShape shape = shape_of(w);
  return run_queried(pyr, w, cfg, [&](const DenseTensor& feature, LevelResult& r) {
    const SparseFeature values = gather(feature, r.computed_keys);
    const Rulebook rb = build_rulebook(r.computed_keys);
    r.sparse_out = run_sparse_head(values, w, rb);
    r.rulebook_entries = rb.size();
    r.macs = head_flops_sparse(r.computed_keys.size(), r.rulebook_entries, shape);
  });
}

CascadeResult run_crop_query(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  const HeadShape shape = shape_of(w);
  const int side = cfg.cq_patch, mid = cfg.cq_patch / 2;
  return run_queried(pyr, w, cfg, [&](const DenseTensor& feature, LevelResult& r) {
    const KeySet& keys = r.computed_keys;
    SparseHeadOutput out{SparseFeature(keys, w.predictor_channels(Branch::kCls)),
                         SparseFeature(keys, w.predictor_channels(Branch::kReg)),
                         SparseFeature(keys, 1)};
    for (std::size_t i = 0; i < keys.size(); ++i) {
      const DenseHeadOutput patch = run_dense_head(crop_patch(feature, keys[i].x, keys[i].y, side), w);
      auto copy_center = [&](const DenseTensor& src, SparseFeature& dst) {
        for (int c = 0; c < src.channels; ++c) dst.row(i)[c] = src.at(c, mid, mid);
      };
      copy_center(patch.cls_logits, out.cls_logits);
      copy_center(patch.reg_deltas, out.reg_deltas);
      copy_center(patch.query_logits, out.query_logits);
    }
    r.sparse_out = std::move(out);
    r.patches = keys.size();
    r.dense_positions = keys.size() * static_cast<std::size_t>(side) * side;
    HeadMacs per_patch = head_flops_dense(side, side, shape);
    r.macs = HeadMacs{per_patch.tower * keys.size(), per_patch.predictor * keys.size(),
                      per_patch.bias_adds * keys.size()};
  });
}

CascadeResult run_full_conv_query(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  const HeadShape shape = shape_of(w);
  return run_queried(pyr, w, cfg, [&](const DenseTensor& feature, LevelResult& r) {
    const DenseHeadOutput full = run_dense_head(feature, w);
    r.sparse_out = gather_head_output(full, r.computed_keys);
    r.dense_positions = feature.plane();
    r.macs = head_flops_dense(r.height, r.width, shape);
  });
}

CascadeResult run_pipeline(const FeaturePyramid& pyr, const HeadWeights& w, const QueryConfig& cfg) {
  switch (cfg.strategy) {
    case Strategy::kDense: return run_dense_pipeline(pyr, w, cfg);
    case Strategy::kCsq: return run_cascade(pyr, w, cfg);
    case Strategy::kCq: return run_crop_query(pyr, w, cfg);
    case Strategy::kCcq: return run_full_conv_query(pyr, w, cfg);
  }
  throw ConfigError("unknown strategy");
}

}  // namespace qd
