#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>

#include "querydet/bench.hpp"
#include "querydet/errors.hpp"
#include "querydet/flops.hpp"
#include "querydet/io.hpp"
#include "querydet/parallel.hpp"
#include "querydet/postproc.hpp"
#include "querydet/report.hpp"
#include "querydet/sparse.hpp"
#include "querydet/targets.hpp"

namespace qd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kPyramidFile = "pyramid.qdpyr";
constexpr const char* kWeightsFile = "weights.qdwts";
constexpr const char* kGroundTruthFile = "gt.json";
constexpr const char* kManifestFile = "fixture.json";
constexpr double kAnchorBase = 4.0;

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type");
  }
}

json blob_json(const Blob& b) { return {b.cx, b.cy, b.size, b.cls}; }

Blob blob_from_json(const json& j) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("blob entries must be [cx, cy, size, cls]");
  Blob b;
  b.cx = get_as<double>(j[0], "blob_list");
  b.cy = get_as<double>(j[1], "blob_list");
  b.size = get_as<double>(j[2], "blob_list");
  b.cls = get_as<int>(j[3], "blob_list");
  return b;
}

json load_json(const fs::path& path) {
  const std::string text = io::read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { io::write_text_file(path, j.dump(2) + "\n"); }

fs::path ensure_dir(const std::string& dir) {
  const fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw FormatError("cannot create directory " + p.string() + ": " + ec.message());
  return p;
}

// Explicit paths win; otherwise the fixture directory supplies them.
void resolve_inputs(RunConfig& cfg) {
  if (!cfg.fixture.empty()) {
    const fs::path dir(cfg.fixture);
    if (cfg.pyramid.empty()) cfg.pyramid = (dir / kPyramidFile).string();
    if (cfg.weights.empty()) cfg.weights = (dir / kWeightsFile).string();
    if (cfg.gt.empty()) cfg.gt = (dir / kGroundTruthFile).string();
  }
  if (cfg.pyramid.empty()) throw ConfigError("--pyramid (or --fixture) is required");
  if (cfg.weights.empty()) throw ConfigError("--weights (or --fixture) is required");
}

GroundTruthSet blobs_to_ground_truth(const std::vector<Blob>& blobs) {
  GroundTruthSet gt;
  for (const Blob& b : blobs) gt.objects.push_back({b.cx, b.cy, b.size, b.size, b.cls});
  return gt;
}

PostprocConfig postproc_for(const HeadWeights& w) {
  PostprocConfig pc;
  pc.anchors.base = kAnchorBase;
  pc.anchors.num_anchors = w.num_anchors;
  return pc;
}

// max |a - b| / max(1, max |b|), over all three outputs.
double head_rel_error(const SparseHeadOutput& got, const SparseHeadOutput& ref) {
  double worst = 0;
  auto one = [&](const SparseFeature& a, const SparseFeature& b) {
    if (a.features.size() != b.features.size()) {
      worst = INFINITY;
      return;
    }
    double diff = 0, scale = 1;
    for (std::size_t i = 0; i < a.features.size(); ++i) {
      diff = std::max(diff, std::abs(static_cast<double>(a.features[i]) - b.features[i]));
      scale = std::max(scale, std::abs(static_cast<double>(b.features[i])));
    }
    worst = std::max(worst, diff / scale);
  };
  one(got.cls_logits, ref.cls_logits);
  one(got.reg_deltas, ref.reg_deltas);
  one(got.query_logits, ref.query_logits);
  return worst;
}

bool head_bitwise_equal(const SparseHeadOutput& a, const SparseHeadOutput& b) {
  return a.keys() == b.keys() && a.cls_logits.features == b.cls_logits.features &&
         a.reg_deltas.features == b.reg_deltas.features && a.query_logits.features == b.query_logits.features;
}

// Restricts a sparse head output to the rows whose key passes `keep`.
template <typename Pred>
SparseHeadOutput filter_rows(const SparseHeadOutput& o, Pred keep) {
  std::vector<GridPos> kept;
  std::vector<std::size_t> rows;
  const KeySet& keys = o.keys();
  for (std::size_t i = 0; i < keys.size(); ++i)
    if (keep(keys[i])) {
      kept.push_back(keys[i]);
      rows.push_back(i);
    }
  KeySet ks(keys.level(), keys.height(), keys.width(), kept);
  auto pick = [&](const SparseFeature& f) {
    SparseFeature s(ks, f.channels);
    for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(f.row(rows[r]).begin(), f.channels, s.row(r).begin());
    return s;
  };
  return SparseHeadOutput{pick(o.cls_logits), pick(o.reg_deltas), pick(o.query_logits)};
}

// Independent restatement of the query target: integer grid distance test
// against every small object's projected center.
DenseTensor brute_query_target(const GroundTruthSet& gt, int level, int h, int w, double base) {
  DenseTensor t(1, h, w);
  const double stride = static_cast<double>(1 << level);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (const GroundTruthBox& o : gt.objects) {
        if (!(std::max(o.w, o.h) < base * stride)) continue;
        const double dx = x - std::floor(o.cx / stride), dy = y - std::floor(o.cy / stride);
        if (dx * dx + dy * dy < base * base) t.at(0, y, x) = 1.0f;
      }
  return t;
}

struct Check {
  std::string name;
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << v;
  return ss.str();
}

// ---------------------------------------------------------------- commands

int cmd_gen_fixture(const RunConfig& cfg, std::ostream& out) {
  const fs::path dir = ensure_dir(cfg.out.empty() ? "fixture" : cfg.out);
  SyntheticPyramidSpec spec;
  spec.seed = cfg.seed;
  spec.image_height = cfg.image;
  spec.image_width = cfg.image;
  spec.channels = cfg.channels;
  spec.blobs = cfg.blob_list.empty() ? random_blobs(cfg.seed, cfg.blobs, cfg.image, cfg.image) : cfg.blob_list;
  const FeaturePyramid pyr = make_synthetic_pyramid(spec);
  const HeadWeights w = make_fixture_weights(cfg.seed + 1000, cfg.channels, cfg.num_anchors, cfg.num_classes);

  io::save_pyramid(pyr, dir / kPyramidFile);
  io::save_weights(w, dir / kWeightsFile);
  write_json(dir / kGroundTruthFile, report::ground_truth_json(blobs_to_ground_truth(spec.blobs)));

  json blobs = json::array();
  for (const Blob& b : spec.blobs) blobs.push_back(blob_json(b));
  json files = json::object();
  for (const char* name : {kPyramidFile, kWeightsFile, kGroundTruthFile})
    files[name] = io::file_checksum(dir / name);
  const json manifest{{"schema", report::kSchema},
                      {"seed", cfg.seed},
                      {"image", {cfg.image, cfg.image}},
                      {"levels", {kMinPyramidLevel, kMaxPyramidLevel}},
                      {"channels", cfg.channels},
                      {"num_anchors", cfg.num_anchors},
                      {"num_classes", cfg.num_classes},
                      {"blobs", blobs},
                      {"checksums", files}};
  write_json(dir / kManifestFile, manifest);
  out << "wrote fixture to " << dir.string() << "\n";
  return kOk;
}

int cmd_run(RunConfig cfg, std::ostream& out) {
  const QueryConfig qc = cfg.query();
  resolve_inputs(cfg);
  const FeaturePyramid pyr = io::load_pyramid(cfg.pyramid);
  const HeadWeights w = io::load_weights(cfg.weights);
  const CascadeResult result = run_pipeline(pyr, w, qc);
  const auto dets = detect(result, postproc_for(w));

  const fs::path dir = ensure_dir(cfg.out.empty() ? "out" : cfg.out);
  write_json(dir / "detections.json", {{"schema", report::kSchema},
                                       {"strategy", std::string(to_string(qc.strategy))},
                                       {"detections", report::detections_json(dets)}});
  write_json(dir / "report.json", report::run_report_json(result));
  out << to_string(qc.strategy) << ": " << dets.size() << " detections, " << result.total_macs().total()
      << " MACs, " << fmt(result.total_millis) << " ms -> " << dir.string() << "\n";
  return kOk;
}

int cmd_verify(RunConfig cfg, std::ostream& out, bool skip_sparse_bias) {
  if (cfg.fixture.empty()) throw ConfigError("verify needs --fixture DIR");
  const QueryConfig qc = cfg.query();
  resolve_inputs(cfg);
  const fs::path dir(cfg.fixture);

  json warnings = json::array();
  const json manifest = load_json(dir / kManifestFile);
  if (manifest.contains("checksums"))
    for (const auto& [name, sum] : manifest["checksums"].items()) {
      const fs::path p = dir / name;
      const std::string actual = fs::exists(p) ? io::file_checksum(p) : std::string("missing");
      if (actual != sum.get<std::string>())
        warnings.push_back("checksum mismatch for " + name + ": recorded " + sum.get<std::string>() + ", found " +
                           actual);
    }

  const FeaturePyramid pyr = io::load_pyramid(cfg.pyramid);
  const HeadWeights w = io::load_weights(cfg.weights);
  const GroundTruthSet gt = report::parse_ground_truth(load_json(cfg.gt));
  const PostprocConfig pc = postproc_for(w);

  fault::set_skip_sparse_bias(skip_sparse_bias);
  std::vector<Check> checks;

  QueryConfig dense_cfg = qc;
  dense_cfg.strategy = Strategy::kDense;
  const CascadeResult dense = run_dense_pipeline(pyr, w, dense_cfg);
  auto reference_at = [&](int level, const KeySet& keys) {
    return gather_head_output(dense.level(level).dense_out, keys);
  };

  {
    QueryConfig c = qc;
    c.strategy = Strategy::kCcq;
    const CascadeResult ccq = run_full_conv_query(pyr, w, c);
    Check ck{"ccq_exactness", true, ""};
    std::size_t rows = 0;
    for (const LevelResult& lv : ccq.levels) {
      if (lv.dense) continue;
      rows += lv.computed_keys.size();
      if (!head_bitwise_equal(lv.sparse_out, reference_at(lv.level, lv.computed_keys))) {
        ck.pass = false;
        ck.detail = "P_" + std::to_string(lv.level) + " outputs differ from dense";
      }
    }
    if (ck.pass && detect(ccq, pc) != detect(dense, pc)) {
      ck.pass = false;
      ck.detail = "final detections differ from dense";
    }
    if (ck.pass) ck.detail = std::to_string(rows) + " kept rows bitwise equal; detections identical";
    checks.push_back(ck);
  }

  {
    QueryConfig c = qc;
    c.strategy = Strategy::kCsq;
    c.sigma = 0.0;
    const CascadeResult csq = run_cascade(pyr, w, c);
    double worst = 0;
    bool full = true;
    for (const LevelResult& lv : csq.levels) {
      if (lv.dense) continue;
      full = full && lv.computed_keys.size() == static_cast<std::size_t>(lv.height) * lv.width;
      worst = std::max(worst, head_rel_error(lv.sparse_out, reference_at(lv.level, lv.computed_keys)));
    }
    checks.push_back({"csq_sigma0", full && worst <= 1e-5,
                      "max relative error " + fmt(worst) + (full ? "" : "; keys do not cover the map")});
  }

  {
    QueryConfig c = qc;
    c.strategy = Strategy::kCq;
    const CascadeResult cq = run_crop_query(pyr, w, c);
    double worst = 0;
    std::size_t compared = 0;
    const int margin = 5;
    for (const LevelResult& lv : cq.levels) {
      if (lv.dense) continue;
      auto interior = [&](GridPos p) {
        return p.x >= margin && p.y >= margin && p.x < lv.width - margin && p.y < lv.height - margin;
      };
      const SparseHeadOutput got = filter_rows(lv.sparse_out, interior);
      compared += got.keys().size();
      worst = std::max(worst, head_rel_error(got, reference_at(lv.level, got.keys())));
    }
    checks.push_back({"cq_interior", worst <= 1e-5,
                      std::to_string(compared) + " interior keys, max relative error " + fmt(worst)});
  }

  {
    Check ck{"target_bruteforce", true, ""};
    std::size_t positives = 0;
    for (const auto& [l, t] : pyr.levels) {
      const DenseTensor v = query_target_for_level(gt, l, t.height, t.width, kAnchorBase);
      positives += static_cast<std::size_t>(std::count(v.values.begin(), v.values.end(), 1.0f));
      if (v != brute_query_target(gt, l, t.height, t.width, kAnchorBase)) {
        ck.pass = false;
        ck.detail = "P_" + std::to_string(l) + " target differs from brute force";
      }
    }
    if (ck.pass) ck.detail = std::to_string(positives) + " positive cells, all levels match";
    checks.push_back(ck);
  }

  {
    Check ck{"flops_identity", true, ""};
    const HeadShape shape{w.channels, w.num_anchors, w.num_classes};
    for (const auto& [l, t] : pyr.levels) {
      const KeySet full = KeySet::full(l, t.height, t.width);
      const Rulebook rb = build_rulebook(full);
      if (head_flops_sparse(full.size(), rb.size(), shape) != head_flops_dense_in_bounds(t.height, t.width, shape) ||
          dense.level(l).macs != head_flops_dense(t.height, t.width, shape)) {
        ck.pass = false;
        ck.detail = "P_" + std::to_string(l) + " cost counts disagree";
      }
    }
    if (ck.pass) ck.detail = "full-coverage sparse cost equals in-bounds dense cost on every level";
    checks.push_back(ck);
  }
  fault::set_skip_sparse_bias(false);

  bool all = true;
  json arr = json::array();
  for (const Check& c : checks) {
    all = all && c.pass;
    arr.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  const json verdict{{"schema", report::kSchema}, {"pass", all}, {"checks", arr}, {"warnings", warnings}};
  if (!cfg.out.empty()) write_json(cfg.out, verdict);
  out << verdict.dump(2) << "\n";
  return all ? kOk : kFailed;
}

int cmd_bench(RunConfig cfg, std::ostream& out) {
  if (cfg.repeats < 5) throw ConfigError("bench needs --repeats >= 5");
  const QueryConfig base = cfg.query();
  resolve_inputs(cfg);
  const FeaturePyramid pyr = io::load_pyramid(cfg.pyramid);
  const HeadWeights w = io::load_weights(cfg.weights);
  std::vector<QueryConfig> configs;
  for (double s : sigma_sweep()) {
    QueryConfig c = base;
    c.sigma = s;
    configs.push_back(c);
  }
  const auto results = run_benchmark(pyr, w, configs, cfg.repeats, cfg.warmup,
                                     cfg.interleave ? BenchOrder::kInterleaved : BenchOrder::kSequential);
  const fs::path dir = ensure_dir(cfg.out.empty() ? "bench" : cfg.out);
  io::write_text_file(dir / "bench.csv", report::bench_csv(results));
  write_json(dir / "bench.json", report::bench_summary_json(results));
  out << results.size() << " sweep points -> " << dir.string() << "\n";
  return kOk;
}

int cmd_flops(RunConfig cfg, std::ostream& out) {
  HeadShape shape{cfg.channels, cfg.num_anchors, cfg.num_classes};
  int h = cfg.image, wd = cfg.image;
  std::map<int, std::pair<std::size_t, std::size_t>> sparse;
  json run = nullptr;
  if (!cfg.pyramid.empty() || !cfg.weights.empty() || !cfg.fixture.empty()) {
    const QueryConfig qc = cfg.query();
    resolve_inputs(cfg);
    const FeaturePyramid pyr = io::load_pyramid(cfg.pyramid);
    const HeadWeights w = io::load_weights(cfg.weights);
    shape = HeadShape{w.channels, w.num_anchors, w.num_classes};
    h = pyr.image_height;
    wd = pyr.image_width;
    const CascadeResult r = run_pipeline(pyr, w, qc);
    for (const LevelResult& lv : r.levels)
      if (!lv.dense) sparse[lv.level] = {lv.computed_keys.size(), lv.rulebook_entries};
    run = report::config_json(qc);
  }
  json j = report::flops_report_json(make_flops_report(h, wd, kMinPyramidLevel, kMaxPyramidLevel, shape, sparse),
                                     shape, h, wd);
  if (!run.is_null()) j["run"] = run;
  if (!cfg.out.empty()) write_json(cfg.out, j);
  out << j.dump(2) << "\n";
  return kOk;
}

int cmd_targets_check(RunConfig cfg, std::ostream& out) {
  if (!cfg.fixture.empty() && cfg.gt.empty()) cfg.gt = (fs::path(cfg.fixture) / kGroundTruthFile).string();
  if (cfg.gt.empty()) throw ConfigError("targets-check needs --gt PATH or --fixture DIR");
  if (!(cfg.beta_first > 0 && cfg.beta_last > 0)) throw ConfigError("beta values must be positive");
  const GroundTruthSet gt = report::parse_ground_truth(load_json(cfg.gt));
  gt.validate(cfg.image, cfg.image);
  const fs::path dir = ensure_dir(cfg.out.empty() ? "targets" : cfg.out);

  bool all = true;
  json levels = json::array();
  for (int l = kMinPyramidLevel; l <= kMaxPyramidLevel; ++l) {
    const int h = level_dim(cfg.image, l), w = level_dim(cfg.image, l);
    if (h == 0 || w == 0) continue;
    const DenseTensor v = query_target_for_level(gt, l, h, w, kAnchorBase);
    const bool match = v == brute_query_target(gt, l, h, w, kAnchorBase);
    all = all && match;
    const std::string file = "v_" + std::to_string(l) + ".qdtens";
    io::save_tensor(v, dir / file);
    levels.push_back({{"level", l},
                      {"dims", {h, w}},
                      {"file", file},
                      {"positives", std::count(v.values.begin(), v.values.end(), 1.0f)},
                      {"threshold_grid", query_threshold_grid(l, kAnchorBase)},
                      {"brute_force_match", match}});
  }
  json beta = json::object();
  for (const auto& [l, b] : linear_beta_schedule(kMinPyramidLevel, kMaxPyramidLevel, cfg.beta_first, cfg.beta_last))
    beta[std::to_string(l)] = b;
  const json summary{{"schema", report::kSchema}, {"pass", all}, {"levels", levels}, {"beta", beta}};
  write_json(dir / "targets.json", summary);
  out << summary.dump(2) << "\n";
  return all ? kOk : kFailed;
}

// ---------------------------------------------------------------- parsing

// Collects flag values separately so they can be layered over the config file.
class Flags {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& name, T RunConfig::*field, const std::string& help) {
    CLI::Option* opt = app->add_option(name, values_.*field, help);
    appliers_.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values_.*field; });
  }

  void add_flag(CLI::App* app, const std::string& name, bool RunConfig::*field, const std::string& help) {
    CLI::Option* opt = app->add_flag(name, values_.*field, help);
    appliers_.emplace_back(opt, [this, field](RunConfig& c) { c.*field = values_.*field; });
  }

  void add_strategy(CLI::App* app) {
    CLI::Option* opt = app->add_option("--strategy", strategy_, "dense, csq, cq or ccq");
    appliers_.emplace_back(opt, [this](RunConfig& c) { c.strategy = parse_strategy(strategy_); });
  }

  void add_blobs(CLI::App* app) {
    CLI::Option* opt = app->add_option("--blob", blobs_, "explicit blob cx,cy,size,cls (repeatable)");
    appliers_.emplace_back(opt, [this](RunConfig& c) {
      c.blob_list.clear();
      for (const auto& b : blobs_) c.blob_list.push_back(parse_blob(b));
    });
  }

  void add_config(CLI::App* app) { config_opts_.push_back(app->add_option("--config", config_path_, "JSON config file")); }

  RunConfig resolve() const {
    RunConfig cfg;
    for (const CLI::Option* opt : config_opts_)
      if (opt->count() > 0) apply_config_json(cfg, load_json(config_path_));
    for (const auto& [opt, apply] : appliers_)
      if (opt->count() > 0) apply(cfg);
    return cfg;
  }

 private:
  RunConfig values_;
  std::string strategy_;
  std::vector<std::string> blobs_;
  std::string config_path_;
  std::vector<CLI::Option*> config_opts_;
  std::vector<std::pair<CLI::Option*, std::function<void(RunConfig&)>>> appliers_;
};

void add_query_flags(Flags& f, CLI::App* app) {
  f.add_strategy(app);
  f.add(app, "--sigma", &RunConfig::sigma, "query score threshold");
  f.add(app, "--start-level", &RunConfig::start_level, "coarsest level that extracts queries");
  f.add(app, "--min-level", &RunConfig::min_level, "finest level computed");
}

void add_input_flags(Flags& f, CLI::App* app) {
  f.add(app, "--pyramid", &RunConfig::pyramid, "QDPYR1 feature pyramid");
  f.add(app, "--weights", &RunConfig::weights, "QDWTS1 head weights");
  f.add(app, "--fixture", &RunConfig::fixture, "fixture directory written by gen-fixture");
}

}  // namespace

QueryConfig RunConfig::query() const {
  QueryConfig q;
  q.sigma = sigma;
  q.start_level = start_level;
  q.min_level = min_level;
  q.strategy = strategy;
  q.cq_patch = cq_patch;
  q.validate();
  return q;
}

Blob parse_blob(const std::string& text) {
  std::istringstream ss(text);
  Blob b;
  char c1 = 0, c2 = 0, c3 = 0;
  if (!(ss >> b.cx >> c1 >> b.cy >> c2 >> b.size >> c3 >> b.cls) || c1 != ',' || c2 != ',' || c3 != ',' ||
      !(ss >> std::ws).eof())
    throw ConfigError("blob must look like cx,cy,size,cls: " + text);
  return b;
}

void apply_config_json(RunConfig& cfg, const json& j) {
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "pyramid") cfg.pyramid = get_as<std::string>(v, key);
    else if (key == "weights") cfg.weights = get_as<std::string>(v, key);
    else if (key == "fixture") cfg.fixture = get_as<std::string>(v, key);
    else if (key == "gt") cfg.gt = get_as<std::string>(v, key);
    else if (key == "out") cfg.out = get_as<std::string>(v, key);
    else if (key == "strategy") cfg.strategy = parse_strategy(get_as<std::string>(v, key));
    else if (key == "sigma") cfg.sigma = get_as<double>(v, key);
    else if (key == "start_level") cfg.start_level = get_as<int>(v, key);
    else if (key == "min_level") cfg.min_level = get_as<int>(v, key);
    else if (key == "cq_patch") cfg.cq_patch = get_as<int>(v, key);
    else if (key == "seed") cfg.seed = get_as<std::uint64_t>(v, key);
    else if (key == "repeats") cfg.repeats = get_as<int>(v, key);
    else if (key == "warmup") cfg.warmup = get_as<int>(v, key);
    else if (key == "interleave") cfg.interleave = get_as<bool>(v, key);
    else if (key == "image") cfg.image = get_as<int>(v, key);
    else if (key == "channels") cfg.channels = get_as<int>(v, key);
    else if (key == "num_anchors") cfg.num_anchors = get_as<int>(v, key);
    else if (key == "num_classes") cfg.num_classes = get_as<int>(v, key);
    else if (key == "blobs") cfg.blobs = get_as<int>(v, key);
    else if (key == "blob_list") {
      if (!v.is_array()) throw ConfigError("config key 'blob_list' must be an array");
      cfg.blob_list.clear();
      for (const json& b : v) cfg.blob_list.push_back(blob_from_json(b));
    } else if (key == "beta_first") cfg.beta_first = get_as<double>(v, key);
    else if (key == "beta_last") cfg.beta_last = get_as<double>(v, key);
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Cascade sparse query inference engine"};
  app.require_subcommand(1);
  Flags flags;

  CLI::App* gen = app.add_subcommand("gen-fixture", "write a seeded pyramid, weights and ground truth");
  flags.add(gen, "--seed", &RunConfig::seed, "fixture seed");
  flags.add(gen, "--image", &RunConfig::image, "image side in pixels");
  flags.add(gen, "--channels", &RunConfig::channels, "feature channels");
  flags.add(gen, "--blobs", &RunConfig::blobs, "number of seeded blobs");
  flags.add(gen, "--num-classes", &RunConfig::num_classes, "classes");
  flags.add(gen, "--num-anchors", &RunConfig::num_anchors, "anchors per position");
  flags.add_blobs(gen);
  flags.add(gen, "--out", &RunConfig::out, "output directory");

  CLI::App* run = app.add_subcommand("run", "run one inference strategy");
  add_input_flags(flags, run);
  add_query_flags(flags, run);
  flags.add(run, "--out", &RunConfig::out, "output directory");

  CLI::App* verify = app.add_subcommand("verify", "run the oracle-equivalence checks on a fixture");
  add_input_flags(flags, verify);
  add_query_flags(flags, verify);
  flags.add(verify, "--out", &RunConfig::out, "verdict JSON path");
  bool fault_skip_bias = false;
  verify->add_flag("--fault-skip-sparse-bias", fault_skip_bias, "")->group("");

  CLI::App* bench = app.add_subcommand("bench", "sigma sweep benchmark");
  add_input_flags(flags, bench);
  add_query_flags(flags, bench);
  flags.add(bench, "--repeats", &RunConfig::repeats, "timed runs per point (>= 5)");
  flags.add_flag(bench, "--interleave", &RunConfig::interleave, "run one pass over all sigmas per round");
  flags.add(bench, "--out", &RunConfig::out, "output directory");

  CLI::App* flops = app.add_subcommand("flops", "analytic per-level head cost");
  flags.add(flops, "--image", &RunConfig::image, "image side in pixels");
  flags.add(flops, "--channels", &RunConfig::channels, "head channels");
  flags.add(flops, "--num-anchors", &RunConfig::num_anchors, "anchors per position");
  flags.add(flops, "--num-classes", &RunConfig::num_classes, "classes");
  add_input_flags(flags, flops);
  add_query_flags(flags, flops);
  flags.add(flops, "--out", &RunConfig::out, "output JSON path");

  CLI::App* targets = app.add_subcommand("targets-check", "emit and cross-check query target maps");
  flags.add(targets, "--gt", &RunConfig::gt, "ground-truth JSON");
  flags.add(targets, "--fixture", &RunConfig::fixture, "fixture directory");
  flags.add(targets, "--image", &RunConfig::image, "image side in pixels");
  flags.add(targets, "--out", &RunConfig::out, "output directory");

  for (CLI::App* sub : {gen, run, verify, bench, flops, targets}) flags.add_config(sub);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  configure_threads_from_env();
  try {
    const RunConfig cfg = flags.resolve();
    if (gen->parsed()) return cmd_gen_fixture(cfg, out);
    if (run->parsed()) return cmd_run(cfg, out);
    if (verify->parsed()) return cmd_verify(cfg, out, fault_skip_bias);
    if (bench->parsed()) return cmd_bench(cfg, out);
    if (flops->parsed()) return cmd_flops(cfg, out);
    if (targets->parsed()) return cmd_targets_check(cfg, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailed;
  }
  return kUsage;
}

}  // namespace qd::cli
