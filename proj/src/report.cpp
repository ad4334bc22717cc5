#include "querydet/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "querydet/errors.hpp"

namespace qd::report {

json keyset_json(const KeySet& keys) {
  json a = json::array();
  for (const GridPos& p : keys.positions()) a.push_back({p.x, p.y});
  return a;
}

json detections_json(const std::vector<Detection>& dets) {
  json a = json::array();
  for (const Detection& d : dets)
    a.push_back({{"box", {d.box.x1, d.box.y1, d.box.x2, d.box.y2}},
                 {"score", d.score},
                 {"class", d.cls},
                 {"level", d.level}});
  return a;
}

json config_json(const QueryConfig& cfg) {
  return {{"strategy", std::string(to_string(cfg.strategy))},
          {"sigma", cfg.sigma},
          {"start_level", cfg.start_level},
          {"min_level", cfg.min_level},
          {"cq_patch", cfg.cq_patch}};
}

json run_report_json(const CascadeResult& result) {
  json levels = json::array();
  for (const LevelResult& l : result.levels)
    levels.push_back({{"level", l.level},
                      {"dims", {l.height, l.width}},
                      {"dense", l.dense},
                      {"num_computed_keys", l.computed_keys.size()},
                      {"computed_keys", keyset_json(l.computed_keys)},
                      {"extracted_queries", keyset_json(l.extracted_queries)},
                      {"dense_positions", l.dense_positions},
                      {"sparse_rows", l.sparse_rows},
                      {"patches", l.patches},
                      {"rulebook_entries", l.rulebook_entries},
                      {"flops", l.macs.total()},
                      {"bias_adds", l.macs.bias_adds},
                      {"millis", l.millis}});
  return {{"schema", kSchema},
          {"strategy", std::string(to_string(result.config.strategy))},
          {"config", config_json(result.config)},
          {"head", {{"channels", result.shape.channels},
                    {"num_anchors", result.shape.num_anchors},
                    {"num_classes", result.shape.num_classes}}},
          {"levels", levels},
          {"total_flops", result.total_macs().total()},
          {"total_millis", result.total_millis}};
}

json flops_report_json(const FlopsReport& r, const HeadShape& shape, int image_height, int image_width) {
  json levels = json::array();
  std::uint64_t low_res = 0;
  for (const LevelFlops& l : r.levels) {
    levels.push_back({{"level", l.level},
                      {"dims", {l.height, l.width}},
                      {"dense_macs", l.dense.total()},
                      {"dense_tower_macs", l.dense.tower},
                      {"dense_predictor_macs", l.dense.predictor},
                      {"dense_bias_adds", l.dense.bias_adds},
                      {"sparse_macs", l.sparse.total()},
                      {"dense_share", l.dense_share}});
    if (l.level >= 4) low_res += l.dense.total();
  }
  const double total = static_cast<double>(r.dense_total.total());
  json out = {{"schema", kSchema},
              {"unit", "MAC"},
              {"image", {image_height, image_width}},
              {"head", {{"channels", shape.channels},
                        {"num_anchors", shape.num_anchors},
                        {"num_classes", shape.num_classes}}},
              {"levels", levels},
              {"dense_total", r.dense_total.total()},
              {"sparse_total", r.sparse_total.total()},
              {"sparse_over_dense", r.sparse_over_dense()},
              {"low_res_share", total > 0 ? static_cast<double>(low_res) / total : 0.0}};
  out["p2_increase"] = std::isnan(r.p2_increase) ? json(nullptr) : json(r.p2_increase);
  return out;
}

std::string bench_csv(const std::vector<BenchResult>& results) {
  std::ostringstream ss;
  ss << "strategy,sigma,level,keys,flops,millis\n";
  for (const BenchResult& r : results)
    for (auto it = r.level_millis.rbegin(); it != r.level_millis.rend(); ++it) {
      const int l = it->first;
      ss << to_string(r.config.strategy) << ',' << std::setprecision(4) << r.config.sigma << ',' << l << ','
         << r.level_keys.at(l) << ',' << r.level_macs.at(l) << ',' << std::setprecision(6) << it->second
         << '\n';
    }
  return ss.str();
}

json bench_summary_json(const std::vector<BenchResult>& results) {
  json rows = json::array();
  for (const BenchResult& r : results) {
    json keys = json::object(), millis = json::object(), macs = json::object();
    for (const auto& [l, k] : r.level_keys) keys[std::to_string(l)] = k;
    for (const auto& [l, m] : r.level_millis) millis[std::to_string(l)] = m;
    for (const auto& [l, m] : r.level_macs) macs[std::to_string(l)] = m;
    rows.push_back({{"config", config_json(r.config)},
                    {"repeats", r.repeats},
                    {"warmup", r.warmup},
                    {"end_to_end_millis", r.end_to_end_millis},
                    {"samples", r.samples},
                    {"level_keys", keys},
                    {"level_millis", millis},
                    {"level_flops", macs},
                    {"timer_resolution_warning", r.timer_resolution_warning}});
  }
  return {{"schema", kSchema}, {"sweep", rows}};
}

json ground_truth_json(const GroundTruthSet& gt) {
  json a = json::array();
  for (const GroundTruthBox& o : gt.objects)
    a.push_back({{"cx", o.cx}, {"cy", o.cy}, {"w", o.w}, {"h", o.h}, {"class", o.cls}});
  return a;
}

GroundTruthSet parse_ground_truth(const json& j) {
  if (!j.is_array()) throw FormatError("ground truth must be a JSON array");
  GroundTruthSet gt;
  for (const json& o : j) {
    try {
      gt.objects.push_back(GroundTruthBox{o.at("cx").get<double>(), o.at("cy").get<double>(),
                                          o.at("w").get<double>(), o.at("h").get<double>(),
                                          o.at("class").get<int>()});
    } catch (const json::exception& e) {
      throw FormatError(std::string("malformed ground-truth object: ") + e.what());
    }
  }
  return gt;
}

}  // namespace qd::report
