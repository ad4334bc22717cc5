#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "querydet/bench.hpp"
#include "querydet/flops.hpp"
#include "querydet/postproc.hpp"
#include "querydet/query.hpp"
#include "querydet/targets.hpp"

namespace qd::report {

inline constexpr const char* kSchema = "qd/1";

using nlohmann::json;

// [[x, y], ...] in canonical order.
json keyset_json(const KeySet& keys);

json detections_json(const std::vector<Detection>& dets);
json config_json(const QueryConfig& cfg);
json run_report_json(const CascadeResult& result);
json flops_report_json(const FlopsReport& r, const HeadShape& shape, int image_height, int image_width);

// strategy,sigma,level,keys,flops,millis
std::string bench_csv(const std::vector<BenchResult>& results);
json bench_summary_json(const std::vector<BenchResult>& results);

json ground_truth_json(const GroundTruthSet& gt);
// Throws FormatError on a malformed document.
GroundTruthSet parse_ground_truth(const json& j);

}  // namespace qd::report
