#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "querydet/model.hpp"
#include "querydet/query.hpp"

namespace qd::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kFailed = 1;
inline constexpr int kUsage = 2;

// Options for every subcommand. Precedence: flags, then the --config JSON file, then these defaults.
struct RunConfig {
  std::string pyramid;
  std::string weights;
  std::string fixture;
  std::string gt;
  std::string out;
  Strategy strategy = Strategy::kCsq;
  double sigma = 0.15;
  int start_level = 4;
  int min_level = 2;
  int cq_patch = 11;
  std::uint64_t seed = 0;
  int repeats = 5;
  int warmup = 2;
  bool interleave = false;  // bench: one pass over all sigmas per round
  int image = 512;
  int channels = 16;
  int num_anchors = 1;
  int num_classes = 4;
  int blobs = 3;
  std::vector<Blob> blob_list;  // explicit blobs replace the seeded ones
  double beta_first = 1.0;
  double beta_last = 3.0;

  QueryConfig query() const;
};

// Overwrites the fields named in `j`. Throws ConfigError on unknown keys or bad values.
void apply_config_json(RunConfig& cfg, const nlohmann::json& j);

// Parses "cx,cy,size,cls".
Blob parse_blob(const std::string& text);

// Entry point shared by the binary and the tests.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace qd::cli
