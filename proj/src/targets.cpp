#include "querydet/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "querydet/errors.hpp"

namespace qd {

void GroundTruthSet::validate(int image_height, int image_width) const {
  for (const GroundTruthBox& o : objects) {
    if (!(o.w > 0 && o.h > 0)) throw ValidationError("ground-truth box with non-positive size");
    if (!(o.cx >= 0 && o.cy >= 0 && o.cx < image_width && o.cy < image_height))
      throw ValidationError("ground-truth center outside the image");
  }
}

void LossConfig::validate() const {
  if (!(alpha > 0 && alpha < 1)) throw ConfigError("focal alpha must lie in (0, 1)");
  if (!(gamma >= 0)) throw ConfigError("focal gamma must be non-negative");
  for (const auto& [l, b] : beta)
    if (!(b > 0)) throw ConfigError("beta for level " + std::to_string(l) + " must be positive");
}

double level_scale(int level, double base) { return base * std::ldexp(1.0, level); }

bool is_small_for_level(const GroundTruthBox& o, int level, double base) {
  return std::max(o.w, o.h) < level_scale(level, base);
}

double query_threshold_grid(int level, double base) {
  return level_scale(level, base) / std::ldexp(1.0, level);
}

DistanceMap distance_map(const GroundTruthSet& gt, int level, int height, int width, double base) {
  DistanceMap d{height, width,
                std::vector<double>(static_cast<std::size_t>(height) * width,
                                    std::numeric_limits<double>::infinity())};
  const double stride = std::ldexp(1.0, level);
  for (const GroundTruthBox& o : gt.objects) {
    if (!is_small_for_level(o, level, base)) continue;
    const double gx = std::floor(o.cx / stride), gy = std::floor(o.cy / stride);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double& v = d.values[static_cast<std::size_t>(y) * width + x];
        v = std::min(v, std::hypot(x - gx, y - gy));
      }
  }
  return d;
}

DenseTensor query_target(const DistanceMap& d, double threshold_grid) {
  if (!(threshold_grid > 0)) throw ConfigError("query target threshold must be positive");
  DenseTensor t(1, d.height, d.width);
  for (std::size_t i = 0; i < d.values.size(); ++i) t.values[i] = d.values[i] < threshold_grid ? 1.0f : 0.0f;
  return t;
}

DenseTensor query_target_for_level(const GroundTruthSet& gt, int level, int height, int width, double base) {
  return query_target(distance_map(gt, level, height, width, base), query_threshold_grid(level, base));
}

namespace {

// ln(1 + e^x) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_same(const DenseTensor& a, const DenseTensor& b, const char* what) {
  if (!a.same_shape(b)) throw ValidationError(std::string(what) + ": prediction and target dims differ");
}

}  // namespace

double focal_loss(const DenseTensor& logits, const DenseTensor& target, double alpha, double gamma) {
  check_same(logits, target, "focal_loss");
  if (logits.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits.values[i];
    const bool positive = target.values[i] > 0.5f;
    // For a positive, -ln p_t = softplus(-z) and 1 - p_t = sigmoid(-z).
    const double zt = positive ? z : -z;
    const double nll = softplus(-zt);
    const double one_minus_pt = std::exp(-softplus(zt));
    const double at = positive ? alpha : 1.0 - alpha;
    sum += at * std::pow(one_minus_pt, gamma) * nll;
  }
  return sum / static_cast<double>(logits.size());
}

double smooth_l1(const DenseTensor& pred, const DenseTensor& target) {
  check_same(pred, target, "smooth_l1");
  if (pred.size() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = std::abs(static_cast<double>(pred.values[i]) - static_cast<double>(target.values[i]));
    sum += d < 1.0 ? 0.5 * d * d : d - 0.5;
  }
  return sum / static_cast<double>(pred.size());
}

double level_loss(const LevelMaps& m, const LossConfig& cfg) {
  cfg.validate();
  return focal_loss(m.cls_logits, m.cls_target, cfg.alpha, cfg.gamma) + smooth_l1(m.reg_deltas, m.reg_target) +
         focal_loss(m.query_logits, m.query_target, cfg.alpha, cfg.gamma);
}

double total_loss(const std::map<int, double>& level_losses, const std::map<int, double>& beta) {
  double sum = 0.0;
  for (const auto& [l, loss] : level_losses) {
    auto it = beta.find(l);
    if (it == beta.end()) throw ConfigError("no beta weight for level " + std::to_string(l));
    sum += it->second * loss;
  }
  return sum;
}

std::map<int, double> linear_beta_schedule(int min_level, int max_level, double first, double last) {
  if (min_level > max_level) throw ConfigError("invalid level range for beta schedule");
  std::map<int, double> beta;
  const int span = max_level - min_level;
  for (int l = min_level; l <= max_level; ++l) {
    const int i = l - min_level;
    const double v = span == 0 ? first : (first * (span - i) + last * i) / span;
    // Snap to the decimal grid the schedules are written in (1.32, not 1.3199999999999998).
    beta[l] = std::round(v * 1e9) / 1e9;
  }
  return beta;
}

}  // namespace qd
