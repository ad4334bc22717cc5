#include "querydet/postproc.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "querydet/errors.hpp"

namespace qd {

namespace {
const double kDeltaClamp = std::log(1000.0 / 16.0);
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

void AnchorConfig::validate() const {
  if (!(base > 0)) throw ConfigError("anchor base must be positive");
  if (num_anchors <= 0) throw ConfigError("anchor count must be positive");
}

Box anchor_box(GridPos p, int level, int anchor, const AnchorConfig& cfg) {
  const double stride = std::ldexp(1.0, level);
  const double side = cfg.base * stride * std::exp2(static_cast<double>(anchor) / cfg.num_anchors);
  const double cx = (p.x + 0.5) * stride, cy = (p.y + 0.5) * stride;
  return Box{cx - side / 2, cy - side / 2, cx + side / 2, cy + side / 2};
}

Box decode_box(const Box& anchor, std::span<const float> deltas) {
  if (deltas.size() != 4) throw ValidationError("decode_box needs 4 deltas");
  if (!all_finite(deltas)) throw ValidationError("non-finite regression delta");
  const double wa = anchor.width(), ha = anchor.height();
  const double cxa = anchor.x1 + wa / 2, cya = anchor.y1 + ha / 2;
  const double cx = cxa + deltas[0] * wa;
  const double cy = cya + deltas[1] * ha;
  const double w = std::exp(std::min<double>(deltas[2], kDeltaClamp)) * wa;
  const double h = std::exp(std::min<double>(deltas[3], kDeltaClamp)) * ha;
  return Box{cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2};
}

std::array<double, 4> encode_box(const Box& anchor, const Box& box) {
  const double wa = anchor.width(), ha = anchor.height();
  const double cxa = anchor.x1 + wa / 2, cya = anchor.y1 + ha / 2;
  const double cx = box.x1 + box.width() / 2, cy = box.y1 + box.height() / 2;
  return {(cx - cxa) / wa, (cy - cya) / ha, std::log(box.width() / wa), std::log(box.height() / ha)};
}

std::vector<Box> decode_boxes(const SparseFeature& reg_deltas, const AnchorConfig& cfg) {
  cfg.validate();
  if (reg_deltas.channels != cfg.num_anchors * 4)
    throw ValidationError("regression rows need 4 deltas per anchor");
  std::vector<Box> boxes;
  boxes.reserve(reg_deltas.rows() * cfg.num_anchors);
  for (std::size_t i = 0; i < reg_deltas.rows(); ++i)
    for (int a = 0; a < cfg.num_anchors; ++a)
      boxes.push_back(decode_box(anchor_box(reg_deltas.keys[i], reg_deltas.keys.level(), a, cfg),
                                 reg_deltas.row(i).subspan(static_cast<std::size_t>(a) * 4, 4)));
  return boxes;
}

bool detection_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.cls, a.box.x1, a.box.y1, a.box.x2, a.box.y2, a.level) <
         std::tie(b.cls, b.box.x1, b.box.y1, b.box.x2, b.box.y2, b.level);
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double score_threshold,
                           std::size_t top_k) {
  if (!(iou_threshold >= 0 && iou_threshold <= 1) || !(score_threshold >= 0 && score_threshold <= 1))
    throw ConfigError("nms thresholds must lie in [0, 1]");
  std::erase_if(dets, [&](const Detection& d) { return !(d.score > score_threshold); });
  std::sort(dets.begin(), dets.end(), detection_before);

  std::map<int, std::vector<const Detection*>> kept_by_class;
  std::vector<Detection> kept;
  for (const Detection& d : dets) {
    if (kept.size() >= top_k) break;
    auto& same = kept_by_class[d.cls];
    const bool suppressed = std::any_of(same.begin(), same.end(),
                                        [&](const Detection* k) { return iou(k->box, d.box) > iou_threshold; });
    if (suppressed) continue;
    kept.push_back(d);
    same.push_back(&d);
  }
  return kept;
}

std::vector<Detection> level_detections(const LevelResult& level, int num_classes, const PostprocConfig& cfg) {
  cfg.anchors.validate();
  const int A = cfg.anchors.num_anchors;
  std::vector<Detection> out;
  auto emit = [&](GridPos p, auto cls_at, auto reg_at) {
    for (int a = 0; a < A; ++a) {
      std::array<float, 4> d{};
      bool decoded = false;
      Box box;
      for (int k = 0; k < num_classes; ++k) {
        const double score = sigmoid(cls_at(a * num_classes + k));
        if (!(score > cfg.score_threshold)) continue;
        if (!decoded) {
          for (int j = 0; j < 4; ++j) d[j] = reg_at(a * 4 + j);
          box = decode_box(anchor_box(p, level.level, a, cfg.anchors), d);
          decoded = true;
        }
        out.push_back(Detection{box, score, k, level.level});
      }
    }
  };

  if (level.dense) {
    const DenseHeadOutput& o = level.dense_out;
    if (o.cls_logits.channels != A * num_classes || o.reg_deltas.channels != A * 4)
      throw ConfigError("head output channels do not match the anchor/class configuration");
    for (int y = 0; y < level.height; ++y)
      for (int x = 0; x < level.width; ++x)
        emit(GridPos{x, y}, [&](int c) { return o.cls_logits.at(c, y, x); },
             [&](int c) { return o.reg_deltas.at(c, y, x); });
  } else {
    const SparseHeadOutput& o = level.sparse_out;
    if (o.cls_logits.channels != A * num_classes || o.reg_deltas.channels != A * 4)
      throw ConfigError("head output channels do not match the anchor/class configuration");
    for (std::size_t i = 0; i < o.keys().size(); ++i)
      emit(o.keys()[i], [&](int c) { return o.cls_logits.row(i)[c]; },
           [&](int c) { return o.reg_deltas.row(i)[c]; });
  }
  return out;
}

std::vector<Detection> merge_levels(const std::vector<std::vector<Detection>>& per_level,
                                    const PostprocConfig& cfg) {
  std::vector<Detection> all;
  for (const auto& v : per_level) all.insert(all.end(), v.begin(), v.end());
  return nms(std::move(all), cfg.iou_threshold, cfg.score_threshold, cfg.top_k);
}

std::vector<Detection> detect(const CascadeResult& result, const PostprocConfig& cfg) {
  PostprocConfig c = cfg;
  c.anchors.num_anchors = result.shape.num_anchors;
  std::vector<std::vector<Detection>> per_level;
  for (const LevelResult& l : result.levels)
    per_level.push_back(level_detections(l, result.shape.num_classes, c));
  return merge_levels(per_level, c);
}

}  // namespace qd
