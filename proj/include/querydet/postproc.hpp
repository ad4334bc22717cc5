#pragma once

#include <array>
#include <span>
#include <vector>

#include "querydet/query.hpp"
#include "querydet/sparse.hpp"

namespace qd {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  bool operator==(const Box&) const = default;
};

double iou(const Box& a, const Box& b);

struct AnchorConfig {
  double base = 4.0;
  int num_anchors = 1;

  void validate() const;
};

// Square anchor centered at ((x + 0.5) 2^l, (y + 0.5) 2^l). Anchor a of A has
// side base * 2^l * 2^(a / A).
Box anchor_box(GridPos p, int level, int anchor, const AnchorConfig& cfg);

// Deltas (dx, dy, dw, dh): center shifts by (dx * wa, dy * ha), sides scale by
// exp(dw), exp(dh). dw and dh are clamped at ln(1000 / 16).
Box decode_box(const Box& anchor, std::span<const float> deltas);
std::array<double, 4> encode_box(const Box& anchor, const Box& box);

// Decodes every anchor at every listed position; reg holds A*4 channels per position.
std::vector<Box> decode_boxes(const SparseFeature& reg_deltas, const AnchorConfig& cfg);

struct Detection {
  Box box;
  double score = 0;
  int cls = 0;
  int level = 0;
  bool operator==(const Detection&) const = default;
};

struct PostprocConfig {
  AnchorConfig anchors;
  double score_threshold = 0.05;
  double iou_threshold = 0.5;
  std::size_t top_k = 100;
};

// Descending score, ties by (class, x1, y1, x2, y2, level).
bool detection_before(const Detection& a, const Detection& b);

// Greedy per-class suppression; drops scores <= score_threshold; at most top_k kept.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, double score_threshold,
                           std::size_t top_k);

// Candidates above the score threshold from one level: every position for a
// dense level, only computed keys otherwise.
std::vector<Detection> level_detections(const LevelResult& level, int num_classes, const PostprocConfig& cfg);

std::vector<Detection> merge_levels(const std::vector<std::vector<Detection>>& per_level,
                                    const PostprocConfig& cfg);

std::vector<Detection> detect(const CascadeResult& result, const PostprocConfig& cfg);

}  // namespace qd
