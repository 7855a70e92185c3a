#pragma once

#include <vector>

#include "biotwin/geom.hpp"

namespace biotwin::prompt {

struct Detection {
  geom::Box2 box;
  double score = 0.0;
};

/// Checks box validity and 0 <= score <= 1.
void validate(const Detection& d);

struct DetectionConfig {
  double confidence_threshold = 0.5;
};

inline constexpr int kBoxLabel = 1;
inline constexpr int kForegroundLabel = 1;

struct VisualPrompt {
  geom::Box2 box;
  int box_label = kBoxLabel;
  geom::Pixel point;
  int point_label = kForegroundLabel;
};

/// Keeps detections whose score is strictly above the threshold, in input order.
std::vector<Detection> filter_detections(const std::vector<Detection>& dets,
                                         const DetectionConfig& cfg = {});

/// Highest-scoring detection; the first one wins ties. Throws NoSubject on empty input.
Detection select_primary(const std::vector<Detection>& dets);

/// Box prompt plus a foreground point at the box centroid.
VisualPrompt build_prompt(const Detection& det);

/// Single-subject path (filter, select, build) or, with `multi_person`, one
/// prompt per kept detection. Throws NoSubject when nothing passes the filter.
std::vector<VisualPrompt> make_prompts(const std::vector<Detection>& dets,
                                       const DetectionConfig& cfg, bool multi_person);

}  // namespace biotwin::prompt
