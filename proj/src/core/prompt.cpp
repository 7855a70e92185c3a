#include "biotwin/prompt.hpp"

#include <cmath>
#include <string>

#include "biotwin/error.hpp"

namespace biotwin::prompt {

void validate(const Detection& d) {
  geom::validate(d.box);
  if (!(d.score >= 0.0 && d.score <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "score must lie in [0, 1]", "score");
  }
}

std::vector<Detection> filter_detections(const std::vector<Detection>& dets,
                                         const DetectionConfig& cfg) {
  const double tau = cfg.confidence_threshold;
  if (!(tau >= 0.0 && tau <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "threshold must lie in [0, 1]",
                "confidence_threshold");
  }
  std::vector<Detection> kept;
  for (const auto& d : dets) {
    if (d.score > tau) kept.push_back(d);
  }
  return kept;
}

Detection select_primary(const std::vector<Detection>& dets) {
  if (dets.empty()) throw Error(ErrorCode::NoSubject, "no detection to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < dets.size(); ++i) {
    if (dets[i].score > dets[best].score) best = i;
  }
  return dets[best];
}

VisualPrompt build_prompt(const Detection& det) {
  VisualPrompt p;
  p.box = det.box;
  p.point = geom::box_centroid(det.box);
  return p;
}

std::vector<VisualPrompt> make_prompts(const std::vector<Detection>& dets,
                                       const DetectionConfig& cfg, bool multi_person) {
  for (std::size_t i = 0; i < dets.size(); ++i) {
    try {
      validate(dets[i]);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), "detections[" + std::to_string(i) + "]");
    }
  }
  const auto kept = filter_detections(dets, cfg);
  if (kept.empty()) {
    throw Error(ErrorCode::NoSubject, "no detection scored above the confidence threshold");
  }
  std::vector<VisualPrompt> prompts;
  if (multi_person) {
    for (const auto& d : kept) prompts.push_back(build_prompt(d));
  } else {
    prompts.push_back(build_prompt(select_primary(kept)));
  }
  return prompts;
}

}  // namespace biotwin::prompt
