#include "grasp/perception.hpp"

namespace grasp {

std::vector<MaskObservation> SimMaskSource::observe() {
  std::vector<MaskObservation> out;
  for (auto& rm : env_->render_masks()) {
    MaskObservation obs;
    obs.instance = rm.object_id;
    obs.mask = std::move(rm.mask);
    obs.full_area = rm.full_area;
    out.push_back(std::move(obs));
  }
  return out;
}

std::vector<MaskObservation> FileMaskSource::observe() {
  std::vector<MaskObservation> out;
  int instance = 0;
  for (const auto& path : paths_) {
    try {
      MaskObservation obs = read_mask_file(path);
      obs.instance = instance++;
      out.push_back(std::move(obs));
    } catch (const MaskFileError& e) {
      throw PerceptionUnavailable(e.what());
    }
  }
  return out;
}

std::vector<DetectedObject> perceive(MaskSource& source, const AffineCalib& calib) {
  std::vector<DetectedObject> detections;
  for (const auto& obs : source.observe()) {
    DetectedObject det;
    det.instance = obs.instance;
    det.class_label = obs.mask.class_label;
    det.visible = !obs.mask.points.empty();
    if (det.visible) {
      det.pose = pixel_to_world(calib, estimate_pose(obs.mask));
      det.ratio = mask_ratio(obs.mask, obs.full_area);
    }
    detections.push_back(det);
  }
  return detections;
}

namespace {

// Total order used for tie-breaking equal ratios.
bool better_candidate(const DetectedObject& a, const DetectedObject& b) {
  if (a.ratio != b.ratio) return a.ratio > b.ratio;
  if (a.class_label != b.class_label) return a.class_label < b.class_label;
  if (a.pose.center.x != b.pose.center.x) return a.pose.center.x < b.pose.center.x;
  if (a.pose.center.y != b.pose.center.y) return a.pose.center.y < b.pose.center.y;
  return a.pose.theta < b.pose.theta;
}

}  // namespace

const DetectedObject& select_target(const std::vector<DetectedObject>& detections,
                                    SelectMode mode, int class_label) {
  const DetectedObject* best = nullptr;
  for (const auto& det : detections) {
    if (!det.visible) continue;
    if (mode == SelectMode::kByClass && det.class_label != class_label) continue;
    if (best == nullptr || better_candidate(det, *best)) best = &det;
  }
  if (best == nullptr) {
    if (mode == SelectMode::kByClass) {
      throw TargetNotFound("no visible detection with class " + std::to_string(class_label));
    }
    throw TargetNotFound("no visible detections");
  }
  return *best;
}

EnvState build_state(const DetectedObject& target, const Effector& effector) {
  if (!target.visible) throw TargetNotFound("target detection is not visible");
  EnvState s;
  s.x = target.pose.center.x;
  s.y = target.pose.center.y;
  s.theta = target.pose.degenerate ? 0.0 : target.pose.theta;
  s.x_r = effector.x;
  s.y_r = effector.y;
  s.theta_r = effector.theta;
  return s;
}

}  // namespace grasp
