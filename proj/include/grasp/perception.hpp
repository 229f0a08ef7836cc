#pragma once

#include <filesystem>
#include <stdexcept>
#include <vector>

#include "grasp/env.hpp"
#include "grasp/mask_io.hpp"
#include "grasp/pose_estimation.hpp"

namespace grasp {

struct PerceptionUnavailable : std::runtime_error {
  explicit PerceptionUnavailable(const std::string& what) : std::runtime_error(what) {}
};
struct TargetNotFound : std::runtime_error {
  explicit TargetNotFound(const std::string& what) : std::runtime_error(what) {}
};

// Post-perception record for one object instance.
struct DetectedObject {
  int instance = 0;
  int class_label = 0;
  ObjectPose pose;   // workspace units; meaningless when !visible
  double ratio = 0.0;
  bool visible = false;
};

// Anything that can produce (mask, class, full_area) tuples for the
// current scene: the simulator renderer here, a segmentation network in
// the full system.
class MaskSource {
 public:
  virtual ~MaskSource() = default;
  virtual std::vector<MaskObservation> observe() = 0;
};

class SimMaskSource : public MaskSource {
 public:
  explicit SimMaskSource(const Environment& env) : env_(&env) {}
  std::vector<MaskObservation> observe() override;

 private:
  const Environment* env_;
};

class FileMaskSource : public MaskSource {
 public:
  explicit FileMaskSource(std::vector<std::filesystem::path> paths)
      : paths_(std::move(paths)) {}
  std::vector<MaskObservation> observe() override;

 private:
  std::vector<std::filesystem::path> paths_;
};

// Pose-estimates every visible mask and maps it into workspace units.
std::vector<DetectedObject> perceive(MaskSource& source, const AffineCalib& calib);

enum class SelectMode { kByClass, kByRatio, kAny };

// Deterministic target choice: by_ratio takes the maximal ratio with ties
// broken by smaller class label then lexicographic pose; by_class filters
// on the label first. Invisible detections are never selected.
const DetectedObject& select_target(const std::vector<DetectedObject>& detections,
                                    SelectMode mode, int class_label = -1);

EnvState build_state(const DetectedObject& target, const Effector& effector);

}  // namespace grasp
