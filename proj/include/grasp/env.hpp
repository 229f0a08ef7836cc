#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "grasp/geometry.hpp"
#include "grasp/pose_estimation.hpp"
#include "grasp/ppo.hpp"
#include "grasp/rng.hpp"

namespace grasp {

struct EpisodeFinished : std::runtime_error {
  EpisodeFinished() : std::runtime_error("step() called after the episode ended") {}
};
struct PlacementFailure : std::runtime_error {
  PlacementFailure() : std::runtime_error("could not place objects within the workspace") {}
};

enum class EventType { kNone, kAway, kApproaching, kGraspSuccess, kGraspFailed };

struct StepInfo {
  double d = 0.0;
  EventType event = EventType::kNone;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  StepInfo info;

  bool grasp_succeeded() const { return info.event == EventType::kGraspSuccess; }
};

enum class ShapeKind { kRectangle, kEllipse, kCapsule };

struct ShapeSpec {
  ShapeKind kind = ShapeKind::kRectangle;
  double p0 = 0.1;  // rectangle: width | ellipse: semi-axis a | capsule: segment length
  double p1 = 0.1;  // rectangle: height | ellipse: semi-axis b | capsule: radius

  double circumradius() const;
  double inradius() const;
  // True when the shape has no principal axis (square, disc); such
  // objects are grasped without an orientation check.
  bool orientation_free() const;
};

struct ClassSpec {
  int label = 0;
  const char* name = "";
  ShapeSpec shape;
};

// Desk-scale stand-ins for the seven object classes.
const std::array<ClassSpec, 7>& class_catalog();

struct SimObject {
  int id = 0;
  int class_label = 0;
  ShapeSpec shape;
  ObjectPose pose;
  Vec2 velocity{0.0, 0.0};
  int full_area = 0;  // unoccluded pixel count recorded at spawn
  bool alive = true;
};

enum class GraspMode { kApproach, kDescending };

struct Effector {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  GraspMode grasp_mode = GraspMode::kApproach;
};

struct Workspace {
  double lo = -1.0;
  double hi = 1.0;
  int grid_w = 200;
  int grid_h = 200;

  double pixel_size() const { return (hi - lo) / static_cast<double>(grid_w); }
  // Pixel centers sample the workspace uniformly.
  AffineCalib pixel_to_world_map() const;
};

struct GraspRules {
  double step_limit = 0.05;    // per-component displacement bound per step
  double eps_act = 0.01;       // grasp-decision action magnitude threshold
  int k_consecutive = 3;       // consecutive small-action steps to trigger
  double tol_pos = 0.02;       // grasp positional tolerance
  double tol_ang = 0.1;        // grasp angular tolerance (mod pi)
  int descend_steps = 5;       // gripper descent duration in moving mode
};

enum class ScenarioKind { kStatic, kMulti, kClutter, kSemantic, kMoving, kPerturbed };

std::string scenario_kind_name(ScenarioKind kind);
ScenarioKind scenario_kind_from_name(const std::string& name);

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kStatic;
  int object_count = 1;
  double overlap_density = 0.0;
  int target_class = -1;  // semantic instruction; -1 = unconstrained
  Vec2 velocity{0.0, 0.0};
  bool simultaneous_z = false;  // moving mode: keep tracking during descent
  int max_steps = 80;
  bool random_effector_start = true;
  std::array<double, 3> effector_start{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;  // informational; reset() receives the live seed
};

struct RenderedMask {
  int object_id = 0;
  int class_label = 0;
  PixelMask mask;  // visible pixels only
  int full_area = 0;
};

// Exact piecewise reward. Movement events are derived from the distance
// pair when the caller passes kNone (approaching iff d_t < d_prev).
double compute_reward(double d_prev, double d_t, EventType event);

// Planar Euclidean distance between effector and object centers.
double distance_to_target(const Effector& effector, const SimObject& target);

// Position within tol_pos and gripper line within tol_ang (mod pi) of the
// object axis; the angle test is skipped for orientation-free objects.
bool check_grasp(const Effector& effector, const SimObject& target, double tol_pos,
                 double tol_ang);

// Constant-velocity translation with reflective bounces that keep the
// whole shape inside the workspace.
void advance_moving_target(SimObject& object, const Workspace& ws);

bool point_in_shape(const ShapeSpec& shape, const ObjectPose& pose, const Vec2& world_point);

PixelMask rasterize(const ShapeSpec& shape, const ObjectPose& pose, const Workspace& ws);

// Kinematic 3DOF tabletop MDP. One instance is single-threaded and owns
// its state; run independent instances for parallel collection.
class Environment {
 public:
  explicit Environment(Workspace ws = {}, GraspRules rules = {});

  EnvState reset(const ScenarioSpec& scenario, std::uint64_t seed);

  StepResult step(const Eigen::Vector3d& action);

  // Re-arms the episode on the current scene for the next sequential
  // grasp: fresh effector start, step counter, and target.
  EnvState begin_attempt(int target_id);

  void apply_perturbation(const Vec2& displacement);

  void set_target(int object_id);
  int target_id() const { return target_id_; }

  std::vector<RenderedMask> render_masks() const;

  void remove_object(int id);
  std::vector<int> alive_ids() const;
  const SimObject& object(int id) const { return objects_.at(static_cast<size_t>(id)); }
  const std::vector<SimObject>& objects() const { return objects_; }

  const Effector& effector() const { return effector_; }
  const Workspace& workspace() const { return workspace_; }
  const GraspRules& rules() const { return rules_; }
  const ScenarioSpec& scenario() const { return scenario_; }

  EnvState current_state() const;
  bool done() const { return done_; }
  int steps_taken() const { return step_count_; }

  // Writes per-object visible-mask files plus a ground-truth scene
  // document for offline pose-estimation runs.
  void dump_scene(const std::filesystem::path& dir, const std::string& prefix) const;

 private:
  void spawn_objects();
  void place_effector();
  StepResult finish_grasp(double d_t);

  Workspace workspace_;
  GraspRules rules_;
  ScenarioSpec scenario_;
  Rng rng_{0};
  std::vector<SimObject> objects_;
  Effector effector_;
  int target_id_ = 0;
  int step_count_ = 0;
  bool done_ = true;
  int small_streak_ = 0;
  int descend_counter_ = 0;
  double last_d_ = 0.0;
};

// Adapter binding a scenario to the trainer's episode interface.
struct TrainingEnv {
  Environment env;
  ScenarioSpec scenario;

  EnvState reset_episode(std::uint64_t seed) { return env.reset(scenario, seed); }
  StepResult step(const Eigen::Vector3d& action) { return env.step(action); }
};

}  // namespace grasp
