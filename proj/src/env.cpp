#include "grasp/env.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "grasp/mask_io.hpp"

namespace grasp {

double ShapeSpec::circumradius() const {
  switch (kind) {
    case ShapeKind::kRectangle:
      return 0.5 * std::hypot(p0, p1);
    case ShapeKind::kEllipse:
      return std::max(p0, p1);
    case ShapeKind::kCapsule:
      return 0.5 * p0 + p1;
  }
  return 0.0;
}

double ShapeSpec::inradius() const {
  switch (kind) {
    case ShapeKind::kRectangle:
      return 0.5 * std::min(p0, p1);
    case ShapeKind::kEllipse:
      return std::min(p0, p1);
    case ShapeKind::kCapsule:
      return p1;
  }
  return 0.0;
}

bool ShapeSpec::orientation_free() const {
  switch (kind) {
    case ShapeKind::kRectangle:
    case ShapeKind::kEllipse:
      return p0 == p1;
    case ShapeKind::kCapsule:
      return false;
  }
  return false;
}

const std::array<ClassSpec, 7>& class_catalog() {
  static const std::array<ClassSpec, 7> catalog = {{
      {0, "bar", {ShapeKind::kRectangle, 0.36, 0.14}},
      {1, "disc", {ShapeKind::kEllipse, 0.09, 0.09}},
      {2, "egg", {ShapeKind::kEllipse, 0.18, 0.07}},
      {3, "block", {ShapeKind::kRectangle, 0.16, 0.16}},
      {4, "torpedo", {ShapeKind::kCapsule, 0.28, 0.06}},
      {5, "plank", {ShapeKind::kRectangle, 0.26, 0.10}},
      {6, "pill", {ShapeKind::kCapsule, 0.20, 0.05}},
  }};
  return catalog;
}

AffineCalib Workspace::pixel_to_world_map() const {
  double sx = (hi - lo) / static_cast<double>(grid_w);
  double sy = (hi - lo) / static_cast<double>(grid_h);
  return {sx, 0.0, 0.0, sy, lo + 0.5 * sx, lo + 0.5 * sy};
}

std::string scenario_kind_name(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kStatic:
      return "static";
    case ScenarioKind::kMulti:
      return "multi";
    case ScenarioKind::kClutter:
      return "clutter";
    case ScenarioKind::kSemantic:
      return "semantic";
    case ScenarioKind::kMoving:
      return "moving";
    case ScenarioKind::kPerturbed:
      return "perturbed";
  }
  return "static";
}

ScenarioKind scenario_kind_from_name(const std::string& name) {
  if (name == "static") return ScenarioKind::kStatic;
  if (name == "multi") return ScenarioKind::kMulti;
  if (name == "clutter") return ScenarioKind::kClutter;
  if (name == "semantic") return ScenarioKind::kSemantic;
  if (name == "moving") return ScenarioKind::kMoving;
  if (name == "perturbed") return ScenarioKind::kPerturbed;
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

double compute_reward(double d_prev, double d_t, EventType event) {
  if (event == EventType::kNone) {
    event = d_t < d_prev ? EventType::kApproaching : EventType::kAway;
  }
  switch (event) {
    case EventType::kGraspSuccess:
      return 1.0;
    case EventType::kGraspFailed:
      return -1.0;
    case EventType::kApproaching:
      return -d_t + 0.1;
    case EventType::kAway:
      return -d_t - 0.1;
    case EventType::kNone:
      break;
  }
  return 0.0;
}

double distance_to_target(const Effector& effector, const SimObject& target) {
  return std::hypot(effector.x - target.pose.center.x, effector.y - target.pose.center.y);
}

bool check_grasp(const Effector& effector, const SimObject& target, double tol_pos,
                 double tol_ang) {
  if (distance_to_target(effector, target) > tol_pos) return false;
  if (target.shape.orientation_free()) return true;
  return angular_dist_mod_pi(effector.theta, target.pose.theta) <= tol_ang;
}

void advance_moving_target(SimObject& object, const Workspace& ws) {
  double margin = object.shape.circumradius();
  double lo = ws.lo + margin;
  double hi = ws.hi - margin;
  double* pos[2] = {&object.pose.center.x, &object.pose.center.y};
  double* vel[2] = {&object.velocity.x, &object.velocity.y};
  for (int axis = 0; axis < 2; ++axis) {
    double p = *pos[axis] + *vel[axis];
    while (p > hi || p < lo) {
      if (p > hi) {
        p = 2.0 * hi - p;
        *vel[axis] = -*vel[axis];
      } else {
        p = 2.0 * lo - p;
        *vel[axis] = -*vel[axis];
      }
    }
    *pos[axis] = p;
  }
}

bool point_in_shape(const ShapeSpec& shape, const ObjectPose& pose, const Vec2& world_point) {
  double dx = world_point.x - pose.center.x;
  double dy = world_point.y - pose.center.y;
  double c = std::cos(pose.theta);
  double s = std::sin(pose.theta);
  double u = c * dx + s * dy;
  double v = -s * dx + c * dy;
  switch (shape.kind) {
    case ShapeKind::kRectangle:
      return std::fabs(u) <= 0.5 * shape.p0 && std::fabs(v) <= 0.5 * shape.p1;
    case ShapeKind::kEllipse: {
      double a = u / shape.p0;
      double b = v / shape.p1;
      return a * a + b * b <= 1.0;
    }
    case ShapeKind::kCapsule: {
      double t = clamp(u, -0.5 * shape.p0, 0.5 * shape.p0);
      return std::hypot(u - t, v) <= shape.p1;
    }
  }
  return false;
}

PixelMask rasterize(const ShapeSpec& shape, const ObjectPose& pose, const Workspace& ws) {
  PixelMask mask;
  double r = shape.circumradius();
  double px = ws.pixel_size();
  int x0 = std::max(0, static_cast<int>(std::floor((pose.center.x - r - ws.lo) / px)) - 1);
  int x1 = std::min(ws.grid_w - 1, static_cast<int>(std::floor((pose.center.x + r - ws.lo) / px)) + 1);
  int y0 = std::max(0, static_cast<int>(std::floor((pose.center.y - r - ws.lo) / px)) - 1);
  int y1 = std::min(ws.grid_h - 1, static_cast<int>(std::floor((pose.center.y + r - ws.lo) / px)) + 1);
  AffineCalib calib = ws.pixel_to_world_map();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      Vec2 center = calib.apply({static_cast<double>(x), static_cast<double>(y)});
      if (point_in_shape(shape, pose, center)) mask.points.push_back({x, y});
    }
  }
  return mask;
}

Environment::Environment(Workspace ws, GraspRules rules) : workspace_(ws), rules_(rules) {}

void Environment::spawn_objects() {
  objects_.clear();
  int count = scenario_.object_count;
  if (scenario_.kind == ScenarioKind::kStatic || scenario_.kind == ScenarioKind::kMoving ||
      scenario_.kind == ScenarioKind::kPerturbed) {
    count = 1;
  }
  count = std::max(count, 1);

  const auto& catalog = class_catalog();
  std::vector<int> classes(static_cast<size_t>(count));
  for (auto& c : classes) c = rng_.uniform_int(0, static_cast<int>(catalog.size()) - 1);
  if (scenario_.target_class >= 0) {
    bool present = std::any_of(classes.begin(), classes.end(),
                               [&](int c) { return c == scenario_.target_class; });
    if (!present) {
      classes[static_cast<size_t>(rng_.uniform_int(0, count - 1))] = scenario_.target_class;
    }
  }

  int clustered = 0;
  if (scenario_.kind == ScenarioKind::kClutter && count > 1) {
    clustered = static_cast<int>(std::ceil(scenario_.overlap_density * (count - 1)));
    clustered = std::min(clustered, count - 1);
  }

  for (int i = 0; i < count; ++i) {
    SimObject obj;
    obj.id = i;
    obj.class_label = classes[static_cast<size_t>(i)];
    obj.shape = catalog[static_cast<size_t>(obj.class_label)].shape;
    double margin = obj.shape.circumradius() + 0.01;
    double lo = workspace_.lo + margin;
    double hi = workspace_.hi - margin;
    // Clustered objects are placed last so they stack on top (spawn order
    // is z-order).
    bool cluster_this = i >= count - clustered;

    bool placed = false;
    for (int attempt = 0; attempt < 200 && !placed; ++attempt) {
      if (cluster_this) {
        const SimObject& base =
            objects_[static_cast<size_t>(rng_.uniform_int(0, static_cast<int>(objects_.size()) - 1))];
        double dist = (base.shape.inradius() + obj.shape.inradius()) * rng_.uniform(0.3, 0.8);
        double phi = rng_.uniform(-kPi, kPi);
        obj.pose.center = {base.pose.center.x + dist * std::cos(phi),
                           base.pose.center.y + dist * std::sin(phi)};
        if (obj.pose.center.x < lo || obj.pose.center.x > hi || obj.pose.center.y < lo ||
            obj.pose.center.y > hi) {
          continue;
        }
      } else {
        obj.pose.center = {rng_.uniform(lo, hi), rng_.uniform(lo, hi)};
        bool clear = true;
        for (const auto& other : objects_) {
          double sep = obj.shape.circumradius() + other.shape.circumradius() + 0.01;
          if ((obj.pose.center - other.pose.center).norm() < sep) {
            clear = false;
            break;
          }
        }
        if (!clear) continue;
      }
      placed = true;
    }
    if (!placed) throw PlacementFailure();

    obj.pose.theta = obj.shape.orientation_free() ? 0.0 : rng_.uniform(-kPi / 2.0, kPi / 2.0);
    obj.pose.degenerate = obj.shape.orientation_free();
    obj.velocity = scenario_.kind == ScenarioKind::kMoving ? scenario_.velocity : Vec2{0.0, 0.0};
    obj.full_area = static_cast<int>(rasterize(obj.shape, obj.pose, workspace_).points.size());
    obj.alive = true;
    objects_.push_back(obj);
  }
}

void Environment::place_effector() {
  if (scenario_.random_effector_start) {
    effector_.x = rng_.uniform(workspace_.lo + 0.05, workspace_.hi - 0.05);
    effector_.y = rng_.uniform(workspace_.lo + 0.05, workspace_.hi - 0.05);
    effector_.theta = rng_.uniform(-kPi, kPi);
  } else {
    effector_.x = scenario_.effector_start[0];
    effector_.y = scenario_.effector_start[1];
    effector_.theta = scenario_.effector_start[2];
  }
  effector_.grasp_mode = GraspMode::kApproach;
}

EnvState Environment::reset(const ScenarioSpec& scenario, std::uint64_t seed) {
  scenario_ = scenario;
  rng_ = Rng(Rng::derive(seed, 0x5ce0e));
  spawn_objects();
  place_effector();
  target_id_ = 0;
  step_count_ = 0;
  done_ = false;
  small_streak_ = 0;
  descend_counter_ = 0;
  last_d_ = distance_to_target(effector_, objects_[static_cast<size_t>(target_id_)]);
  return current_state();
}

EnvState Environment::begin_attempt(int target_id) {
  set_target(target_id);
  place_effector();
  step_count_ = 0;
  done_ = false;
  small_streak_ = 0;
  descend_counter_ = 0;
  last_d_ = distance_to_target(effector_, objects_[static_cast<size_t>(target_id_)]);
  return current_state();
}

void Environment::set_target(int object_id) {
  if (object_id < 0 || object_id >= static_cast<int>(objects_.size()) ||
      !objects_[static_cast<size_t>(object_id)].alive) {
    throw std::out_of_range("set_target: no alive object with id " + std::to_string(object_id));
  }
  target_id_ = object_id;
}

EnvState Environment::current_state() const {
  const SimObject& target = objects_.at(static_cast<size_t>(target_id_));
  EnvState s;
  s.x = target.pose.center.x;
  s.y = target.pose.center.y;
  s.theta = target.pose.degenerate ? 0.0 : target.pose.theta;
  s.x_r = effector_.x;
  s.y_r = effector_.y;
  s.theta_r = effector_.theta;
  return s;
}

StepResult Environment::finish_grasp(double d_t) {
  SimObject& target = objects_[static_cast<size_t>(target_id_)];
  bool ok = check_grasp(effector_, target, rules_.tol_pos, rules_.tol_ang);
  done_ = true;
  effector_.grasp_mode = GraspMode::kApproach;
  StepResult res;
  res.info.d = d_t;
  res.info.event = ok ? EventType::kGraspSuccess : EventType::kGraspFailed;
  res.reward = compute_reward(last_d_, d_t, res.info.event);
  res.done = true;
  res.state = current_state();
  return res;
}

StepResult Environment::step(const Eigen::Vector3d& action) {
  if (done_) throw EpisodeFinished();

  bool frozen = effector_.grasp_mode == GraspMode::kDescending && !scenario_.simultaneous_z;
  if (!frozen) {
    effector_.x = clamp(effector_.x + clamp(action(0), -rules_.step_limit, rules_.step_limit),
                        workspace_.lo, workspace_.hi);
    effector_.y = clamp(effector_.y + clamp(action(1), -rules_.step_limit, rules_.step_limit),
                        workspace_.lo, workspace_.hi);
    effector_.theta =
        wrap_pi(effector_.theta + clamp(action(2), -rules_.step_limit, rules_.step_limit));
  }

  for (auto& obj : objects_) {
    if (obj.alive && (obj.velocity.x != 0.0 || obj.velocity.y != 0.0)) {
      advance_moving_target(obj, workspace_);
    }
  }

  double d_t = distance_to_target(effector_, objects_[static_cast<size_t>(target_id_)]);
  step_count_ += 1;

  if (effector_.grasp_mode == GraspMode::kDescending) {
    descend_counter_ -= 1;
    if (descend_counter_ <= 0) return finish_grasp(d_t);
  } else {
    double mag = action.cwiseAbs().maxCoeff();
    small_streak_ = mag < rules_.eps_act ? small_streak_ + 1 : 0;
    if (small_streak_ >= rules_.k_consecutive) {
      if (scenario_.kind == ScenarioKind::kMoving) {
        // The gripper needs descend_steps to reach the table; in
        // simultaneous mode it keeps tracking on the way down.
        effector_.grasp_mode = GraspMode::kDescending;
        descend_counter_ = rules_.descend_steps;
        small_streak_ = 0;
      } else {
        return finish_grasp(d_t);
      }
    }
  }

  StepResult res;
  res.info.d = d_t;
  res.info.event = d_t < last_d_ ? EventType::kApproaching : EventType::kAway;
  res.reward = compute_reward(last_d_, d_t, res.info.event);
  last_d_ = d_t;
  if (step_count_ >= scenario_.max_steps) done_ = true;
  res.done = done_;
  res.state = current_state();
  return res;
}

void Environment::apply_perturbation(const Vec2& displacement) {
  effector_.x = clamp(effector_.x + displacement.x, workspace_.lo, workspace_.hi);
  effector_.y = clamp(effector_.y + displacement.y, workspace_.lo, workspace_.hi);
  last_d_ = distance_to_target(effector_, objects_[static_cast<size_t>(target_id_)]);
}

std::vector<RenderedMask> Environment::render_masks() const {
  std::vector<RenderedMask> out;
  std::vector<int> owner(static_cast<size_t>(workspace_.grid_w) * workspace_.grid_h, -1);
  std::vector<PixelMask> rasters(objects_.size());
  for (size_t i = 0; i < objects_.size(); ++i) {
    const SimObject& obj = objects_[i];
    if (!obj.alive) continue;
    rasters[i] = rasterize(obj.shape, obj.pose, workspace_);
    for (const auto& p : rasters[i].points) {
      owner[static_cast<size_t>(p.y) * workspace_.grid_w + p.x] = static_cast<int>(i);
    }
  }
  for (size_t i = 0; i < objects_.size(); ++i) {
    const SimObject& obj = objects_[i];
    if (!obj.alive) continue;
    RenderedMask rm;
    rm.object_id = obj.id;
    rm.class_label = obj.class_label;
    rm.full_area = obj.full_area;
    rm.mask.class_label = obj.class_label;
    for (const auto& p : rasters[i].points) {
      if (owner[static_cast<size_t>(p.y) * workspace_.grid_w + p.x] == static_cast<int>(i)) {
        rm.mask.points.push_back(p);
      }
    }
    out.push_back(std::move(rm));
  }
  return out;
}

void Environment::remove_object(int id) {
  objects_.at(static_cast<size_t>(id)).alive = false;
}

std::vector<int> Environment::alive_ids() const {
  std::vector<int> ids;
  for (const auto& obj : objects_) {
    if (obj.alive) ids.push_back(obj.id);
  }
  return ids;
}

void Environment::dump_scene(const std::filesystem::path& dir, const std::string& prefix) const {
  std::filesystem::create_directories(dir);
  nlohmann::json truth = nlohmann::json::array();
  for (const auto& rm : render_masks()) {
    const SimObject& obj = objects_[static_cast<size_t>(rm.object_id)];
    if (!rm.mask.points.empty()) {
      auto path = dir / (prefix + "_obj" + std::to_string(rm.object_id) + ".pgm");
      write_mask_file(path, rm.mask, workspace_.grid_w, workspace_.grid_h, rm.full_area);
    }
    truth.push_back({{"id", rm.object_id},
                     {"class_label", rm.class_label},
                     {"x", obj.pose.center.x},
                     {"y", obj.pose.center.y},
                     {"theta", obj.pose.theta},
                     {"degenerate", obj.pose.degenerate},
                     {"full_area", rm.full_area},
                     {"visible_pixels", rm.mask.points.size()}});
  }
  std::ofstream out(dir / (prefix + "_truth.json"));
  out << truth.dump(2) << "\n";
}

}  // namespace grasp
