#include "biotwin/ik.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <Eigen/Cholesky>

#include "biotwin/error.hpp"

namespace biotwin::ik {

namespace {

std::string seg_loc(std::size_t i) { return "segments[" + std::to_string(i) + "]"; }

struct DofFrame {
  Point3 axis;    // world
  Point3 origin;  // world
};

struct Pose {
  std::vector<Frame> frames;
  std::vector<DofFrame> dofs;
};

Pose compute_pose(const KinematicChain& chain, const Eigen::VectorXd& q) {
  if (static_cast<std::size_t>(q.size()) != chain.num_dofs()) {
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(chain.num_dofs()) + " joint coordinates, got " +
                    std::to_string(q.size()));
  }
  if (!q.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite joint coordinate");

  Pose pose;
  pose.frames.resize(chain.segments().size());
  pose.dofs.reserve(chain.num_dofs());
  std::size_t k = 0;
  for (std::size_t i = 0; i < chain.segments().size(); ++i) {
    const Segment& seg = chain.segments()[i];
    const Frame parent = seg.parent ? pose.frames[*seg.parent] : Frame{};
    Frame f;
    f.rotation = parent.rotation * seg.orientation;
    f.origin = parent.origin + parent.rotation * seg.offset;
    for (const Dof& dof : seg.dofs) {
      const Point3 axis_world = f.rotation * dof.axis;
      pose.dofs.push_back({axis_world, f.origin});
      if (dof.type == DofType::Rotation) {
        f.rotation = f.rotation * geom::axis_angle(dof.axis, q[static_cast<Eigen::Index>(k)]);
      } else {
        f.origin += axis_world * q[static_cast<Eigen::Index>(k)];
      }
      ++k;
    }
    pose.frames[i] = f;
  }
  return pose;
}

Point3 marker_world(const Pose& pose, const MarkerAttachment& m) {
  const Frame& f = pose.frames[m.segment];
  return f.rotation * m.offset + f.origin;
}

}  // namespace

KinematicChain::KinematicChain(std::vector<Segment> segments, std::vector<MarkerAttachment> markers)
    : segments_(std::move(segments)), markers_(std::move(markers)) {
  if (segments_.empty()) throw Error(ErrorCode::InvalidArgument, "chain has no segments", "segments");
  std::set<std::string> seg_names;
  std::set<std::string> dof_names;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    Segment& seg = segments_[i];
    const auto loc = seg_loc(i);
    if (seg.name.empty() || !seg_names.insert(seg.name).second) {
      throw Error(ErrorCode::InvalidArgument, "segment name empty or duplicated", loc + ".name");
    }
    if (i == 0 && seg.parent) {
      throw Error(ErrorCode::InvalidArgument, "first segment must be the root", loc + ".parent");
    }
    if (i > 0 && (!seg.parent || *seg.parent >= i)) {
      throw Error(ErrorCode::InvalidArgument,
                  "parent must be an earlier segment (single root, listed first)", loc + ".parent");
    }
    if (!seg.offset.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite offset", loc + ".offset");
    if (!geom::is_rotation(seg.orientation, 1e-9)) {
      throw Error(ErrorCode::InvalidArgument, "not a proper rotation", loc + ".orientation");
    }
    int rotations = 0;
    int translations = 0;
    for (std::size_t d = 0; d < seg.dofs.size(); ++d) {
      Dof& dof = seg.dofs[d];
      const auto dloc = loc + ".dofs[" + std::to_string(d) + "]";
      (dof.type == DofType::Rotation ? rotations : translations)++;
      const double norm = dof.axis.norm();
      if (!std::isfinite(norm) || std::abs(norm - 1.0) > 1e-6) {
        throw Error(ErrorCode::InvalidArgument, "axis must be a unit vector", dloc + ".axis");
      }
      dof.axis /= norm;
      if (dof.limits && !(std::isfinite(dof.limits->first) && std::isfinite(dof.limits->second) &&
                          dof.limits->first <= dof.limits->second)) {
        throw Error(ErrorCode::InvalidArgument, "limits must satisfy lo <= hi", dloc + ".limits");
      }
      if (dof.name.empty()) dof.name = seg.name + "_dof" + std::to_string(d);
      if (!dof_names.insert(dof.name).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate coordinate name '" + dof.name + "'",
                    dloc + ".name");
      }
      dof_refs_.emplace_back(i, d);
    }
    if (rotations > 3 || translations > 3) {
      throw Error(ErrorCode::InvalidArgument, "at most 3 rotational and 3 translational DOFs",
                  loc + ".dofs");
    }
  }
  std::set<std::string> marker_names;
  for (std::size_t i = 0; i < markers_.size(); ++i) {
    const auto& m = markers_[i];
    const auto loc = "markers[" + std::to_string(i) + "]";
    if (m.name.empty() || !marker_names.insert(m.name).second) {
      throw Error(ErrorCode::InvalidArgument, "marker name empty or duplicated", loc + ".name");
    }
    if (m.segment >= segments_.size()) {
      throw Error(ErrorCode::InvalidArgument, "unknown segment", loc + ".segment");
    }
    if (!m.offset.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite offset", loc + ".offset");
  }
}

const Dof& KinematicChain::dof(std::size_t i) const {
  const auto [s, d] = dof_refs_.at(i);
  return segments_[s].dofs[d];
}

std::vector<std::string> KinematicChain::dof_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < num_dofs(); ++i) names.push_back(dof(i).name);
  return names;
}

std::optional<std::size_t> KinematicChain::marker_index(std::string_view name) const {
  for (std::size_t i = 0; i < markers_.size(); ++i) {
    if (markers_[i].name == name) return i;
  }
  return std::nullopt;
}

bool KinematicChain::in_subtree(std::size_t ancestor, std::size_t segment) const {
  std::optional<std::size_t> cur = segment;
  while (cur) {
    if (*cur == ancestor) return true;
    if (*cur < ancestor) return false;
    cur = segments_[*cur].parent;
  }
  return false;
}

Eigen::VectorXd KinematicChain::clamp(Eigen::VectorXd q) const {
  for (std::size_t i = 0; i < num_dofs() && i < static_cast<std::size_t>(q.size()); ++i) {
    if (const auto& lim = dof(i).limits) {
      const auto k = static_cast<Eigen::Index>(i);
      q[k] = std::clamp(q[k], lim->first, lim->second);
    }
  }
  return q;
}

Eigen::VectorXd KinematicChain::neutral() const {
  return clamp(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_dofs())));
}

std::vector<Frame> segment_frames(const KinematicChain& chain, const Eigen::VectorXd& q) {
  return compute_pose(chain, q).frames;
}

std::vector<Point3> marker_positions(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Pose pose = compute_pose(chain, q);
  std::vector<Point3> out;
  out.reserve(chain.markers().size());
  for (const auto& m : chain.markers()) out.push_back(marker_world(pose, m));
  return out;
}

std::map<std::string, Point3> forward_kinematics(const KinematicChain& chain,
                                                 const Eigen::VectorXd& q) {
  const auto positions = marker_positions(chain, q);
  std::map<std::string, Point3> out;
  for (std::size_t i = 0; i < positions.size(); ++i) out.emplace(chain.markers()[i].name, positions[i]);
  return out;
}

Eigen::MatrixXd marker_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q) {
  const Pose pose = compute_pose(chain, q);
  const auto& markers = chain.markers();
  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(3 * markers.size()),
                                              static_cast<Eigen::Index>(chain.num_dofs()));
  for (std::size_t m = 0; m < markers.size(); ++m) {
    const Point3 p = marker_world(pose, markers[m]);
    for (std::size_t k = 0; k < chain.num_dofs(); ++k) {
      if (!chain.in_subtree(chain.dof_segment(k), markers[m].segment)) continue;
      const DofFrame& df = pose.dofs[k];
      const Point3 col = chain.dof(k).type == DofType::Rotation
                             ? Point3(df.axis.cross(p - df.origin))
                             : df.axis;
      jac.block<3, 1>(static_cast<Eigen::Index>(3 * m), static_cast<Eigen::Index>(k)) = col;
    }
  }
  return jac;
}

void validate(const IkSettings& s) {
  if (s.max_iterations <= 0) throw Error(ErrorCode::InvalidArgument, "must be positive", "max_iterations");
  if (!(s.cost_tolerance > 0.0)) throw Error(ErrorCode::InvalidArgument, "must be positive", "cost_tolerance");
  if (!(s.initial_damping > 0.0)) throw Error(ErrorCode::InvalidArgument, "must be positive", "initial_damping");
  if (!(s.damping_increase > 1.0)) throw Error(ErrorCode::InvalidArgument, "must exceed 1", "damping_increase");
  if (!(s.damping_decrease > 0.0 && s.damping_decrease < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "must lie in (0, 1)", "damping_decrease");
  }
  if (!(s.max_damping > s.initial_damping)) {
    throw Error(ErrorCode::InvalidArgument, "must exceed initial damping", "max_damping");
  }
  for (const auto& [name, w] : s.marker_weights) {
    if (!(std::isfinite(w) && w >= 0.0)) {
      throw Error(ErrorCode::InvalidArgument, "weight must be finite and non-negative",
                  "marker_weights." + name);
    }
  }
}

IkFrameResult solve_ik_frame(const KinematicChain& chain,
                             const std::map<std::string, Point3>& targets,
                             const Eigen::VectorXd& q0, const IkSettings& settings) {
  validate(settings);
  const auto& markers = chain.markers();
  std::vector<double> weight(markers.size(), 0.0);
  std::vector<Point3> goal(markers.size(), Point3::Zero());
  for (const auto& [name, p] : targets) {
    const auto idx = chain.marker_index(name);
    if (!idx) throw Error(ErrorCode::InvalidArgument, "marker '" + name + "' is not attached to the chain", "targets");
    if (!p.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite target for '" + name + "'", "targets");
    const auto w = settings.marker_weights.find(name);
    weight[*idx] = w == settings.marker_weights.end() ? 1.0 : w->second;
    goal[*idx] = p;
  }
  std::size_t used = 0;
  for (double w : weight) used += w > 0.0 ? 1 : 0;
  if (used == 0) throw Error(ErrorCode::InvalidArgument, "no target marker carries positive weight", "targets");

  const auto cost_of = [&](const Eigen::VectorXd& q) {
    const auto pos = marker_positions(chain, q);
    double c = 0.0;
    for (std::size_t m = 0; m < pos.size(); ++m) {
      if (weight[m] > 0.0) c += weight[m] * (pos[m] - goal[m]).squaredNorm();
    }
    return c;
  };

  IkFrameResult result;
  result.q = chain.clamp(q0);
  double cost = cost_of(result.q);
  result.cost_history.push_back(cost);
  double lambda = settings.initial_damping;
  const auto n = static_cast<Eigen::Index>(chain.num_dofs());
  result.reason = StopReason::MaxIterations;

  while (result.iterations < settings.max_iterations) {
    if (cost == 0.0 || n == 0) {
      result.reason = StopReason::Converged;
      break;
    }
    const auto pos = marker_positions(chain, result.q);
    const Eigen::MatrixXd jac = marker_jacobian(chain, result.q);
    Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(n, n);
    Eigen::VectorXd gradient = Eigen::VectorXd::Zero(n);
    for (std::size_t m = 0; m < markers.size(); ++m) {
      if (weight[m] <= 0.0) continue;
      const auto rows = jac.middleRows<3>(static_cast<Eigen::Index>(3 * m));
      normal.noalias() += weight[m] * rows.transpose() * rows;
      gradient.noalias() += weight[m] * rows.transpose() * (pos[m] - goal[m]);
    }

    ++result.iterations;
    Eigen::MatrixXd damped = normal;
    damped.diagonal().array() += lambda;
    const Eigen::VectorXd step = damped.ldlt().solve(-gradient);
    const Eigen::VectorXd candidate = chain.clamp(result.q + step);
    const double candidate_cost = step.allFinite() ? cost_of(candidate) : cost;

    if (candidate_cost < cost) {
      const double change = cost - candidate_cost;
      result.q = candidate;
      cost = candidate_cost;
      result.cost_history.push_back(cost);
      lambda *= settings.damping_decrease;
      if (change < settings.cost_tolerance) {
        result.reason = StopReason::Converged;
        break;
      }
    } else {
      lambda *= settings.damping_increase;
      if (lambda > settings.max_damping) {
        result.reason = StopReason::DampingOverflow;
        break;
      }
    }
  }

  const auto pos = marker_positions(chain, result.q);
  double sq = 0.0;
  for (std::size_t m = 0; m < markers.size(); ++m) {
    if (weight[m] > 0.0) sq += (pos[m] - goal[m]).squaredNorm();
  }
  result.rms = std::sqrt(sq / static_cast<double>(used));
  return result;
}

IkSequenceResult solve_ik_sequence(const KinematicChain& chain,
                                   const twin::MarkerTrajectory& input,
                                   const IkSettings& settings) {
  validate(settings);
  twin::validate(input);
  const twin::MarkerTrajectory traj = input.to_meters();

  IkSequenceResult result;
  std::vector<std::pair<std::size_t, std::string>> usable;  // trajectory column -> name
  for (std::size_t c = 0; c < traj.marker_names.size(); ++c) {
    const auto& name = traj.marker_names[c];
    if (!chain.marker_index(name)) {
      result.warnings.push_back("trajectory marker '" + name + "' is not attached to the chain; ignored");
      continue;
    }
    const auto w = settings.marker_weights.find(name);
    if (w != settings.marker_weights.end() && w->second == 0.0) continue;
    usable.emplace_back(c, name);
  }
  for (const auto& m : chain.markers()) {
    bool present = false;
    for (const auto& name : traj.marker_names) present = present || name == m.name;
    if (!present) result.warnings.push_back("chain marker '" + m.name + "' is missing from the trajectory; weight 0");
  }
  if (usable.empty()) {
    throw Error(ErrorCode::InvalidArgument, "no trajectory marker matches the chain's markers");
  }

  auto& motion = result.motion;
  motion.name = "ik";
  motion.in_degrees = true;
  motion.columns.push_back("time");
  for (auto& name : chain.dof_names()) motion.columns.push_back(std::move(name));

  Eigen::VectorXd q = chain.neutral();
  for (std::size_t t = 0; t < traj.num_frames(); ++t) {
    std::map<std::string, Point3> targets;
    for (const auto& [c, name] : usable) targets.emplace(name, traj.at(t, c));
    const Eigen::VectorXd q0 = settings.warm_start ? q : chain.neutral();
    IkFrameResult frame;
    try {
      frame = solve_ik_frame(chain, targets, q0, settings);
    } catch (const Error& e) {
      throw Error(e.code(), e.message(),
                  "frame " + std::to_string(t) + (e.locator().empty() ? "" : ":" + e.locator()));
    }
    q = frame.q;
    result.total_iterations += frame.iterations;

    motion.values.push_back(static_cast<double>(t) / traj.frame_rate_hz);
    for (std::size_t k = 0; k < chain.num_dofs(); ++k) {
      const double v = frame.q[static_cast<Eigen::Index>(k)];
      motion.values.push_back(chain.dof(k).type == DofType::Rotation ? v * 180.0 / std::numbers::pi
                                                                      : v);
    }
    result.frames.push_back(std::move(frame));
  }
  return result;
}

}  // namespace biotwin::ik
