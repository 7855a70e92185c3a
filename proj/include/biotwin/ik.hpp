#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "biotwin/geom.hpp"
#include "biotwin/trc.hpp"
#include "biotwin/twin.hpp"

namespace biotwin::ik {

using geom::Matrix3;
using geom::Point3;

enum class DofType { Rotation, Translation };

struct Dof {
  std::string name;
  DofType type = DofType::Rotation;
  /// Unit vector in the segment's joint frame.
  Point3 axis = Point3::UnitZ();
  /// (lo, hi) in radians for rotations, meters for translations.
  std::optional<std::pair<double, double>> limits;
};

struct Segment {
  std::string name;
  std::optional<std::size_t> parent;
  /// Joint origin in the parent frame (world frame for the root).
  Point3 offset = Point3::Zero();
  /// Fixed orientation of the joint frame relative to the parent frame.
  Matrix3 orientation = Matrix3::Identity();
  std::vector<Dof> dofs;
};

struct MarkerAttachment {
  std::string name;
  std::size_t segment = 0;
  Point3 offset = Point3::Zero();
};

/// Segment tree. Parents are listed before children, so index order is a
/// valid root-to-leaf traversal. DOFs are numbered segment by segment.
class KinematicChain {
 public:
  KinematicChain(std::vector<Segment> segments, std::vector<MarkerAttachment> markers);

  const std::vector<Segment>& segments() const { return segments_; }
  const std::vector<MarkerAttachment>& markers() const { return markers_; }
  std::size_t num_dofs() const { return dof_refs_.size(); }

  const Dof& dof(std::size_t i) const;
  /// Segment owning DOF i.
  std::size_t dof_segment(std::size_t i) const { return dof_refs_[i].first; }
  std::vector<std::string> dof_names() const;

  std::optional<std::size_t> marker_index(std::string_view name) const;
  /// True when `segment` is `ancestor` or lies below it.
  bool in_subtree(std::size_t ancestor, std::size_t segment) const;

  /// Clamps each coordinate into its declared limits.
  Eigen::VectorXd clamp(Eigen::VectorXd q) const;
  /// Zero pose, clamped into limits.
  Eigen::VectorXd neutral() const;

 private:
  std::vector<Segment> segments_;
  std::vector<MarkerAttachment> markers_;
  std::vector<std::pair<std::size_t, std::size_t>> dof_refs_;
};

struct Frame {
  Matrix3 rotation = Matrix3::Identity();
  Point3 origin = Point3::Zero();
};

/// World frame of every segment after applying its joint.
std::vector<Frame> segment_frames(const KinematicChain& chain, const Eigen::VectorXd& q);

/// World positions of all attached markers, in chain attachment order.
std::vector<Point3> marker_positions(const KinematicChain& chain, const Eigen::VectorXd& q);

std::map<std::string, Point3> forward_kinematics(const KinematicChain& chain,
                                                 const Eigen::VectorXd& q);

/// d(marker coordinates)/dq, rows grouped per marker as (x, y, z), attachment order.
Eigen::MatrixXd marker_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q);

struct IkSettings {
  int max_iterations = 100;
  double cost_tolerance = 1e-10;
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 0.5;
  double max_damping = 1e8;
  /// Per-marker weights; markers not listed weigh 1.
  std::map<std::string, double> marker_weights;
  bool warm_start = true;
};

void validate(const IkSettings& s);

enum class StopReason { Converged, MaxIterations, DampingOverflow };

struct IkFrameResult {
  Eigen::VectorXd q;
  /// sqrt(mean squared marker distance) over weighted-in markers.
  double rms = 0.0;
  int iterations = 0;
  StopReason reason = StopReason::Converged;
  /// Cost at the start and after every accepted step.
  std::vector<double> cost_history;
};

/// Levenberg-Marquardt fit of joint coordinates to marker targets.
IkFrameResult solve_ik_frame(const KinematicChain& chain,
                             const std::map<std::string, Point3>& targets,
                             const Eigen::VectorXd& q0, const IkSettings& settings = {});

struct IkSequenceResult {
  io::MotionTable motion;
  std::vector<IkFrameResult> frames;
  std::vector<std::string> warnings;
  int total_iterations = 0;
};

/// Solves every frame of `traj` (converted to meters). Chain markers absent
/// from the trajectory and trajectory markers unknown to the chain are
/// dropped with a warning. Rotational columns are reported in degrees.
IkSequenceResult solve_ik_sequence(const KinematicChain& chain,
                                   const twin::MarkerTrajectory& traj,
                                   const IkSettings& settings = {});

}  // namespace biotwin::ik
