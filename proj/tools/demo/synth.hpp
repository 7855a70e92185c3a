#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "biotwin/ik.hpp"
#include "biotwin/twin.hpp"

// Synthetic subjects: a chain driven through smooth joint trajectories, skinned
// with a coarse tube mesh and seen by a known camera. Used for the shipped demo
// data and as ground truth in tests.
namespace biotwin::demo {

struct MotionSpec {
  std::size_t frames = 60;
  double frame_rate_hz = 30.0;
  std::uint64_t seed = 7;
  // Largest excursion from zero for rotational coordinates (rad).
  double rotation_cap = 0.6;
  double translation_amplitude = 0.05;
};

/// frames x num_dofs; sinusoids kept inside each coordinate's limits.
Eigen::MatrixXd joint_trajectories(const ik::KinematicChain& chain, const MotionSpec& spec);

/// Marker positions in the chain frame for every row of `q`.
twin::MarkerTrajectory marker_trajectory(const ik::KinematicChain& chain, const Eigen::MatrixXd& q,
                                         double frame_rate_hz);

struct Camera {
  geom::Matrix3 rotation = geom::Matrix3::Identity();
  geom::Point3 translation_m = geom::Point3::Zero();
  // Metric length of one mesh unit.
  double scale = 1.0;
};

struct Scene {
  Eigen::MatrixXd q;
  // World-frame markers before any ground shift.
  twin::MarkerTrajectory world_markers;
  twin::MeshSequence mesh;
  twin::MarkerMap map;
  twin::CameraExtrinsics extrinsics;
  Camera camera;
};

Camera default_camera();

Scene make_scene(const ik::KinematicChain& chain, const MotionSpec& spec,
                 const Camera& camera = default_camera());

/// Writes mesh.json (+ .f32, faces .u32), marker_map.json (+ symmetry.u32),
/// extrinsics.json, detections.json and a pipeline.json that points at
/// `chain_file`, relative to `dir`.
void write_scene(const Scene& scene, const std::string& dir, const std::string& chain_file);

}  // namespace biotwin::demo
