#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "biotwin/geom.hpp"

namespace biotwin::twin {

using geom::Point3;

/// Fixed-topology vertex sequence in camera coordinates (meters).
class MeshSequence {
 public:
  using Face = std::array<std::uint32_t, 3>;

  /// `vertices` is frame-major, then vertex-major; size must be frames * num_vertices.
  MeshSequence(std::size_t num_frames, std::size_t num_vertices, double frame_rate_hz,
               std::vector<Point3> vertices, std::vector<Face> faces = {});

  std::size_t num_frames() const { return num_frames_; }
  std::size_t num_vertices() const { return num_vertices_; }
  double frame_rate_hz() const { return frame_rate_hz_; }
  const std::vector<Face>& faces() const { return faces_; }

  std::span<const Point3> frame(std::size_t t) const;

 private:
  std::size_t num_frames_;
  std::size_t num_vertices_;
  double frame_rate_hz_;
  std::vector<Point3> vertices_;
  std::vector<Face> faces_;
};

struct MarkerBinding {
  std::string name;
  std::uint32_t vertex = 0;
};

struct MarkerMap {
  std::string marker_set;
  std::vector<MarkerBinding> markers;
  /// (right, left) marker names.
  std::vector<std::pair<std::string, std::string>> symmetry_pairs;
  std::vector<std::string> anchors;
  /// Optional per-vertex mirror index; empty when absent.
  std::vector<std::uint32_t> symmetry_table;
  /// Where the symmetry table was loaded from, kept so a saved map points at the same file.
  std::string symmetry_table_path;

  const MarkerBinding* find(std::string_view name) const;
  /// Left partner of a right-side marker name, if paired.
  std::optional<std::string> left_of(std::string_view right) const;
};

/// Structural checks: unique tab-free names, pairs reference existing markers,
/// anchors exist, and (when num_vertices is given) every index is in range.
void validate(const MarkerMap& map, std::optional<std::size_t> num_vertices = std::nullopt);

enum class Units { Meters, Millimeters };

const char* units_tag(Units u);
Units parse_units(std::string_view tag);

/// T x M labeled marker positions. Positions are frame-major.
struct MarkerTrajectory {
  double frame_rate_hz = 0.0;
  std::vector<std::string> marker_names;
  std::vector<Point3> positions;
  Units units = Units::Meters;
  std::size_t start_frame = 1;

  std::size_t num_markers() const { return marker_names.size(); }
  std::size_t num_frames() const {
    return marker_names.empty() ? 0 : positions.size() / marker_names.size();
  }
  const Point3& at(std::size_t frame, std::size_t marker) const {
    return positions[frame * marker_names.size() + marker];
  }
  Point3& at(std::size_t frame, std::size_t marker) {
    return positions[frame * marker_names.size() + marker];
  }

  /// Copy expressed in meters.
  MarkerTrajectory to_meters() const;
};

void validate(const MarkerTrajectory& traj);

struct CameraExtrinsics {
  geom::Matrix3 rotation = geom::Matrix3::Identity();
  /// Meters; loaders convert the millimeter input.
  Point3 translation_m = Point3::Zero();
  double subject_height_m = 1.0;
  /// Filled from the mesh by build_twin when absent.
  std::optional<double> predicted_height_m;
};

void validate(const CameraExtrinsics& ext);

MarkerTrajectory extract_markers(const MeshSequence& mesh, const MarkerMap& map);

struct AnchorAlignment {
  geom::Similarity transform;
  std::vector<Point3> aligned;
  /// RMS distance between transformed anchors and their targets.
  double anchor_rms = 0.0;
};

/// Fits the mesh frame's anchor vertices onto `targets` (ordered like
/// map.anchors) and carries the whole frame through the fitted similarity.
AnchorAlignment anchor_align(std::span<const Point3> mesh_frame, const MarkerMap& map,
                             std::span<const Point3> targets);

/// Closest vertex; lowest index on ties.
std::size_t nearest_vertex(std::span<const Point3> mesh_frame, const Point3& query);

/// Maps right-side bindings to their left partners through the symmetry table.
std::vector<MarkerBinding> mirror_bindings(const MarkerMap& map,
                                           std::span<const MarkerBinding> right_side);

double height_scale(double subject_height_m, double predicted_height_m);

/// Vertical (y) extent of one frame.
double predicted_height(const MeshSequence& mesh, std::size_t frame = 0);

/// p_world = R^T (p_cam * s - t) for a single point.
Point3 camera_point_to_world(const Point3& p_cam, const geom::Matrix3& rotation,
                             const Point3& translation_m, double scale);

/// Requires ext.predicted_height_m; output is in meters.
MarkerTrajectory camera_to_world(const MarkerTrajectory& traj, const CameraExtrinsics& ext);

struct GroundResult {
  double offset = 0.0;
  MarkerTrajectory trajectory;
};

/// Shifts every y by -min(y) so the lowest sample sits at zero.
GroundResult ground_offset(const MarkerTrajectory& traj);

struct TwinResult {
  MarkerTrajectory trajectory;
  double predicted_height_m = 0.0;
  double height_scale = 1.0;
  double ground_offset = 0.0;
};

/// extract_markers -> camera_to_world -> ground_offset.
TwinResult build_twin(const MeshSequence& mesh, const MarkerMap& map, CameraExtrinsics ext,
                      std::size_t reference_frame = 0);

}  // namespace biotwin::twin
