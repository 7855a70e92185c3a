#include "biotwin/twin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "biotwin/error.hpp"

namespace biotwin::twin {

namespace {

std::string idx(std::string_view field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

}  // namespace

MeshSequence::MeshSequence(std::size_t num_frames, std::size_t num_vertices,
                           double frame_rate_hz, std::vector<Point3> vertices,
                           std::vector<Face> faces)
    : num_frames_(num_frames),
      num_vertices_(num_vertices),
      frame_rate_hz_(frame_rate_hz),
      vertices_(std::move(vertices)),
      faces_(std::move(faces)) {
  if (num_frames_ == 0) throw Error(ErrorCode::InvalidArgument, "must be >= 1", "num_frames");
  if (num_vertices_ < 3) throw Error(ErrorCode::InvalidArgument, "must be >= 3", "num_vertices");
  if (!(std::isfinite(frame_rate_hz_) && frame_rate_hz_ > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "must be positive", "frame_rate_hz");
  }
  if (vertices_.size() != num_frames_ * num_vertices_) {
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(num_frames_ * num_vertices_) + " vertices, got " +
                    std::to_string(vertices_.size()),
                "data");
  }
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    if (!vertices_[i].allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite coordinate",
                  "frame " + std::to_string(i / num_vertices_) + " vertex " +
                      std::to_string(i % num_vertices_));
    }
  }
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    for (auto v : faces_[f]) {
      if (v >= num_vertices_) {
        throw Error(ErrorCode::InvalidArgument, "vertex index out of range", idx("faces", f));
      }
    }
  }
}

std::span<const Point3> MeshSequence::frame(std::size_t t) const {
  if (t >= num_frames_) {
    throw Error(ErrorCode::InvalidArgument,
                "frame " + std::to_string(t) + " out of range [0, " + std::to_string(num_frames_) +
                    ")");
  }
  return std::span<const Point3>(vertices_).subspan(t * num_vertices_, num_vertices_);
}

const MarkerBinding* MarkerMap::find(std::string_view name) const {
  for (const auto& m : markers) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

std::optional<std::string> MarkerMap::left_of(std::string_view right) const {
  for (const auto& [r, l] : symmetry_pairs) {
    if (r == right) return l;
  }
  return std::nullopt;
}

void validate(const MarkerMap& map, std::optional<std::size_t> num_vertices) {
  std::unordered_set<std::string> names;
  for (std::size_t i = 0; i < map.markers.size(); ++i) {
    const auto& m = map.markers[i];
    const auto field = idx("markers", i);
    if (m.name.empty()) throw Error(ErrorCode::Mapping, "empty marker name", field + ".name");
    if (m.name.find_first_of("\t\r\n") != std::string::npos) {
      throw Error(ErrorCode::Mapping, "marker name contains a tab or newline", field + ".name");
    }
    if (!names.insert(m.name).second) {
      throw Error(ErrorCode::Mapping, "duplicate marker name '" + m.name + "'", field + ".name");
    }
    if (num_vertices && m.vertex >= *num_vertices) {
      throw Error(ErrorCode::Mapping,
                  "marker '" + m.name + "' vertex " + std::to_string(m.vertex) +
                      " out of range [0, " + std::to_string(*num_vertices) + ")",
                  field + ".vertex");
    }
  }
  for (std::size_t i = 0; i < map.symmetry_pairs.size(); ++i) {
    const auto& [r, l] = map.symmetry_pairs[i];
    if (!names.count(r) || !names.count(l)) {
      throw Error(ErrorCode::Mapping, "pair references unknown marker '" + (names.count(r) ? l : r) + "'",
                  idx("symmetry_pairs", i));
    }
  }
  for (std::size_t i = 0; i < map.anchors.size(); ++i) {
    if (!names.count(map.anchors[i])) {
      throw Error(ErrorCode::Mapping, "unknown anchor marker '" + map.anchors[i] + "'",
                  idx("anchors", i));
    }
  }
  if (!map.symmetry_table.empty()) {
    if (num_vertices && map.symmetry_table.size() != *num_vertices) {
      throw Error(ErrorCode::Mapping,
                  "table has " + std::to_string(map.symmetry_table.size()) + " entries, mesh has " +
                      std::to_string(*num_vertices) + " vertices",
                  "symmetry_table");
    }
    const auto n = map.symmetry_table.size();
    for (std::size_t i = 0; i < n; ++i) {
      if (map.symmetry_table[i] >= n) {
        throw Error(ErrorCode::Mapping, "mirror index out of range", idx("symmetry_table", i));
      }
    }
  }
}

const char* units_tag(Units u) { return u == Units::Meters ? "m" : "mm"; }

Units parse_units(std::string_view tag) {
  if (tag == "m") return Units::Meters;
  if (tag == "mm") return Units::Millimeters;
  throw Error(ErrorCode::Parse, "unsupported units '" + std::string(tag) + "'", "units");
}

MarkerTrajectory MarkerTrajectory::to_meters() const {
  MarkerTrajectory out = *this;
  if (units == Units::Millimeters) {
    for (auto& p : out.positions) p /= 1000.0;
    out.units = Units::Meters;
  }
  return out;
}

void validate(const MarkerTrajectory& traj) {
  if (traj.marker_names.empty()) throw Error(ErrorCode::InvalidArgument, "no markers");
  std::unordered_set<std::string_view> seen;
  for (std::size_t m = 0; m < traj.marker_names.size(); ++m) {
    const auto& name = traj.marker_names[m];
    if (name.empty() || name.find_first_of("\t\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "marker name is empty or contains a tab or newline",
                  idx("marker_names", m));
    }
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate marker name '" + name + "'", idx("marker_names", m));
    }
  }
  if (traj.positions.empty() || traj.positions.size() % traj.marker_names.size() != 0) {
    throw Error(ErrorCode::InvalidArgument, "position count is not a multiple of marker count");
  }
  if (!(std::isfinite(traj.frame_rate_hz) && traj.frame_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "frame rate must be positive", "frame_rate_hz");
  }
  for (std::size_t i = 0; i < traj.positions.size(); ++i) {
    if (!traj.positions[i].allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "non-finite position",
                  "frame " + std::to_string(i / traj.num_markers()) + " marker '" +
                      traj.marker_names[i % traj.num_markers()] + "'");
    }
  }
}

void validate(const CameraExtrinsics& ext) {
  geom::require_rotation(ext.rotation, "R");
  if (!ext.translation_m.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "non-finite translation", "t_mm");
  }
  if (!(std::isfinite(ext.subject_height_m) && ext.subject_height_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "must be positive", "subject_height_m");
  }
  if (ext.predicted_height_m &&
      !(std::isfinite(*ext.predicted_height_m) && *ext.predicted_height_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "must be positive", "predicted_height_m");
  }
}

MarkerTrajectory extract_markers(const MeshSequence& mesh, const MarkerMap& map) {
  if (map.markers.empty()) throw Error(ErrorCode::Mapping, "marker map has no markers");
  for (std::size_t i = 0; i < map.markers.size(); ++i) {
    const auto& m = map.markers[i];
    if (m.vertex >= mesh.num_vertices()) {
      throw Error(ErrorCode::Mapping,
                  "marker '" + m.name + "' vertex " + std::to_string(m.vertex) +
                      " out of range [0, " + std::to_string(mesh.num_vertices()) + ")",
                  idx("markers", i) + ".vertex");
    }
  }
  MarkerTrajectory out;
  out.frame_rate_hz = mesh.frame_rate_hz();
  out.units = Units::Meters;
  for (const auto& m : map.markers) out.marker_names.push_back(m.name);
  out.positions.reserve(mesh.num_frames() * map.markers.size());
  for (std::size_t t = 0; t < mesh.num_frames(); ++t) {
    const auto frame = mesh.frame(t);
    for (const auto& m : map.markers) out.positions.push_back(frame[m.vertex]);
  }
  return out;
}

AnchorAlignment anchor_align(std::span<const Point3> mesh_frame, const MarkerMap& map,
                             std::span<const Point3> targets) {
  if (targets.size() != map.anchors.size()) {
    throw Error(ErrorCode::InvalidArgument,
                "expected " + std::to_string(map.anchors.size()) + " anchor targets, got " +
                    std::to_string(targets.size()));
  }
  std::vector<Point3> source;
  source.reserve(map.anchors.size());
  for (std::size_t i = 0; i < map.anchors.size(); ++i) {
    const auto* binding = map.find(map.anchors[i]);
    if (!binding) {
      throw Error(ErrorCode::Mapping, "anchor '" + map.anchors[i] + "' is not a mapped marker",
                  idx("anchors", i));
    }
    if (binding->vertex >= mesh_frame.size()) {
      throw Error(ErrorCode::Mapping, "anchor '" + map.anchors[i] + "' vertex out of range",
                  idx("anchors", i));
    }
    source.push_back(mesh_frame[binding->vertex]);
  }
  AnchorAlignment out;
  out.transform = geom::umeyama_fit(source, targets, true);
  out.aligned = geom::apply_transform(out.transform, mesh_frame);
  out.anchor_rms = std::sqrt(geom::alignment_cost(out.transform, source, targets) /
                             static_cast<double>(source.size()));
  return out;
}

std::size_t nearest_vertex(std::span<const Point3> mesh_frame, const Point3& query) {
  if (mesh_frame.empty()) throw Error(ErrorCode::InvalidArgument, "empty mesh frame");
  std::size_t best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < mesh_frame.size(); ++i) {
    const double d2 = (mesh_frame[i] - query).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return best;
}

std::vector<MarkerBinding> mirror_bindings(const MarkerMap& map,
                                           std::span<const MarkerBinding> right_side) {
  if (map.symmetry_table.empty()) {
    throw Error(ErrorCode::Mapping, "marker map has no vertex symmetry table", "symmetry_table");
  }
  std::vector<MarkerBinding> left;
  left.reserve(right_side.size());
  for (std::size_t i = 0; i < right_side.size(); ++i) {
    const auto& r = right_side[i];
    auto partner = map.left_of(r.name);
    if (!partner) {
      throw Error(ErrorCode::Mapping, "marker '" + r.name + "' has no symmetry partner",
                  idx("entries", i) + ".name");
    }
    if (r.vertex >= map.symmetry_table.size()) {
      throw Error(ErrorCode::Mapping, "vertex " + std::to_string(r.vertex) + " out of range",
                  idx("entries", i) + ".vertex");
    }
    left.push_back({std::move(*partner), map.symmetry_table[r.vertex]});
  }
  return left;
}

double height_scale(double subject_height_m, double predicted_height_m) {
  if (!(std::isfinite(subject_height_m) && subject_height_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "must be positive", "subject_height_m");
  }
  if (!(std::isfinite(predicted_height_m) && predicted_height_m > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "must be positive", "predicted_height_m");
  }
  return subject_height_m / predicted_height_m;
}

double predicted_height(const MeshSequence& mesh, std::size_t frame) {
  const auto verts = mesh.frame(frame);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& v : verts) {
    lo = std::min(lo, v.y());
    hi = std::max(hi, v.y());
  }
  return hi - lo;
}

Point3 camera_point_to_world(const Point3& p_cam, const geom::Matrix3& rotation,
                             const Point3& translation_m, double scale) {
  return rotation.transpose() * (p_cam * scale - translation_m);
}

MarkerTrajectory camera_to_world(const MarkerTrajectory& traj, const CameraExtrinsics& ext) {
  validate(ext);
  if (!ext.predicted_height_m) {
    throw Error(ErrorCode::InvalidArgument, "predicted height not set", "predicted_height_m");
  }
  const double s = height_scale(ext.subject_height_m, *ext.predicted_height_m);
  MarkerTrajectory out = traj.to_meters();
  for (auto& p : out.positions) p = camera_point_to_world(p, ext.rotation, ext.translation_m, s);
  return out;
}

GroundResult ground_offset(const MarkerTrajectory& traj) {
  if (traj.positions.empty()) throw Error(ErrorCode::InvalidArgument, "empty trajectory");
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& p : traj.positions) lowest = std::min(lowest, p.y());
  GroundResult out{-lowest, traj};
  for (auto& p : out.trajectory.positions) p.y() += out.offset;
  return out;
}

TwinResult build_twin(const MeshSequence& mesh, const MarkerMap& map, CameraExtrinsics ext,
                      std::size_t reference_frame) {
  TwinResult result;
  result.predicted_height_m =
      ext.predicted_height_m ? *ext.predicted_height_m : predicted_height(mesh, reference_frame);
  ext.predicted_height_m = result.predicted_height_m;
  result.height_scale = height_scale(ext.subject_height_m, result.predicted_height_m);

  auto world = camera_to_world(extract_markers(mesh, map), ext);
  auto grounded = ground_offset(world);
  result.ground_offset = grounded.offset;
  result.trajectory = std::move(grounded.trajectory);
  return result;
}

}  // namespace biotwin::twin
