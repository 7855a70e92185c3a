#include "synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include "json.hpp"

#include "biotwin/config.hpp"
#include "biotwin/error.hpp"

namespace biotwin::demo {

namespace fs = std::filesystem;
using geom::Point3;
using nlohmann::json;

namespace {

constexpr int kRings = 4;
constexpr int kRingPoints = 8;

struct Skin {
  std::vector<ik::MarkerAttachment> points;
  std::vector<twin::MeshSequence::Face> faces;
};

Point3 bone_of(const ik::KinematicChain& chain, std::size_t s) {
  Point3 sum = Point3::Zero();
  int n = 0;
  for (const auto& seg : chain.segments()) {
    if (seg.parent == s) {
      sum += seg.offset;
      ++n;
    }
  }
  if (n == 0) {
    for (const auto& m : chain.markers()) {
      if (m.segment == s) {
        sum += m.offset;
        ++n;
      }
    }
  }
  return n == 0 ? Point3(0.0, -0.1, 0.0) : Point3(sum / n);
}

// Rings of points around each segment's bone vector. The in-plane basis is
// built from a fixed reference axis so mirrored bones get mirrored rings.
Skin skin_chain(const ik::KinematicChain& chain) {
  Skin skin;
  for (std::size_t s = 0; s < chain.segments().size(); ++s) {
    Point3 bone = bone_of(chain, s);
    if (bone.norm() < 1e-6) bone = Point3(0.0, -0.1, 0.0);
    const Point3 dir = bone.normalized();
    const Point3 ref = std::abs(dir.x()) > 0.9 ? Point3::UnitZ() : Point3::UnitX();
    const Point3 u = (ref - ref.dot(dir) * dir).normalized();
    const Point3 w = dir.cross(u);
    const double radius = std::clamp(0.15 * bone.norm(), 0.03, 0.08);
    const auto base = static_cast<std::uint32_t>(skin.points.size());
    for (int r = 0; r < kRings; ++r) {
      const Point3 centre = bone * (0.1 + 0.8 * r / (kRings - 1));
      for (int k = 0; k < kRingPoints; ++k) {
        const double a = 2.0 * std::numbers::pi * k / kRingPoints;
        skin.points.push_back({"", s, centre + radius * (std::cos(a) * u + std::sin(a) * w)});
      }
    }
    for (std::uint32_t r = 0; r + 1 < kRings; ++r) {
      for (std::uint32_t k = 0; k < kRingPoints; ++k) {
        const std::uint32_t a = base + r * kRingPoints + k;
        const std::uint32_t b = base + r * kRingPoints + (k + 1) % kRingPoints;
        skin.faces.push_back({a, b, a + kRingPoints});
        skin.faces.push_back({b, b + kRingPoints, a + kRingPoints});
      }
    }
  }
  for (std::size_t i = 0; i < skin.points.size(); ++i) skin.points[i].name = "_skin" + std::to_string(i);
  return skin;
}

// Vertex whose position is closest to the z-reflection of each vertex.
std::vector<std::uint32_t> mirror_table(const std::vector<Point3>& verts) {
  std::vector<std::uint32_t> table(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const Point3 m(verts[i].x(), verts[i].y(), -verts[i].z());
    table[i] = static_cast<std::uint32_t>(twin::nearest_vertex(verts, m));
  }
  return table;
}

void write_bytes(const std::string& path, const void* data, std::size_t size) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open for writing", path);
  f.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!f) throw Error(ErrorCode::Io, "write failed", path);
}

void write_json(const std::string& path, const json& j) {
  const auto text = j.dump(2) + "\n";
  write_bytes(path, text.data(), text.size());
}

}  // namespace

Eigen::MatrixXd joint_trajectories(const ik::KinematicChain& chain, const MotionSpec& spec) {
  if (spec.frames == 0 || !(spec.frame_rate_hz > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "need at least one frame and a positive rate");
  }
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = chain.num_dofs();
  Eigen::MatrixXd q(static_cast<Eigen::Index>(spec.frames), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto& dof = chain.dof(i);
    double lo, hi;
    if (dof.type == ik::DofType::Translation) {
      lo = -spec.translation_amplitude;
      hi = spec.translation_amplitude;
    } else {
      lo = -spec.rotation_cap;
      hi = spec.rotation_cap;
    }
    if (dof.limits) {
      constexpr double margin = 0.05;
      lo = std::max(lo, dof.limits->first + margin);
      hi = std::min(hi, dof.limits->second - margin);
    }
    const double centre = 0.5 * (lo + hi);
    const double amplitude = 0.5 * (hi - lo) * (0.5 + 0.5 * unit(rng));
    const double freq = 0.4 + 0.8 * unit(rng);
    const double phase = 2.0 * std::numbers::pi * unit(rng);
    for (std::size_t t = 0; t < spec.frames; ++t) {
      const double time = static_cast<double>(t) / spec.frame_rate_hz;
      q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) =
          centre + amplitude * std::sin(2.0 * std::numbers::pi * freq * time + phase);
    }
  }
  return q;
}

twin::MarkerTrajectory marker_trajectory(const ik::KinematicChain& chain, const Eigen::MatrixXd& q,
                                         double frame_rate_hz) {
  twin::MarkerTrajectory traj;
  traj.frame_rate_hz = frame_rate_hz;
  for (const auto& m : chain.markers()) traj.marker_names.push_back(m.name);
  for (Eigen::Index t = 0; t < q.rows(); ++t) {
    const auto pos = ik::marker_positions(chain, q.row(t).transpose());
    traj.positions.insert(traj.positions.end(), pos.begin(), pos.end());
  }
  return traj;
}

Camera default_camera() {
  Camera c;
  // Yaw only, so the mesh's vertical axis stays the camera's y axis.
  c.rotation = geom::axis_angle(Point3::UnitY(), 0.4);
  c.translation_m = Point3(0.12, -0.35, 2.8);
  c.scale = 1.35;
  return c;
}

Scene make_scene(const ik::KinematicChain& chain, const MotionSpec& spec, const Camera& camera) {
  const Skin skin = skin_chain(chain);
  auto points = skin.points;
  const auto skin_count = points.size();
  points.insert(points.end(), chain.markers().begin(), chain.markers().end());
  const ik::KinematicChain skinned(chain.segments(), points);

  const Eigen::MatrixXd q = joint_trajectories(chain, spec);
  const auto nv = points.size();

  std::vector<Point3> cam;
  cam.reserve(spec.frames * nv);
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -y_min;
  for (std::size_t t = 0; t < spec.frames; ++t) {
    const auto world = ik::marker_positions(skinned, q.row(static_cast<Eigen::Index>(t)).transpose());
    for (const auto& p : world) {
      if (t == 0) {
        y_min = std::min(y_min, p.y());
        y_max = std::max(y_max, p.y());
      }
      // Inverse of p_world = R^T (p_cam * s - t). Stored as float, as a
      // reconstruction backend would.
      const Point3 c = (camera.rotation * p + camera.translation_m) / camera.scale;
      cam.push_back(c.cast<float>().cast<double>());
    }
  }

  const auto neutral = ik::marker_positions(skinned, skinned.clamp(Eigen::VectorXd::Zero(
                                                        static_cast<Eigen::Index>(chain.num_dofs()))));

  twin::MarkerMap map;
  map.marker_set = "synthetic";
  for (std::size_t m = 0; m < chain.markers().size(); ++m) {
    map.markers.push_back({chain.markers()[m].name, static_cast<std::uint32_t>(skin_count + m)});
  }
  map.symmetry_table = mirror_table(neutral);
  map.symmetry_table_path = "symmetry.u32";
  for (std::size_t m = 0; m < chain.markers().size(); ++m) {
    const auto v = map.markers[m].vertex;
    const auto mv = map.symmetry_table[v];
    if (mv == v || neutral[v].z() <= 0.0) continue;
    for (const auto& other : map.markers) {
      if (other.vertex == mv) map.symmetry_pairs.emplace_back(map.markers[m].name, other.name);
    }
  }
  for (std::size_t m = 0; m < std::min<std::size_t>(7, map.markers.size()); ++m) {
    map.anchors.push_back(map.markers[m].name);
  }

  twin::CameraExtrinsics ext;
  ext.rotation = camera.rotation;
  ext.translation_m = camera.translation_m;
  ext.subject_height_m = y_max - y_min;

  Scene scene{q,
              marker_trajectory(chain, q, spec.frame_rate_hz),
              twin::MeshSequence(spec.frames, nv, spec.frame_rate_hz, std::move(cam), skin.faces),
              std::move(map),
              ext,
              camera};
  return scene;
}

void write_scene(const Scene& scene, const std::string& dir, const std::string& chain_file) {
  fs::create_directories(dir);
  const auto path = [&](const char* name) { return (fs::path(dir) / name).string(); };

  const auto& mesh = scene.mesh;
  std::vector<float> blob;
  blob.reserve(mesh.num_frames() * mesh.num_vertices() * 3);
  for (std::size_t t = 0; t < mesh.num_frames(); ++t) {
    for (const auto& p : mesh.frame(t)) {
      for (int k = 0; k < 3; ++k) blob.push_back(static_cast<float>(p[k]));
    }
  }
  static_assert(std::endian::native == std::endian::little, "demo writer assumes little-endian");
  write_bytes(path("mesh.f32"), blob.data(), blob.size() * sizeof(float));
  std::vector<std::uint32_t> faces;
  for (const auto& f : mesh.faces()) faces.insert(faces.end(), f.begin(), f.end());
  write_bytes(path("mesh_faces.u32"), faces.data(), faces.size() * sizeof(std::uint32_t));
  write_json(path("mesh.json"), {{"num_frames", mesh.num_frames()},
                                 {"num_vertices", mesh.num_vertices()},
                                 {"frame_rate_hz", mesh.frame_rate_hz()},
                                 {"data", "mesh.f32"},
                                 {"faces", "mesh_faces.u32"}});

  const auto& table = scene.map.symmetry_table;
  write_bytes(path("symmetry.u32"), table.data(), table.size() * sizeof(std::uint32_t));
  io::save_marker_map(scene.map, path("marker_map.json"));

  const auto& ext = scene.extrinsics;
  json r = json::array();
  for (int i = 0; i < 3; ++i) r.push_back({ext.rotation(i, 0), ext.rotation(i, 1), ext.rotation(i, 2)});
  const Point3 t_mm = ext.translation_m * 1000.0;
  write_json(path("extrinsics.json"), {{"R", r},
                                       {"t_mm", {t_mm.x(), t_mm.y(), t_mm.z()}},
                                       {"subject_height_m", ext.subject_height_m}});

  write_json(path("detections.json"),
             {{"detections",
               {{{"box", {412.0, 96.0, 655.0, 1012.0}}, {"score", 0.93}},
                {{"box", {40.0, 300.0, 120.0, 520.0}}, {"score", 0.5}},
                {{"box", {980.0, 150.0, 1180.0, 960.0}}, {"score", 0.71}}}}});

  write_json(path("pipeline.json"), {{"mesh", "mesh.json"},
                                     {"marker_map", "marker_map.json"},
                                     {"extrinsics", "extrinsics.json"},
                                     {"chain", chain_file},
                                     {"detections", "detections.json"},
                                     {"output_dir", "out"},
                                     {"reference_frame", 0},
                                     {"detection", {{"confidence_threshold", 0.5}, {"multi_person", false}}},
                                     {"ik", {{"max_iterations", 100}, {"cost_tolerance", 1e-10}}}});
}

}  // namespace biotwin::demo
