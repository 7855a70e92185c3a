#include "biotwin/biotwin.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

#include "biotwin/config.hpp"
#include "biotwin/error.hpp"
#include "biotwin/geom.hpp"
#include "biotwin/ik.hpp"
#include "biotwin/prompt.hpp"
#include "biotwin/trc.hpp"
#include "biotwin/twin.hpp"

using namespace biotwin;

struct bt_mesh {
  twin::MeshSequence value;
};
struct bt_marker_map {
  twin::MarkerMap value;
};
struct bt_extrinsics {
  twin::CameraExtrinsics value;
};
struct bt_trajectory {
  twin::MarkerTrajectory value;
};
struct bt_chain {
  ik::KinematicChain value;
};
struct bt_ik_result {
  ik::IkSequenceResult value;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_locator;

bt_status to_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return BT_ERR_INVALID_ARGUMENT;
    case ErrorCode::Degenerate: return BT_ERR_DEGENERATE;
    case ErrorCode::Mapping: return BT_ERR_MAPPING;
    case ErrorCode::Parse: return BT_ERR_PARSE;
    case ErrorCode::Io: return BT_ERR_IO;
    case ErrorCode::NoSubject: return BT_ERR_NO_SUBJECT;
  }
  return BT_ERR_INTERNAL;
}

bt_status fail(bt_status status, std::string message, std::string locator = {}) {
  g_error = std::move(message);
  g_locator = std::move(locator);
  return status;
}

// Runs `fn`, translating exceptions into status codes and thread-local error text.
template <typename Fn>
bt_status guarded(Fn&& fn) {
  try {
    fn();
    g_error.clear();
    g_locator.clear();
    return BT_OK;
  } catch (const Error& e) {
    return fail(to_status(e.code()), e.message(), e.locator());
  } catch (const std::bad_alloc&) {
    return fail(BT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(BT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(BT_ERR_INTERNAL, "unknown error");
  }
}

#define BT_REQUIRE(cond, name)                                                          \
  do {                                                                                  \
    if (!(cond)) return fail(BT_ERR_INVALID_ARGUMENT, "null or invalid argument", name); \
  } while (0)

char* dup_string(const std::string& s) {
  auto* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

geom::Similarity from_c(const bt_similarity& t) {
  geom::Similarity s;
  s.scale = t.scale;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) s.rotation(r, c) = t.rotation[3 * r + c];
    s.translation[r] = t.translation[r];
  }
  return s;
}

bt_similarity to_c(const geom::Similarity& s) {
  bt_similarity t{};
  t.scale = s.scale;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) t.rotation[3 * r + c] = s.rotation(r, c);
    t.translation[r] = s.translation[r];
  }
  return t;
}

std::vector<geom::Point3> points_from(const double* xyz, size_t count) {
  std::vector<geom::Point3> pts(count);
  for (size_t i = 0; i < count; ++i) pts[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
  return pts;
}

ik::IkSettings settings_from(const bt_ik_settings* s) {
  ik::IkSettings out;
  if (!s) return out;
  out.max_iterations = s->max_iterations;
  out.cost_tolerance = s->cost_tolerance;
  out.initial_damping = s->initial_damping;
  out.damping_increase = s->damping_increase;
  out.damping_decrease = s->damping_decrease;
  out.warm_start = s->warm_start != 0;
  if (s->marker_weights_json) {
    const std::string wrapped = std::string("{\"marker_weights\":") + s->marker_weights_json + "}";
    out.marker_weights = io::ik_settings_from_json(wrapped).marker_weights;
  }
  ik::validate(out);
  return out;
}

}  // namespace

extern "C" {

const char* bt_version(void) { return "0.3.0"; }

const char* bt_status_name(bt_status status) {
  switch (status) {
    case BT_OK: return "ok";
    case BT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BT_ERR_DEGENERATE: return "degenerate configuration";
    case BT_ERR_MAPPING: return "mapping error";
    case BT_ERR_PARSE: return "parse error";
    case BT_ERR_IO: return "i/o error";
    case BT_ERR_NO_SUBJECT: return "no subject";
    case BT_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* bt_last_error(void) { return g_error.c_str(); }
const char* bt_last_error_locator(void) { return g_locator.c_str(); }
void bt_string_free(char* s) { std::free(s); }

bt_status bt_umeyama_fit(const double* source, const double* target, size_t count,
                         int with_scale, bt_similarity* out) {
  BT_REQUIRE(source && target && out, "source/target/out");
  return guarded([&] {
    *out = to_c(geom::umeyama_fit(points_from(source, count), points_from(target, count),
                                  with_scale != 0));
  });
}

bt_status bt_apply_transform(const bt_similarity* t, const double* points, size_t count,
                             double* out) {
  BT_REQUIRE(t && (points || count == 0) && (out || count == 0), "t/points/out");
  return guarded([&] {
    const auto mapped = geom::apply_transform(from_c(*t), points_from(points, count));
    for (size_t i = 0; i < count; ++i) {
      for (int c = 0; c < 3; ++c) out[3 * i + c] = mapped[i][c];
    }
  });
}

bt_status bt_compose(const bt_similarity* outer, const bt_similarity* inner, bt_similarity* out) {
  BT_REQUIRE(outer && inner && out, "outer/inner/out");
  return guarded([&] { *out = to_c(geom::compose(from_c(*outer), from_c(*inner))); });
}

bt_status bt_inverse(const bt_similarity* t, bt_similarity* out) {
  BT_REQUIRE(t && out, "t/out");
  return guarded([&] { *out = to_c(geom::inverse(from_c(*t))); });
}

bt_status bt_prompts_from_detections(const char* detections_json, double threshold,
                                     int multi_person, char** prompts_json, size_t* prompt_count) {
  BT_REQUIRE(detections_json && prompts_json, "detections_json/prompts_json");
  return guarded([&] {
    const auto dets = io::detections_from_json(detections_json);
    const auto prompts = prompt::make_prompts(dets, {threshold}, multi_person != 0);
    *prompts_json = dup_string(io::prompts_to_json(prompts));
    if (prompt_count) *prompt_count = prompts.size();
  });
}

bt_status bt_mesh_load(const char* manifest_path, bt_mesh** out) {
  BT_REQUIRE(manifest_path && out, "manifest_path/out");
  return guarded([&] { *out = new bt_mesh{io::load_mesh_sequence(manifest_path)}; });
}

void bt_mesh_free(bt_mesh* mesh) { delete mesh; }
size_t bt_mesh_num_frames(const bt_mesh* mesh) { return mesh ? mesh->value.num_frames() : 0; }
size_t bt_mesh_num_vertices(const bt_mesh* mesh) { return mesh ? mesh->value.num_vertices() : 0; }
double bt_mesh_frame_rate(const bt_mesh* mesh) { return mesh ? mesh->value.frame_rate_hz() : 0.0; }

bt_status bt_mesh_frame_json(const bt_mesh* mesh, size_t frame, char** json) {
  BT_REQUIRE(mesh && json, "mesh/json");
  return guarded([&] { *json = dup_string(io::mesh_frame_to_json(mesh->value, frame)); });
}

bt_status bt_mesh_predicted_height(const bt_mesh* mesh, size_t frame, double* height) {
  BT_REQUIRE(mesh && height, "mesh/height");
  return guarded([&] { *height = twin::predicted_height(mesh->value, frame); });
}

bt_status bt_mesh_nearest_vertex(const bt_mesh* mesh, size_t frame, const double* query,
                                 size_t* index) {
  BT_REQUIRE(mesh && query && index, "mesh/query/index");
  return guarded([&] {
    *index = twin::nearest_vertex(mesh->value.frame(frame), {query[0], query[1], query[2]});
  });
}

bt_status bt_marker_map_load(const char* path, size_t num_vertices, bt_marker_map** out) {
  BT_REQUIRE(path && out, "path/out");
  return guarded([&] {
    std::optional<std::size_t> nv;
    if (num_vertices) nv = num_vertices;
    *out = new bt_marker_map{io::load_marker_map(path, nv)};
  });
}

bt_status bt_marker_map_parse(const char* json, const char* base_dir, size_t num_vertices,
                              bt_marker_map** out) {
  BT_REQUIRE(json && out, "json/out");
  return guarded([&] {
    std::optional<std::size_t> nv;
    if (num_vertices) nv = num_vertices;
    *out = new bt_marker_map{io::marker_map_from_json(json, base_dir ? base_dir : ".", nv)};
  });
}

void bt_marker_map_free(bt_marker_map* map) { delete map; }
size_t bt_marker_map_num_markers(const bt_marker_map* map) {
  return map ? map->value.markers.size() : 0;
}

bt_status bt_marker_map_to_json(const bt_marker_map* map, char** json) {
  BT_REQUIRE(map && json, "map/json");
  return guarded([&] { *json = dup_string(io::marker_map_to_json(map->value)); });
}

bt_status bt_marker_map_markerset_json(const bt_marker_map* map, char** json) {
  BT_REQUIRE(map && json, "map/json");
  return guarded([&] { *json = dup_string(io::marker_set_json(map->value)); });
}

bt_status bt_marker_map_save(const bt_marker_map* map, const char* path) {
  BT_REQUIRE(map && path, "map/path");
  return guarded([&] { io::save_marker_map(map->value, path); });
}

bt_status bt_marker_map_mirror(const bt_marker_map* map, const char* entries_json,
                               char** mirrored_json) {
  BT_REQUIRE(map && entries_json && mirrored_json, "map/entries_json/mirrored_json");
  return guarded([&] {
    const auto right = io::bindings_from_json(entries_json);
    *mirrored_json = dup_string(io::bindings_to_json(twin::mirror_bindings(map->value, right)));
  });
}

bt_status bt_anchor_align(const bt_mesh* mesh, size_t frame, const bt_marker_map* map,
                          const double* targets, size_t anchor_count, bt_similarity* out,
                          double* anchor_rms) {
  BT_REQUIRE(mesh && map && targets && out, "mesh/map/targets/out");
  return guarded([&] {
    const auto result =
        twin::anchor_align(mesh->value.frame(frame), map->value, points_from(targets, anchor_count));
    *out = to_c(result.transform);
    if (anchor_rms) *anchor_rms = result.anchor_rms;
  });
}

bt_status bt_extrinsics_load(const char* path, bt_extrinsics** out) {
  BT_REQUIRE(path && out, "path/out");
  return guarded([&] { *out = new bt_extrinsics{io::load_extrinsics(path)}; });
}

void bt_extrinsics_free(bt_extrinsics* ext) { delete ext; }

bt_status bt_build_twin(const bt_mesh* mesh, const bt_marker_map* map, const bt_extrinsics* ext,
                        size_t reference_frame, bt_trajectory** out, bt_twin_summary* summary) {
  BT_REQUIRE(mesh && map && ext && out, "mesh/map/ext/out");
  return guarded([&] {
    auto result = twin::build_twin(mesh->value, map->value, ext->value, reference_frame);
    if (summary) {
      summary->predicted_height_m = result.predicted_height_m;
      summary->height_scale = result.height_scale;
      summary->ground_offset_m = result.ground_offset;
      summary->num_frames = result.trajectory.num_frames();
      summary->num_markers = result.trajectory.num_markers();
    }
    *out = new bt_trajectory{std::move(result.trajectory)};
  });
}

bt_status bt_trajectory_create(const char* const* marker_names, size_t num_markers,
                               size_t num_frames, double frame_rate_hz, const double* positions,
                               const char* units, bt_trajectory** out) {
  BT_REQUIRE(marker_names && positions && out, "marker_names/positions/out");
  return guarded([&] {
    twin::MarkerTrajectory traj;
    traj.frame_rate_hz = frame_rate_hz;
    traj.units = twin::parse_units(units ? units : "m");
    for (size_t m = 0; m < num_markers; ++m) {
      if (!marker_names[m]) throw Error(ErrorCode::InvalidArgument, "null marker name");
      traj.marker_names.emplace_back(marker_names[m]);
    }
    traj.positions = points_from(positions, num_markers * num_frames);
    twin::validate(traj);
    *out = new bt_trajectory{std::move(traj)};
  });
}

void bt_trajectory_free(bt_trajectory* traj) { delete traj; }

bt_status bt_trajectory_read_trc(const char* path, bt_trajectory** out) {
  BT_REQUIRE(path && out, "path/out");
  return guarded([&] { *out = new bt_trajectory{io::read_trc_file(path)}; });
}

bt_status bt_trajectory_write_trc(const bt_trajectory* traj, const char* path) {
  BT_REQUIRE(traj && path, "traj/path");
  return guarded([&] { io::write_trc_file(traj->value, path); });
}

size_t bt_trajectory_num_frames(const bt_trajectory* traj) {
  return traj ? traj->value.num_frames() : 0;
}
size_t bt_trajectory_num_markers(const bt_trajectory* traj) {
  return traj ? traj->value.num_markers() : 0;
}
double bt_trajectory_frame_rate(const bt_trajectory* traj) {
  return traj ? traj->value.frame_rate_hz : 0.0;
}
const char* bt_trajectory_units(const bt_trajectory* traj) {
  return traj ? twin::units_tag(traj->value.units) : "";
}
const char* bt_trajectory_marker_name(const bt_trajectory* traj, size_t index) {
  if (!traj || index >= traj->value.marker_names.size()) return nullptr;
  return traj->value.marker_names[index].c_str();
}

bt_status bt_trajectory_positions(const bt_trajectory* traj, double* out) {
  BT_REQUIRE(traj && out, "traj/out");
  return guarded([&] {
    const auto& pos = traj->value.positions;
    for (size_t i = 0; i < pos.size(); ++i) {
      for (int c = 0; c < 3; ++c) out[3 * i + c] = pos[i][c];
    }
  });
}

bt_status bt_chain_load(const char* path, bt_chain** out) {
  BT_REQUIRE(path && out, "path/out");
  return guarded([&] { *out = new bt_chain{io::load_chain(path)}; });
}

void bt_chain_free(bt_chain* chain) { delete chain; }
size_t bt_chain_num_dofs(const bt_chain* chain) { return chain ? chain->value.num_dofs() : 0; }
size_t bt_chain_num_markers(const bt_chain* chain) {
  return chain ? chain->value.markers().size() : 0;
}

void bt_ik_settings_default(bt_ik_settings* settings) {
  if (!settings) return;
  const ik::IkSettings d;
  settings->max_iterations = d.max_iterations;
  settings->cost_tolerance = d.cost_tolerance;
  settings->initial_damping = d.initial_damping;
  settings->damping_increase = d.damping_increase;
  settings->damping_decrease = d.damping_decrease;
  settings->warm_start = d.warm_start ? 1 : 0;
  settings->marker_weights_json = nullptr;
}

bt_status bt_ik_settings_parse(const char* json, bt_ik_settings* settings) {
  BT_REQUIRE(json && settings, "json/settings");
  return guarded([&] {
    const ik::IkSettings base = io::ik_settings_from_json(json, settings_from(settings));
    settings->max_iterations = base.max_iterations;
    settings->cost_tolerance = base.cost_tolerance;
    settings->initial_damping = base.initial_damping;
    settings->damping_increase = base.damping_increase;
    settings->damping_decrease = base.damping_decrease;
    settings->warm_start = base.warm_start ? 1 : 0;
  });
}

bt_status bt_solve_ik(const bt_chain* chain, const bt_trajectory* traj,
                      const bt_ik_settings* settings, bt_ik_result** out,
                      bt_ik_summary* summary) {
  BT_REQUIRE(chain && traj && out, "chain/traj/out");
  return guarded([&] {
    auto result = ik::solve_ik_sequence(chain->value, traj->value, settings_from(settings));
    if (summary) {
      summary->num_frames = result.frames.size();
      summary->num_dofs = chain->value.num_dofs();
      double sum = 0.0;
      double worst = 0.0;
      for (const auto& f : result.frames) {
        sum += f.rms;
        worst = std::max(worst, f.rms);
      }
      summary->mean_rms_m = result.frames.empty() ? 0.0 : sum / static_cast<double>(result.frames.size());
      summary->max_rms_m = worst;
      summary->total_iterations = static_cast<size_t>(result.total_iterations);
      summary->num_warnings = result.warnings.size();
    }
    *out = new bt_ik_result{std::move(result)};
  });
}

void bt_ik_result_free(bt_ik_result* result) { delete result; }

const char* bt_ik_result_warning(const bt_ik_result* result, size_t index) {
  if (!result || index >= result->value.warnings.size()) return nullptr;
  return result->value.warnings[index].c_str();
}

double bt_ik_result_frame_rms(const bt_ik_result* result, size_t frame) {
  if (!result || frame >= result->value.frames.size()) return -1.0;
  return result->value.frames[frame].rms;
}

bt_status bt_ik_result_values(const bt_ik_result* result, double* out) {
  BT_REQUIRE(result && out, "result/out");
  return guarded([&] {
    const auto& v = result->value.motion.values;
    std::copy(v.begin(), v.end(), out);
  });
}

bt_status bt_ik_result_write_motion(const bt_ik_result* result, const char* name,
                                    const char* path) {
  BT_REQUIRE(result && path, "result/path");
  return guarded([&] {
    io::MotionTable table = result->value.motion;
    if (name) table.name = name;
    io::write_motion_file(table, path);
  });
}

}  // extern "C"
