/*
 * biotwin C API.
 *
 * Every function returns a bt_status. On failure, bt_last_error() and
 * bt_last_error_locator() describe the most recent error on the calling
 * thread. Handles are opaque and owned by the caller; release them with the
 * matching *_free function. Strings returned through char** must be released
 * with bt_string_free().
 *
 * All lengths are meters unless a name says otherwise. Point arrays are
 * packed xyz triples.
 */
#ifndef BIOTWIN_BIOTWIN_H
#define BIOTWIN_BIOTWIN_H

#include <stddef.h>

#if defined(_WIN32) || defined(__CYGWIN__)
#  ifdef BIOTWIN_BUILDING
#    define BT_API __declspec(dllexport)
#  else
#    define BT_API __declspec(dllimport)
#  endif
#elif defined(__GNUC__) && (__GNUC__ >= 4)
#  define BT_API __attribute__((visibility("default")))
#else
#  define BT_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bt_status {
  BT_OK = 0,
  BT_ERR_INVALID_ARGUMENT = 1,
  BT_ERR_DEGENERATE = 2,
  BT_ERR_MAPPING = 3,
  BT_ERR_PARSE = 4,
  BT_ERR_IO = 5,
  BT_ERR_NO_SUBJECT = 6,
  BT_ERR_INTERNAL = 100
} bt_status;

typedef struct bt_mesh bt_mesh;
typedef struct bt_marker_map bt_marker_map;
typedef struct bt_extrinsics bt_extrinsics;
typedef struct bt_trajectory bt_trajectory;
typedef struct bt_chain bt_chain;
typedef struct bt_ik_result bt_ik_result;

/* x -> scale * rotation * x + translation, rotation row-major. */
typedef struct bt_similarity {
  double scale;
  double rotation[9];
  double translation[3];
} bt_similarity;

BT_API const char* bt_version(void);
BT_API const char* bt_status_name(bt_status status);
BT_API const char* bt_last_error(void);
/* Field path ("markers[2].vertex") or text position ("line 7"); may be empty. */
BT_API const char* bt_last_error_locator(void);
BT_API void bt_string_free(char* s);

/* ---- geometry ---------------------------------------------------------- */

BT_API bt_status bt_umeyama_fit(const double* source, const double* target, size_t count,
                                int with_scale, bt_similarity* out);
BT_API bt_status bt_apply_transform(const bt_similarity* t, const double* points, size_t count,
                                    double* out);
BT_API bt_status bt_compose(const bt_similarity* outer, const bt_similarity* inner,
                            bt_similarity* out);
BT_API bt_status bt_inverse(const bt_similarity* t, bt_similarity* out);

/* ---- prompts ----------------------------------------------------------- */

/* Detections JSON in, prompts JSON out. With multi_person = 0 only the
 * highest-scoring kept detection yields a prompt. */
BT_API bt_status bt_prompts_from_detections(const char* detections_json, double threshold,
                                            int multi_person, char** prompts_json,
                                            size_t* prompt_count);

/* ---- mesh sequences ---------------------------------------------------- */

BT_API bt_status bt_mesh_load(const char* manifest_path, bt_mesh** out);
BT_API void bt_mesh_free(bt_mesh* mesh);
BT_API size_t bt_mesh_num_frames(const bt_mesh* mesh);
BT_API size_t bt_mesh_num_vertices(const bt_mesh* mesh);
BT_API double bt_mesh_frame_rate(const bt_mesh* mesh);
/* {"vertices": [[x,y,z],...], "faces": [[a,b,c],...]} */
BT_API bt_status bt_mesh_frame_json(const bt_mesh* mesh, size_t frame, char** json);
BT_API bt_status bt_mesh_predicted_height(const bt_mesh* mesh, size_t frame, double* height);
BT_API bt_status bt_mesh_nearest_vertex(const bt_mesh* mesh, size_t frame, const double* query,
                                        size_t* index);

/* ---- marker maps ------------------------------------------------------- */

/* num_vertices = 0 skips the vertex range check. */
BT_API bt_status bt_marker_map_load(const char* path, size_t num_vertices, bt_marker_map** out);
BT_API bt_status bt_marker_map_parse(const char* json, const char* base_dir, size_t num_vertices,
                                     bt_marker_map** out);
BT_API void bt_marker_map_free(bt_marker_map* map);
BT_API size_t bt_marker_map_num_markers(const bt_marker_map* map);
BT_API bt_status bt_marker_map_to_json(const bt_marker_map* map, char** json);
/* Marker names, anchors and symmetry pairs. */
BT_API bt_status bt_marker_map_markerset_json(const bt_marker_map* map, char** json);
/* Atomic write (temporary file + rename). */
BT_API bt_status bt_marker_map_save(const bt_marker_map* map, const char* path);
/* {"entries":[{"name","vertex"}]} right side in, left side out. */
BT_API bt_status bt_marker_map_mirror(const bt_marker_map* map, const char* entries_json,
                                      char** mirrored_json);
/* Anchor-based similarity fit of one mesh frame onto anchor targets
 * (anchor_count xyz triples, ordered like the map's anchors). */
BT_API bt_status bt_anchor_align(const bt_mesh* mesh, size_t frame, const bt_marker_map* map,
                                 const double* targets, size_t anchor_count, bt_similarity* out,
                                 double* anchor_rms);

/* ---- extrinsics and twin construction ---------------------------------- */

BT_API bt_status bt_extrinsics_load(const char* path, bt_extrinsics** out);
BT_API void bt_extrinsics_free(bt_extrinsics* ext);

typedef struct bt_twin_summary {
  double predicted_height_m;
  double height_scale;
  double ground_offset_m;
  size_t num_frames;
  size_t num_markers;
} bt_twin_summary;

/* Marker extraction, camera-to-world normalization and ground offset. */
BT_API bt_status bt_build_twin(const bt_mesh* mesh, const bt_marker_map* map,
                               const bt_extrinsics* ext, size_t reference_frame,
                               bt_trajectory** out, bt_twin_summary* summary);

/* ---- marker trajectories ----------------------------------------------- */

/* positions: num_frames * num_markers xyz triples, frame-major. units: "m" or "mm". */
BT_API bt_status bt_trajectory_create(const char* const* marker_names, size_t num_markers,
                                      size_t num_frames, double frame_rate_hz,
                                      const double* positions, const char* units,
                                      bt_trajectory** out);
BT_API void bt_trajectory_free(bt_trajectory* traj);
BT_API bt_status bt_trajectory_read_trc(const char* path, bt_trajectory** out);
BT_API bt_status bt_trajectory_write_trc(const bt_trajectory* traj, const char* path);
BT_API size_t bt_trajectory_num_frames(const bt_trajectory* traj);
BT_API size_t bt_trajectory_num_markers(const bt_trajectory* traj);
BT_API double bt_trajectory_frame_rate(const bt_trajectory* traj);
BT_API const char* bt_trajectory_units(const bt_trajectory* traj);
BT_API const char* bt_trajectory_marker_name(const bt_trajectory* traj, size_t index);
/* Copies all positions (in the trajectory's units) into out[3 * frames * markers]. */
BT_API bt_status bt_trajectory_positions(const bt_trajectory* traj, double* out);

/* ---- inverse kinematics ------------------------------------------------ */

BT_API bt_status bt_chain_load(const char* path, bt_chain** out);
BT_API void bt_chain_free(bt_chain* chain);
BT_API size_t bt_chain_num_dofs(const bt_chain* chain);
BT_API size_t bt_chain_num_markers(const bt_chain* chain);

typedef struct bt_ik_settings {
  int max_iterations;
  double cost_tolerance;
  double initial_damping;
  double damping_increase;
  double damping_decrease;
  int warm_start;
  /* Optional {"marker": weight} object; NULL for uniform weights. */
  const char* marker_weights_json;
} bt_ik_settings;

BT_API void bt_ik_settings_default(bt_ik_settings* settings);
/* Overlays the fields present in a JSON object onto *settings. A
 * "marker_weights" member is validated but not stored; weights travel through
 * marker_weights_json, whose storage the caller owns. */
BT_API bt_status bt_ik_settings_parse(const char* json, bt_ik_settings* settings);

typedef struct bt_ik_summary {
  size_t num_frames;
  size_t num_dofs;
  double mean_rms_m;
  double max_rms_m;
  size_t total_iterations;
  size_t num_warnings;
} bt_ik_summary;

/* settings may be NULL for defaults. */
BT_API bt_status bt_solve_ik(const bt_chain* chain, const bt_trajectory* traj,
                             const bt_ik_settings* settings, bt_ik_result** out,
                             bt_ik_summary* summary);
BT_API void bt_ik_result_free(bt_ik_result* result);
BT_API const char* bt_ik_result_warning(const bt_ik_result* result, size_t index);
BT_API double bt_ik_result_frame_rms(const bt_ik_result* result, size_t frame);
/* Angles in degrees; row-major (1 + num_dofs) columns per frame, time first. */
BT_API bt_status bt_ik_result_values(const bt_ik_result* result, double* out);
BT_API bt_status bt_ik_result_write_motion(const bt_ik_result* result, const char* name,
                                           const char* path);

#ifdef __cplusplus
}
#endif

#endif /* BIOTWIN_BIOTWIN_H */
