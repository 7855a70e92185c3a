#pragma once

#include <string>
#include <vector>

#include "biotwin/ik.hpp"
#include "biotwin/prompt.hpp"
#include "biotwin/twin.hpp"

// JSON readers and writers for every configuration file the toolkit touches.
// Errors carry the offending field path as their locator.
namespace biotwin::io {

/// Manifest with a sibling .f32 blob, or the inline "vertices" variant (< 1000 vertices).
twin::MeshSequence load_mesh_sequence(const std::string& manifest_path);
twin::MeshSequence mesh_sequence_from_json(const std::string& text, const std::string& base_dir);

/// Relative symmetry-table paths resolve against `base_dir`.
twin::MarkerMap marker_map_from_json(const std::string& text, const std::string& base_dir,
                                     std::optional<std::size_t> num_vertices = std::nullopt);
twin::MarkerMap load_marker_map(const std::string& path,
                                std::optional<std::size_t> num_vertices = std::nullopt);
std::string marker_map_to_json(const twin::MarkerMap& map);
/// Writes to a temporary sibling and renames it over `path`.
void save_marker_map(const twin::MarkerMap& map, const std::string& path);

/// Marker names, anchors and symmetry pairs only.
std::string marker_set_json(const twin::MarkerMap& map);

/// {"entries": [{"name": ..., "vertex": n}]}
std::vector<twin::MarkerBinding> bindings_from_json(const std::string& text);
std::string bindings_to_json(const std::vector<twin::MarkerBinding>& entries);

/// Converts t_mm to meters.
twin::CameraExtrinsics extrinsics_from_json(const std::string& text);
twin::CameraExtrinsics load_extrinsics(const std::string& path);

ik::KinematicChain chain_from_json(const std::string& text);
ik::KinematicChain load_chain(const std::string& path);

/// Fields absent from `text` keep their values from `base`.
ik::IkSettings ik_settings_from_json(const std::string& text, ik::IkSettings base = {});

std::vector<prompt::Detection> detections_from_json(const std::string& text);
std::string prompts_to_json(const std::vector<prompt::VisualPrompt>& prompts);

/// {"vertices": [[x,y,z],...], "faces": [[a,b,c],...]} for one frame.
std::string mesh_frame_to_json(const twin::MeshSequence& mesh, std::size_t frame);

std::string read_text_file(const std::string& path);
/// Directory part of `path` ("." when none).
std::string parent_dir(const std::string& path);

}  // namespace biotwin::io
