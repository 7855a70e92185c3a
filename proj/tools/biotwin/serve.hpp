#pragma once

#include <shared_mutex>
#include <string>

#include "handles.hpp"

namespace httplib {
class Server;
}

namespace biotwin::cli {

// State behind the marker-picker endpoints: one reference mesh frame and the
// current mapping. Readers share a lock; mapping writes are serialized and
// reach disk before they become visible.
class MappingService {
 public:
  MappingService(std::string mesh_path, std::string map_path, std::size_t reference_frame);

  /// Registers GET /api/mesh, GET /api/markerset, GET|PUT /api/mapping and POST /api/mirror.
  void mount(httplib::Server& server);

  std::string mesh_json() const { return mesh_json_; }
  std::string markerset_json() const;
  std::string mapping_json() const;

  struct Reply {
    int status;
    std::string body;
  };
  /// Validates `body` as a full mapping; on success persists it atomically.
  Reply put_mapping(const std::string& body);
  Reply mirror(const std::string& body) const;

 private:
  std::string map_path_;
  std::string map_dir_;
  std::size_t num_vertices_ = 0;
  std::string mesh_json_;
  mutable std::shared_mutex mutex_;
  MarkerMap map_;
};

}  // namespace biotwin::cli
