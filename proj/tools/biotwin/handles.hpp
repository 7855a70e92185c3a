#pragma once

#include <memory>
#include <stdexcept>
#include <string>

#include "biotwin/biotwin.h"

// Owning wrappers over the C API plus the status-to-exception bridge the CLI
// uses everywhere.
namespace biotwin::cli {

class Failure : public std::runtime_error {
 public:
  Failure(bt_status status, const std::string& message, std::string locator = {})
      : std::runtime_error(message), status_(status), locator_(std::move(locator)) {}

  bt_status status() const { return status_; }
  const std::string& locator() const { return locator_; }
  // Internal faults exit 1; anything the user can fix exits 2.
  int exit_code() const { return status_ == BT_ERR_INTERNAL ? 1 : 2; }

 private:
  bt_status status_;
  std::string locator_;
};

/// Throws Failure carrying the thread's last error, prefixed with `context`.
inline void check(bt_status status, const std::string& context = {}) {
  if (status == BT_OK) return;
  std::string locator = bt_last_error_locator();
  if (!context.empty() && locator.rfind(context, 0) != 0) {
    locator = locator.empty() ? context : context + ": " + locator;
  }
  throw Failure(status, bt_last_error(), locator);
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};

using Mesh = std::unique_ptr<bt_mesh, Deleter<bt_mesh, bt_mesh_free>>;
using MarkerMap = std::unique_ptr<bt_marker_map, Deleter<bt_marker_map, bt_marker_map_free>>;
using Extrinsics = std::unique_ptr<bt_extrinsics, Deleter<bt_extrinsics, bt_extrinsics_free>>;
using Trajectory = std::unique_ptr<bt_trajectory, Deleter<bt_trajectory, bt_trajectory_free>>;
using Chain = std::unique_ptr<bt_chain, Deleter<bt_chain, bt_chain_free>>;
using IkResult = std::unique_ptr<bt_ik_result, Deleter<bt_ik_result, bt_ik_result_free>>;

/// Copies and frees a string returned by the library.
inline std::string take(char* s) {
  std::unique_ptr<char, Deleter<char, bt_string_free>> owned(s);
  return owned ? std::string(owned.get()) : std::string();
}

inline Mesh load_mesh(const std::string& path) {
  bt_mesh* m = nullptr;
  check(bt_mesh_load(path.c_str(), &m), path);
  return Mesh(m);
}

inline MarkerMap load_marker_map(const std::string& path, std::size_t num_vertices) {
  bt_marker_map* m = nullptr;
  check(bt_marker_map_load(path.c_str(), num_vertices, &m), path);
  return MarkerMap(m);
}

inline Extrinsics load_extrinsics(const std::string& path) {
  bt_extrinsics* e = nullptr;
  check(bt_extrinsics_load(path.c_str(), &e), path);
  return Extrinsics(e);
}

inline Trajectory read_trc(const std::string& path) {
  bt_trajectory* t = nullptr;
  check(bt_trajectory_read_trc(path.c_str(), &t), path);
  return Trajectory(t);
}

inline Chain load_chain(const std::string& path) {
  bt_chain* c = nullptr;
  check(bt_chain_load(path.c_str(), &c), path);
  return Chain(c);
}

}  // namespace biotwin::cli
