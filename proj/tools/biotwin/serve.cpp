#include "serve.hpp"

#include <filesystem>
#include <mutex>

#include "httplib.h"
#include "json.hpp"

namespace biotwin::cli {

namespace {

constexpr const char* kJson = "application/json";

std::string error_body(const Failure& f) {
  return nlohmann::json{{"error", f.what()}, {"field", f.locator().empty() ? "$" : f.locator()}}.dump();
}

}  // namespace

MappingService::MappingService(std::string mesh_path, std::string map_path, std::size_t reference_frame)
    : map_path_(std::move(map_path)) {
  const auto mesh = load_mesh(mesh_path);
  num_vertices_ = bt_mesh_num_vertices(mesh.get());
  char* frame = nullptr;
  check(bt_mesh_frame_json(mesh.get(), reference_frame, &frame), mesh_path);
  mesh_json_ = take(frame);
  map_ = load_marker_map(map_path_, num_vertices_);
  const auto dir = std::filesystem::path(map_path_).parent_path();
  map_dir_ = dir.empty() ? "." : dir.string();
}

std::string MappingService::markerset_json() const {
  std::shared_lock lock(mutex_);
  char* out = nullptr;
  check(bt_marker_map_markerset_json(map_.get(), &out));
  return take(out);
}

std::string MappingService::mapping_json() const {
  std::shared_lock lock(mutex_);
  char* out = nullptr;
  check(bt_marker_map_to_json(map_.get(), &out));
  return take(out);
}

MappingService::Reply MappingService::put_mapping(const std::string& body) {
  std::unique_lock lock(mutex_);
  bt_marker_map* parsed = nullptr;
  try {
    check(bt_marker_map_parse(body.c_str(), map_dir_.c_str(), num_vertices_, &parsed));
  } catch (const Failure& f) {
    return {422, error_body(f)};
  }
  MarkerMap next(parsed);
  try {
    check(bt_marker_map_save(next.get(), map_path_.c_str()), map_path_);
  } catch (const Failure& f) {
    return {500, error_body(f)};
  }
  map_ = std::move(next);
  char* out = nullptr;
  check(bt_marker_map_to_json(map_.get(), &out));
  return {200, take(out)};
}

MappingService::Reply MappingService::mirror(const std::string& body) const {
  std::shared_lock lock(mutex_);
  char* out = nullptr;
  try {
    check(bt_marker_map_mirror(map_.get(), body.c_str(), &out));
  } catch (const Failure& f) {
    return {422, error_body(f)};
  }
  return {200, take(out)};
}

void MappingService::mount(httplib::Server& server) {
  server.Get("/api/mesh", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(mesh_json_, kJson);
  });
  server.Get("/api/markerset", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(markerset_json(), kJson);
  });
  server.Get("/api/mapping", [this](const httplib::Request&, httplib::Response& res) {
    res.set_content(mapping_json(), kJson);
  });
  server.Put("/api/mapping", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = put_mapping(req.body);
    res.status = reply.status;
    res.set_content(reply.body, kJson);
  });
  server.Post("/api/mirror", [this](const httplib::Request& req, httplib::Response& res) {
    const auto reply = mirror(req.body);
    res.status = reply.status;
    res.set_content(reply.body, kJson);
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", what}, {"field", "$"}}.dump(), kJson);
  });
}

}  // namespace biotwin::cli
