#include "biotwin/config.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "biotwin/error.hpp"

namespace biotwin::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::size_t kInlineVertexCap = 1000;

// A JSON value paired with its field path, so every schema error names its location.
class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  const json& raw() const { return j_; }
  const std::string& path() const { return path_; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw Error(ErrorCode::Parse, msg, path_.empty() ? "$" : path_);
  }

  bool has(const char* key) const { return j_.is_object() && j_.contains(key) && !j_.at(key).is_null(); }

  Node operator[](const char* key) const {
    if (!j_.is_object()) fail("expected an object");
    if (!j_.contains(key)) Node(j_, child(key)).fail("missing required field");
    return Node(j_.at(key), child(key));
  }

  Node operator[](std::size_t i) const {
    return Node(j_.at(i), path_ + "[" + std::to_string(i) + "]");
  }

  std::size_t size() const {
    if (!j_.is_array()) fail("expected an array");
    return j_.size();
  }

  double number() const {
    if (!j_.is_number()) fail("expected a number");
    const double v = j_.get<double>();
    if (!std::isfinite(v)) fail("non-finite number");
    return v;
  }

  std::uint64_t count() const {
    if (!j_.is_number_integer() || j_.get<std::int64_t>() < 0) fail("expected a non-negative integer");
    return j_.get<std::uint64_t>();
  }

  std::string str() const {
    if (!j_.is_string()) fail("expected a string");
    return j_.get<std::string>();
  }

  bool boolean() const {
    if (!j_.is_boolean()) fail("expected true or false");
    return j_.get<bool>();
  }

  geom::Point3 point3() const {
    if (size() != 3) fail("expected [x, y, z]");
    return {(*this)[std::size_t{0}].number(), (*this)[1].number(), (*this)[2].number()};
  }

  geom::Matrix3 matrix3() const {
    if (size() != 3) fail("expected a 3x3 array");
    geom::Matrix3 m;
    for (std::size_t r = 0; r < 3; ++r) {
      const Node row = (*this)[r];
      if (row.size() != 3) row.fail("expected 3 columns");
      for (std::size_t c = 0; c < 3; ++c) {
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].number();
      }
    }
    return m;
  }

 private:
  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
};

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, std::string("invalid JSON: ") + e.what(),
                "byte " + std::to_string(e.byte));
  }
}

std::string resolve(const std::string& base_dir, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? rel : (fs::path(base_dir) / p).string();
}

std::vector<char> read_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw Error(ErrorCode::Io, "cannot open for reading", path);
  const auto size = static_cast<std::size_t>(f.tellg());
  std::vector<char> bytes(size);
  f.seekg(0);
  f.read(bytes.data(), static_cast<std::streamsize>(size));
  if (!f) throw Error(ErrorCode::Io, "read failed", path);
  return bytes;
}

template <typename T>
T load_le(const char* p) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, p, 4);
  if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
  T out;
  std::memcpy(&out, &bits, 4);
  return out;
}

std::vector<std::uint32_t> read_u32_file(const std::string& path, const std::string& field) {
  const auto bytes = read_binary(path);
  if (bytes.size() % 4 != 0) {
    throw Error(ErrorCode::Parse, "length " + std::to_string(bytes.size()) + " is not a multiple of 4 bytes", field);
  }
  std::vector<std::uint32_t> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = load_le<std::uint32_t>(bytes.data() + 4 * i);
  return out;
}

std::vector<twin::MeshSequence::Face> faces_from(const Node& node, const std::string& base_dir) {
  std::vector<twin::MeshSequence::Face> faces;
  if (node.raw().is_string()) {
    const auto flat = read_u32_file(resolve(base_dir, node.str()), node.path());
    if (flat.size() % 3 != 0) node.fail("face index count is not a multiple of 3");
    for (std::size_t i = 0; i < flat.size(); i += 3) faces.push_back({flat[i], flat[i + 1], flat[i + 2]});
    return faces;
  }
  for (std::size_t f = 0; f < node.size(); ++f) {
    const Node tri = node[f];
    if (tri.size() != 3) tri.fail("expected [a, b, c]");
    twin::MeshSequence::Face face{};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = tri[k].count();
      if (v > 0xffffffffu) tri[k].fail("index too large");
      face[k] = static_cast<std::uint32_t>(v);
    }
    faces.push_back(face);
  }
  return faces;
}

}  // namespace

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open for reading", path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string parent_dir(const std::string& path) {
  const auto p = fs::path(path).parent_path();
  return p.empty() ? "." : p.string();
}

twin::MeshSequence mesh_sequence_from_json(const std::string& text, const std::string& base_dir) {
  const json j = parse_json(text);
  const Node root(j, "");
  const auto frames = static_cast<std::size_t>(root["num_frames"].count());
  const auto verts = static_cast<std::size_t>(root["num_vertices"].count());
  const double rate = root["frame_rate_hz"].number();
  double unit_scale = 1.0;
  if (root.has("units")) {
    const auto units = root["units"].str();
    if (units == "mm") {
      unit_scale = 1e-3;
    } else if (units != "m") {
      root["units"].fail("expected \"m\" or \"mm\"");
    }
  }
  if (frames == 0) root["num_frames"].fail("must be >= 1");
  if (verts < 3) root["num_vertices"].fail("must be >= 3");
  if (!(rate > 0.0)) root["frame_rate_hz"].fail("must be positive");

  std::vector<geom::Point3> vertices;
  vertices.reserve(frames * verts);
  if (root.has("data")) {
    const Node data = root["data"];
    const auto path = resolve(base_dir, data.str());
    const auto bytes = read_binary(path);
    const std::size_t expected = frames * verts * 3 * 4;
    if (bytes.size() != expected) {
      data.fail("binary length " + std::to_string(bytes.size()) + " bytes, expected " +
                std::to_string(expected) + " (T*V*3*4)");
    }
    for (std::size_t i = 0; i < frames * verts; ++i) {
      const char* p = bytes.data() + 12 * i;
      geom::Point3 v(load_le<float>(p), load_le<float>(p + 4), load_le<float>(p + 8));
      if (!v.allFinite()) {
        data.fail("non-finite value at frame " + std::to_string(i / verts) + " vertex " +
                  std::to_string(i % verts));
      }
      vertices.push_back(v * unit_scale);
    }
  } else if (root.has("vertices")) {
    const Node arr = root["vertices"];
    if (verts >= kInlineVertexCap) {
      arr.fail("inline vertices are limited to fewer than " + std::to_string(kInlineVertexCap) +
               " vertices; use a binary data file");
    }
    if (arr.size() != frames) arr.fail("expected " + std::to_string(frames) + " frames");
    for (std::size_t t = 0; t < frames; ++t) {
      const Node frame = arr[t];
      if (frame.size() != verts) frame.fail("expected " + std::to_string(verts) + " vertices");
      for (std::size_t v = 0; v < verts; ++v) vertices.push_back(frame[v].point3() * unit_scale);
    }
  } else {
    root.fail("manifest needs either \"data\" or \"vertices\"");
  }

  std::vector<twin::MeshSequence::Face> faces;
  if (root.has("faces")) faces = faces_from(root["faces"], base_dir);
  return twin::MeshSequence(frames, verts, rate, std::move(vertices), std::move(faces));
}

twin::MeshSequence load_mesh_sequence(const std::string& manifest_path) {
  return mesh_sequence_from_json(read_text_file(manifest_path), parent_dir(manifest_path));
}

twin::MarkerMap marker_map_from_json(const std::string& text, const std::string& base_dir,
                                     std::optional<std::size_t> num_vertices) {
  const json j = parse_json(text);
  const Node root(j, "");
  twin::MarkerMap map;
  map.marker_set = root.has("marker_set") ? root["marker_set"].str() : std::string();
  const Node markers = root["markers"];
  for (std::size_t i = 0; i < markers.size(); ++i) {
    const Node m = markers[i];
    const auto vertex = m["vertex"].count();
    if (vertex > 0xffffffffu) m["vertex"].fail("index too large");
    map.markers.push_back({m["name"].str(), static_cast<std::uint32_t>(vertex)});
  }
  if (root.has("symmetry_pairs")) {
    const Node pairs = root["symmetry_pairs"];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const Node p = pairs[i];
      if (p.size() != 2) p.fail("expected [right, left]");
      map.symmetry_pairs.emplace_back(p[std::size_t{0}].str(), p[1].str());
    }
  }
  if (root.has("anchors")) {
    const Node anchors = root["anchors"];
    for (std::size_t i = 0; i < anchors.size(); ++i) map.anchors.push_back(anchors[i].str());
  }
  if (root.has("symmetry_table")) {
    map.symmetry_table_path = root["symmetry_table"].str();
    map.symmetry_table = read_u32_file(resolve(base_dir, map.symmetry_table_path), "symmetry_table");
  }
  twin::validate(map, num_vertices);
  return map;
}

twin::MarkerMap load_marker_map(const std::string& path, std::optional<std::size_t> num_vertices) {
  return marker_map_from_json(read_text_file(path), parent_dir(path), num_vertices);
}

std::string marker_map_to_json(const twin::MarkerMap& map) {
  json j;
  j["marker_set"] = map.marker_set;
  j["markers"] = json::array();
  for (const auto& m : map.markers) j["markers"].push_back({{"name", m.name}, {"vertex", m.vertex}});
  j["symmetry_pairs"] = json::array();
  for (const auto& [r, l] : map.symmetry_pairs) j["symmetry_pairs"].push_back({r, l});
  j["anchors"] = map.anchors;
  if (!map.symmetry_table_path.empty()) j["symmetry_table"] = map.symmetry_table_path;
  return j.dump(2) + "\n";
}

void save_marker_map(const twin::MarkerMap& map, const std::string& path) {
  const std::string body = marker_map_to_json(map);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot open for writing", tmp);
    f.write(body.data(), static_cast<std::streamsize>(body.size()));
    f.flush();
    if (!f) throw Error(ErrorCode::Io, "write failed", tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::Io, "rename failed", path);
  }
}

std::string marker_set_json(const twin::MarkerMap& map) {
  json j;
  j["marker_set"] = map.marker_set;
  j["markers"] = json::array();
  for (const auto& m : map.markers) j["markers"].push_back(m.name);
  j["anchors"] = map.anchors;
  j["symmetry_pairs"] = json::array();
  for (const auto& [r, l] : map.symmetry_pairs) j["symmetry_pairs"].push_back({r, l});
  j["has_symmetry_table"] = !map.symmetry_table.empty();
  return j.dump();
}

std::vector<twin::MarkerBinding> bindings_from_json(const std::string& text) {
  const json j = parse_json(text);
  const Node entries = Node(j, "")["entries"];
  std::vector<twin::MarkerBinding> out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Node e = entries[i];
    const auto vertex = e["vertex"].count();
    if (vertex > 0xffffffffu) e["vertex"].fail("index too large");
    out.push_back({e["name"].str(), static_cast<std::uint32_t>(vertex)});
  }
  return out;
}

std::string bindings_to_json(const std::vector<twin::MarkerBinding>& entries) {
  json j;
  j["entries"] = json::array();
  for (const auto& e : entries) j["entries"].push_back({{"name", e.name}, {"vertex", e.vertex}});
  return j.dump();
}

twin::CameraExtrinsics extrinsics_from_json(const std::string& text) {
  const json j = parse_json(text);
  const Node root(j, "");
  twin::CameraExtrinsics ext;
  ext.rotation = root["R"].matrix3();
  if (!geom::is_rotation(ext.rotation)) root["R"].fail("not a proper rotation (R^T R = I, det = +1)");
  ext.translation_m = root["t_mm"].point3() / 1000.0;
  ext.subject_height_m = root["subject_height_m"].number();
  if (!(ext.subject_height_m > 0.0)) root["subject_height_m"].fail("must be positive");
  if (root.has("predicted_height_m")) {
    ext.predicted_height_m = root["predicted_height_m"].number();
    if (!(*ext.predicted_height_m > 0.0)) root["predicted_height_m"].fail("must be positive");
  }
  return ext;
}

twin::CameraExtrinsics load_extrinsics(const std::string& path) {
  try {
    return extrinsics_from_json(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), e.message(), path + ":" + e.locator());
  }
}

ik::KinematicChain chain_from_json(const std::string& text) {
  const json j = parse_json(text);
  const Node root(j, "");
  std::vector<ik::Segment> segments;
  const Node segs = root["segments"];
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Node s = segs[i];
    ik::Segment seg;
    seg.name = s["name"].str();
    if (s.has("parent")) seg.parent = static_cast<std::size_t>(s["parent"].count());
    if (s.has("offset")) seg.offset = s["offset"].point3();
    if (s.has("rotation")) seg.orientation = s["rotation"].matrix3();
    if (s.has("dofs")) {
      const Node dofs = s["dofs"];
      for (std::size_t d = 0; d < dofs.size(); ++d) {
        const Node dn = dofs[d];
        ik::Dof dof;
        dof.axis = dn["axis"].point3();
        if (dn.has("name")) dof.name = dn["name"].str();
        if (dn.has("type")) {
          const auto type = dn["type"].str();
          if (type == "translation") {
            dof.type = ik::DofType::Translation;
          } else if (type != "rotation") {
            dn["type"].fail("expected \"rotation\" or \"translation\"");
          }
        }
        if (dn.has("limits")) {
          const Node lim = dn["limits"];
          if (lim.size() != 2) lim.fail("expected [lo, hi]");
          dof.limits = std::make_pair(lim[std::size_t{0}].number(), lim[1].number());
        }
        seg.dofs.push_back(std::move(dof));
      }
    }
    segments.push_back(std::move(seg));
  }
  std::vector<ik::MarkerAttachment> markers;
  if (root.has("markers")) {
    const Node ms = root["markers"];
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const Node m = ms[i];
      ik::MarkerAttachment a;
      a.name = m["name"].str();
      const Node seg = m["segment"];
      if (seg.raw().is_string()) {
        const auto name = seg.str();
        std::size_t k = 0;
        while (k < segments.size() && segments[k].name != name) ++k;
        if (k == segments.size()) seg.fail("unknown segment '" + name + "'");
        a.segment = k;
      } else {
        a.segment = static_cast<std::size_t>(seg.count());
      }
      if (m.has("offset")) a.offset = m["offset"].point3();
      markers.push_back(std::move(a));
    }
  }
  return ik::KinematicChain(std::move(segments), std::move(markers));
}

ik::KinematicChain load_chain(const std::string& path) {
  try {
    return chain_from_json(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), e.message(), path + ":" + e.locator());
  }
}

ik::IkSettings ik_settings_from_json(const std::string& text, ik::IkSettings base) {
  const json j = parse_json(text);
  const Node root(j, "");
  ik::IkSettings s = std::move(base);
  if (root.has("max_iterations")) s.max_iterations = static_cast<int>(root["max_iterations"].count());
  if (root.has("cost_tolerance")) s.cost_tolerance = root["cost_tolerance"].number();
  if (root.has("initial_damping")) s.initial_damping = root["initial_damping"].number();
  if (root.has("damping_increase")) s.damping_increase = root["damping_increase"].number();
  if (root.has("damping_decrease")) s.damping_decrease = root["damping_decrease"].number();
  if (root.has("warm_start")) s.warm_start = root["warm_start"].boolean();
  if (root.has("marker_weights")) {
    const Node w = root["marker_weights"];
    if (!w.raw().is_object()) w.fail("expected an object of name -> weight");
    for (const auto& [name, value] : w.raw().items()) {
      s.marker_weights[name] = Node(value, w.path() + "." + name).number();
    }
  }
  ik::validate(s);
  return s;
}

std::vector<prompt::Detection> detections_from_json(const std::string& text) {
  const json j = parse_json(text);
  const Node dets = Node(j, "")["detections"];
  std::vector<prompt::Detection> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const Node d = dets[i];
    const Node box = d["box"];
    if (box.size() != 4) box.fail("expected [x_min, y_min, x_max, y_max]");
    prompt::Detection det;
    det.box = {box[std::size_t{0}].number(), box[1].number(), box[2].number(), box[3].number()};
    if (!(det.box.x_min < det.box.x_max && det.box.y_min < det.box.y_max)) box.fail("inverted or empty box");
    det.score = d["score"].number();
    if (!(det.score >= 0.0 && det.score <= 1.0)) d["score"].fail("score must lie in [0, 1]");
    out.push_back(det);
  }
  return out;
}

std::string prompts_to_json(const std::vector<prompt::VisualPrompt>& prompts) {
  json j;
  j["prompts"] = json::array();
  for (const auto& p : prompts) {
    j["prompts"].push_back({{"box", {p.box.x_min, p.box.y_min, p.box.x_max, p.box.y_max}},
                            {"box_label", p.box_label},
                            {"point", {p.point.x, p.point.y}},
                            {"point_label", p.point_label}});
  }
  return j.dump(2) + "\n";
}

std::string mesh_frame_to_json(const twin::MeshSequence& mesh, std::size_t frame) {
  json j;
  j["vertices"] = json::array();
  for (const auto& v : mesh.frame(frame)) j["vertices"].push_back({v.x(), v.y(), v.z()});
  j["faces"] = json::array();
  for (const auto& f : mesh.faces()) j["faces"].push_back({f[0], f[1], f[2]});
  return j.dump();
}

}  // namespace biotwin::io
