// biotwin command-line driver. Every stage reads and writes files so stages can
// be run one at a time or chained by `pipeline`.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "httplib.h"
#include "json.hpp"

#include "handles.hpp"
#include "serve.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace biotwin::cli;

namespace {

struct Flags {
  std::string config;
  std::string mesh, map, extrinsics, chain, trc, detections, out, output_dir;
  std::optional<double> threshold;
  bool multi = false;
  std::optional<std::size_t> reference_frame;
  std::optional<int> max_iterations;
  bool no_warm_start = false;
  bool json_summary = false;
  bool dry_run = false;
  bool verbose = false;
  std::string host = "127.0.0.1";
  int port = 8765;
};

// Flags merged over the config file. Config paths are relative to the config
// file; flag paths are relative to the working directory.
struct Plan {
  std::string mesh, map, extrinsics, chain, trc, detections, output_dir = ".";
  double threshold = 0.5;
  bool multi = false;
  std::size_t reference_frame = 0;
  bt_ik_settings ik{};
  std::string marker_weights;
};

[[noreturn]] void input_error(const std::string& msg, const std::string& where = {}) {
  throw Failure(BT_ERR_INVALID_ARGUMENT, msg, where);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure(BT_ERR_IO, "cannot open for reading", path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(text.data(), static_cast<std::streamsize>(text.size()))) {
    throw Failure(BT_ERR_IO, "cannot write", path);
  }
}

Plan make_plan(const Flags& flags) {
  Plan plan;
  bt_ik_settings_default(&plan.ik);
  if (!flags.config.empty()) {
    json cfg;
    try {
      cfg = json::parse(read_file(flags.config));
    } catch (const json::exception& e) {
      throw Failure(BT_ERR_PARSE, e.what(), flags.config);
    }
    if (!cfg.is_object()) throw Failure(BT_ERR_PARSE, "expected a JSON object", flags.config);
    const fs::path base = fs::path(flags.config).parent_path();
    const auto path_of = [&](const char* key, std::string& dst) {
      if (!cfg.contains(key) || cfg[key].is_null()) return;
      if (!cfg[key].is_string()) throw Failure(BT_ERR_PARSE, "expected a path string", flags.config + ": " + key);
      const fs::path p(cfg[key].get<std::string>());
      dst = p.is_absolute() ? p.string() : (base / p).lexically_normal().string();
    };
    path_of("mesh", plan.mesh);
    path_of("marker_map", plan.map);
    path_of("extrinsics", plan.extrinsics);
    path_of("chain", plan.chain);
    path_of("trc", plan.trc);
    path_of("detections", plan.detections);
    path_of("output_dir", plan.output_dir);
    try {
      if (cfg.contains("reference_frame")) plan.reference_frame = cfg["reference_frame"].get<std::size_t>();
      if (cfg.contains("detection")) {
        const auto& d = cfg["detection"];
        plan.threshold = d.value("confidence_threshold", plan.threshold);
        plan.multi = d.value("multi_person", plan.multi);
      }
    } catch (const json::exception& e) {
      throw Failure(BT_ERR_PARSE, e.what(), flags.config);
    }
    if (cfg.contains("ik")) {
      check(bt_ik_settings_parse(cfg["ik"].dump().c_str(), &plan.ik), flags.config + ": ik");
      if (cfg["ik"].contains("marker_weights")) plan.marker_weights = cfg["ik"]["marker_weights"].dump();
    }
  }
  const auto override_path = [](const std::string& flag, std::string& dst) {
    if (!flag.empty()) dst = flag;
  };
  override_path(flags.mesh, plan.mesh);
  override_path(flags.map, plan.map);
  override_path(flags.extrinsics, plan.extrinsics);
  override_path(flags.chain, plan.chain);
  override_path(flags.trc, plan.trc);
  override_path(flags.detections, plan.detections);
  override_path(flags.output_dir, plan.output_dir);
  if (flags.threshold) plan.threshold = *flags.threshold;
  if (flags.multi) plan.multi = true;
  if (flags.reference_frame) plan.reference_frame = *flags.reference_frame;
  if (flags.max_iterations) plan.ik.max_iterations = *flags.max_iterations;
  if (flags.no_warm_start) plan.ik.warm_start = 0;
  return plan;
}

const std::string& require(const std::string& value, const char* what) {
  if (value.empty()) input_error(std::string("no ") + what + " given (flag or config)");
  return value;
}

std::string output_path(const Flags& flags, const Plan& plan, const char* default_name) {
  if (!flags.out.empty()) return flags.out;
  return (fs::path(plan.output_dir) / default_name).string();
}

void ensure_parent(const std::string& path) {
  const auto dir = fs::path(path).parent_path();
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Failure(BT_ERR_IO, "cannot create directory: " + ec.message(), dir.string());
}

void log(const std::string& line) { std::cerr << line << "\n"; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void emit_summary(const Flags& flags, const json& summary) {
  if (flags.json_summary) std::cout << summary.dump() << "\n";
}

// ---- subcommands ----------------------------------------------------------

int cmd_prompt(const Flags& flags) {
  const Plan plan = make_plan(flags);
  const auto& det_path = require(plan.detections, "detections file");
  const std::string text = read_file(det_path);
  char* prompts = nullptr;
  std::size_t count = 0;
  check(bt_prompts_from_detections(text.c_str(), plan.threshold, plan.multi ? 1 : 0, &prompts, &count),
        det_path);
  const std::string body = take(prompts) + "\n";
  const auto out = output_path(flags, plan, "prompts.json");
  if (flags.dry_run) {
    log("dry run: " + std::to_string(count) + " prompt(s) would be written to " + out);
  } else {
    ensure_parent(out);
    write_file(out, body);
    log("wrote " + std::to_string(count) + " prompt(s) to " + out);
  }
  emit_summary(flags, {{"prompts", count}, {"output", out}, {"threshold", plan.threshold}});
  return 0;
}

struct ConvertInputs {
  Mesh mesh;
  MarkerMap map;
  Extrinsics ext;
};

ConvertInputs load_convert_inputs(const Plan& plan) {
  auto mesh = load_mesh(require(plan.mesh, "mesh manifest"));
  auto map = load_marker_map(require(plan.map, "marker map"), bt_mesh_num_vertices(mesh.get()));
  auto ext = load_extrinsics(require(plan.extrinsics, "extrinsics"));
  return {std::move(mesh), std::move(map), std::move(ext)};
}

json run_convert(const Plan& plan, ConvertInputs& in, const std::string& out) {
  bt_trajectory* raw = nullptr;
  bt_twin_summary s{};
  check(bt_build_twin(in.mesh.get(), in.map.get(), in.ext.get(), plan.reference_frame, &raw, &s), plan.map);
  Trajectory traj(raw);
  ensure_parent(out);
  check(bt_trajectory_write_trc(traj.get(), out.c_str()), out);
  log("height scale s_height = " + fmt("%.9g", s.height_scale) + " (predicted height " +
      fmt("%.6f", s.predicted_height_m) + " m)");
  log("ground offset dy = " + fmt("%.9g", s.ground_offset_m) + " m");
  log("wrote " + std::to_string(s.num_frames) + " frames x " + std::to_string(s.num_markers) +
      " markers to " + out);
  return {{"trc", out},
          {"frames", s.num_frames},
          {"markers", s.num_markers},
          {"height_scale", s.height_scale},
          {"predicted_height_m", s.predicted_height_m},
          {"ground_offset_m", s.ground_offset_m}};
}

json run_ik(const Flags& flags, const Plan& plan, const bt_chain* chain, const std::string& trc,
            const std::string& out) {
  const auto traj = read_trc(trc);
  bt_ik_result* raw = nullptr;
  bt_ik_summary s{};
  bt_ik_settings settings = plan.ik;
  settings.marker_weights_json = plan.marker_weights.empty() ? nullptr : plan.marker_weights.c_str();
  check(bt_solve_ik(chain, traj.get(), &settings, &raw, &s), trc);
  IkResult result(raw);
  for (std::size_t i = 0; i < s.num_warnings; ++i) log(std::string("warning: ") + bt_ik_result_warning(result.get(), i));
  if (flags.verbose) {
    for (std::size_t f = 0; f < s.num_frames; ++f) {
      log("frame " + std::to_string(f + 1) + " residual " + fmt("%.3e", bt_ik_result_frame_rms(result.get(), f)) + " m");
    }
  }
  ensure_parent(out);
  const auto name = fs::path(out).stem().string();
  check(bt_ik_result_write_motion(result.get(), name.c_str(), out.c_str()), out);
  log("ik: " + std::to_string(s.num_frames) + " frames, " + std::to_string(s.num_dofs) +
      " coordinates, mean residual " + fmt("%.3e", s.mean_rms_m) + " m, max " + fmt("%.3e", s.max_rms_m) +
      " m, " + std::to_string(s.total_iterations) + " iterations");
  log("wrote " + out);
  return {{"motion", out},
          {"frames", s.num_frames},
          {"coordinates", s.num_dofs},
          {"mean_residual_m", s.mean_rms_m},
          {"max_residual_m", s.max_rms_m},
          {"iterations", s.total_iterations},
          {"warnings", s.num_warnings}};
}

int cmd_convert(const Flags& flags) {
  const Plan plan = make_plan(flags);
  auto in = load_convert_inputs(plan);
  const auto out = output_path(flags, plan, "markers.trc");
  if (flags.dry_run) {
    log("dry run: inputs valid");
    emit_summary(flags, {{"dry_run", true}});
    return 0;
  }
  emit_summary(flags, run_convert(plan, in, out));
  return 0;
}

int cmd_ik(const Flags& flags) {
  const Plan plan = make_plan(flags);
  const auto chain = load_chain(require(plan.chain, "chain"));
  const auto trc = plan.trc.empty() ? (fs::path(plan.output_dir) / "markers.trc").string() : plan.trc;
  const auto out = output_path(flags, plan, "ik.mot");
  if (flags.dry_run) {
    read_trc(trc);
    log("dry run: inputs valid");
    emit_summary(flags, {{"dry_run", true}});
    return 0;
  }
  emit_summary(flags, run_ik(flags, plan, chain.get(), trc, out));
  return 0;
}

int cmd_pipeline(const Flags& flags) {
  if (!flags.out.empty()) input_error("pipeline writes several files; use --output-dir instead of --out");
  const Plan plan = make_plan(flags);
  auto in = load_convert_inputs(plan);
  const auto chain = load_chain(require(plan.chain, "chain"));
  if (flags.dry_run) {
    log("dry run: inputs valid");
    emit_summary(flags, {{"dry_run", true}});
    return 0;
  }
  const auto trc = (fs::path(plan.output_dir) / "markers.trc").string();
  const auto mot = (fs::path(plan.output_dir) / "ik.mot").string();
  json summary;
  summary["convert"] = run_convert(plan, in, trc);
  // IK consumes the file just written, exactly as a separate `ik` run would.
  summary["ik"] = run_ik(flags, plan, chain.get(), trc, mot);
  emit_summary(flags, summary);
  return 0;
}

int cmd_validate_trc(const Flags& flags, const std::string& positional) {
  const Plan plan = make_plan(flags);
  const auto& path = require(positional.empty() ? plan.trc : positional, "TRC file");
  const auto traj = read_trc(path);
  const auto frames = bt_trajectory_num_frames(traj.get());
  const auto markers = bt_trajectory_num_markers(traj.get());
  const double rate = bt_trajectory_frame_rate(traj.get());
  log("ok: " + path + ": " + std::to_string(frames) + " frames, " + std::to_string(markers) + " markers, " +
      fmt("%g", rate) + " Hz, units " + bt_trajectory_units(traj.get()));
  emit_summary(flags, {{"trc", path},
                       {"frames", frames},
                       {"markers", markers},
                       {"frame_rate_hz", rate},
                       {"units", bt_trajectory_units(traj.get())}});
  return 0;
}

int cmd_serve(const Flags& flags) {
  const Plan plan = make_plan(flags);
  MappingService service(require(plan.mesh, "mesh manifest"), require(plan.map, "marker map"),
                         plan.reference_frame);
  if (flags.dry_run) {
    log("dry run: inputs valid");
    return 0;
  }
  httplib::Server server;
  // Default options add SO_REUSEPORT, which would let a second instance share the port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  service.mount(server);
  if (!server.bind_to_port(flags.host, flags.port)) {
    throw Failure(BT_ERR_IO, "cannot bind (port busy?)", flags.host + ":" + std::to_string(flags.port));
  }
  log("serving " + plan.map + " on http://" + flags.host + ":" + std::to_string(flags.port));
  return server.listen_after_bind() ? 0 : 1;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "pipeline config JSON")->check(CLI::ExistingFile);
  sub->add_flag("--json-summary", f.json_summary, "print a JSON summary on stdout");
  sub->add_flag("--dry-run", f.dry_run, "validate inputs without writing outputs");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"biotwin: video-derived body meshes to markers and joint angles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(bt_version()));
  Flags f;
  std::string positional_trc;

  auto* prompt = app.add_subcommand("prompt", "detections JSON -> visual prompts JSON");
  add_common(prompt, f);
  prompt->add_option("--detections", f.detections, "detections JSON");
  prompt->add_option("--threshold", f.threshold, "confidence threshold (strict)");
  prompt->add_flag("--multi", f.multi, "one prompt per kept detection");
  prompt->add_option("--out", f.out, "output file (default <output-dir>/prompts.json)");
  prompt->add_option("--output-dir", f.output_dir, "output directory");

  auto* convert = app.add_subcommand("convert", "mesh sequence + marker map + extrinsics -> TRC");
  add_common(convert, f);
  convert->add_option("--mesh", f.mesh, "mesh manifest JSON");
  convert->add_option("--map", f.map, "marker map JSON");
  convert->add_option("--extrinsics", f.extrinsics, "camera extrinsics JSON");
  convert->add_option("--reference-frame", f.reference_frame, "frame used for the height estimate");
  convert->add_option("--out", f.out, "output file (default <output-dir>/markers.trc)");
  convert->add_option("--output-dir", f.output_dir, "output directory");

  auto* ik = app.add_subcommand("ik", "TRC + kinematic chain -> motion file");
  add_common(ik, f);
  ik->add_option("--trc", f.trc, "marker trajectory (default <output-dir>/markers.trc)");
  ik->add_option("--chain", f.chain, "kinematic chain JSON");
  ik->add_option("--max-iterations", f.max_iterations, "iteration cap per frame")->check(CLI::PositiveNumber);
  ik->add_flag("--no-warm-start", f.no_warm_start, "start every frame from the neutral pose");
  ik->add_flag("--verbose", f.verbose, "log the residual of every frame");
  ik->add_option("--out", f.out, "output file (default <output-dir>/ik.mot)");
  ik->add_option("--output-dir", f.output_dir, "output directory");

  auto* pipeline = app.add_subcommand("pipeline", "convert then ik");
  add_common(pipeline, f);
  pipeline->add_option("--mesh", f.mesh, "mesh manifest JSON");
  pipeline->add_option("--map", f.map, "marker map JSON");
  pipeline->add_option("--extrinsics", f.extrinsics, "camera extrinsics JSON");
  pipeline->add_option("--chain", f.chain, "kinematic chain JSON");
  pipeline->add_option("--reference-frame", f.reference_frame, "frame used for the height estimate");
  pipeline->add_option("--max-iterations", f.max_iterations, "iteration cap per frame")->check(CLI::PositiveNumber);
  pipeline->add_flag("--no-warm-start", f.no_warm_start, "start every frame from the neutral pose");
  pipeline->add_flag("--verbose", f.verbose, "log the residual of every frame");
  pipeline->add_option("--output-dir", f.output_dir, "output directory (markers.trc, ik.mot)");
  pipeline->add_option("--out", f.out)->group("");

  auto* serve = app.add_subcommand("serve", "HTTP endpoint for the marker picker");
  add_common(serve, f);
  serve->add_option("--mesh", f.mesh, "mesh manifest JSON");
  serve->add_option("--map", f.map, "marker map JSON (rewritten on save)");
  serve->add_option("--reference-frame", f.reference_frame, "frame to serve");
  serve->add_option("--host", f.host, "bind address")->capture_default_str();
  serve->add_option("--port", f.port, "TCP port")->capture_default_str();

  auto* validate = app.add_subcommand("validate-trc", "parse a TRC file and report its shape");
  add_common(validate, f);
  validate->add_option("file", positional_trc, "TRC file");
  validate->add_option("--trc", f.trc, "TRC file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*prompt) return cmd_prompt(f);
    if (*convert) return cmd_convert(f);
    if (*ik) return cmd_ik(f);
    if (*pipeline) return cmd_pipeline(f);
    if (*serve) return cmd_serve(f);
    if (*validate) return cmd_validate_trc(f, positional_trc);
  } catch (const Failure& e) {
    std::cerr << "error: " << (e.locator().empty() ? "" : e.locator() + ": ") << e.what() << " ["
              << bt_status_name(e.status()) << "]\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
