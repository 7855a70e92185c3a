// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <sstream>

#include "biotwin/config.hpp"
#include "biotwin/error.hpp"
#include "biotwin/geom.hpp"
#include "biotwin/ik.hpp"
#include "biotwin/prompt.hpp"
#include "biotwin/trc.hpp"
#include "biotwin/twin.hpp"
#include "support/testing.hpp"
#include "synth.hpp"

using namespace biotwin;
namespace fs = std::filesystem;
using geom::Matrix3;
using geom::Point3;
using testing::Rng;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("'") + BIOTWIN_CLI + "' " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// ---------------------------------------------------------------------------

Outcome procrustes_recovery() {
  Outcome o;
  Rng rng(2024);
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::normal_distribution<double> noise(0.0, 0.02);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Point3> src;
    for (int i = 0; i < 7; ++i) src.push_back(testing::random_point(rng));
    const geom::Similarity truth{testing::uniform(rng, 0.5, 2.0), testing::random_rotation(rng),
                                 testing::random_point(rng)};
    const auto dst = geom::apply_transform(truth, src);
    geom::Similarity fit;
    try {
      fit = geom::umeyama_fit(src, dst);
    } catch (const Error& e) {
      o.require(false, std::string("fit threw: ") + e.what());
      continue;
    }
    const double err = std::max({std::abs(fit.scale - truth.scale),
                                 (fit.rotation - truth.rotation).cwiseAbs().maxCoeff(),
                                 (fit.translation - truth.translation).cwiseAbs().maxCoeff()});
    worst = std::max(worst, err);
    o.require(err <= 1e-9, "trial " + std::to_string(trial) + " parameter error " + num(err));

    // Optimality on the exact targets and on a noisy copy.
    auto noisy = dst;
    for (auto& p : noisy) p += Point3(noise(rng), noise(rng), noise(rng));
    const auto noisy_fit = geom::umeyama_fit(src, noisy);
    const double best_exact = geom::alignment_cost(fit, src, dst);
    const double best_noisy = geom::alignment_cost(noisy_fit, src, noisy);
    for (int c = 0; c < 100; ++c) {
      const geom::Similarity cand{testing::uniform(rng, 0.5, 2.0), testing::random_rotation(rng),
                                  testing::random_point(rng)};
      o.require(best_exact <= geom::alignment_cost(cand, src, dst), "random candidate beat the fit");
      o.require(best_noisy <= geom::alignment_cost(cand, src, noisy), "random candidate beat the noisy fit");
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 5.0, "runtime " + num(secs) + " s");
  if (o.pass) o.detail = "200 trials, max parameter error " + num(worst) + ", " + num(secs) + " s";
  return o;
}

Outcome equation_fidelity() {
  Outcome o;
  Rng rng(7);
  double worst_direct = 0.0, worst_inverse = 0.0;
  for (int i = 0; i < 1000; ++i) {
    twin::CameraExtrinsics ext;
    ext.rotation = testing::random_rotation(rng);
    ext.translation_m = testing::random_point(rng, -3.0, 3.0);
    ext.subject_height_m = testing::uniform(rng, 1.2, 2.0);
    ext.predicted_height_m = testing::uniform(rng, 0.5, 2.5);
    twin::MarkerTrajectory traj;
    traj.frame_rate_hz = 30.0;
    traj.marker_names = {"P"};
    traj.positions = {testing::random_point(rng, -2.0, 2.0)};
    const Point3 world = twin::camera_to_world(traj, ext).positions[0];

    // p_world = R^T (p_cam * s_height - t), written out component by component.
    const double s = ext.subject_height_m / *ext.predicted_height_m;
    const Point3& p = traj.positions[0];
    Point3 direct;
    for (int r = 0; r < 3; ++r) {
      double acc = 0.0;
      for (int c = 0; c < 3; ++c) acc += ext.rotation(c, r) * (p[c] * s - ext.translation_m[c]);
      direct[r] = acc;
    }
    worst_direct = std::max(worst_direct, (world - direct).cwiseAbs().maxCoeff());
    const Point3 back = (ext.rotation * world + ext.translation_m) / s;
    worst_inverse = std::max(worst_inverse, (back - p).cwiseAbs().maxCoeff());
  }
  o.require(worst_direct <= 1e-12, "direct evaluation differs by " + num(worst_direct));
  o.require(worst_inverse <= 1e-12, "inverse round trip differs by " + num(worst_inverse));
  if (o.pass) o.detail = "1000 inputs, max |diff| " + num(worst_direct) + ", round trip " + num(worst_inverse);
  return o;
}

Outcome ground_contract() {
  Outcome o;
  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const double lo = testing::uniform(rng, -50.0, 5.0);
    auto traj = testing::random_trajectory(rng, 1 + rng() % 40, 1 + rng() % 20, lo, lo + testing::uniform(rng, 0.1, 10.0));
    const auto g = twin::ground_offset(traj);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& p : g.trajectory.positions) m = std::min(m, p.y());
    worst = std::max(worst, std::abs(m));
    o.require(std::abs(m) <= 1e-12, "min y after offset " + num(m));
    const auto again = twin::ground_offset(g.trajectory);
    o.require(again.offset == 0.0 && again.trajectory.positions == g.trajectory.positions,
              "second application changed the trajectory");
  }
  if (o.pass) o.detail = "500 trajectories, max |min y| " + num(worst) + ", idempotent";
  return o;
}

Outcome trc_round_trip() {
  Outcome o;
  Rng rng(13);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto traj = testing::random_trajectory(rng, 1 + rng() % 50, 1 + rng() % 25, -5.0, 5.0);
    if (i % 4 == 0) traj.units = twin::Units::Millimeters;
    std::ostringstream a, b;
    io::write_trc(traj, a);
    io::write_trc(traj, b);
    o.require(a.str() == b.str(), "repeated writes differ");
    std::istringstream in(a.str());
    const auto back = io::parse_trc(in);
    o.require(back.marker_names == traj.marker_names && back.positions.size() == traj.positions.size() &&
                  back.frame_rate_hz == traj.frame_rate_hz && back.units == traj.units,
              "shape or header changed");
    if (back.positions.size() != traj.positions.size()) continue;
    for (std::size_t k = 0; k < traj.positions.size(); ++k) {
      worst = std::max(worst, (back.positions[k] - traj.positions[k]).cwiseAbs().maxCoeff());
    }
  }
  o.require(worst <= 1e-5, "coordinate error " + num(worst));
  if (o.pass) o.detail = "100 trajectories, max coordinate error " + num(worst) + ", writes byte-identical";
  return o;
}

Outcome jacobian_correctness() {
  Outcome o;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    const std::size_t n = 1 + seed % 8;
    const auto chain = testing::random_chain(rng, n);
    const auto q = testing::random_q(rng, n, 2.0);
    const auto J = ik::marker_jacobian(chain, q);
    Eigen::MatrixXd fd(J.rows(), J.cols());
    const double h = 1e-6;
    for (Eigen::Index k = 0; k < q.size(); ++k) {
      Eigen::VectorXd qp = q, qm = q;
      qp[k] += h;
      qm[k] -= h;
      const auto pp = ik::marker_positions(chain, qp);
      const auto pm = ik::marker_positions(chain, qm);
      for (std::size_t m = 0; m < pp.size(); ++m) {
        fd.block<3, 1>(static_cast<Eigen::Index>(3 * m), k) = (pp[m] - pm[m]) / (2.0 * h);
      }
    }
    const double rel = (J - fd).norm() / fd.norm();
    worst = std::max(worst, rel);
    o.require(rel < 1e-5, "chain " + std::to_string(seed) + " relative error " + num(rel));
  }
  if (o.pass) o.detail = "20 chains (1-8 DOF), max relative error " + num(worst);
  return o;
}

Outcome ik_recovery() {
  Outcome o;
  const auto t0 = Clock::now();
  const auto dir = testing::scratch("acceptance_ik");
  double worst_angle = 0.0, worst_rms = 0.0;
  for (const std::string name : {"two_link_arm", "lower_limb"}) {
    const auto chain_path = std::string(BIOTWIN_DATA_DIR "/chains/") + name + ".json";
    const auto chain = io::load_chain(chain_path);
    demo::MotionSpec spec;
    spec.frames = 100;
    spec.seed = 42;
    const Eigen::MatrixXd q = demo::joint_trajectories(chain, spec);

    // FK markers go through a millimeter TRC, the file the IK stage consumes.
    auto traj = demo::marker_trajectory(chain, q, spec.frame_rate_hz);
    traj.units = twin::Units::Millimeters;
    for (auto& p : traj.positions) p *= 1000.0;
    const auto trc = (dir / (name + ".trc")).string();
    io::write_trc_file(traj, trc);

    const auto result = ik::solve_ik_sequence(chain, io::read_trc_file(trc));
    for (std::size_t t = 0; t < result.frames.size(); ++t) {
      const auto& f = result.frames[t];
      worst_rms = std::max(worst_rms, f.rms);
      o.require(f.rms < 1e-6, name + " frame " + std::to_string(t) + " residual " + num(f.rms));
      for (std::size_t k = 1; k < f.cost_history.size(); ++k) {
        o.require(f.cost_history[k] <= f.cost_history[k - 1], name + " accepted cost increased");
      }
    }

    const auto mot = (dir / (name + ".mot")).string();
    o.require(run_cli("ik --trc '" + trc + "' --chain '" + chain_path + "' --out '" + mot + "'") == 0,
              name + ": ik subcommand failed");
    const auto motion = io::read_motion_file(mot);
    o.require(motion.num_rows() == spec.frames && motion.num_columns() == chain.num_dofs() + 1,
              name + ": motion file shape");
    if (motion.num_rows() != spec.frames) continue;
    for (std::size_t t = 0; t < spec.frames; ++t) {
      for (std::size_t k = 0; k < chain.num_dofs(); ++k) {
        double got = motion.at(t, k + 1);
        if (chain.dof(k).type == ik::DofType::Rotation) got *= std::numbers::pi / 180.0;
        const double err = std::abs(got - q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k)));
        worst_angle = std::max(worst_angle, err);
        o.require(err <= 1e-3, name + " frame " + std::to_string(t) + " " + chain.dof(k).name + " off by " + num(err));
      }
    }
  }
  const double secs = seconds_since(t0);
  o.require(secs < 30.0, "runtime " + num(secs) + " s");
  if (o.pass) {
    o.detail = "2 chains x 100 frames, max coordinate error " + num(worst_angle) + ", max residual " +
               num(worst_rms) + " m, " + num(secs) + " s";
  }
  return o;
}

Outcome prompt_logic() {
  Outcome o;
  const double above = std::nextafter(0.5, 1.0);
  const double below = std::nextafter(0.5, 0.0);
  const std::vector<double> grid{0.0, 0.2, below, 0.5, above, 0.7, 0.7, 1.0};
  std::size_t cases = 0;
  for (std::size_t len = 0; len <= 4; ++len) {
    std::vector<std::size_t> idx(len, 0);
    while (true) {
      std::vector<prompt::Detection> d;
      for (std::size_t i = 0; i < len; ++i) {
        const double x = 10.0 * static_cast<double>(i);
        d.push_back({{x, 2.0 * x, x + 3.0 + static_cast<double>(i), 2.0 * x + 5.0}, grid[idx[i]]});
      }
      ++cases;
      std::vector<std::size_t> kept;
      for (std::size_t i = 0; i < len; ++i) {
        if (d[i].score > 0.5) kept.push_back(i);
      }
      const auto got = prompt::filter_detections(d);
      bool same = got.size() == kept.size();
      for (std::size_t k = 0; same && k < kept.size(); ++k) same = got[k].box.x_min == d[kept[k]].box.x_min;
      o.require(same, "filter mismatch");
      if (kept.empty()) {
        bool threw = false;
        try {
          prompt::make_prompts(d, {}, false);
        } catch (const Error& e) {
          threw = e.code() == ErrorCode::NoSubject;
        }
        o.require(threw, "empty kept set did not report no subject");
      } else {
        std::size_t best = kept[0];
        for (auto i : kept) {
          if (d[i].score > d[best].score) best = i;
        }
        o.require(prompt::select_primary(got).box.x_min == d[best].box.x_min, "select mismatch");
        const auto single = prompt::make_prompts(d, {}, false);
        o.require(single.size() == 1 && single[0].box.x_min == d[best].box.x_min, "single prompt mismatch");
        const auto multi = prompt::make_prompts(d, {}, true);
        o.require(multi.size() == kept.size(), "multi prompt count");
        for (const auto& p : multi) {
          o.require(p.box.contains(p.point) && p.box_label == 1 && p.point_label == 1, "prompt layout");
          o.require(p.point.x == 0.5 * (p.box.x_min + p.box.x_max) && p.point.y == 0.5 * (p.box.y_min + p.box.y_max),
                    "point is not the centroid");
        }
      }
      std::size_t k = 0;
      while (k < len && ++idx[k] == grid.size()) idx[k++] = 0;
      if (k == len) break;
    }
  }
  Rng rng(3);
  for (int i = 0; i < 10000; ++i) {
    const auto b = geom::Box2::from_corners({testing::uniform(rng, -1e4, 1e4), testing::uniform(rng, -1e4, 1e4)},
                                            {testing::uniform(rng, -1e4, 1e4), testing::uniform(rng, -1e4, 1e4)});
    o.require(b.contains(geom::box_centroid(b)), "centroid outside its box");
  }
  if (o.pass) o.detail = std::to_string(cases) + " score sequences, 10000 random boxes";
  return o;
}

Outcome pipeline_composition() {
  Outcome o;
  const std::string cfg = "--config '" BIOTWIN_DATA_DIR "/demo/pipeline.json'";
  const auto seq = testing::scratch("acceptance_seq");
  const auto pipe = testing::scratch("acceptance_pipe");
  const auto rerun = testing::scratch("acceptance_rerun");
  o.require(run_cli("convert " + cfg + " --output-dir '" + seq.string() + "'") == 0, "convert failed");
  o.require(run_cli("ik " + cfg + " --output-dir '" + seq.string() + "'") == 0, "ik failed");
  o.require(run_cli("pipeline " + cfg + " --output-dir '" + pipe.string() + "'") == 0, "pipeline failed");
  o.require(run_cli("pipeline " + cfg + " --output-dir '" + rerun.string() + "'") == 0, "pipeline rerun failed");
  std::size_t bytes = 0;
  for (const char* f : {"markers.trc", "ik.mot"}) {
    const auto a = testing::slurp(seq / f);
    bytes += a.size();
    o.require(!a.empty(), std::string(f) + " missing");
    o.require(a == testing::slurp(pipe / f), std::string(f) + " differs from the sequential run");
    o.require(a == testing::slurp(rerun / f), std::string(f) + " differs between pipeline runs");
  }
  if (o.pass) o.detail = "markers.trc and ik.mot identical (" + std::to_string(bytes) + " bytes), rerun identical";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"Procrustes recovery", procrustes_recovery},
      {"Camera-to-world equation fidelity", equation_fidelity},
      {"Ground contract", ground_contract},
      {"TRC round trip", trc_round_trip},
      {"Jacobian correctness", jacobian_correctness},
      {"IK recovery", ik_recovery},
      {"Prompt logic", prompt_logic},
      {"Pipeline determinism and composition", pipeline_composition},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    failed += o.pass ? 0 : 1;
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
