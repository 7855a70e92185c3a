#include <cmath>
#include <numbers>

#include "doctest.h"

#include "biotwin/config.hpp"
#include "biotwin/error.hpp"
#include "biotwin/ik.hpp"
#include "support/testing.hpp"
#include "synth.hpp"

using namespace biotwin;
using namespace biotwin::ik;
using testing::Rng;

namespace {

constexpr double kPi = std::numbers::pi;

KinematicChain arm() { return io::load_chain(BIOTWIN_DATA_DIR "/chains/two_link_arm.json"); }
KinematicChain lower_limb() { return io::load_chain(BIOTWIN_DATA_DIR "/chains/lower_limb.json"); }

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd q(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) q[i++] = x;
  return q;
}

Eigen::MatrixXd finite_difference_jacobian(const KinematicChain& chain, const Eigen::VectorXd& q, double h) {
  const auto m = chain.markers().size();
  Eigen::MatrixXd J(static_cast<Eigen::Index>(3 * m), q.size());
  for (Eigen::Index k = 0; k < q.size(); ++k) {
    Eigen::VectorXd qp = q, qm = q;
    qp[k] += h;
    qm[k] -= h;
    const auto pp = marker_positions(chain, qp);
    const auto pm = marker_positions(chain, qm);
    for (std::size_t i = 0; i < m; ++i) {
      J.block<3, 1>(static_cast<Eigen::Index>(3 * i), k) = (pp[i] - pm[i]) / (2 * h);
    }
  }
  return J;
}

bool non_increasing(const std::vector<double>& c) {
  for (std::size_t i = 1; i < c.size(); ++i) {
    if (c[i] > c[i - 1]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("planar arm forward kinematics") {
  const auto chain = arm();
  const auto fk = forward_kinematics(chain, vec({kPi / 6, kPi / 3}));
  CHECK(fk.at("elbow").x() == doctest::Approx(std::sqrt(3.0) / 2).epsilon(1e-14));
  CHECK(fk.at("elbow").y() == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(fk.at("wrist").x() == doctest::Approx(0.8660254037844386).epsilon(1e-12));
  CHECK(fk.at("wrist").y() == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(std::abs(fk.at("wrist").z()) < 1e-15);
  CHECK_THROWS_AS(forward_kinematics(chain, vec({0.0})), Error);
}

TEST_CASE("segment frames stay proper rotations") {
  Rng rng(31);
  const auto chain = testing::random_chain(rng, 8);
  for (int i = 0; i < 20; ++i) {
    for (const auto& f : segment_frames(chain, testing::random_q(rng, 8, 3.0))) {
      CHECK(geom::is_rotation(f.rotation, 1e-12));
    }
  }
}

TEST_CASE("analytic jacobian matches central differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    const std::size_t n = 1 + seed % 8;
    const auto chain = testing::random_chain(rng, n);
    const auto q = testing::random_q(rng, n, 2.0);
    const auto J = marker_jacobian(chain, q);
    const auto Jfd = finite_difference_jacobian(chain, q, 1e-6);
    CHECK((J - Jfd).norm() / Jfd.norm() < 1e-5);
  }
}

TEST_CASE("jacobian columns vanish outside a coordinate's subtree") {
  const auto chain = lower_limb();
  Rng rng(32);
  const auto J = marker_jacobian(chain, testing::random_q(rng, chain.num_dofs(), 0.5));
  for (std::size_t k = 0; k < chain.num_dofs(); ++k) {
    for (std::size_t m = 0; m < chain.markers().size(); ++m) {
      if (!chain.in_subtree(chain.dof_segment(k), chain.markers()[m].segment)) {
        CHECK(J.block<3, 1>(static_cast<Eigen::Index>(3 * m), static_cast<Eigen::Index>(k)).norm() == 0.0);
      }
    }
  }
}

TEST_CASE("moving the root moves every marker rigidly") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const auto chain = testing::random_chain(rng, 6);
    const auto q = testing::random_q(rng, 6);
    const geom::Matrix3 G = testing::random_rotation(rng);
    const geom::Point3 c = testing::random_point(rng);
    auto segs = chain.segments();
    segs[0].orientation = G * segs[0].orientation;
    segs[0].offset = G * segs[0].offset + c;
    const KinematicChain moved(segs, chain.markers());
    const auto a = marker_positions(chain, q);
    const auto b = marker_positions(moved, q);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK((b[i] - (G * a[i] + c)).norm() < 1e-12);
  }
}

TEST_CASE("chain validation") {
  Segment root{"root", std::nullopt, {}, geom::Matrix3::Identity(), {{"a", DofType::Rotation, {0, 0, 1}, {}}}};
  Segment child{"child", 0, {1, 0, 0}, geom::Matrix3::Identity(), {{"b", DofType::Rotation, {0, 0, 1}, {}}}};
  CHECK_NOTHROW(KinematicChain({root, child}, {{"m", 1, {1, 0, 0}}}));
  CHECK_THROWS_AS(KinematicChain({}, {}), Error);
  auto late = child;
  late.parent = 1;
  CHECK_THROWS_AS(KinematicChain({root, late}, {}), Error);
  auto zero_axis = child;
  zero_axis.dofs[0].axis = {0, 0, 0};
  CHECK_THROWS_AS(KinematicChain({root, zero_axis}, {}), Error);
  auto same_name = child;
  same_name.dofs[0].name = "a";
  CHECK_THROWS_AS(KinematicChain({root, same_name}, {}), Error);
  auto bad_limits = child;
  bad_limits.dofs[0].limits = std::pair{1.0, -1.0};
  CHECK_THROWS_AS(KinematicChain({root, bad_limits}, {}), Error);
  auto four = root;
  four.dofs.assign(4, {"", DofType::Rotation, {1, 0, 0}, {}});
  CHECK_THROWS_AS(KinematicChain({four}, {}), Error);
  CHECK_THROWS_AS(KinematicChain({root}, {{"m", 3, {}}}), Error);
  try {
    io::chain_from_json(R"({"segments":[{"name":"a","parent":null,"dofs":[{"axis":[0,0,2]}]}]})");
    FAIL("accepted");
  } catch (const Error& e) {
    CHECK(e.locator() == "segments[0].dofs[0].axis");
  }
}

TEST_CASE("single-frame solve recovers arm angles") {
  const auto chain = arm();
  const auto truth = vec({0.4, -1.1});
  const auto result = solve_ik_frame(chain, forward_kinematics(chain, truth), chain.neutral());
  CHECK(result.reason == StopReason::Converged);
  CHECK((result.q - truth).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(result.rms < 1e-9);
  CHECK(non_increasing(result.cost_history));
}

TEST_CASE("unreachable target: arm points straight at it") {
  const auto chain = arm();
  IkSettings s;
  s.marker_weights["elbow"] = 0.0;
  const geom::Point3 target(3.0 * std::cos(0.7), 3.0 * std::sin(0.7), 0.0);
  const auto result = solve_ik_frame(chain, {{"wrist", target}, {"elbow", {0, 0, 0}}}, vec({0.2, 0.3}), s);
  // Reachable set is the disc of radius 2: closest point lies on the ray to the target.
  const auto wrist = forward_kinematics(chain, result.q).at("wrist");
  CHECK((wrist - 2.0 / 3.0 * target).norm() < 1e-5);
  CHECK(result.rms == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::remainder(result.q[1], 2 * kPi) == doctest::Approx(0.0).epsilon(1e-4).scale(1.0));
  CHECK(non_increasing(result.cost_history));
}

TEST_CASE("limits hold when the target demands more") {
  const auto chain = lower_limb();
  Eigen::VectorXd truth = chain.neutral();
  const auto names = chain.dof_names();
  const auto knee = static_cast<Eigen::Index>(std::find(names.begin(), names.end(), "knee_angle_r") - names.begin());
  truth[knee] = -0.6;  // below the -0.2 limit
  Eigen::VectorXd free_truth = truth;
  auto segs = chain.segments();
  for (auto& s : segs) {
    for (auto& d : s.dofs) d.limits.reset();
  }
  const KinematicChain unlimited(segs, chain.markers());
  const auto result = solve_ik_frame(chain, forward_kinematics(unlimited, free_truth), chain.neutral());
  CHECK(result.q[knee] == doctest::Approx(-0.2));
  CHECK(result.rms > 1e-3);
  CHECK(non_increasing(result.cost_history));
}

TEST_CASE("solve errors") {
  const auto chain = arm();
  CHECK_THROWS_AS(solve_ik_frame(chain, {{"nope", {0, 0, 0}}}, chain.neutral()), Error);
  CHECK_THROWS_AS(solve_ik_frame(chain, {{"wrist", {std::nan(""), 0, 0}}}, chain.neutral()), Error);
  IkSettings s;
  s.max_iterations = 0;
  CHECK_THROWS_AS(solve_ik_frame(chain, {{"wrist", {1, 1, 0}}}, chain.neutral(), s), Error);
  IkSettings w;
  w.marker_weights["wrist"] = -1.0;
  CHECK_THROWS_AS(validate(w), Error);
}

TEST_CASE("iteration cap stops early") {
  const auto chain = lower_limb();
  Rng rng(34);
  const auto truth = chain.clamp(testing::random_q(rng, chain.num_dofs(), 0.5));
  IkSettings s;
  s.max_iterations = 1;
  const auto r = solve_ik_frame(chain, forward_kinematics(chain, truth), chain.neutral(), s);
  CHECK(r.iterations == 1);
  CHECK(r.reason == StopReason::MaxIterations);
}

TEST_CASE("sequence recovery, warm starts and motion columns") {
  const auto chain = lower_limb();
  demo::MotionSpec spec;
  spec.frames = 40;
  const auto q = demo::joint_trajectories(chain, spec);
  const auto traj = demo::marker_trajectory(chain, q, spec.frame_rate_hz);
  const auto warm = solve_ik_sequence(chain, traj);
  IkSettings cold_settings;
  cold_settings.warm_start = false;
  const auto cold = solve_ik_sequence(chain, traj, cold_settings);
  CHECK(warm.total_iterations < cold.total_iterations);
  CHECK(warm.warnings.empty());

  const auto& m = warm.motion;
  REQUIRE(m.num_rows() == 40);
  REQUIRE(m.num_columns() == 1 + chain.num_dofs());
  for (std::size_t t = 0; t < 40; ++t) {
    CHECK(m.at(t, 0) == doctest::Approx(static_cast<double>(t) / 30.0));
    CHECK(warm.frames[t].rms < 1e-6);
    for (std::size_t k = 0; k < chain.num_dofs(); ++k) {
      const double expect = q(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(k));
      const double got = chain.dof(k).type == DofType::Rotation ? m.at(t, 1 + k) * kPi / 180.0 : m.at(t, 1 + k);
      CHECK(std::abs(got - expect) < 1e-6);
    }
  }
}

TEST_CASE("marker name mismatches become warnings") {
  const auto chain = arm();
  twin::MarkerTrajectory traj;
  traj.frame_rate_hz = 10;
  traj.marker_names = {"wrist", "hat"};
  traj.positions = {{1, 1, 0}, {5, 5, 5}};
  const auto r = solve_ik_sequence(chain, traj);
  REQUIRE(r.warnings.size() == 2);
  CHECK(r.warnings[0].find("hat") != std::string::npos);
  CHECK(r.warnings[1].find("elbow") != std::string::npos);
  traj.marker_names = {"hat", "cap"};
  CHECK_THROWS_AS(solve_ik_sequence(chain, traj), Error);
}

TEST_CASE("millimeter trajectories are solved in meters") {
  const auto chain = arm();
  const auto truth = vec({0.3, 0.9});
  twin::MarkerTrajectory traj = demo::marker_trajectory(chain, truth.transpose(), 50.0);
  traj.units = twin::Units::Millimeters;
  for (auto& p : traj.positions) p *= 1000.0;
  const auto r = solve_ik_sequence(chain, traj);
  CHECK(r.motion.at(0, 1) == doctest::Approx(0.3 * 180.0 / kPi).epsilon(1e-8));
  CHECK(r.motion.at(0, 2) == doctest::Approx(0.9 * 180.0 / kPi).epsilon(1e-8));
}
