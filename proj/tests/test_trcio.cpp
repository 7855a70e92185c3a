#include <cmath>
#include <sstream>

#include "doctest.h"

#include "biotwin/error.hpp"
#include "biotwin/trc.hpp"
#include "support/testing.hpp"

using namespace biotwin;
using namespace biotwin::io;
using testing::Rng;

namespace {

std::string to_text(const twin::MarkerTrajectory& t, const std::string& name = "markers.trc") {
  std::ostringstream out;
  write_trc(t, out, name);
  return out.str();
}

twin::MarkerTrajectory from_text(const std::string& s) {
  std::istringstream in(s);
  return parse_trc(in);
}

twin::MarkerTrajectory two_markers() {
  twin::MarkerTrajectory t;
  t.frame_rate_hz = 60.0;
  t.marker_names = {"RASI", "LASI"};
  t.positions = {{0.1, 0.2, 0.3}, {-1.0, 0.000004, 2.5}, {0.11, 0.21, 0.31}, {-1.01, 0.0, 2.49}};
  return t;
}

Error parse_error(const std::string& text) {
  try {
    from_text(text);
  } catch (const Error& e) {
    return e;
  }
  FAIL("parse succeeded");
  return Error(ErrorCode::Parse, "");
}

}  // namespace

TEST_CASE("writer layout") {
  const auto text = to_text(two_markers(), "walk.trc");
  const std::string expect =
      "PathFileType\t4\t(X/Y/Z)\twalk.trc\n"
      "DataRate\tCameraRate\tNumFrames\tNumMarkers\tUnits\tOrigDataRate\tOrigDataStartFrame\tOrigNumFrames\n"
      "60\t60\t2\t2\tm\t60\t1\t2\n"
      "Frame#\tTime\tRASI\t\t\tLASI\t\t\n"
      "\t\tX1\tY1\tZ1\tX2\tY2\tZ2\n"
      "\n"
      "1\t0.00000\t0.10000\t0.20000\t0.30000\t-1.00000\t0.00000\t2.50000\n"
      "2\t0.01667\t0.11000\t0.21000\t0.31000\t-1.01000\t0.00000\t2.49000\n";
  CHECK(text == expect);
}

TEST_CASE("random round trips stay within half a unit in the last place") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    auto t = testing::random_trajectory(rng, 1 + rng() % 30, 1 + rng() % 12, -3, 3);
    const auto text = to_text(t);
    CHECK(text == to_text(t));
    const auto back = from_text(text);
    REQUIRE(back.marker_names == t.marker_names);
    REQUIRE(back.positions.size() == t.positions.size());
    CHECK(back.frame_rate_hz == t.frame_rate_hz);
    for (std::size_t k = 0; k < t.positions.size(); ++k) {
      CHECK((back.positions[k] - t.positions[k]).cwiseAbs().maxCoeff() <= 5.0000001e-6);
    }
  }
}

TEST_CASE("millimeter files keep their units") {
  auto t = two_markers();
  t.units = twin::Units::Millimeters;
  const auto back = from_text(to_text(t));
  CHECK(back.units == twin::Units::Millimeters);
  CHECK(back.to_meters().at(0, 0).x() == doctest::Approx(1e-4));
}

TEST_CASE("CRLF input parses like LF") {
  auto text = to_text(two_markers());
  std::string crlf;
  for (char c : text) {
    if (c == '\n') crlf += '\r';
    crlf += c;
  }
  const auto a = from_text(text);
  const auto b = from_text(crlf);
  CHECK(a.positions == b.positions);
  CHECK(a.marker_names == b.marker_names);
}

TEST_CASE("malformed files report a line") {
  const auto good = to_text(two_markers());
  auto lines = std::vector<std::string>();
  std::istringstream in(good);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  const auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (const auto& l : v) s += l + "\n";
    return s;
  };

  auto short_row = lines;
  short_row[7] = "2\t0.01667\t0.11000\t0.21000";
  CHECK(parse_error(join(short_row)).locator() == "line 8");

  auto bad_number = lines;
  bad_number[6] = "1\t0.00000\t0.1x000\t0.20000\t0.30000\t-1.00000\t0.00000\t2.50000";
  CHECK(parse_error(join(bad_number)).locator() == "line 7");

  auto units = lines;
  units[2] = "60\t60\t2\t2\tcm\t60\t1\t2";
  CHECK(parse_error(join(units)).locator() == "line 3");

  auto count = lines;
  count[2] = "60\t60\t3\t2\tm\t60\t1\t3";
  CHECK(parse_error(join(count)).locator() == "line 3");

  auto markers = lines;
  markers[2] = "60\t60\t2\t3\tm\t60\t1\t2";
  CHECK(parse_error(join(markers)).code() == ErrorCode::Parse);

  CHECK(parse_error("").code() == ErrorCode::Parse);
  CHECK(parse_error("PathFileType\t4\n").code() == ErrorCode::Parse);
}

TEST_CASE("writer rejects names that would break the format") {
  auto t = two_markers();
  t.marker_names[0] = "R ASI\t";
  std::ostringstream out;
  CHECK_THROWS_AS(write_trc(t, out), Error);
  auto nan = two_markers();
  nan.positions[1].y() = std::nan("");
  CHECK_THROWS_AS(write_trc(nan, out), Error);
}

TEST_CASE("file helpers carry the path in errors") {
  const auto dir = testing::scratch("trcio");
  const auto path = (dir / "a.trc").string();
  write_trc_file(two_markers(), path);
  CHECK(testing::slurp(path).rfind("PathFileType\t4\t(X/Y/Z)\ta.trc\n", 0) == 0);
  CHECK(read_trc_file(path).num_frames() == 2);
  testing::spit(dir / "b.trc", "junk\n");
  try {
    read_trc_file((dir / "b.trc").string());
    FAIL("parsed junk");
  } catch (const Error& e) {
    CHECK(e.locator().find("b.trc") != std::string::npos);
  }
  CHECK_THROWS_AS(read_trc_file((dir / "missing.trc").string()), Error);
}

TEST_CASE("motion files round trip") {
  MotionTable m;
  m.name = "ik";
  m.columns = {"time", "hip_flexion_r", "pelvis_tx"};
  m.values = {0.0, 12.5, 0.01, 1.0 / 30.0, -3.25e-7, 0.02};
  std::ostringstream out;
  write_motion(m, out);
  const std::string text = out.str();
  CHECK(text.rfind("ik\nnRows=2\nnColumns=3\ninDegrees=yes\nendheader\ntime\thip_flexion_r\tpelvis_tx\n", 0) == 0);
  std::istringstream in(text);
  const auto back = parse_motion(in);
  CHECK(back.name == "ik");
  CHECK(back.columns == m.columns);
  CHECK(back.in_degrees);
  REQUIRE(back.values.size() == m.values.size());
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    CHECK(back.values[i] == doctest::Approx(m.values[i]).epsilon(1e-8));
  }
  m.in_degrees = false;
  std::ostringstream out2;
  write_motion(m, out2);
  std::istringstream in2(out2.str());
  CHECK_FALSE(parse_motion(in2).in_degrees);
}

TEST_CASE("motion validation") {
  MotionTable m;
  m.columns = {"t", "a"};
  m.values = {0, 1};
  CHECK_THROWS_AS(validate(m), Error);
  m.columns = {"time", "a"};
  m.values = {0.1, 1, 0.1, 2};
  CHECK_THROWS_AS(validate(m), Error);
  m.values = {0.1, 1, 0.2};
  CHECK_THROWS_AS(validate(m), Error);
  std::istringstream bad("ik\nnRows=2\nnColumns=2\ninDegrees=yes\nendheader\ntime\ta\n0\t1\n");
  CHECK_THROWS_AS(parse_motion(bad), Error);
}
