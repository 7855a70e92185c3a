#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "biotwin/twin.hpp"

namespace biotwin::io {

// Tab-delimited OpenSim-style marker file. Output uses LF line endings and
// five decimals per coordinate; the reader accepts LF and CRLF.
void write_trc(const twin::MarkerTrajectory& traj, std::ostream& out,
               const std::string& file_name = "markers.trc");
void write_trc_file(const twin::MarkerTrajectory& traj, const std::string& path);

/// Errors carry a "line N" locator.
twin::MarkerTrajectory parse_trc(std::istream& in);
twin::MarkerTrajectory read_trc_file(const std::string& path);

/// time column followed by one column per generalized coordinate.
struct MotionTable {
  std::string name = "motion";
  std::vector<std::string> columns;
  /// Row-major, rows.size() == num_rows() * columns.size().
  std::vector<double> values;
  bool in_degrees = true;

  std::size_t num_columns() const { return columns.size(); }
  std::size_t num_rows() const { return columns.empty() ? 0 : values.size() / columns.size(); }
  double at(std::size_t row, std::size_t col) const { return values[row * columns.size() + col]; }
};

/// Column layout, finite values, strictly increasing time.
void validate(const MotionTable& table);

void write_motion(const MotionTable& table, std::ostream& out);
void write_motion_file(const MotionTable& table, const std::string& path);
MotionTable parse_motion(std::istream& in);
MotionTable read_motion_file(const std::string& path);

}  // namespace biotwin::io
