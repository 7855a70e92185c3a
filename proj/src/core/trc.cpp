#include "biotwin/trc.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string_view>

#include "biotwin/error.hpp"

namespace biotwin::io {

namespace {

std::string line_loc(std::size_t line) { return "line " + std::to_string(line); }

std::vector<std::string_view> split_tabs(std::string_view s) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find('\t', start);
    if (pos == std::string_view::npos) {
      cells.push_back(s.substr(start));
      return cells;
    }
    cells.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Reads all lines, dropping a trailing '\r' so CRLF input parses like LF.
std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

double parse_double(std::string_view cell, std::size_t line, std::string_view what) {
  const auto text = trim(cell);
  double v = 0.0;
  if (!text.empty() && text.front() == '+') return parse_double(text.substr(1), line, what);
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::Parse,
                "non-numeric " + std::string(what) + " '" + std::string(text) + "'",
                line_loc(line));
  }
  return v;
}

std::size_t parse_count(std::string_view cell, std::size_t line, std::string_view what) {
  const auto text = trim(cell);
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorCode::Parse,
                "invalid " + std::string(what) + " '" + std::string(text) + "'", line_loc(line));
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void append_fixed5(std::string& out, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.5f", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void append_sig8(std::string& out, double v) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.8g", v);
  out.append(buf, static_cast<std::size_t>(n));
}

void write_file(const std::string& path, const std::string& body) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::Io, "cannot open for writing", path);
  f.write(body.data(), static_cast<std::streamsize>(body.size()));
  f.flush();
  if (!f) throw Error(ErrorCode::Io, "write failed", path);
}

std::ifstream open_read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::Io, "cannot open for reading", path);
  return f;
}

// Re-throws with the file path prefixed to the locator.
template <typename Fn>
auto with_file(const std::string& path, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Io) throw;
    throw Error(e.code(), e.message(), e.locator().empty() ? path : path + ":" + e.locator());
  }
}

}  // namespace

void write_trc(const twin::MarkerTrajectory& traj, std::ostream& out,
               const std::string& file_name) {
  twin::validate(traj);
  const std::size_t frames = traj.num_frames();
  const std::size_t markers = traj.num_markers();
  const std::string rate = shortest(traj.frame_rate_hz);

  std::string s;
  s.reserve(256 + frames * markers * 30);
  s += "PathFileType\t4\t(X/Y/Z)\t" + file_name + "\n";
  s += "DataRate\tCameraRate\tNumFrames\tNumMarkers\tUnits\tOrigDataRate\tOrigDataStartFrame\t"
       "OrigNumFrames\n";
  s += rate + "\t" + rate + "\t" + std::to_string(frames) + "\t" + std::to_string(markers) + "\t" +
       twin::units_tag(traj.units) + "\t" + rate + "\t" + std::to_string(traj.start_frame) + "\t" +
       std::to_string(frames) + "\n";
  s += "Frame#\tTime";
  for (const auto& name : traj.marker_names) s += "\t" + name + "\t\t";
  s += "\n\t";
  for (std::size_t m = 1; m <= markers; ++m) {
    const auto k = std::to_string(m);
    s += "\tX" + k + "\tY" + k + "\tZ" + k;
  }
  s += "\n\n";
  for (std::size_t t = 0; t < frames; ++t) {
    s += std::to_string(traj.start_frame + t);
    s += '\t';
    append_fixed5(s, static_cast<double>(t) / traj.frame_rate_hz);
    for (std::size_t m = 0; m < markers; ++m) {
      const auto& p = traj.at(t, m);
      for (int c = 0; c < 3; ++c) {
        s += '\t';
        append_fixed5(s, p[c]);
      }
    }
    s += '\n';
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed");
}

void write_trc_file(const twin::MarkerTrajectory& traj, const std::string& path) {
  std::ostringstream buf;
  const auto slash = path.find_last_of("/\\");
  write_trc(traj, buf, slash == std::string::npos ? path : path.substr(slash + 1));
  write_file(path, buf.str());
}

twin::MarkerTrajectory parse_trc(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.size() < 5) {
    throw Error(ErrorCode::Parse, "truncated header (need 5 header lines)",
                line_loc(lines.size() + 1));
  }

  const auto first = split_tabs(lines[0]);
  if (trim(first[0]) != "PathFileType") {
    throw Error(ErrorCode::Parse, "expected 'PathFileType'", line_loc(1));
  }
  if (first.size() < 3 || trim(first[1]) != "4" || trim(first[2]) != "(X/Y/Z)") {
    throw Error(ErrorCode::Parse, "expected 'PathFileType\\t4\\t(X/Y/Z)'", line_loc(1));
  }

  const auto keys = split_tabs(lines[1]);
  const auto vals = split_tabs(lines[2]);
  std::map<std::string, std::string_view, std::less<>> header;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    const auto key = trim(keys[i]);
    if (key.empty()) continue;
    if (i >= vals.size()) throw Error(ErrorCode::Parse, "missing value for '" + std::string(key) + "'", line_loc(3));
    header.emplace(std::string(key), vals[i]);
  }
  auto require = [&](const char* key) {
    auto it = header.find(key);
    if (it == header.end()) throw Error(ErrorCode::Parse, std::string("missing header field '") + key + "'", line_loc(2));
    return it->second;
  };

  twin::MarkerTrajectory traj;
  traj.frame_rate_hz = parse_double(require("DataRate"), 3, "DataRate");
  if (!(traj.frame_rate_hz > 0.0)) throw Error(ErrorCode::Parse, "DataRate must be positive", line_loc(3));
  const std::size_t declared_frames = parse_count(require("NumFrames"), 3, "NumFrames");
  const std::size_t declared_markers = parse_count(require("NumMarkers"), 3, "NumMarkers");
  if (declared_frames < 1 || declared_markers < 1) {
    throw Error(ErrorCode::Parse, "NumFrames and NumMarkers must be >= 1", line_loc(3));
  }
  try {
    traj.units = twin::parse_units(trim(require("Units")));
  } catch (const Error&) {
    throw Error(ErrorCode::Parse, "unsupported units tag '" + std::string(trim(require("Units"))) + "'", line_loc(3));
  }

  const auto names = split_tabs(lines[3]);
  if (names.size() < 2 || trim(names[0]) != "Frame#" || trim(names[1]) != "Time") {
    throw Error(ErrorCode::Parse, "expected 'Frame#\\tTime' column header", line_loc(4));
  }
  for (std::size_t i = 2; i < names.size(); ++i) {
    const auto name = trim(names[i]);
    if (!name.empty()) traj.marker_names.emplace_back(name);
  }
  if (traj.marker_names.size() != declared_markers) {
    throw Error(ErrorCode::Parse,
                "header declares " + std::to_string(declared_markers) + " markers but " +
                    std::to_string(traj.marker_names.size()) + " names are listed",
                line_loc(4));
  }

  const std::size_t markers = declared_markers;
  const std::size_t cells_needed = 2 + 3 * markers;
  std::size_t rows = 0;
  for (std::size_t li = 5; li < lines.size(); ++li) {
    const std::size_t line_no = li + 1;
    if (trim(lines[li]).empty()) continue;
    auto cells = split_tabs(lines[li]);
    while (cells.size() > cells_needed && trim(cells.back()).empty()) cells.pop_back();
    if (cells.size() != cells_needed) {
      throw Error(ErrorCode::Parse,
                  "expected " + std::to_string(cells_needed) + " cells, found " +
                      std::to_string(cells.size()),
                  line_loc(line_no));
    }
    const auto frame_no = parse_count(cells[0], line_no, "frame number");
    if (rows == 0) traj.start_frame = frame_no;
    parse_double(cells[1], line_no, "time");
    for (std::size_t m = 0; m < markers; ++m) {
      twin::Point3 p;
      for (int c = 0; c < 3; ++c) p[c] = parse_double(cells[2 + 3 * m + c], line_no, "coordinate");
      traj.positions.push_back(p);
    }
    ++rows;
  }
  if (rows != declared_frames) {
    throw Error(ErrorCode::Parse,
                "header declares " + std::to_string(declared_frames) + " frames but the body has " +
                    std::to_string(rows) + " rows",
                line_loc(3));
  }
  return traj;
}

twin::MarkerTrajectory read_trc_file(const std::string& path) {
  auto f = open_read(path);
  return with_file(path, [&] { return parse_trc(f); });
}

void validate(const MotionTable& table) {
  if (table.columns.empty() || table.columns.front() != "time") {
    throw Error(ErrorCode::InvalidArgument, "first column must be 'time'", "columns");
  }
  if (table.values.size() % table.columns.size() != 0) {
    throw Error(ErrorCode::InvalidArgument, "value count is not a multiple of column count");
  }
  for (const auto& c : table.columns) {
    if (c.empty() || c.find_first_of("\t\r\n") != std::string::npos) {
      throw Error(ErrorCode::InvalidArgument, "invalid column name '" + c + "'", "columns");
    }
  }
  for (double v : table.values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "non-finite value");
  }
  for (std::size_t r = 1; r < table.num_rows(); ++r) {
    if (!(table.at(r, 0) > table.at(r - 1, 0))) {
      throw Error(ErrorCode::InvalidArgument, "time is not strictly increasing",
                  "row " + std::to_string(r));
    }
  }
}

void write_motion(const MotionTable& table, std::ostream& out) {
  validate(table);
  std::string s;
  s += table.name + "\n";
  s += "nRows=" + std::to_string(table.num_rows()) + "\n";
  s += "nColumns=" + std::to_string(table.num_columns()) + "\n";
  s += std::string("inDegrees=") + (table.in_degrees ? "yes" : "no") + "\n";
  s += "endheader\n";
  for (std::size_t c = 0; c < table.num_columns(); ++c) {
    if (c) s += '\t';
    s += table.columns[c];
  }
  s += '\n';
  for (std::size_t r = 0; r < table.num_rows(); ++r) {
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
      if (c) s += '\t';
      append_sig8(s, table.at(r, c));
    }
    s += '\n';
  }
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed");
}

void write_motion_file(const MotionTable& table, const std::string& path) {
  std::ostringstream buf;
  write_motion(table, buf);
  write_file(path, buf.str());
}

MotionTable parse_motion(std::istream& in) {
  const auto lines = read_lines(in);
  if (lines.empty()) throw Error(ErrorCode::Parse, "empty motion file", line_loc(1));
  MotionTable table;
  table.name = lines[0];

  std::size_t li = 1;
  std::optional<std::size_t> n_rows;
  std::optional<std::size_t> n_cols;
  bool saw_degrees = false;
  for (; li < lines.size(); ++li) {
    const auto line = trim(lines[li]);
    if (line == "endheader") break;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) continue;
    const auto key = line.substr(0, eq);
    const auto value = line.substr(eq + 1);
    if (key == "nRows") n_rows = parse_count(value, li + 1, "nRows");
    if (key == "nColumns") n_cols = parse_count(value, li + 1, "nColumns");
    if (key == "inDegrees") {
      if (value != "yes" && value != "no") {
        throw Error(ErrorCode::Parse, "inDegrees must be yes or no", line_loc(li + 1));
      }
      table.in_degrees = value == "yes";
      saw_degrees = true;
    }
  }
  if (li >= lines.size()) throw Error(ErrorCode::Parse, "missing 'endheader'", line_loc(lines.size()));
  if (!n_rows || !n_cols || !saw_degrees) {
    throw Error(ErrorCode::Parse, "header must declare nRows, nColumns and inDegrees", line_loc(li + 1));
  }
  ++li;
  if (li >= lines.size()) throw Error(ErrorCode::Parse, "missing column names", line_loc(li + 1));
  for (auto c : split_tabs(lines[li])) table.columns.emplace_back(trim(c));
  if (table.columns.size() != *n_cols) {
    throw Error(ErrorCode::Parse,
                "nColumns=" + std::to_string(*n_cols) + " but " +
                    std::to_string(table.columns.size()) + " column names",
                line_loc(li + 1));
  }
  std::size_t rows = 0;
  for (++li; li < lines.size(); ++li) {
    if (trim(lines[li]).empty()) continue;
    const auto cells = split_tabs(lines[li]);
    if (cells.size() != *n_cols) {
      throw Error(ErrorCode::Parse,
                  "expected " + std::to_string(*n_cols) + " cells, found " +
                      std::to_string(cells.size()),
                  line_loc(li + 1));
    }
    for (auto c : cells) table.values.push_back(parse_double(c, li + 1, "value"));
    ++rows;
  }
  if (rows != *n_rows) {
    throw Error(ErrorCode::Parse,
                "nRows=" + std::to_string(*n_rows) + " but body has " + std::to_string(rows) +
                    " rows",
                line_loc(2));
  }
  try {
    validate(table);
  } catch (const Error& e) {
    throw Error(ErrorCode::Parse, e.message(), e.locator().empty() ? "body" : e.locator());
  }
  return table;
}

MotionTable read_motion_file(const std::string& path) {
  auto f = open_read(path);
  return with_file(path, [&] { return parse_motion(f); });
}

}  // namespace biotwin::io
