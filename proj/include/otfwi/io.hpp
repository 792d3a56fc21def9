//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "otfwi/core.hpp"

namespace otfwi::io {

namespace fs = std::filesystem;
using json = nlohmann::json;

class IoError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

  template <class T> void put_le(std::ostream &os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<unsigned char, sizeof(T)> b;
    std::memcpy(b.data(), &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(b.begin(), b.end());
    os.write(reinterpret_cast<const char *>(b.data()), sizeof(T));
  }

  template <class T> T get_le(std::istream &is) {
    std::array<unsigned char, sizeof(T)> b;
    if (!is.read(reinterpret_cast<char *>(b.data()), sizeof(T)))
      throw IoError("unexpected end of binary file");
    if constexpr (std::endian::native == std::endian::big)
      std::reverse(b.begin(), b.end());
    T v;
    std::memcpy(&v, b.data(), sizeof(T));
    return v;
  }

  inline std::ofstream open_out(const fs::path &p, bool binary = false) {
    if (p.has_parent_path())
      fs::create_directories(p.parent_path());
    std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
    if (!os)
      throw IoError("cannot open '" + p.string() + "' for writing");
    return os;
  }

  inline std::ifstream open_in(const fs::path &p, bool binary = false) {
    std::ifstream is(p, binary ? std::ios::binary : std::ios::in);
    if (!is)
      throw IoError("cannot open '" + p.string() + "'");
    return is;
  }

  inline std::vector<std::string> split(const std::string &line, char sep) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, sep))
      out.push_back(cell);
    if (!line.empty() && line.back() == sep)
      out.emplace_back();
    return out;
  }

  inline double parse_double(const std::string &s, const fs::path &where) {
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || end != s.c_str() + s.size())
      throw IoError("'" + where.string() + "': cannot parse number '" + s + "'");
    return v;
  }

  inline void strip_cr(std::string &line) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
  }

} // namespace detail

// Grid files: "OTFW", u32 version, u32 nx, u32 nz, f64 dx, dz, x0, z0,
// then nz*nx f32 values, z-major, all little-endian.

inline constexpr std::uint32_t kGridVersion = 1;

struct GridFile {
  Grid2D grid;
  std::vector<float> values;
};

inline void write_grid_file(const fs::path &p, const Grid2D &grid,
                            std::span<const double> values) {
  if (values.size() != grid.size())
    throw IoError("grid file: value count does not match grid");
  auto os = detail::open_out(p, true);
  os.write("OTFW", 4);
  detail::put_le<std::uint32_t>(os, kGridVersion);
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nx()));
  detail::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(grid.nz()));
  detail::put_le<double>(os, grid.dx());
  detail::put_le<double>(os, grid.dz());
  detail::put_le<double>(os, grid.origin().x);
  detail::put_le<double>(os, grid.origin().z);
  for (double v : values)
    detail::put_le<float>(os, static_cast<float>(v));
  if (!os)
    throw IoError("write failed for '" + p.string() + "'");
}

inline GridFile read_grid_file(const fs::path &p) {
  auto is = detail::open_in(p, true);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "OTFW", 4) != 0)
    throw IoError("'" + p.string() + "' is not an OTFW grid file");
  const auto version = detail::get_le<std::uint32_t>(is);
  if (version != kGridVersion)
    throw IoError("'" + p.string() + "': unsupported version "
                  + std::to_string(version));
  const auto nx = detail::get_le<std::uint32_t>(is);
  const auto nz = detail::get_le<std::uint32_t>(is);
  const double dx = detail::get_le<double>(is);
  const double dz = detail::get_le<double>(is);
  const double x0 = detail::get_le<double>(is);
  const double z0 = detail::get_le<double>(is);
  GridFile out{Grid2D(nx, nz, dx, dz, {x0, z0}), {}};
  out.values.resize(out.grid.size());
  for (auto &v : out.values)
    v = detail::get_le<float>(is);
  if (is.peek() != std::char_traits<char>::eof())
    throw IoError("'" + p.string() + "': trailing bytes after grid values");
  return out;
}

inline void write_model(const fs::path &p, const VelocityModel &m) {
  write_grid_file(p, m.grid(), m.velocities());
}

inline VelocityModel read_model(const fs::path &p) {
  const GridFile f = read_grid_file(p);
  std::vector<double> v(f.values.begin(), f.values.end());
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x))
      throw IoError("'" + p.string() + "': velocities must be positive");
  return VelocityModel::from_velocity(f.grid, v);
}

// Traces and curves

inline void write_columns(const fs::path &p,
                          const std::vector<std::string> &header,
                          const std::vector<std::vector<double>> &columns) {
  auto os = detail::open_out(p);
  for (std::size_t c = 0; c < header.size(); ++c)
    os << (c ? "," : "") << header[c];
  os << '\n';
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < columns.size(); ++c)
      os << (c ? "," : "") << format_double(columns[c][r]);
    os << '\n';
  }
  if (!os)
    throw IoError("write failed for '" + p.string() + "'");
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;
};

inline Table read_columns(const fs::path &p) {
  auto is = detail::open_in(p);
  Table t;
  std::string line;
  if (!std::getline(is, line))
    throw IoError("'" + p.string() + "' is empty");
  detail::strip_cr(line);
  t.header = detail::split(line, ',');
  t.columns.resize(t.header.size());
  while (std::getline(is, line)) {
    detail::strip_cr(line);
    if (line.empty())
      continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != t.header.size())
      throw IoError("'" + p.string() + "': ragged row");
    for (std::size_t c = 0; c < cells.size(); ++c)
      t.columns[c].push_back(detail::parse_double(cells[c], p));
  }
  return t;
}

/// Axis recovered from a time column (uniform spacing starting at 0).
inline TimeAxis axis_from_times(const std::vector<double> &t,
                                const fs::path &where) {
  if (t.size() < 2)
    throw IoError("'" + where.string() + "': need at least two samples");
  const double dt = t[1] - t[0];
  const TimeAxis axis(t.size(), dt);
  for (std::size_t i = 0; i < t.size(); ++i)
    if (std::abs(t[i] - axis.time(i)) > 1e-9 * dt * static_cast<double>(i + 1))
      throw IoError("'" + where.string() + "': time column is not uniform");
  return axis;
}

inline void write_trace(const fs::path &p, const Trace &t,
                        const std::string &name = "value") {
  std::vector<double> time(t.size());
  for (std::size_t i = 0; i < t.size(); ++i)
    time[i] = t.axis.time(i);
  write_columns(p, {"time", name}, {time, t.samples});
}

inline Trace read_trace(const fs::path &p) {
  Table t = read_columns(p);
  if (t.header.size() != 2 || t.header[0] != "time")
    throw IoError("'" + p.string() + "': expected columns time,<value>");
  const TimeAxis axis = axis_from_times(t.columns[0], p);
  return Trace(axis, std::move(t.columns[1]));
}

// Gathers: shot_XXX.csv with time,rcv_0,... and a shot_XXX.json sidecar.

inline std::string shot_stem(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shot_%03zu", index);
  return buf;
}

inline json position_json(Position p) { return json::array({p.x, p.z}); }

inline Position parse_position(const json &j) {
  if (!j.is_array() || j.size() != 2)
    throw IoError("position must be [x, z]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline void write_json(const fs::path &p, const json &j) {
  auto os = detail::open_out(p);
  os << j.dump(2) << '\n';
}

inline json read_json(const fs::path &p) {
  auto is = detail::open_in(p);
  try {
    return json::parse(is);
  } catch (const json::exception &e) {
    throw IoError("'" + p.string() + "': " + e.what());
  }
}

inline void write_gather(const fs::path &dir, std::size_t index,
                         const ShotGather &g) {
  std::vector<std::string> header{"time"};
  std::vector<std::vector<double>> cols;
  std::vector<double> time(g.axis.nt());
  for (std::size_t i = 0; i < time.size(); ++i)
    time[i] = g.axis.time(i);
  cols.push_back(std::move(time));
  for (std::size_t r = 0; r < g.traces.size(); ++r) {
    header.push_back("rcv_" + std::to_string(r));
    cols.push_back(g.traces[r].samples);
  }
  const std::string stem = shot_stem(index);
  write_columns(dir / (stem + ".csv"), header, cols);
  json meta;
  meta["source"] = position_json(g.source);
  meta["receivers"] = json::array();
  for (const auto &r : g.receivers)
    meta["receivers"].push_back(position_json(r));
  meta["dt"] = g.axis.dt();
  meta["nt"] = g.axis.nt();
  write_json(dir / (stem + ".json"), meta);
}

inline ShotGather read_gather(const fs::path &dir, std::size_t index) {
  const std::string stem = shot_stem(index);
  const json meta = read_json(dir / (stem + ".json"));
  Table t = read_columns(dir / (stem + ".csv"));
  try {
    const TimeAxis axis(meta.at("nt").get<std::size_t>(),
                        meta.at("dt").get<double>());
    std::vector<Position> rcv;
    for (const auto &r : meta.at("receivers"))
      rcv.push_back(parse_position(r));
    if (t.columns.size() != rcv.size() + 1)
      throw IoError(stem + ": column count does not match receivers");
    std::vector<Trace> traces;
    for (std::size_t r = 0; r < rcv.size(); ++r) {
      if (t.columns[r + 1].size() != axis.nt())
        throw IoError(stem + ": row count does not match nt");
      traces.emplace_back(axis, std::move(t.columns[r + 1]));
    }
    const Position src = parse_position(meta.at("source"));
    if (rcv.empty())
      return ShotGather(src, {}, axis);
    return ShotGather(src, std::move(rcv), std::move(traces));
  } catch (const json::exception &e) {
    throw IoError(stem + ".json: " + e.what());
  }
}

/// All consecutive shot_000, shot_001, ... gathers in a directory.
inline std::vector<ShotGather> read_gathers(const fs::path &dir) {
  std::vector<ShotGather> out;
  for (std::size_t i = 0; fs::exists(dir / (shot_stem(i) + ".json")); ++i)
    out.push_back(read_gather(dir, i));
  if (out.empty())
    throw IoError("'" + dir.string() + "' holds no shot_XXX gathers");
  return out;
}

inline void write_curve(const fs::path &p,
                        const std::vector<double> &shift,
                        const std::vector<double> &value) {
  write_columns(p, {"shift", "value"}, {shift, value});
}

} // namespace otfwi::io
