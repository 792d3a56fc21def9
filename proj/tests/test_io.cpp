//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <fstream>
#include <iterator>

#include "oracles.hpp"
#include "otfwi/io.hpp"

using namespace otfwi;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
protected:
  void SetUp() override {
    dir = fs::temp_directory_path()
          / ("otfwi_io_" + std::string(::testing::UnitTest::GetInstance()
                                           ->current_test_info()
                                           ->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

std::string slurp(const fs::path &p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), {}};
}

} // namespace

using Io = TempDir;

TEST_F(Io, ModelRoundTripIsBitIdentical) {
  auto g = oracle::rng(91);
  const Grid2D grid(7, 5, 12.5, 10.0, {100.0, -20.0});
  const auto v = oracle::uniform_vector(g, grid.size(), 1500.0, 3000.0);
  const auto m = VelocityModel::from_velocity(grid, v);
  io::write_model(dir / "a.bin", m);
  const auto back = io::read_model(dir / "a.bin");
  EXPECT_EQ(back.grid(), grid);
  for (std::size_t i = 0; i < grid.size(); ++i)
    EXPECT_EQ(static_cast<float>(back.velocity(i)), static_cast<float>(v[i]));
  io::write_model(dir / "b.bin", back);
  EXPECT_EQ(slurp(dir / "a.bin"), slurp(dir / "b.bin"));
}

TEST_F(Io, GridFileLayout) {
  const Grid2D grid(3, 4, 1.0, 2.0);
  io::write_grid_file(dir / "g.bin", grid, std::vector<double>(12, 1.0));
  const std::string bytes = slurp(dir / "g.bin");
  ASSERT_EQ(bytes.size(), 4u + 3 * 4 + 4 * 8 + 12 * 4);
  EXPECT_EQ(bytes.substr(0, 4), "OTFW");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 3u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 4u);
}

TEST_F(Io, RejectsCorruptGridFiles) {
  {
    std::ofstream os(dir / "bad.bin", std::ios::binary);
    os << "NOPE";
  }
  EXPECT_THROW(io::read_grid_file(dir / "bad.bin"), io::IoError);
  EXPECT_THROW(io::read_grid_file(dir / "missing.bin"), io::IoError);
  const Grid2D grid(3, 3, 1.0, 1.0);
  io::write_grid_file(dir / "neg.bin", grid, std::vector<double>(9, -1.0));
  EXPECT_THROW(io::read_model(dir / "neg.bin"), ValidationError);
  io::write_grid_file(dir / "ok.bin", grid, std::vector<double>(9, 1.0));
  std::string bytes = slurp(dir / "ok.bin");
  bytes.resize(bytes.size() - 2);
  std::ofstream(dir / "short.bin", std::ios::binary) << bytes;
  EXPECT_THROW(io::read_grid_file(dir / "short.bin"), io::IoError);
}

TEST_F(Io, TraceRoundTripIsExact) {
  auto g = oracle::rng(92);
  const TimeAxis a(257, 0.0015);
  const Trace t(a, oracle::normal_vector(g, a.nt()));
  io::write_trace(dir / "t.csv", t);
  const Trace back = io::read_trace(dir / "t.csv");
  EXPECT_EQ(back.axis, a);
  EXPECT_EQ(back.samples, t.samples);
}

TEST_F(Io, GatherRoundTripIsExact) {
  auto g = oracle::rng(93);
  const TimeAxis a(64, 0.002);
  std::vector<Trace> traces;
  for (int r = 0; r < 3; ++r)
    traces.emplace_back(a, oracle::normal_vector(g, a.nt()));
  const ShotGather gather({12.5, 20.0}, {{0, 20}, {10, 20}, {20.5, 30}}, traces);
  io::write_gather(dir, 0, gather);
  io::write_gather(dir, 1, gather);
  const auto all = io::read_gathers(dir);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[1].source, gather.source);
  EXPECT_EQ(all[1].receivers, gather.receivers);
  for (std::size_t r = 0; r < 3; ++r)
    EXPECT_EQ(all[1].traces[r].samples, gather.traces[r].samples);
  EXPECT_TRUE(fs::exists(dir / "shot_001.csv"));
}

TEST_F(Io, EmptyDirectoryHasNoGathers) {
  EXPECT_THROW(io::read_gathers(dir), io::IoError);
}

TEST_F(Io, RejectsRaggedCsv) {
  std::ofstream(dir / "r.csv") << "time,value\n0,1\n0.1\n";
  EXPECT_THROW(io::read_trace(dir / "r.csv"), io::IoError);
  std::ofstream(dir / "n.csv") << "time,value\n0,1\n0.1,abc\n";
  EXPECT_THROW(io::read_trace(dir / "n.csv"), io::IoError);
  std::ofstream(dir / "u.csv") << "time,value\n0,1\n0.1,2\n0.3,3\n";
  EXPECT_THROW(io::read_trace(dir / "u.csv"), io::IoError);
}

TEST(IoFormat, DoublesRoundTripThroughText) {
  auto g = oracle::rng(94);
  for (double v : oracle::normal_vector(g, 100, 1e5))
    EXPECT_EQ(std::stod(io::format_double(v)), v);
}
