//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "otfwi/wavelet.hpp"

using namespace otfwi;

namespace {

double rms(const std::vector<double> &v, std::size_t lo, std::size_t hi) {
  double s = 0.0;
  for (std::size_t i = lo; i < hi; ++i)
    s += v[i] * v[i];
  return std::sqrt(s / static_cast<double>(hi - lo));
}

} // namespace

TEST(Ricker, PeaksAtCenter) {
  const TimeAxis a(501, 0.001);
  const Trace r = ricker({10.0, 0.2, 3.0}, a);
  EXPECT_DOUBLE_EQ(r[200], 3.0);
  for (std::size_t i = 0; i < a.nt(); ++i)
    EXPECT_LE(r[i], 3.0);
}

TEST(Ricker, IsSymmetric) {
  const TimeAxis a(501, 0.001);
  const Trace r = ricker({12.0, 0.25, 1.0}, a);
  for (std::size_t k = 1; k < 200; ++k)
    EXPECT_NEAR(r[250 + k], r[250 - k], 1e-14);
}

TEST(Ricker, IntegratesToZero) {
  const double fp = 8.0;
  const double t0 = 5.0 / fp;
  const TimeAxis a(20001, (2.0 * t0) / 20000.0);
  const Trace r = ricker({fp, t0, 1.0}, a);
  EXPECT_LT(std::abs(oracle::trapezoid(r.samples, a.dt())), 1e-6);
}

TEST(Ricker, DefaultDelayStartsQuiet) {
  const TimeAxis a(1000, 0.001);
  const Trace r = ricker({10.0, std::nullopt, 1.0}, a);
  EXPECT_LT(std::abs(r[0]), 1e-4);
  EXPECT_NEAR(r[120], 1.0, 1e-12);
}

TEST(Ricker, RejectsBadSpecs) {
  const TimeAxis a(100, 0.001);
  EXPECT_THROW(ricker({0.0, 0.01, 1.0}, a), ConfigError);
  EXPECT_THROW(ricker({10.0, -0.01, 1.0}, a), ConfigError);
  EXPECT_THROW(ricker({10.0, 0.5, 1.0}, a), ConfigError);
}

TEST(Ricker, SecondDifferencesBounded) {
  const TimeAxis a(2001, 0.0005);
  const double fp = 15.0, amp = 2.0;
  const Trace r = ricker({fp, 0.5, amp}, a);
  // Peak |r''| is 6 pi^2 fp^2 amp, reached at the centre.
  const double bound = amp * 6.0 * std::pow(std::numbers::pi * fp, 2) * 1.001;
  for (std::size_t i = 1; i + 1 < a.nt(); ++i) {
    const double d2 = (r[i + 1] - 2.0 * r[i] + r[i - 1]) / (a.dt() * a.dt());
    EXPECT_LE(std::abs(d2), bound);
  }
}

TEST(TwoRicker, ReducesToSingle) {
  const TimeAxis a(1001, 0.002);
  const Trace two = two_ricker_signal(10.0, 0.5, 1.0, 1.0, 0.0, a);
  const Trace one = ricker({10.0, 0.5, 1.0}, a);
  for (std::size_t i = 0; i < a.nt(); ++i)
    EXPECT_EQ(two[i], one[i]);
}

TEST(TwoRicker, ShiftsBySamples) {
  const TimeAxis a(1001, 0.002);
  const Trace base = two_ricker_signal(10.0, 0.5, 0.9, 1.0, -0.6, a);
  const Trace moved = two_ricker_signal(10.0, 0.5 + 20 * 0.002,
                                        0.9 + 20 * 0.002, 1.0, -0.6, a);
  for (std::size_t i = 20; i < a.nt(); ++i)
    EXPECT_NEAR(moved[i], base[i - 20], 1e-12);
}

TEST(TwoRicker, DistinctEventsAddEnergy) {
  const TimeAxis a(4001, 0.001);
  const double fp = 10.0;
  const Trace two = two_ricker_signal(fp, 1.0, 1.0 + 12.0 / fp, 1.0, 1.0, a);
  const Trace one = ricker({fp, 1.0, 1.0}, a);
  std::vector<double> sq2(a.nt()), sq1(a.nt());
  for (std::size_t i = 0; i < a.nt(); ++i) {
    sq2[i] = two[i] * two[i];
    sq1[i] = one[i] * one[i];
  }
  const double ratio = std::sqrt(oracle::trapezoid(sq2, a.dt())
                                 / oracle::trapezoid(sq1, a.dt()));
  EXPECT_NEAR(ratio, std::sqrt(2.0), 0.01 * std::sqrt(2.0));
}

TEST(TwoRicker, RejectsOffAxisEvents) {
  const TimeAxis a(101, 0.01);
  EXPECT_THROW(two_ricker_signal(10.0, -0.1, 0.5, 1, 1, a), ConfigError);
  EXPECT_THROW(two_ricker_signal(10.0, 0.1, 1.5, 1, 1, a), ConfigError);
}

TEST(Highpass, RemovesDc) {
  const TimeAxis a(2001, 0.002);
  const Trace dc(a, std::vector<double>(a.nt(), 3.0));
  const Trace out = highpass(dc, 2.0);
  EXPECT_LT(out.max_abs(), 1e-2 * 3.0);
}

TEST(Highpass, PassesTenTimesCutoff) {
  const TimeAxis a(4001, 0.001);
  const double fc = 2.0;
  Trace s(a);
  for (std::size_t i = 0; i < a.nt(); ++i)
    s[i] = std::sin(2.0 * std::numbers::pi * 10.0 * fc * a.time(i));
  const Trace out = highpass(s, fc);
  const double r_in = rms(s.samples, 500, 3500);
  const double r_out = rms(out.samples, 500, 3500);
  EXPECT_NEAR(r_out / r_in, 1.0, 0.12);
}

TEST(Highpass, AttenuatesStopband) {
  const TimeAxis a(8001, 0.001);
  const double fc = 4.0;
  Trace s(a);
  for (std::size_t i = 0; i < a.nt(); ++i)
    s[i] = std::sin(2.0 * std::numbers::pi * 0.4 * a.time(i));
  const Trace out = highpass(s, fc);
  // 0.1 fc: the squared 4th-order response is ~ -160 dB; ask for 40 dB.
  EXPECT_LT(rms(out.samples, 2000, 6000), 1e-2 * rms(s.samples, 2000, 6000));
}

TEST(Highpass, ZeroStaysZero) {
  const TimeAxis a(500, 0.002);
  const Trace out = highpass(Trace(a), 2.0);
  for (double v : out.samples)
    EXPECT_EQ(v, 0.0);
}

TEST(Highpass, RejectsCutoffAboveNyquist) {
  const TimeAxis a(500, 0.002);
  EXPECT_THROW(highpass(Trace(a), 250.0), ConfigError);
  EXPECT_THROW(highpass(Trace(a), 0.0), ConfigError);
}

TEST(Highpass, IsLinear) {
  auto g = oracle::rng(3);
  const TimeAxis a(800, 0.002);
  const Trace x(a, oracle::normal_vector(g, 800));
  const Trace y(a, oracle::normal_vector(g, 800));
  Trace z(a);
  for (std::size_t i = 0; i < 800; ++i)
    z[i] = 2.0 * x[i] - 0.5 * y[i];
  const Trace hx = highpass(x, 3.0), hy = highpass(y, 3.0), hz = highpass(z, 3.0);
  for (std::size_t i = 0; i < 800; ++i)
    EXPECT_NEAR(hz[i], 2.0 * hx[i] - 0.5 * hy[i], 1e-10);
}

TEST(Highpass, NearlyIdempotentOnBandLimitedInput) {
  const TimeAxis a(3001, 0.001);
  const Trace x = ricker({20.0, 1.5, 1.0}, a);
  const Trace h1 = highpass(x, 2.0);
  const Trace h2 = highpass(h1, 2.0);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.nt(); ++i) {
    num += (h2[i] - h1[i]) * (h2[i] - h1[i]);
    den += h1[i] * h1[i];
  }
  EXPECT_LE(std::sqrt(num), 0.02 * std::sqrt(den));
}

TEST(Highpass, PreservesArrivalTime) {
  const TimeAxis a(3001, 0.001);
  const Trace x = ricker({15.0, 1.2, 1.0}, a);
  const Trace h = highpass(x, 2.0);
  std::size_t arg = 0;
  for (std::size_t i = 0; i < a.nt(); ++i)
    if (std::abs(h[i]) > std::abs(h[arg]))
      arg = i;
  EXPECT_EQ(arg, 1200u);
}
