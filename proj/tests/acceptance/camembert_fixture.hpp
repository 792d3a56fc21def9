//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

// Camembert thresholds. The correlation ceiling is the criterion itself.
// The RMSE ratios are frozen from the first verified run (linear/start
// 0.810, linear/square 0.806, correlation -0.335) with some headroom.

namespace fixture {

inline constexpr double kCorrelationCeiling = 0.5;
inline constexpr double kLinearVsStartRatio = 0.85;
inline constexpr double kLinearVsSquareRatio = 0.85;

} // namespace fixture
