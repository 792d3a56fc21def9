//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <string_view>

namespace otfwi::log {

enum class Level { quiet = 0, warn = 1, info = 2, debug = 3 };

inline std::atomic<Level> &threshold() {
  static std::atomic<Level> level{Level::warn};
  return level;
}

inline void set_level(Level l) { threshold().store(l); }

inline void write(Level l, std::string_view tag, std::string_view msg) {
  if (static_cast<int>(l) > static_cast<int>(threshold().load()))
    return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::clog << "[otfwi " << tag << "] " << msg << '\n';
}

inline void warn(std::string_view msg) { write(Level::warn, "warn", msg); }
inline void info(std::string_view msg) { write(Level::info, "info", msg); }
inline void debug(std::string_view msg) { write(Level::debug, "debug", msg); }

} // namespace otfwi::log
