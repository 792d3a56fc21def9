//
// otfwi - optimal-transport full waveform inversion
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <cstdlib>
#include <exception>
#include <algorithm>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "otfwi/error.hpp"

namespace otfwi {

/// Thread count: explicit request, else OTFWI_THREADS, else hardware.
inline std::size_t resolve_threads(std::optional<std::size_t> requested = {}) {
  if (requested && *requested > 0)
    return *requested;
  if (const char *env = std::getenv("OTFWI_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0)
        return static_cast<std::size_t>(v);
    } catch (const std::exception &) {
    }
    throw ConfigError(std::string("OTFWI_THREADS must be a positive integer, got '")
                      + env + "'");
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

/// Runs body(i) for i in [0, n) on up to `threads` workers. Items are
/// handed out round-robin; the first exception (lowest index) is rethrown
/// after all workers join.
template <class Body>
void parallel_for(std::size_t n, std::size_t threads, Body &&body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += threads) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  for (auto &th : pool)
    th.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

} // namespace otfwi
