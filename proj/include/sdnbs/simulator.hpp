#pragma once

// Monte Carlo counterpart of the delay model.
//
// Each slot draws N ~ Poisson(b), caches the rules of a uniformly random
// C-subset of the N users, lets every user send one packet, and records the
// fraction of packets whose rule had to be fetched from the controller.
// Results are in units of d_ctrl.
//
// The placement rule is the model's per-slot uniform re-selection, not an
// LRU/FIFO cache; rule replacement policies are outside the model.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string_view>
#include <thread>
#include <vector>

#include "sdnbs/delay_model.hpp"
#include "sdnbs/random.hpp"
#include "sdnbs/specfun.hpp"

namespace sdnbs {

enum class Estimator {
  packet_level,  // simulate the table and count misses
  conditional,   // average (1 - C/N)^+ over the Poisson draws (Rao-Blackwellized)
};

inline std::string_view to_string(Estimator e) {
  return e == Estimator::packet_level ? "packet_level" : "conditional";
}

struct SimConfig {
  std::uint64_t slots = 100'000;
  std::uint64_t seed = 1;
  Estimator estimator = Estimator::packet_level;

  void validate() const {
    if (slots < 1) throw std::invalid_argument("SimConfig.slots must be >= 1");
  }
};

struct SimEstimate {
  double mean = 0.0;  // normalized delay
  double std_error = 0.0;
  double ci95_low = 0.0;
  double ci95_high = 0.0;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
};

/// Draws from Poisson(b).
///
/// b < 30: inversion by sequential search from k = 0.
/// b >= 30: Hörmann's PTRS transformed rejection with squeeze, which is exact
/// and needs ~1.2 uniform pairs per draw on average.
template <typename Rng>
std::uint64_t sample_poisson(Rng& rng, double b) {
  detail::require_positive_load(b, "sample_poisson");
  if (b < 30.0) {
    const double u = rng.uniform_open();
    std::uint64_t k = 0;
    double p = std::exp(-b);
    double cdf = p;
    while (u > cdf) {
      ++k;
      p *= b / static_cast<double>(k);
      const double next = cdf + p;
      if (next == cdf) break;  // u sits in the last representable sliver
      cdf = next;
    }
    return k;
  }

  const double slam = std::sqrt(b);
  const double loglam = std::log(b);
  const double bb = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * bb;
  const double inv_alpha = 1.1239 + 1.1328 / (bb - 3.4);
  const double vr = 0.9277 - 3.6224 / (bb - 2.0);
  for (;;) {
    const double u = rng.uniform_open() - 0.5;
    const double v = rng.uniform_open();
    const double us = 0.5 - std::abs(u);
    const double kf = std::floor((2.0 * a / us + bb) * u + b + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(kf);
    if (kf < 0.0 || (us < 0.013 && v > us)) continue;
    const auto k = static_cast<std::uint64_t>(kf);
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + bb) <=
        -b + kf * loglam - log_factorial(k)) {
      return k;
    }
  }
}

/// Reusable per-thread buffers for simulate_slot.
struct SlotScratch {
  std::vector<std::uint32_t> users;
  std::vector<std::uint8_t> cached;
};

/// One slot with n users: cache a uniform C-subset (partial Fisher–Yates),
/// send one packet per user, return the fraction that missed.
template <typename Rng>
double simulate_slot(Rng& rng, std::uint64_t n, std::uint64_t capacity, SlotScratch& scratch) {
  if (n <= capacity) return 0.0;
  auto& users = scratch.users;
  auto& cached = scratch.cached;
  users.resize(n);
  std::iota(users.begin(), users.end(), std::uint32_t{0});
  cached.assign(n, 0);
  for (std::uint64_t i = 0; i < capacity; ++i) {
    const std::uint64_t j = i + rng.bounded(n - i);
    std::swap(users[i], users[j]);
    cached[users[i]] = 1;
  }
  std::uint64_t misses = 0;
  for (std::uint64_t user = 0; user < n; ++user) {
    if (!cached[user]) ++misses;
  }
  return static_cast<double>(misses) / static_cast<double>(n);
}

template <typename Rng>
double simulate_slot(Rng& rng, std::uint64_t n, std::uint64_t capacity) {
  SlotScratch scratch;
  return simulate_slot(rng, n, capacity, scratch);
}

namespace detail {

// Welford running moments with Chan's pairwise merge.
struct Moments {
  std::uint64_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  void merge(const Moments& other) {
    if (other.count == 0) return;
    if (count == 0) {
      *this = other;
      return;
    }
    const double n1 = static_cast<double>(count);
    const double n2 = static_cast<double>(other.count);
    const double n = n1 + n2;
    const double delta = other.mean - mean;
    mean += delta * n2 / n;
    m2 += other.m2 + delta * delta * n1 * n2 / n;
    count += other.count;
  }
};

inline constexpr std::uint64_t kSlotsPerChunk = 4096;

}  // namespace detail

/// Monte Carlo estimate of the normalized expected delay.
///
/// Slots are grouped into fixed chunks of 4096; chunks may run on any of
/// `threads` workers (0 = hardware concurrency) and are merged in chunk order,
/// so the estimate is bit-identical for every thread count.
inline SimEstimate estimate_expected_delay(const ModelParams& params, const SimConfig& cfg,
                                           unsigned threads = 0) {
  params.validate();
  cfg.validate();
  const double b = params.load();
  const std::uint64_t capacity = params.capacity;
  const std::uint64_t chunks = (cfg.slots + detail::kSlotsPerChunk - 1) / detail::kSlotsPerChunk;
  std::vector<detail::Moments> partial(chunks);

  auto run_chunk = [&](std::uint64_t chunk, SlotScratch& scratch) {
    detail::Moments m;
    const std::uint64_t first = chunk * detail::kSlotsPerChunk;
    const std::uint64_t last = std::min(cfg.slots, first + detail::kSlotsPerChunk);
    for (std::uint64_t slot = first; slot < last; ++slot) {
      auto rng = Xoshiro256StarStar::stream(cfg.seed, slot);
      const std::uint64_t n = b > 0.0 ? sample_poisson(rng, b) : 0;
      const double value = cfg.estimator == Estimator::packet_level
                               ? simulate_slot(rng, n, capacity, scratch)
                               : per_packet_delay(n, capacity, 1.0);
      m.add(value);
    }
    partial[chunk] = m;
  };

  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, chunks));
  if (threads <= 1) {
    SlotScratch scratch;
    for (std::uint64_t c = 0; c < chunks; ++c) run_chunk(c, scratch);
  } else {
    std::atomic<std::uint64_t> next{0};
    std::vector<std::jthread> workers;
    workers.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      workers.emplace_back([&] {
        SlotScratch scratch;
        for (std::uint64_t c = next++; c < chunks; c = next++) run_chunk(c, scratch);
      });
    }
  }

  detail::Moments total;
  for (const auto& m : partial) total.merge(m);

  SimEstimate est;
  est.samples = total.count;
  est.seed = cfg.seed;
  est.mean = std::clamp(total.mean, 0.0, 1.0);
  if (total.count > 1) {
    const double variance = total.m2 / static_cast<double>(total.count - 1);
    est.std_error = std::sqrt(std::max(variance, 0.0) / static_cast<double>(total.count));
  }
  est.ci95_low = est.mean - 1.96 * est.std_error;
  est.ci95_high = est.mean + 1.96 * est.std_error;
  return est;
}

}  // namespace sdnbs
