#pragma once

#include <algorithm>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <thread>
#include <vector>

namespace biortho {

/// SplitMix64; small state, good enough mixing for per-sample streams.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

/// Generator for sample `index` of a run seeded with `seed`.
inline SplitMix64 sample_stream(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 mix(seed ^ 0x6a09e667f3bcc909ULL);
  const std::uint64_t a = mix();
  SplitMix64 mix2(a + index * 0xd1b54a32d192ed03ULL);
  return SplitMix64(mix2());
}

inline std::size_t resolve_workers(std::size_t workers) {
  if (workers > 0) return workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

/// out[i] = f(i) for i < count, split into contiguous chunks over workers.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, std::size_t workers, F&& f) {
  std::vector<T> out(count);
  workers = std::min(resolve_workers(workers), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) out[i] = f(i);
    return out;
  }
  std::vector<std::thread> threads;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&out, &f, lo, hi] {
      for (std::size_t i = lo; i < hi; ++i) out[i] = f(i);
    });
  }
  for (auto& t : threads) t.join();
  return out;
}

/// Pairwise summation in a fixed index order.
template <class T>
T pairwise_sum(std::span<const T> v) {
  if (v.size() <= 16) {
    T s{};
    for (const T& x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace biortho
