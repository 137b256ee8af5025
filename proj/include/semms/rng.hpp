#ifndef SEMMS_RNG_HPP
#define SEMMS_RNG_HPP

#include <array>
#include <cstdint>

namespace semms {

// Philox4x32-10 counter-based generator.  Each (seed, stream) pair
// addresses an independent sequence, so parallel workers can draw from
// disjoint streams without any shared state.  Stream assignment used by
// the benchmark harness:
//   stream 0            simulation data for one replicate
//   stream 1000 + a     CV fold shuffle, refold attempt a
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                        std::array<std::uint32_t, 2> key);

class Rng {
 public:
  Rng(std::uint64_t seed, std::uint64_t stream);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal (Box-Muller, pairs cached per object).
  double normal();
  /// Exact Poisson draw by exponential inter-arrival counting; O(mean).
  long poisson(double mean);
  bool bernoulli(double p);
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int buf_pos_ = 4;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace semms

#endif
