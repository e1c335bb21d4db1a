#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kedit {

// Reproducible, stream-splittable generator.
//
// Algorithm: the engine is std::mt19937_64, whose output sequence is fixed by
// the C++ standard. Its seed is splitmix64(master_seed ^ splitmix64(stream_id)),
// so distinct stream ids give decorrelated engines.
//   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
//   symmetric()= 2*uniform() - 1, in [-1, 1); an exact -1 is redrawn
//   normal()   = Box-Muller on two uniforms (u1 in (0,1]), both outputs used
// No std::*_distribution is involved, so draws are identical on every platform.
class RngStream {
 public:
  static constexpr std::string_view kAlgorithmId = "mt19937_64/splitmix64-seed/box-muller";

  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const noexcept { return master_seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double symmetric();
  double normal();
  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

// FNV-1a, used to turn string identifiers (case ids) into stream ids.
std::uint64_t fnv1a64(std::string_view text);

}  // namespace kedit
