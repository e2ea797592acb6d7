#pragma once

#include <array>
#include <cstdint>

namespace photon_da {

/// Counter-based random engine (Philox 4x32-10).
///
/// A generator is addressed by (seed, stream): the seed becomes the Philox
/// key and the stream index occupies the high counter words, so any number
/// of logical streams drawn from one seed are independent and any element
/// of any stream can be produced without generating its predecessors. This
/// is what makes simulation output identical for every parallel schedule:
/// each histogram voxel owns stream = its flat index.
class PhiloxRng {
 public:
  explicit PhiloxRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();

  /// Uniform draw in the open interval (0, 1); never returns 0 or 1, so
  /// logs of draws are always finite.
  double uniform();

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi);

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t uniform_int(std::uint64_t n);

  /// Serializable position: (stream, next block index, words consumed).
  struct State {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::uint64_t block = 0;
    std::uint32_t used = 0;
  };
  State state() const;
  static PhiloxRng restore(const State& s);

  /// One Philox 4x32-10 block: 4 output words from a 128-bit counter and a
  /// 64-bit key. Exposed for tests against reference vectors.
  static std::array<std::uint32_t, 4> block(
      const std::array<std::uint32_t, 4>& counter,
      const std::array<std::uint32_t, 2>& key);

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  std::uint32_t used_ = 4;  // words consumed from buf_
};

/// Derives an independent child seed from a master seed. Used to split one
/// dataset seed into per-sample scene/noise seeds without correlation.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

}  // namespace photon_da
