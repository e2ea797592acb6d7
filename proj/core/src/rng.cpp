#include "photon_da/rng.hpp"

#include "photon_da/errors.hpp"

namespace photon_da {

namespace {

constexpr std::uint32_t kPhiloxW32A = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW32B = 0xBB67AE85;
constexpr std::uint32_t kPhiloxM4x32A = 0xD2511F53;
constexpr std::uint32_t kPhiloxM4x32B = 0xCD9E8D57;

inline void mul_hi_lo(std::uint32_t a, std::uint32_t b, std::uint32_t* hi,
                      std::uint32_t* lo) {
  std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  *hi = static_cast<std::uint32_t>(p >> 32);
  *lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::array<std::uint32_t, 4> PhiloxRng::block(
    const std::array<std::uint32_t, 4>& counter,
    const std::array<std::uint32_t, 2>& key) {
  std::array<std::uint32_t, 4> c = counter;
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mul_hi_lo(kPhiloxM4x32A, c[0], &hi0, &lo0);
    mul_hi_lo(kPhiloxM4x32B, c[2], &hi1, &lo1);
    c = {hi1 ^ c[1] ^ k0, lo1, hi0 ^ c[3] ^ k1, lo0};
    k0 += kPhiloxW32A;
    k1 += kPhiloxW32B;
  }
  return c;
}

PhiloxRng::PhiloxRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream) {}

void PhiloxRng::refill() {
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(block_),
      static_cast<std::uint32_t>(block_ >> 32),
      static_cast<std::uint32_t>(stream_),
      static_cast<std::uint32_t>(stream_ >> 32)};
  const std::array<std::uint32_t, 2> key = {
      static_cast<std::uint32_t>(seed_),
      static_cast<std::uint32_t>(seed_ >> 32)};
  buf_ = block(counter, key);
  ++block_;
  used_ = 0;
}

std::uint32_t PhiloxRng::next_u32() {
  if (used_ >= 4) refill();
  return buf_[used_++];
}

std::uint64_t PhiloxRng::next_u64() {
  std::uint64_t lo = next_u32();
  std::uint64_t hi = next_u32();
  return (hi << 32) | lo;
}

double PhiloxRng::uniform() {
  // (x + 0.5) / 2^32 lies strictly inside (0, 1).
  return (static_cast<double>(next_u32()) + 0.5) * 0x1p-32;
}

double PhiloxRng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

std::uint64_t PhiloxRng::uniform_int(std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_int: n must be positive");
  // Modulo bias is < 2^-32 for every n used here (sample counts, indices).
  return next_u64() % n;
}

PhiloxRng::State PhiloxRng::state() const {
  State s;
  s.seed = seed_;
  s.stream = stream_;
  s.block = block_;
  s.used = used_;
  return s;
}

PhiloxRng PhiloxRng::restore(const State& s) {
  PhiloxRng rng(s.seed, s.stream);
  if (s.used < 4 || s.block > 0) {
    // Reproduce the buffered block, then the consumed position.
    rng.block_ = s.block > 0 && s.used < 4 ? s.block - 1 : s.block;
    if (s.used < 4) {
      rng.refill();
      rng.used_ = s.used;
    }
  }
  return rng;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // One Philox block keyed by the master seed, with a fixed tag in the high
  // counter words so derived streams never collide with data streams.
  const std::array<std::uint32_t, 4> counter = {
      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
      0x5EED5EEDu, 0x0DDC0DE5u};
  const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(master),
                                            static_cast<std::uint32_t>(master >> 32)};
  auto out = PhiloxRng::block(counter, key);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

}  // namespace photon_da
