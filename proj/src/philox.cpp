#include "sfde/philox.hpp"

#include <stdexcept>

namespace sfde {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

// Counter layout: word 0 is the block index, word 1 the channel, words 2-3
// the stream (path) index.
PhiloxStream::PhiloxStream(std::uint64_t seed, std::uint64_t stream, std::uint32_t channel) noexcept
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      counter_{0u, channel, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

PhiloxStream::result_type PhiloxStream::operator()() {
  if (next_ == 4) refill();
  return block_[next_++];
}

void PhiloxStream::refill() {
  block_ = philox4x32_10(counter_, key_);
  if (++counter_[0] == 0) throw std::overflow_error("philox stream exhausted");
  next_ = 0;
}

}  // namespace sfde
