#pragma once

#include <array>
#include <cstdint>

namespace nlheat {

// Philox4x32-10 counter-based generator. A block cipher over a 128-bit
// counter keyed by 64 bits; distinct (seed, stream) pairs give independent
// substreams, so parallel ensembles reproduce bit-identically regardless of
// scheduling.
struct Philox4x32 {
    std::array<std::uint32_t, 2> key{0, 0};

    std::array<std::uint32_t, 4> operator()(std::array<std::uint32_t, 4> ctr) const;
};

// Stream view over Philox blocks: uniform doubles, Gaussians (Box-Muller).
class CounterRng {
  public:
    CounterRng(std::uint64_t seed, std::uint64_t stream);

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    // uniform in (0,1), 53-bit resolution
    double next_double();
    double next_gaussian();

    std::uint64_t seed() const { return seed_; }
    std::uint64_t stream() const { return stream_; }

  private:
    void refill();

    Philox4x32 philox_;
    std::uint64_t seed_ = 0;
    std::uint64_t stream_ = 0;
    std::uint64_t counter_ = 0;
    std::array<std::uint32_t, 4> block_{};
    int pos_ = 4;
    double gauss_spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace nlheat
