#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace gemhp {

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed forms the key; the 128-bit counter is split into a 64-bit
/// block index (low half) and a 64-bit stream id (high half). `Rng(seed, k)`
/// therefore gives replication k its own non-overlapping stream regardless of
/// how replications are scheduled across workers.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept;

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept;
    double exponential(double rate) noexcept;
    double normal() noexcept;
    /// Index drawn with probability proportional to `weights`.
    std::size_t categorical(std::span<const double> weights) noexcept;

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }

    /// Independent stream derived from this one's seed.
    [[nodiscard]] Rng split(std::uint64_t stream) const noexcept { return Rng(seed_, stream); }

private:
    void refill() noexcept;

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_{0};
    std::array<std::uint32_t, 4> buffer_{};
    int used_{4};
};

} // namespace gemhp
