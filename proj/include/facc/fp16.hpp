#ifndef FACC_FP16_HPP
#define FACC_FP16_HPP

#include <cstdint>

namespace facc {

// IEEE-754 binary16 value held as its raw bit pattern.
//
// All arithmetic in the engine model runs through the soft-float routines
// below, which emulate the hardware units bit-for-bit: round-to-nearest-even,
// a single rounding per operation, subnormals kept (optional flush-to-zero),
// overflow saturating to +/-infinity, and one canonical quiet NaN.
class Half {
  public:
    constexpr Half() = default;

    static constexpr Half from_bits(std::uint16_t bits) {
        Half h;
        h.bits_ = bits;
        return h;
    }

    constexpr std::uint16_t bits() const { return bits_; }

    friend constexpr bool operator==(Half a, Half b) { return a.bits_ == b.bits_; }
    friend constexpr bool operator!=(Half a, Half b) { return a.bits_ != b.bits_; }

  private:
    std::uint16_t bits_ = 0;
};

inline constexpr std::uint16_t kCanonicalNanBits = 0x7E00;
inline constexpr std::uint16_t kPositiveInfBits = 0x7C00;
inline constexpr std::uint16_t kNegativeInfBits = 0xFC00;

constexpr bool half_sign(Half h) { return (h.bits() & 0x8000u) != 0; }
constexpr bool half_is_nan(Half h) {
    return (h.bits() & 0x7C00u) == 0x7C00u && (h.bits() & 0x03FFu) != 0;
}
constexpr bool half_is_inf(Half h) { return (h.bits() & 0x7FFFu) == 0x7C00u; }
constexpr bool half_is_zero(Half h) { return (h.bits() & 0x7FFFu) == 0; }
constexpr bool half_is_subnormal(Half h) {
    return (h.bits() & 0x7C00u) == 0 && (h.bits() & 0x03FFu) != 0;
}

// Nearest binary16 under round-to-nearest-even. Total over finite and
// infinite inputs; overflow saturates to the matching infinity, NaN maps to
// the canonical quiet NaN. flush_subnormals drops subnormal results to
// signed zero (experiment knob, off by default).
Half real_to_half(double x, bool flush_subnormals = false);

// Exact decode; every finite binary16 is representable in binary64.
// NaN decodes to the binary64 quiet NaN marker.
double half_to_real(Half h);

// Hardware arithmetic ops. Each performs exactly one rounding.
Half half_add(Half a, Half b, bool flush_subnormals = false);
Half half_mul(Half a, Half b, bool flush_subnormals = false);
Half half_div(Half a, Half b, bool flush_subnormals = false);

// Comparator primitive: strict greater-than with -0 == +0.
// NaN operands are a contract violation and throw.
bool half_gt(Half a, Half b);

// Per-operation pipeline latencies of the engine's arithmetic units, in
// cycles of the 100 MHz compute clock.
struct LatencyTable {
    unsigned mul = 6;
    unsigned add = 2;
    unsigned cmp = 2;
    unsigned div = 6;
    unsigned fifo_write = 6;  // delay from producer write to consumer-visible
};

enum class OpKind { mul, add, cmp, div, fifo_write };

unsigned latency_of(OpKind kind, const LatencyTable& table = LatencyTable{});

}  // namespace facc

#endif
