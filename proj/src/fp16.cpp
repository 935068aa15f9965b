#include "facc/fp16.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace facc {
namespace {

constexpr std::uint16_t kSignMask = 0x8000;
constexpr std::uint16_t kFracMask = 0x03FF;

// Internal significand convention: the hidden bit sits at bit 16, leaving
// 6 guard bits below the 10-bit fraction. Six guard bits are enough that a
// single sticky (jam) bit at the bottom survives the <=1-bit left
// renormalisation possible after a subtraction that lost precision.
constexpr int kGuardBits = 6;
constexpr std::uint32_t kHidden = 1u << (10 + kGuardBits);  // 1 << 16
constexpr std::uint32_t kRoundHalf = 1u << (kGuardBits - 1);
constexpr std::uint32_t kGuardMask = (1u << kGuardBits) - 1;

constexpr std::uint16_t pack_raw(bool sign, unsigned exp, unsigned frac) {
    return static_cast<std::uint16_t>((sign ? kSignMask : 0) | (exp << 10) | frac);
}

constexpr Half make_zero(bool sign) { return Half::from_bits(sign ? kSignMask : 0); }
constexpr Half make_inf(bool sign) {
    return Half::from_bits(sign ? kNegativeInfBits : kPositiveInfBits);
}
constexpr Half make_nan() { return Half::from_bits(kCanonicalNanBits); }

// Right shift that ORs every dropped bit into the result's lsb.
std::uint32_t shift_right_jam(std::uint32_t sig, int n) {
    if (n <= 0) return sig;
    if (n >= 31) return sig != 0 ? 1 : 0;
    std::uint32_t dropped = sig & ((1u << n) - 1);
    return (sig >> n) | (dropped != 0 ? 1 : 0);
}

// Normalise, round to nearest-even and pack. `e` is the biased exponent of
// a significand whose hidden bit is expected at kHidden. Handles subnormal
// results, rounding carries, and overflow to infinity.
Half round_pack(bool sign, int e, std::uint32_t sig, bool ftz) {
    if (sig == 0) return make_zero(sign);
    while (sig >= (kHidden << 1)) {
        sig = (sig >> 1) | (sig & 1);
        ++e;
    }
    if (e < 1) {
        sig = shift_right_jam(sig, 1 - e);
        e = 1;
    } else {
        while (sig < kHidden && e > 1) {
            sig <<= 1;
            --e;
        }
    }
    std::uint32_t rb = sig & kGuardMask;
    sig >>= kGuardBits;
    if (rb > kRoundHalf || (rb == kRoundHalf && (sig & 1))) ++sig;
    if (sig >= (1u << 11)) {
        sig >>= 1;
        ++e;
    }
    if (sig >= (1u << 10)) {  // normal
        if (e >= 31) return make_inf(sign);
        return Half::from_bits(pack_raw(sign, static_cast<unsigned>(e), sig & kFracMask));
    }
    // subnormal (biased exponent pinned at 1, stored exponent 0)
    if (sig == 0 || ftz) return make_zero(sign);
    return Half::from_bits(pack_raw(sign, 0, sig));
}

struct Unpacked {
    bool sign;
    int e;               // biased exponent; subnormals report 1
    std::uint32_t sig;   // significand with hidden bit at position 10
};

Unpacked unpack(Half h) {
    Unpacked u;
    u.sign = half_sign(h);
    unsigned exp = (h.bits() >> 10) & 0x1F;
    unsigned frac = h.bits() & kFracMask;
    if (exp == 0) {
        u.e = 1;
        u.sig = frac;
    } else {
        u.e = static_cast<int>(exp);
        u.sig = frac | 0x400u;
    }
    return u;
}

// Shift a nonzero significand up until the hidden bit is set; exponent may
// go below 1 (the round/pack stage shifts it back down).
void normalize(Unpacked& u) {
    while (u.sig < 0x400u) {
        u.sig <<= 1;
        --u.e;
    }
}

bool daz(Half h, bool ftz) { return ftz && half_is_subnormal(h); }

}  // namespace

Half real_to_half(double x, bool flush_subnormals) {
    std::uint64_t b = std::bit_cast<std::uint64_t>(x);
    bool sign = (b >> 63) != 0;
    int de = static_cast<int>((b >> 52) & 0x7FF);
    std::uint64_t dm = b & ((std::uint64_t{1} << 52) - 1);
    if (de == 0x7FF) {
        if (dm != 0) return make_nan();
        return make_inf(sign);
    }
    if (de == 0 && dm == 0) return make_zero(sign);
    // binary64 subnormals are below 2^-1022, far under half the smallest
    // binary16 subnormal; they all round to signed zero.
    if (de == 0) return make_zero(sign);
    std::uint64_t sig53 = dm | (std::uint64_t{1} << 52);
    int e_unbiased = de - 1023;
    // Collapse the 53-bit significand to hidden-at-16 with a jam bit.
    std::uint64_t dropped = sig53 & ((std::uint64_t{1} << 36) - 1);
    std::uint32_t sig = static_cast<std::uint32_t>(sig53 >> 36) | (dropped != 0 ? 1 : 0);
    return round_pack(sign, e_unbiased + 15, sig, flush_subnormals);
}

double half_to_real(Half h) {
    if (half_is_nan(h)) return std::numeric_limits<double>::quiet_NaN();
    bool sign = half_sign(h);
    if (half_is_inf(h)) {
        return sign ? -std::numeric_limits<double>::infinity()
                    : std::numeric_limits<double>::infinity();
    }
    Unpacked u = unpack(h);
    double mag = std::ldexp(static_cast<double>(u.sig), u.e - 15 - 10);
    return sign ? -mag : mag;
}

Half half_add(Half a, Half b, bool flush_subnormals) {
    if (half_is_nan(a) || half_is_nan(b)) return make_nan();
    if (half_is_inf(a) || half_is_inf(b)) {
        if (half_is_inf(a) && half_is_inf(b) && half_sign(a) != half_sign(b)) return make_nan();
        return half_is_inf(a) ? a : b;
    }
    if (daz(a, flush_subnormals)) a = make_zero(half_sign(a));
    if (daz(b, flush_subnormals)) b = make_zero(half_sign(b));
    if (half_is_zero(a) && half_is_zero(b)) {
        // +0 unless both operands carry the negative sign
        return make_zero(half_sign(a) && half_sign(b));
    }
    if (half_is_zero(a)) return b;
    if (half_is_zero(b)) return a;

    Unpacked ua = unpack(a);
    Unpacked ub = unpack(b);
    std::uint32_t sa = ua.sig << kGuardBits;
    std::uint32_t sb = ub.sig << kGuardBits;
    if (ua.e < ub.e) {
        sa = shift_right_jam(sa, ub.e - ua.e);
    } else if (ub.e < ua.e) {
        sb = shift_right_jam(sb, ua.e - ub.e);
    }
    int e = ua.e > ub.e ? ua.e : ub.e;
    if (ua.sign == ub.sign) {
        return round_pack(ua.sign, e, sa + sb, flush_subnormals);
    }
    // Effective subtraction: result takes the sign of the larger magnitude;
    // exact cancellation yields +0 under round-to-nearest.
    if (sa == sb) return make_zero(false);
    bool sign = sa > sb ? ua.sign : ub.sign;
    std::uint32_t diff = sa > sb ? sa - sb : sb - sa;
    return round_pack(sign, e, diff, flush_subnormals);
}

Half half_mul(Half a, Half b, bool flush_subnormals) {
    if (half_is_nan(a) || half_is_nan(b)) return make_nan();
    bool sign = half_sign(a) != half_sign(b);
    if (half_is_inf(a) || half_is_inf(b)) {
        if (half_is_zero(a) || half_is_zero(b)) return make_nan();
        return make_inf(sign);
    }
    if (daz(a, flush_subnormals)) a = make_zero(half_sign(a));
    if (daz(b, flush_subnormals)) b = make_zero(half_sign(b));
    if (half_is_zero(a) || half_is_zero(b)) return make_zero(sign);

    Unpacked ua = unpack(a);
    Unpacked ub = unpack(b);
    normalize(ua);
    normalize(ub);
    // 11x11-bit product lands in [2^20, 2^22); round_pack's jam shift walks
    // the hidden bit back down to position 16. The significand convention is
    // value == sig * 2^(e - 31), so e = ea + eb - 50 + 31.
    std::uint32_t prod = ua.sig * ub.sig;
    return round_pack(sign, ua.e + ub.e - 19, prod, flush_subnormals);
}

Half half_div(Half a, Half b, bool flush_subnormals) {
    if (half_is_nan(a) || half_is_nan(b)) return make_nan();
    bool sign = half_sign(a) != half_sign(b);
    if (half_is_inf(a)) {
        if (half_is_inf(b)) return make_nan();
        return make_inf(sign);
    }
    if (half_is_inf(b)) return make_zero(sign);
    if (daz(a, flush_subnormals)) a = make_zero(half_sign(a));
    if (daz(b, flush_subnormals)) b = make_zero(half_sign(b));
    if (half_is_zero(b)) {
        if (half_is_zero(a)) return make_nan();
        return make_inf(sign);
    }
    if (half_is_zero(a)) return make_zero(sign);

    Unpacked ua = unpack(a);
    Unpacked ub = unpack(b);
    normalize(ua);
    normalize(ub);
    // Long division with 16 extra quotient bits; a nonzero remainder only
    // matters as sticky.
    std::uint64_t num = static_cast<std::uint64_t>(ua.sig) << 16;
    std::uint32_t q = static_cast<std::uint32_t>(num / ub.sig);
    std::uint32_t rem = static_cast<std::uint32_t>(num % ub.sig);
    if (rem != 0) q |= 1;
    // q in (2^15, 2^17); hidden target is bit 16.
    return round_pack(sign, ua.e - ub.e + 15, q, flush_subnormals);
}

bool half_gt(Half a, Half b) {
    if (half_is_nan(a) || half_is_nan(b)) {
        throw std::domain_error("fp16 comparator: NaN operand");
    }
    // Signed-magnitude to two's-complement ordering key; +-0 map to 0.
    auto key = [](Half h) {
        std::int32_t mag = h.bits() & 0x7FFF;
        return half_sign(h) ? -mag : mag;
    };
    return key(a) > key(b);
}

unsigned latency_of(OpKind kind, const LatencyTable& table) {
    switch (kind) {
        case OpKind::mul: return table.mul;
        case OpKind::add: return table.add;
        case OpKind::cmp: return table.cmp;
        case OpKind::div: return table.div;
        case OpKind::fifo_write: return table.fifo_write;
    }
    throw std::invalid_argument("latency_of: unknown op kind");
}

}  // namespace facc
