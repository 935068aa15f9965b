#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "facc/engine.hpp"
#include "facc/errors.hpp"
#include "facc/fp16.hpp"
#include "facc/isa.hpp"
#include "facc/tensor.hpp"

using namespace facc;

namespace {

Half h(double v) { return real_to_half(v); }

LayerDescriptor conv_desc(std::size_t in_side, std::size_t k, std::size_t s, std::size_t p,
                          std::size_t ci, std::size_t co) {
    LayerDescriptor d;
    d.op_type = OpType::conv_relu;
    d.kernel = static_cast<std::uint8_t>(k);
    d.stride = static_cast<std::uint8_t>(s);
    d.padding = static_cast<std::uint8_t>(p);
    d.kernel_size = static_cast<std::uint8_t>(k * k);
    d.stride2 = static_cast<std::uint8_t>(s * k);
    d.input_side = static_cast<std::uint16_t>(in_side);
    d.output_side = static_cast<std::uint16_t>(output_side(in_side, k, p, s));
    d.input_channel = static_cast<std::uint16_t>(ci);
    d.output_channel = static_cast<std::uint16_t>(co);
    return d;
}

LayerDescriptor pool_desc(OpType op, std::size_t in_side, std::size_t k, std::size_t s,
                          std::size_t c) {
    LayerDescriptor d;
    d.op_type = op;
    d.kernel = static_cast<std::uint8_t>(k);
    d.stride = static_cast<std::uint8_t>(s);
    d.padding = 0;
    d.kernel_size = static_cast<std::uint8_t>(k * k);
    d.stride2 = static_cast<std::uint8_t>(s * k);
    d.input_side = static_cast<std::uint16_t>(in_side);
    d.output_side = static_cast<std::uint16_t>(output_side(in_side, k, 0, s));
    d.input_channel = static_cast<std::uint16_t>(c);
    d.output_channel = static_cast<std::uint16_t>(c);
    return d;
}

// Scalar replay of the arithmetic contract: one product per (tap, lane), a
// load-first fold over taps per lane, lanes folded into the running point
// accumulator in lane order, channel groups in ascending order, bias first,
// sign-test rectifier last. No queues, no cycles.
Half conv_point_oracle(const GemmTile& tile, const std::vector<Half>& weight_lines, Half bias,
                       bool ftz = false) {
    const std::size_t lanes = tile.lane_count;
    const std::size_t taps = tile.kernel_taps;
    Half acc = bias;
    for (std::size_t g = 0; g < tile.channel_groups; ++g) {
        std::array<Half, kMaxLanes> part{};
        for (std::size_t t = 0; t < taps; ++t) {
            for (std::size_t l = 0; l < lanes; ++l) {
                Half prod = half_mul(tile.at(g, t, l), weight_lines[(g * taps + t) * lanes + l], ftz);
                part[l] = t == 0 ? prod : half_add(part[l], prod, ftz);
            }
        }
        for (std::size_t l = 0; l < lanes; ++l) acc = half_add(acc, part[l], ftz);
    }
    if (half_sign(acc)) acc = Half{};
    return acc;
}

std::vector<Half> maxpool_oracle(const std::vector<Half>& lines, std::size_t lanes,
                                 std::size_t taps, Half init) {
    const std::size_t points = lines.size() / lanes / taps;
    std::vector<Half> out(points * lanes);
    for (std::size_t pt = 0; pt < points; ++pt) {
        for (std::size_t l = 0; l < lanes; ++l) {
            Half acc = init;
            for (std::size_t t = 0; t < taps; ++t) {
                Half v = lines[(pt * taps + t) * lanes + l];
                if (half_gt(v, acc)) acc = v;
            }
            out[pt * lanes + l] = acc;
        }
    }
    return out;
}

std::vector<Half> avgpool_oracle(const std::vector<Half>& lines, std::size_t lanes,
                                 std::size_t taps) {
    const Half divisor = real_to_half(static_cast<double>(taps));
    const std::size_t points = lines.size() / lanes / taps;
    std::vector<Half> out(points * lanes);
    for (std::size_t pt = 0; pt < points; ++pt) {
        for (std::size_t l = 0; l < lanes; ++l) {
            Half acc = lines[pt * taps * lanes + l];
            for (std::size_t t = 1; t < taps; ++t)
                acc = half_add(acc, lines[(pt * taps + t) * lanes + l]);
            out[pt * lanes + l] = half_div(acc, divisor);
        }
    }
    return out;
}

Half random_value(std::mt19937& rng) {
    std::uniform_real_distribution<double> dist(-3.0, 3.0);
    std::uniform_int_distribution<int> pick(0, 9);
    if (pick(rng) == 0) return Half{};  // exact +0 keeps padding paths honest
    return real_to_half(dist(rng));
}

// Raw filter taps (k*k*c channel-lowest) padded out to the aligned channel
// count with zero weights.
std::vector<Half> pad_filter(const std::vector<Half>& filter, std::size_t k, std::size_t c,
                             std::size_t c_aligned) {
    std::vector<Half> out(k * k * c_aligned);
    for (std::size_t tap = 0; tap < k * k; ++tap)
        for (std::size_t ch = 0; ch < c; ++ch) out[tap * c_aligned + ch] = filter[tap * c + ch];
    return out;
}

struct ConvFixture {
    LayerDescriptor desc;
    std::vector<GemmTile> tiles;
    std::vector<std::vector<Half>> filter_lines;
    std::vector<Half> biases;
};

ConvFixture random_conv_fixture(std::mt19937& rng, std::size_t lanes, std::size_t side,
                                std::size_t k, std::size_t s, std::size_t pad, std::size_t c,
                                std::size_t filters) {
    Tensor input(side, side, c);
    for (Half& v : input.data) v = random_value(rng);

    Tensor padded = pad_surface(input, Pad4(pad));
    Tensor aligned = pad_channels(padded, lanes);
    const std::size_t c_al = aligned.c;

    ConvFixture fx;
    fx.desc = conv_desc(side, k, s, pad, c, filters);
    fx.tiles = im2col_tiles(aligned, k, s, lanes);
    for (std::size_t f = 0; f < filters; ++f) {
        std::vector<Half> taps(k * k * c);
        for (Half& v : taps) v = random_value(rng);
        std::vector<Half> padded_taps = pad_filter(taps, k, c, c_al);
        fx.filter_lines.push_back(
            filter_weight_lines(std::span<const Half>(padded_taps), k, c_al, lanes));
        fx.biases.push_back(random_value(rng));
    }
    return fx;
}

}  // namespace

TEST_CASE("descriptor dispatch raises exactly one unit enable") {
    EngineState st{EngineConfig{}};
    CHECK_FALSE(st.cmac_enable);
    CHECK_FALSE(st.maxpool_enable);
    CHECK_FALSE(st.avepool_enable);

    csb_dispatch(conv_desc(5, 3, 1, 0, 8, 4), st);
    CHECK(st.cmac_enable);
    CHECK_FALSE(st.maxpool_enable);
    CHECK_FALSE(st.avepool_enable);

    csb_dispatch(pool_desc(OpType::maxpool, 7, 3, 2, 8), st);
    CHECK_FALSE(st.cmac_enable);
    CHECK(st.maxpool_enable);
    CHECK_FALSE(st.avepool_enable);

    csb_dispatch(pool_desc(OpType::avgpool, 13, 13, 1, 8), st);
    CHECK_FALSE(st.cmac_enable);
    CHECK_FALSE(st.maxpool_enable);
    CHECK(st.avepool_enable);

    csb_dispatch(LayerDescriptor{}, st);  // idle clears everything
    CHECK_FALSE(st.cmac_enable);
    CHECK_FALSE(st.maxpool_enable);
    CHECK_FALSE(st.avepool_enable);

    LayerDescriptor bad = conv_desc(5, 3, 1, 0, 8, 4);
    bad.output_side = 99;
    CHECK_THROWS_AS(csb_dispatch(bad, st), CommandError);
}

TEST_CASE("idle ticks advance the counter and nothing else") {
    EngineState st{EngineConfig{}};
    csb_dispatch(LayerDescriptor{}, st);
    for (int i = 0; i < 10; ++i) advance_cycle(st);
    CHECK(st.cycle == 10);
    CHECK_FALSE(st.busy());
    CHECK(st.p_fifo.empty());
    CHECK(st.result_fifo.empty());
}

TEST_CASE("one-hot weight line passes the selected lane through") {
    EngineState st{EngineConfig{}};
    csb_dispatch(conv_desc(1, 1, 1, 0, 8, 1), st);

    GemmTile tile;
    tile.lane_count = 8;
    tile.kernel_taps = 1;
    tile.channel_groups = 1;
    tile.lanes = {h(1.25), h(-2), h(0.5), h(3), h(-1), h(7), h(0.125), h(2)};

    std::vector<Half> weights(8, Half{});
    weights[0] = h(1.0);

    PieceOutput out = run_conv_piece(st, tile, weights, Half{});
    REQUIRE(out.values.size() == 1);
    CHECK(out.values[0] == h(1.25));
}

TEST_CASE("all-ones 3x3 window over eight channels folds to 72 plus bias") {
    EngineState st{EngineConfig{}};
    csb_dispatch(conv_desc(3, 3, 1, 0, 8, 1), st);

    GemmTile tile;
    tile.lane_count = 8;
    tile.kernel_taps = 9;
    tile.channel_groups = 1;
    tile.lanes.assign(72, h(1.0));

    std::vector<Half> weights(72, h(1.0));
    PieceOutput out = run_conv_piece(st, tile, weights, h(0.5));
    REQUIRE(out.values.size() == 1);
    CHECK(out.values[0] == h(72.5));
}

TEST_CASE("rectifier clamps negative folds to +0 by sign test") {
    EngineState st{EngineConfig{}};
    csb_dispatch(conv_desc(1, 1, 1, 0, 8, 1), st);

    GemmTile tile;
    tile.lane_count = 8;
    tile.kernel_taps = 1;
    tile.channel_groups = 1;
    tile.lanes.assign(8, h(1.0));

    std::vector<Half> weights(8, h(-1.0));
    PieceOutput out = run_conv_piece(st, tile, weights, h(0.25));
    REQUIRE(out.values.size() == 1);
    CHECK(out.values[0].bits() == 0x0000);
}

TEST_CASE("single line walks the pipe with the documented latencies") {
    // issue at 0; products visible at mul+fifo_write = 12; partials written at
    // 12+add, visible at 20; eight lane folds finish at 27, settle at 29; the
    // result turns visible at 35, so the piece retires after 36 cycles.
    EngineState st{EngineConfig{}};
    csb_dispatch(conv_desc(1, 1, 1, 0, 8, 1), st);

    GemmTile tile;
    tile.lane_count = 8;
    tile.kernel_taps = 1;
    tile.channel_groups = 1;
    tile.lanes.assign(8, h(2.0));

    PieceOutput out = run_conv_piece(st, tile, std::vector<Half>(8, h(1.0)), Half{});
    CHECK(out.stats.total_cycles == 36);
    CHECK(out.stats.first_issue == 0);
    CHECK(out.stats.last_issue == 0);
    CHECK(out.stats.mul_busy == 1);
    CHECK(out.stats.psum_add_busy == 0);  // a single tap only loads
    CHECK(out.stats.fsum_add_busy == 8);
    CHECK(out.stats.issue_bubbles == 0);
    CHECK(out.stats.stall_cycles == 0);
    CHECK(st.cycle == 36);
}

TEST_CASE("random pieces match the scalar fold oracle bit for bit") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0001u);
    std::uniform_int_distribution<std::size_t> pick_k(0, 1);
    std::uniform_int_distribution<std::size_t> pick_s(1, 2);
    std::uniform_int_distribution<std::size_t> pick_c(1, 24);
    std::uniform_int_distribution<std::size_t> pick_f(1, 8);
    std::uniform_int_distribution<std::size_t> pick_pad(0, 1);

    for (int trial = 0; trial < 48; ++trial) {
        const std::size_t k = pick_k(rng) == 0 ? 1 : 3;
        const std::size_t s = pick_s(rng);
        const std::size_t pad = k == 1 ? 0 : pick_pad(rng);
        const std::size_t c = pick_c(rng);
        const std::size_t filters = pick_f(rng);

        // size the output run so the whole surface fits one piece
        const std::size_t groups = (c + cfg.parallelism - 1) / cfg.parallelism;
        std::size_t out_cap = 1;
        while (out_cap < 10) {
            const std::size_t next = out_cap + 1;
            if (next * next * groups * k * k > cfg.data_cache_depth) break;
            if (next * next > cfg.max_output_side) break;
            if (filters * next * next > cfg.result_fifo_depth) break;
            out_cap = next;
        }
        std::uniform_int_distribution<std::size_t> pick_out(1, out_cap);
        const std::size_t out = pick_out(rng);
        const std::size_t side = (out - 1) * s + k - 2 * pad;

        ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, side, k, s, pad, c, filters);
        csb_dispatch(fx.desc, st);
        PieceOutput got = run_conv_piece(st, fx.tiles, fx.filter_lines, fx.biases);
        REQUIRE(got.values.size() == filters * fx.tiles.size());

        for (std::size_t f = 0; f < filters; ++f) {
            for (std::size_t pt = 0; pt < fx.tiles.size(); ++pt) {
                Half want = conv_point_oracle(fx.tiles[pt], fx.filter_lines[f], fx.biases[f]);
                CHECK(got.values[f * fx.tiles.size() + pt].bits() == want.bits());
            }
        }
    }
}

TEST_CASE("single-tile overload matches the full piece form") {
    EngineConfig cfg;
    std::mt19937 rng(0x5eed0002u);
    ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, 5, 3, 1, 0, 12, 1);

    EngineState a{cfg};
    csb_dispatch(fx.desc, a);
    PieceOutput full = run_conv_piece(a, fx.tiles, fx.filter_lines, fx.biases);

    EngineState b{cfg};
    csb_dispatch(fx.desc, b);
    std::vector<Half> single;
    for (const GemmTile& t : fx.tiles)
        single.push_back(run_conv_piece(b, t, fx.filter_lines[0], fx.biases[0]).values.at(0));

    REQUIRE(full.values.size() == single.size());
    for (std::size_t i = 0; i < single.size(); ++i) CHECK(full.values[i] == single[i]);
}

TEST_CASE("balanced 3x3 piece issues with zero bubbles") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0003u);
    // 16 output points, 2 channel groups, 8 filters: partials arrive every 9
    // cycles, the point accumulator retires one every 9; no backlog forms.
    ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, 6, 3, 1, 0, 16, 8);
    csb_dispatch(fx.desc, st);
    PieceOutput out = run_conv_piece(st, fx.tiles, fx.filter_lines, fx.biases);

    CHECK(out.stats.mul_busy == 8 * 2 * 16 * 9);
    CHECK(out.stats.issue_bubbles == 0);
    CHECK(out.stats.stall_cycles == 0);
    CHECK(out.stats.last_issue - out.stats.first_issue + 1 == out.stats.mul_busy);
}

TEST_CASE("balanced 1x1 piece stays ahead of the partial queue") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0004u);
    // one 16-point row x 4 groups x 8 filters = 512 single-tap lines; every
    // line lands in the partial queue but issue finishes before it fills.
    ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, 16, 1, 1, 0, 32, 8);
    fx.tiles.resize(16);  // a single output row, as the piece planner slices
    csb_dispatch(fx.desc, st);
    PieceOutput out = run_conv_piece(st, fx.tiles, fx.filter_lines, fx.biases);

    CHECK(out.stats.mul_busy == 512);
    CHECK(out.stats.issue_bubbles == 0);
    CHECK(out.stats.stall_cycles == 0);
    CHECK(out.stats.f_fifo_high < cfg.pipe_fifo_depth);
}

TEST_CASE("oversized 1x1 piece backpressures without corrupting data") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0005u);
    // one 16-point row x 12 groups x 8 filters of single-tap lines outruns
    // the fold for longer than both queues can absorb; issue must stall,
    // results must still be exact.
    ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, 16, 1, 1, 0, 96, 8);
    fx.tiles.resize(16);
    csb_dispatch(fx.desc, st);
    PieceOutput out = run_conv_piece(st, fx.tiles, fx.filter_lines, fx.biases);

    CHECK(out.stats.stall_cycles > 0);
    CHECK(out.stats.issue_bubbles > 0);
    CHECK(out.stats.f_fifo_high == cfg.pipe_fifo_depth);
    CHECK(out.stats.p_fifo_high == cfg.pipe_fifo_depth);

    for (std::size_t f = 0; f < 8; ++f)
        for (std::size_t pt = 0; pt < fx.tiles.size(); ++pt) {
            Half want = conv_point_oracle(fx.tiles[pt], fx.filter_lines[f], fx.biases[f]);
            CHECK(out.values[f * fx.tiles.size() + pt].bits() == want.bits());
        }
}

TEST_CASE("piece replay is deterministic") {
    EngineConfig cfg;
    std::mt19937 rng(0x5eed0006u);
    ConvFixture fx = random_conv_fixture(rng, cfg.parallelism, 7, 3, 2, 1, 10, 5);

    EngineState a{cfg};
    csb_dispatch(fx.desc, a);
    PieceOutput first = run_conv_piece(a, fx.tiles, fx.filter_lines, fx.biases);
    // same state again: absolute cycle differs, relative timing must not
    PieceOutput second = run_conv_piece(a, fx.tiles, fx.filter_lines, fx.biases);

    EngineState b{cfg};
    csb_dispatch(fx.desc, b);
    PieceOutput fresh = run_conv_piece(b, fx.tiles, fx.filter_lines, fx.biases);

    CHECK(first.values == second.values);
    CHECK(first.values == fresh.values);
    CHECK(first.stats.total_cycles == second.stats.total_cycles);
    CHECK(first.stats.total_cycles == fresh.stats.total_cycles);
    CHECK(first.stats.mul_busy == fresh.stats.mul_busy);
    CHECK(first.stats.issue_bubbles == fresh.stats.issue_bubbles);
    CHECK(first.stats.f_fifo_high == fresh.stats.f_fifo_high);
}

TEST_CASE("wider line width strictly shortens a fixed workload") {
    std::vector<std::uint64_t> cycles;
    for (std::size_t lanes : {4u, 8u, 16u}) {
        EngineConfig cfg;
        cfg.parallelism = lanes;
        EngineState st{cfg};
        std::mt19937 rng(0x5eed0007u);  // same seed: same logical workload
        ConvFixture fx = random_conv_fixture(rng, lanes, 5, 3, 1, 0, 32, 4);
        csb_dispatch(fx.desc, st);
        cycles.push_back(
            run_conv_piece(st, fx.tiles, fx.filter_lines, fx.biases).stats.total_cycles);
    }
    CHECK(cycles[0] > cycles[1]);
    CHECK(cycles[1] > cycles[2]);
}

TEST_CASE("max pooling folds a window of one through nine to nine") {
    EngineState st{EngineConfig{}};
    csb_dispatch(pool_desc(OpType::maxpool, 3, 3, 1, 8), st);

    std::vector<Half> lines;
    for (int i = 1; i <= 9; ++i)
        for (int l = 0; l < 8; ++l) lines.push_back(h(static_cast<double>(i)));

    PieceOutput out = run_maxpool_piece(st, lines);
    REQUIRE(out.values.size() == 8);
    for (Half v : out.values) CHECK(v == h(9.0));
    CHECK(out.stats.cmp_busy == 9);
}

TEST_CASE("all-negative max window clamps to the zero seed") {
    EngineConfig cfg;
    EngineState st{cfg};
    csb_dispatch(pool_desc(OpType::maxpool, 3, 3, 1, 8), st);

    std::vector<Half> lines(72, h(-0.5));
    PieceOutput out = run_maxpool_piece(st, lines);
    for (Half v : out.values) CHECK(v.bits() == 0x0000);

    // the -inf seed variant preserves the true maximum
    cfg.maxpool_init = MaxpoolInit::neg_inf;
    EngineState st2{cfg};
    csb_dispatch(pool_desc(OpType::maxpool, 3, 3, 1, 8), st2);
    PieceOutput out2 = run_maxpool_piece(st2, lines);
    for (Half v : out2.values) CHECK(v == h(-0.5));
}

TEST_CASE("random max pooling matches the fold oracle") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0008u);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_int_distribution<std::size_t> pick_points(1, 12);
        const std::size_t taps = trial % 2 == 0 ? 9 : 4;
        const std::size_t k = taps == 9 ? 3 : 2;
        const std::size_t points = pick_points(rng);
        csb_dispatch(pool_desc(OpType::maxpool, k + points - 1, k, 1, 8), st);

        std::vector<Half> lines(points * taps * 8);
        for (Half& v : lines) v = random_value(rng);
        PieceOutput out = run_maxpool_piece(st, lines);
        std::vector<Half> want = maxpool_oracle(lines, 8, taps, Half{});
        REQUIRE(out.values.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(out.values[i] == want[i]);
    }
}

TEST_CASE("global average of 169 ones is exactly one") {
    EngineState st{EngineConfig{}};
    csb_dispatch(pool_desc(OpType::avgpool, 13, 13, 1, 8), st);

    std::vector<Half> lines(169 * 8, h(1.0));
    PieceOutput out = run_avgpool_piece(st, lines, 169);
    REQUIRE(out.values.size() == 8);
    for (Half v : out.values) CHECK(v.bits() == 0x3C00);
    CHECK(real_to_half(169.0).bits() == 0x5948);
    CHECK(out.stats.div_busy == 1);
    CHECK(out.stats.psum_add_busy == 168);
}

TEST_CASE("random average pooling matches the fold-then-divide oracle") {
    EngineConfig cfg;
    EngineState st{cfg};
    std::mt19937 rng(0x5eed0009u);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = trial % 2 == 0 ? 3 : 2;
        const std::size_t taps = k * k;
        std::uniform_int_distribution<std::size_t> pick_points(1, 12);
        const std::size_t points = pick_points(rng);
        csb_dispatch(pool_desc(OpType::avgpool, k + points - 1, k, 1, 8), st);

        std::vector<Half> lines(points * taps * 8);
        for (Half& v : lines) v = random_value(rng);
        PieceOutput out = run_avgpool_piece(st, lines, taps);
        std::vector<Half> want = avgpool_oracle(lines, 8, taps);
        REQUIRE(out.values.size() == want.size());
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(out.values[i] == want[i]);
    }
}

TEST_CASE("piece preconditions are enforced") {
    EngineConfig cfg;
    EngineState st{cfg};

    GemmTile tile;
    tile.lane_count = 8;
    tile.kernel_taps = 1;
    tile.channel_groups = 1;
    tile.lanes.assign(8, h(1.0));
    std::vector<Half> weights(8, h(1.0));

    SUBCASE("conv before any descriptor") {
        CHECK_THROWS_AS(run_conv_piece(st, tile, weights, Half{}), CommandError);
    }
    SUBCASE("pool piece under a conv descriptor") {
        csb_dispatch(conv_desc(1, 1, 1, 0, 8, 1), st);
        CHECK_THROWS_AS(run_maxpool_piece(st, std::vector<Half>(8, h(1.0))), CommandError);
        CHECK_THROWS_AS(run_avgpool_piece(st, std::vector<Half>(8, h(1.0)), 1), CommandError);
    }
    SUBCASE("tile disagrees with the descriptor") {
        csb_dispatch(conv_desc(3, 3, 1, 0, 8, 1), st);  // expects 9 taps
        CHECK_THROWS_AS(run_conv_piece(st, tile, weights, Half{}), CommandError);
    }
    SUBCASE("more filters than lanes") {
        csb_dispatch(conv_desc(1, 1, 1, 0, 8, 9), st);
        std::vector<GemmTile> tiles{tile};
        std::vector<std::vector<Half>> fls(9, weights);
        std::vector<Half> biases(9, Half{});
        CHECK_THROWS_AS(run_conv_piece(st, tiles, fls, biases), CapacityError);
    }
    SUBCASE("more points than the accumulator cache") {
        csb_dispatch(conv_desc(150, 1, 1, 0, 8, 1), st);
        std::vector<GemmTile> tiles(cfg.max_output_side + 1, tile);
        CHECK_THROWS_AS(
            run_conv_piece(st, tiles, std::vector<std::vector<Half>>{weights},
                           std::vector<Half>{Half{}}),
            CapacityError);
    }
    SUBCASE("ragged pool stream") {
        csb_dispatch(pool_desc(OpType::maxpool, 3, 3, 1, 8), st);
        CHECK_THROWS_AS(run_maxpool_piece(st, std::vector<Half>(71, h(1.0))), GeometryError);
        CHECK_THROWS_AS(run_maxpool_piece(st, std::vector<Half>(80, h(1.0))), GeometryError);
    }
    SUBCASE("average divisor must match the window") {
        csb_dispatch(pool_desc(OpType::avgpool, 3, 3, 1, 8), st);
        CHECK_THROWS_AS(run_avgpool_piece(st, std::vector<Half>(72, h(1.0)), 4), CommandError);
    }
    SUBCASE("line width cap") {
        EngineConfig wide;
        wide.parallelism = 64;
        CHECK_THROWS_AS(EngineState{wide}, CapacityError);
    }
}
