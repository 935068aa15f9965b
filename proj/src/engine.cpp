#include "facc/engine.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "facc/errors.hpp"

namespace facc {

namespace {

// Guard against a wedged pipeline; the largest honest piece is well under this.
constexpr std::uint64_t kCycleGuard = 200'000'000;

Half maxpool_init_value(const EngineConfig& cfg) {
    return cfg.maxpool_init == MaxpoolInit::zero ? Half::from_bits(0x0000)
                                                 : Half::from_bits(kNegativeInfBits);
}

// --- convolution pipeline -------------------------------------------------
//
// Stage order within a cycle runs consumer-first so each stage sees only
// state that was already visible when the cycle began.

void conv_fsum_stage(EngineState& st) {
    ConvRun& r = st.conv;
    const std::uint64_t now = st.cycle;
    const std::size_t lanes = st.cfg.parallelism;
    const bool ftz = st.cfg.flush_subnormals;

    if (r.fsum_busy) {
        r.fsum_acc = half_add(r.fsum_acc, r.fsum_entry.lanes[r.fsum_consumed], ftz);
        ++r.fsum_consumed;
        ++r.stats.fsum_add_busy;
        if (r.fsum_consumed == lanes) {
            const std::uint64_t settled = now + st.cfg.latency.add;
            st.fsum_cache[r.fsum_entry.point] = r.fsum_acc;
            if (r.fsum_entry.last_group) {
                Half out = r.fsum_acc;
                if (half_sign(out)) out = Half{};  // fused ReLU is a sign test
                st.result_fifo.push(out.bits(), settled);
                ++r.results_pushed;
                r.last_result_visible = settled + st.cfg.latency.fifo_write;
            }
            r.fsum_busy = false;
            r.fsum_free_at = settled;
        }
        return;
    }
    if (now >= r.fsum_free_at && st.f_fifo.front_visible(now)) {
        r.fsum_entry = st.f_fifo.pop();
        r.fsum_acc = r.fsum_entry.first_group ? st.bias_cache[r.fsum_entry.filter]
                                              : st.fsum_cache[r.fsum_entry.point];
        // lane 0 folds in the same cycle the entry is claimed
        r.fsum_acc = half_add(r.fsum_acc, r.fsum_entry.lanes[0], ftz);
        r.fsum_consumed = 1;
        r.fsum_busy = true;
        ++r.stats.fsum_add_busy;
    }
}

void conv_psum_stage(EngineState& st) {
    ConvRun& r = st.conv;
    const std::uint64_t now = st.cycle;
    if (!st.p_fifo.front_visible(now)) return;
    // emitting a finished fold needs F FIFO space; hold the product line
    // (and everything behind it) until the accumulator drains
    if (st.p_fifo.front().last_tap && st.f_fifo.full()) return;

    ProductLine v = st.p_fifo.pop();
    const std::size_t lanes = st.cfg.parallelism;
    const bool ftz = st.cfg.flush_subnormals;
    if (r.psum_count == 0) {
        r.psum_acc = v.lanes;  // first tap loads, it is not an add
    } else {
        for (std::size_t l = 0; l < lanes; ++l)
            r.psum_acc[l] = half_add(r.psum_acc[l], v.lanes[l], ftz);
        ++r.stats.psum_add_busy;
    }
    ++r.psum_count;
    if (v.last_tap) {
        PartialLine fl;
        fl.lanes = r.psum_acc;
        fl.filter = v.filter;
        fl.point = v.point;
        fl.first_group = v.group == 0;
        fl.last_group = v.group + 1 == r.groups;
        st.f_fifo.push(fl, now + st.cfg.latency.add);
        r.psum_count = 0;
    }
}

void conv_issue_stage(EngineState& st) {
    ConvRun& r = st.conv;
    if (r.issue_done) return;
    const std::uint64_t now = st.cycle;
    if (st.p_fifo.full()) {
        ++r.stats.stall_cycles;
        return;
    }

    const std::size_t lanes = st.cfg.parallelism;
    const std::size_t data_idx = (r.issue_pt * r.groups + r.issue_g) * r.taps + r.issue_tap;
    const std::size_t weight_idx = (r.issue_f * r.groups + r.issue_g) * r.taps + r.issue_tap;
    const LaneArray& data = st.data_cache[data_idx];
    const LaneArray& weight = st.weight_cache[weight_idx];

    ProductLine pl;
    for (std::size_t l = 0; l < lanes; ++l)
        pl.lanes[l] = half_mul(data[l], weight[l], st.cfg.flush_subnormals);
    pl.filter = static_cast<std::uint32_t>(r.issue_f);
    pl.group = static_cast<std::uint32_t>(r.issue_g);
    pl.point = static_cast<std::uint32_t>(r.issue_pt);
    pl.last_tap = r.issue_tap + 1 == r.taps;
    st.p_fifo.push(pl, now + st.cfg.latency.mul);

    ++r.stats.mul_busy;
    if (r.issues_made == 0) r.stats.first_issue = now;
    r.stats.last_issue = now;
    ++r.issues_made;

    if (++r.issue_tap == r.taps) {
        r.issue_tap = 0;
        if (++r.issue_pt == r.points) {
            r.issue_pt = 0;
            if (++r.issue_g == r.groups) {
                r.issue_g = 0;
                if (++r.issue_f == r.filters) r.issue_done = true;
            }
        }
    }
}

void step_conv(EngineState& st) {
    conv_fsum_stage(st);
    conv_psum_stage(st);
    conv_issue_stage(st);

    ConvRun& r = st.conv;
    if (r.issue_done && !r.fsum_busy && st.p_fifo.empty() && st.f_fifo.empty() &&
        r.results_pushed == r.results_expected && st.cycle >= r.last_result_visible) {
        st.conv_active = false;
    }
}

// --- pooling pipeline -------------------------------------------------------

void step_pool(EngineState& st) {
    PoolRun& r = st.pool;
    const std::uint64_t now = st.cycle;
    const std::size_t lanes = st.cfg.parallelism;
    const bool ftz = st.cfg.flush_subnormals;
    FifoModel<PoolLine>& fifo = r.average ? st.s_fifo : st.m_fifo;

    if (fifo.front_visible(now)) {
        PoolLine v = fifo.pop();
        if (r.average) {
            if (r.fold_count == 0) {
                r.fold_acc = v.lanes;
            } else {
                for (std::size_t l = 0; l < lanes; ++l)
                    r.fold_acc[l] = half_add(r.fold_acc[l], v.lanes[l], ftz);
                ++r.stats.psum_add_busy;
            }
        } else {
            if (r.fold_count == 0) r.fold_acc.fill(maxpool_init_value(st.cfg));
            for (std::size_t l = 0; l < lanes; ++l)
                if (half_gt(v.lanes[l], r.fold_acc[l])) r.fold_acc[l] = v.lanes[l];
            ++r.stats.cmp_busy;
        }
        ++r.fold_count;
        if (v.last_of_window) {
            std::uint64_t write_time;
            if (r.average) {
                for (std::size_t l = 0; l < lanes; ++l)
                    r.fold_acc[l] = half_div(r.fold_acc[l], r.divisor, ftz);
                ++r.stats.div_busy;
                write_time = now + st.cfg.latency.add + st.cfg.latency.div;
            } else {
                write_time = now + st.cfg.latency.cmp;
            }
            for (std::size_t l = 0; l < lanes; ++l)
                st.result_fifo.push(r.fold_acc[l].bits(), write_time);
            r.last_result_visible = write_time + st.cfg.latency.fifo_write;
            ++r.results_pushed;
            r.fold_count = 0;
        }
    }

    if (r.issue_line < r.total_lines) {
        if (fifo.full()) {
            ++r.stats.stall_cycles;
        } else {
            PoolLine pl;
            pl.lanes = st.data_cache[r.issue_line];
            pl.last_of_window = (r.issue_line + 1) % r.taps == 0;
            fifo.push(pl, now);
            ++r.issue_line;
        }
    }

    if (r.issue_line == r.total_lines && fifo.empty() && r.results_pushed == r.points &&
        now >= r.last_result_visible) {
        st.pool_active = false;
    }
}

void reset_high_waters(EngineState& st) {
    st.p_fifo.reset_high_water();
    st.f_fifo.reset_high_water();
    st.m_fifo.reset_high_water();
    st.s_fifo.reset_high_water();
    st.result_fifo.reset_high_water();
}

PieceOutput finish_run(EngineState& st, CycleStats stats, std::uint64_t start,
                       std::size_t expected) {
    stats.total_cycles = st.cycle - start;
    stats.p_fifo_high = st.p_fifo.high_water();
    stats.f_fifo_high = st.f_fifo.high_water();
    stats.m_fifo_high = st.m_fifo.high_water();
    stats.s_fifo_high = st.s_fifo.high_water();
    stats.result_fifo_high = st.result_fifo.high_water();
    if (stats.mul_busy > 0)
        stats.issue_bubbles = (stats.last_issue - stats.first_issue + 1) - stats.mul_busy;

    PieceOutput out;
    out.values.reserve(expected);
    while (!st.result_fifo.empty()) out.values.push_back(Half::from_bits(st.result_fifo.pop()));
    if (out.values.size() != expected)
        throw std::logic_error("engine drained wrong result count");
    out.stats = stats;
    return out;
}

void run_until_idle(EngineState& st, std::uint64_t start) {
    while (st.busy()) {
        advance_cycle(st);
        if (st.cycle - start > kCycleGuard)
            throw std::logic_error("engine piece failed to converge");
    }
}

}  // namespace

void CycleStats::merge(const CycleStats& other) {
    if (total_cycles == 0) {
        *this = other;
        return;
    }
    total_cycles += other.total_cycles;
    mul_busy += other.mul_busy;
    psum_add_busy += other.psum_add_busy;
    fsum_add_busy += other.fsum_add_busy;
    cmp_busy += other.cmp_busy;
    div_busy += other.div_busy;
    stall_cycles += other.stall_cycles;
    issue_bubbles += other.issue_bubbles;
    first_issue = std::min(first_issue, other.first_issue);
    last_issue = std::max(last_issue, other.last_issue);
    p_fifo_high = std::max(p_fifo_high, other.p_fifo_high);
    f_fifo_high = std::max(f_fifo_high, other.f_fifo_high);
    m_fifo_high = std::max(m_fifo_high, other.m_fifo_high);
    s_fifo_high = std::max(s_fifo_high, other.s_fifo_high);
    result_fifo_high = std::max(result_fifo_high, other.result_fifo_high);
}

EngineState::EngineState(EngineConfig config) : cfg(config) {
    cfg.validate();
    if (cfg.parallelism > kMaxLanes)
        throw CapacityError("lane count above the model's line width");
    data_cache.resize(cfg.data_cache_depth);
    weight_cache.resize(cfg.weight_cache_depth);
    bias_cache.resize(cfg.bias_cache_depth);
    fsum_cache.resize(cfg.max_output_side);
    cmd_fifo = FifoModel<std::uint32_t>(cfg.cmd_fifo_depth, 0);
    p_fifo = FifoModel<ProductLine>(cfg.pipe_fifo_depth, cfg.latency.fifo_write);
    f_fifo = FifoModel<PartialLine>(cfg.pipe_fifo_depth, cfg.latency.fifo_write);
    m_fifo = FifoModel<PoolLine>(cfg.pipe_fifo_depth, cfg.latency.fifo_write);
    s_fifo = FifoModel<PoolLine>(cfg.pipe_fifo_depth, cfg.latency.fifo_write);
    result_fifo = FifoModel<std::uint16_t>(cfg.result_fifo_depth, cfg.latency.fifo_write);
}

void csb_dispatch(const LayerDescriptor& d, EngineState& st) {
    if (st.busy()) throw CommandError("descriptor dispatched while a piece is in flight");
    validate_descriptor(d);
    st.layer = d;
    st.cmac_enable = d.op_type == OpType::conv_relu;
    st.maxpool_enable = d.op_type == OpType::maxpool;
    st.avepool_enable = d.op_type == OpType::avgpool;
}

void advance_cycle(EngineState& st) {
    if (st.conv_active)
        step_conv(st);
    else if (st.pool_active)
        step_pool(st);
    ++st.cycle;
}

PieceOutput run_conv_piece(EngineState& st, const std::vector<GemmTile>& tiles,
                           const std::vector<std::vector<Half>>& filter_lines,
                           const std::vector<Half>& biases) {
    if (!st.cmac_enable || st.layer.op_type != OpType::conv_relu)
        throw CommandError("convolution piece without a convolution descriptor");
    if (st.busy()) throw CommandError("engine busy");

    const std::size_t lanes = st.cfg.parallelism;
    if (tiles.empty()) throw GeometryError("piece has no output points");
    const std::size_t points = tiles.size();
    if (points > st.cfg.max_output_side)
        throw CapacityError("output run longer than the accumulator cache");

    const std::size_t taps = tiles.front().kernel_taps;
    const std::size_t groups = tiles.front().channel_groups;
    for (const GemmTile& t : tiles) {
        if (t.lane_count != lanes || t.kernel_taps != taps || t.channel_groups != groups)
            throw GeometryError("ragged tile shapes within one piece");
    }
    if (taps != st.layer.kernel_size)
        throw CommandError("tile tap count disagrees with the layer descriptor");
    if (groups * lanes != st.cfg.aligned_channels(st.layer.input_channel))
        throw CommandError("tile channel groups disagree with the layer descriptor");

    if (filter_lines.empty()) throw GeometryError("piece has no filters");
    if (filter_lines.size() > lanes)
        throw CapacityError("more filters than output lanes in one piece");
    if (biases.size() != filter_lines.size())
        throw GeometryError("bias count must match filter count");
    const std::size_t filters = filter_lines.size();
    const std::size_t lines_per_filter = groups * taps;
    for (const std::vector<Half>& fl : filter_lines) {
        if (fl.size() != lines_per_filter * lanes)
            throw GeometryError("filter line block does not match the tile shape");
    }

    const std::size_t data_lines = points * groups * taps;
    if (data_lines > st.cfg.data_cache_depth) throw CapacityError("data cache overflow");
    const std::size_t weight_lines = filters * lines_per_filter;
    if (weight_lines > st.cfg.weight_cache_depth) throw CapacityError("weight cache overflow");
    if (filters > st.cfg.bias_cache_depth) throw CapacityError("bias cache overflow");
    const std::size_t results = filters * points;
    if (results > st.cfg.result_fifo_depth) throw CapacityError("result FIFO overflow");

    for (std::size_t pt = 0; pt < points; ++pt) {
        const GemmTile& t = tiles[pt];
        for (std::size_t line = 0; line < lines_per_filter; ++line) {
            LaneArray& dst = st.data_cache[pt * lines_per_filter + line];
            dst.fill(Half{});
            for (std::size_t l = 0; l < lanes; ++l) dst[l] = t.lanes[line * lanes + l];
        }
    }
    for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t line = 0; line < lines_per_filter; ++line) {
            LaneArray& dst = st.weight_cache[f * lines_per_filter + line];
            dst.fill(Half{});
            for (std::size_t l = 0; l < lanes; ++l)
                dst[l] = filter_lines[f][line * lanes + l];
        }
    }
    for (std::size_t f = 0; f < filters; ++f) st.bias_cache[f] = biases[f];

    reset_high_waters(st);
    st.conv = ConvRun{};
    st.conv.filters = filters;
    st.conv.groups = groups;
    st.conv.points = points;
    st.conv.taps = taps;
    st.conv.results_expected = results;
    st.conv_active = true;

    const std::uint64_t start = st.cycle;
    run_until_idle(st, start);
    return finish_run(st, st.conv.stats, start, results);
}

PieceOutput run_conv_piece(EngineState& st, const GemmTile& tile,
                           const std::vector<Half>& weight_lines, Half bias) {
    return run_conv_piece(st, std::vector<GemmTile>{tile},
                          std::vector<std::vector<Half>>{weight_lines},
                          std::vector<Half>{bias});
}

namespace {

PieceOutput run_pool_piece(EngineState& st, const std::vector<Half>& lines, bool average,
                           std::size_t k_squared) {
    if (st.busy()) throw CommandError("engine busy");
    const std::size_t lanes = st.cfg.parallelism;
    if (lines.empty() || lines.size() % lanes != 0)
        throw GeometryError("pool line stream is not whole lines");
    const std::size_t total_lines = lines.size() / lanes;
    const std::size_t taps = st.layer.kernel_size;
    if (taps == 0) throw CommandError("pooling with a zero window");
    if (average && k_squared != taps)
        throw CommandError("divisor disagrees with the layer window");
    if (total_lines % taps != 0)
        throw GeometryError("line count is not a whole number of windows");
    const std::size_t points = total_lines / taps;
    if (total_lines > st.cfg.data_cache_depth) throw CapacityError("data cache overflow");
    if (points * lanes > st.cfg.result_fifo_depth) throw CapacityError("result FIFO overflow");

    for (std::size_t line = 0; line < total_lines; ++line) {
        LaneArray& dst = st.data_cache[line];
        dst.fill(Half{});
        for (std::size_t l = 0; l < lanes; ++l) dst[l] = lines[line * lanes + l];
    }

    reset_high_waters(st);
    st.pool = PoolRun{};
    st.pool.average = average;
    st.pool.points = points;
    st.pool.taps = taps;
    st.pool.total_lines = total_lines;
    if (average) st.pool.divisor = real_to_half(static_cast<double>(k_squared));
    st.pool_active = true;

    const std::uint64_t start = st.cycle;
    run_until_idle(st, start);
    return finish_run(st, st.pool.stats, start, points * lanes);
}

}  // namespace

PieceOutput run_maxpool_piece(EngineState& st, const std::vector<Half>& lines) {
    if (!st.maxpool_enable || st.layer.op_type != OpType::maxpool)
        throw CommandError("max pooling piece without a max pooling descriptor");
    return run_pool_piece(st, lines, false, st.layer.kernel_size);
}

PieceOutput run_avgpool_piece(EngineState& st, const std::vector<Half>& lines,
                              std::size_t k_squared) {
    if (!st.avepool_enable || st.layer.op_type != OpType::avgpool)
        throw CommandError("average pooling piece without an average pooling descriptor");
    return run_pool_piece(st, lines, true, k_squared);
}

}  // namespace facc
