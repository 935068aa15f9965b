#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <stdexcept>
#include <vector>

#include "facc/fp16.hpp"
#include "facc/isa.hpp"
#include "facc/tensor.hpp"

namespace facc {

inline constexpr std::size_t kMaxLanes = 32;
using LaneArray = std::array<Half, kMaxLanes>;

// Order-preserving queue with a producer-to-consumer visibility delay.
// Producers must test full() and hold off (backpressure); pushing into a
// full queue is a model bug, not a hardware condition.
template <typename T>
class FifoModel {
public:
    FifoModel() = default;
    FifoModel(std::size_t depth, unsigned write_latency)
        : depth_(depth), write_latency_(write_latency) {}

    bool full() const { return slots_.size() >= depth_; }
    bool empty() const { return slots_.empty(); }
    std::size_t size() const { return slots_.size(); }
    std::size_t high_water() const { return high_water_; }
    void reset_high_water() { high_water_ = slots_.size(); }

    void push(T value, std::uint64_t write_time) {
        if (full()) throw std::logic_error("fifo overflow: producer ignored backpressure");
        slots_.push_back(Slot{std::move(value), write_time + write_latency_});
        if (slots_.size() > high_water_) high_water_ = slots_.size();
    }
    bool front_visible(std::uint64_t now) const {
        return !slots_.empty() && slots_.front().visible_at <= now;
    }
    const T& front() const { return slots_.front().value; }
    T pop() {
        T v = std::move(slots_.front().value);
        slots_.pop_front();
        return v;
    }

private:
    struct Slot {
        T value;
        std::uint64_t visible_at;
    };
    std::size_t depth_ = 0;
    unsigned write_latency_ = 0;
    std::deque<Slot> slots_;
    std::size_t high_water_ = 0;
};

struct CycleStats {
    std::uint64_t total_cycles = 0;
    std::uint64_t mul_busy = 0;
    std::uint64_t psum_add_busy = 0;
    std::uint64_t fsum_add_busy = 0;
    std::uint64_t cmp_busy = 0;
    std::uint64_t div_busy = 0;
    std::uint64_t stall_cycles = 0;
    std::uint64_t issue_bubbles = 0;
    std::uint64_t first_issue = 0;
    std::uint64_t last_issue = 0;
    std::size_t p_fifo_high = 0;
    std::size_t f_fifo_high = 0;
    std::size_t m_fifo_high = 0;
    std::size_t s_fifo_high = 0;
    std::size_t result_fifo_high = 0;

    void merge(const CycleStats& other);
};

struct ProductLine {
    LaneArray lanes;
    std::uint32_t filter = 0;
    std::uint32_t group = 0;
    std::uint32_t point = 0;
    bool last_tap = false;
};

struct PartialLine {
    LaneArray lanes;
    std::uint32_t filter = 0;
    std::uint32_t point = 0;
    bool first_group = false;
    bool last_group = false;
};

struct PoolLine {
    LaneArray lanes;
    bool last_of_window = false;
};

// In-flight convolution piece. The issue iterator walks filter -> channel
// group -> output point -> tap, so psum sees each fold contiguously and fsum
// revisits a point once per channel group.
struct ConvRun {
    std::size_t filters = 0;
    std::size_t groups = 0;
    std::size_t points = 0;
    std::size_t taps = 0;

    std::size_t issue_f = 0, issue_g = 0, issue_pt = 0, issue_tap = 0;
    bool issue_done = false;
    std::uint64_t issues_made = 0;

    LaneArray psum_acc{};
    std::size_t psum_count = 0;

    bool fsum_busy = false;
    Half fsum_acc;
    std::size_t fsum_consumed = 0;
    PartialLine fsum_entry;
    std::uint64_t fsum_free_at = 0;

    std::size_t results_expected = 0;
    std::size_t results_pushed = 0;
    std::uint64_t last_result_visible = 0;
    CycleStats stats;
};

// In-flight pooling piece: a reader streams cache lines into the pool FIFO
// and a fold unit reduces each window, through the divider for averages.
struct PoolRun {
    bool average = false;
    std::size_t points = 0;
    std::size_t taps = 0;
    Half divisor;

    std::size_t issue_line = 0;
    std::size_t total_lines = 0;

    LaneArray fold_acc{};
    std::size_t fold_count = 0;

    std::size_t results_pushed = 0;
    std::uint64_t last_result_visible = 0;
    CycleStats stats;
};

struct EngineState {
    explicit EngineState(EngineConfig config);

    EngineConfig cfg;
    LayerDescriptor layer;
    bool cmac_enable = false;
    bool maxpool_enable = false;
    bool avepool_enable = false;

    std::vector<LaneArray> data_cache;
    std::vector<LaneArray> weight_cache;
    std::vector<Half> bias_cache;
    std::vector<Half> fsum_cache;

    FifoModel<std::uint32_t> cmd_fifo;
    FifoModel<ProductLine> p_fifo;
    FifoModel<PartialLine> f_fifo;
    FifoModel<PoolLine> m_fifo;
    FifoModel<PoolLine> s_fifo;
    FifoModel<std::uint16_t> result_fifo;

    std::uint64_t cycle = 0;

    bool conv_active = false;
    bool pool_active = false;
    ConvRun conv;
    PoolRun pool;

    bool busy() const { return conv_active || pool_active; }
};

struct PieceOutput {
    std::vector<Half> values;
    CycleStats stats;
};

void csb_dispatch(const LayerDescriptor& d, EngineState& st);
void advance_cycle(EngineState& st);

// Full piece: up to `parallelism` filters against one run of output points.
// Outputs are filter-major: filter 0's points, then filter 1's, and so on.
PieceOutput run_conv_piece(EngineState& st, const std::vector<GemmTile>& tiles,
                           const std::vector<std::vector<Half>>& filter_lines,
                           const std::vector<Half>& biases);
// Degenerate piece: one tile against one filter, one output value.
PieceOutput run_conv_piece(EngineState& st, const GemmTile& tile,
                           const std::vector<Half>& weight_lines, Half bias);

// `lines` is a flat lane stream, `parallelism` values per line, kernel_size
// lines per output point. Outputs are point-major lines of `parallelism`.
PieceOutput run_maxpool_piece(EngineState& st, const std::vector<Half>& lines);
PieceOutput run_avgpool_piece(EngineState& st, const std::vector<Half>& lines,
                              std::size_t k_squared);

}  // namespace facc
