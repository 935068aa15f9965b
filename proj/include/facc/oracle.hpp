#pragma once

#include <cstdint>
#include <cstddef>
#include <vector>

#include "facc/tensor.hpp"

namespace facc {

// Wide-precision (binary64) reference container. Same channel-lowest layout
// as Tensor so indices transfer one-to-one.
struct RefTensor {
    std::size_t w = 0;
    std::size_t h = 0;
    std::size_t c = 0;
    std::vector<double> data;

    RefTensor() = default;
    RefTensor(std::size_t w_, std::size_t h_, std::size_t c_)
        : w(w_), h(h_), c(c_), data(w_ * h_ * c_, 0.0) {}

    std::size_t index(std::size_t x, std::size_t y, std::size_t ch) const {
        return (y * w + x) * c + ch;
    }
    double& at(std::size_t x, std::size_t y, std::size_t ch) { return data[index(x, y, ch)]; }
    double at(std::size_t x, std::size_t y, std::size_t ch) const { return data[index(x, y, ch)]; }
};

RefTensor to_ref(const Tensor& t);
Tensor to_half_tensor(const RefTensor& t, bool flush_subnormals = false);
RefTensor pad_surface_ref(const RefTensor& t, Pad4 p);

// Filters are tap-major with channels lowest: filter[(kh*k + kw)*c + ch],
// one vector per output channel. Bias is added first, then the window sum.
RefTensor conv_ref(const RefTensor& input, const std::vector<std::vector<double>>& filters,
                   const std::vector<double>& biases, std::size_t k, std::size_t s, Pad4 p);
RefTensor maxpool_ref(const RefTensor& input, std::size_t k, std::size_t s);
RefTensor avgpool_ref(const RefTensor& input, std::size_t k, std::size_t s);
RefTensor relu_ref(const RefTensor& input);
std::vector<double> softmax_ref(const std::vector<double>& logits);

// Column-streaming convolution schedule. The surface is read one column per
// cycle; k slots are provisioned and up to k-s+1 hold in-flight windows, so
// each element is fetched exactly once and shared by every covering window.
struct MecTrace {
    std::size_t provisioned_slots = 0;            // always k
    std::size_t peak_occupied = 0;                // max concurrent active slots
    std::vector<std::uint64_t> slot_masks;        // one bitmask per streamed column
    std::vector<std::size_t> fetch_counts;        // per padded element, flat index
    std::vector<std::size_t> column_windows;      // per column: covering width-windows
    std::size_t neighbor_overlap = 0;             // shared elements of adjacent windows
};

RefTensor conv_mec(const RefTensor& input, const std::vector<std::vector<double>>& filters,
                   const std::vector<double>& biases, std::size_t k, std::size_t s, Pad4 p,
                   MecTrace* trace = nullptr);

// How many sliding windows cover each position along one axis. A tile-based
// lowering fetches a datum once per covering window; the streaming schedule
// above fetches it once total. The contrast is the whole argument.
std::vector<std::size_t> covering_window_counts(std::size_t side, std::size_t k, std::size_t s);

// Per-surface-position covering (wo, ho) window counts, flat y*w + x.
std::vector<std::size_t> im2col_fetch_counts(std::size_t w, std::size_t h,
                                             std::size_t k, std::size_t s);

struct Comparator {
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool ascending = true;  // min lands at lo when true
};

struct ComparatorStage {
    std::vector<Comparator> pairs;
};

// Sorting network over n = 2^m inputs: m(m+1)/2 stages of n/2 comparators.
std::vector<ComparatorStage> bitonic_network(std::size_t n);
std::vector<double> bitonic_sort(std::vector<double> values, bool descending = false);

struct AccumulationCycle {
    std::size_t fetched = 0;
    std::size_t adds = 0;
};

struct AccumulationSchedule {
    std::size_t adders = 0;
    std::vector<AccumulationCycle> cycles;
    std::vector<std::size_t> fetch_counts() const;
};

// Fixed-shape reduction schedule: one greedy double-width fetch, then whole
// rounds of accumulator adds while fresh data outnumbers the partials, then a
// combining phase that folds partial pairs while trickling in the tail.
double pipeline_accumulate(const std::vector<double>& values, std::size_t adders,
                           AccumulationSchedule* schedule = nullptr);

}  // namespace facc
