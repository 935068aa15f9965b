#ifndef FACC_TENSOR_HPP
#define FACC_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "facc/fp16.hpp"

namespace facc {

// Feature-map container. Storage order keeps channel as the fastest-varying
// dimension, then width, then height, matching how the engine streams
// channel-parallel lines. Network surfaces are square (w == h); the container
// itself does not care.
struct Tensor {
    std::size_t w = 0;
    std::size_t h = 0;
    std::size_t c = 0;
    std::vector<Half> data;

    Tensor() = default;
    Tensor(std::size_t w_, std::size_t h_, std::size_t c_)
        : w(w_), h(h_), c(c_), data(w_ * h_ * c_) {}

    std::size_t index(std::size_t x, std::size_t y, std::size_t ch) const {
        return (y * w + x) * c + ch;
    }
    Half at(std::size_t x, std::size_t y, std::size_t ch) const {
        return data[index(x, y, ch)];
    }
    Half& at(std::size_t x, std::size_t y, std::size_t ch) {
        return data[index(x, y, ch)];
    }
    std::size_t size() const { return data.size(); }
};

// Four-sided zero padding. pool3/pool5-style layers pad bottom and right only.
struct Pad4 {
    std::size_t top = 0;
    std::size_t left = 0;
    std::size_t bottom = 0;
    std::size_t right = 0;

    Pad4() = default;
    explicit Pad4(std::size_t all) : top(all), left(all), bottom(all), right(all) {}
    Pad4(std::size_t t, std::size_t l, std::size_t b, std::size_t r)
        : top(t), left(l), bottom(b), right(r) {}
    bool symmetric() const { return top == left && left == bottom && bottom == right; }
    std::size_t vertical() const { return top + bottom; }
    std::size_t horizontal() const { return left + right; }
};

// (w - k + 2p) / s + 1; the stride must divide exactly, the compiler
// guarantees this via padding.
std::size_t output_side(std::size_t w, std::size_t k, std::size_t p, std::size_t s);

// Output side of an already padded surface.
std::size_t output_side_padded(std::size_t padded_w, std::size_t k, std::size_t s);

// Surface padding fills with +0.0 (bit pattern 0x0000), never -0.0.
Tensor pad_surface(const Tensor& t, const Pad4& pad);

// Round the channel count up to a multiple of the lane count; new channels
// are zero so they contribute nothing to dot products or max folds.
Tensor pad_channels(const Tensor& t, std::size_t parallelism);

// One GEMM tile holds every cache line needed for a single output point:
// channel_groups groups of kernel_taps lines, each line `lane_count` lanes.
struct GemmTile {
    std::size_t lane_count = 0;
    std::size_t kernel_taps = 0;     // kernel_size == k*k lines per group
    std::size_t channel_groups = 0;  // padded channels / lane_count
    std::vector<Half> lanes;         // ((group * kernel_taps + tap) * lane_count + lane)

    std::size_t line_count() const { return kernel_taps * channel_groups; }
    Half at(std::size_t group, std::size_t tap, std::size_t lane) const {
        return lanes[(group * kernel_taps + tap) * lane_count + lane];
    }
};

// Lower a padded input into per-output-point tiles. Enumeration order, from
// fastest to slowest: lanes within a line, kernel taps (W then H), channel
// groups, then output points in W-then-H raster order. Output filters reuse
// the same tiles.
std::vector<GemmTile> im2col_tiles(const Tensor& padded, std::size_t k, std::size_t s,
                                   std::size_t parallelism);

// Lines for a single filter, laid out to pair with tile lines one-to-one:
// same (group, tap) order, lane i carrying the weight for channel
// group*parallelism + i. `filter` is k*k*c values, channel-lowest.
std::vector<Half> filter_weight_lines(std::span<const Half> filter, std::size_t k,
                                      std::size_t c, std::size_t parallelism);

// Deserialiser model: 16-bit words shift into lines of burst_len lanes.
// Word 0 of each burst lands in lane 0.
struct LineBuffer {
    std::size_t lanes_per_line = 0;
    std::vector<std::uint16_t> words;

    std::size_t line_count() const {
        return lanes_per_line == 0 ? 0 : words.size() / lanes_per_line;
    }
    std::uint16_t at(std::size_t line, std::size_t lane) const {
        return words[line * lanes_per_line + lane];
    }
};

LineBuffer serdes_pack(std::span<const std::uint16_t> stream, std::size_t burst_len);
std::vector<std::uint16_t> serdes_unpack(const LineBuffer& lines);

// Concatenate along the channel dimension in part order (expand-layer merge).
Tensor concat_channels(std::span<const Tensor> parts);

// Tensor blob file: magic "FACC", version byte 0x01, then w/h/c as 32-bit
// little-endian words, then w*h*c FP16 payload little-endian, channel-lowest.
void write_tensor_blob(const std::string& path, const Tensor& t);
Tensor read_tensor_blob(const std::string& path);

}  // namespace facc

#endif
