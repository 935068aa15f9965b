#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "facc/fp16.hpp"
#include "facc/tensor.hpp"

namespace facc {

enum class OpType : std::uint8_t {
    idle = 0,
    conv_relu = 1,
    maxpool = 2,
    avgpool = 3,
};

const char* op_name(OpType op);

// 12-byte layer command, three little-endian 32-bit words.
//   word0: op_type[3:0] | stride[7:4] | kernel[11:8] | padding[15:12]
//          | kernel_size[23:16] | stride2[31:24]
//   word1: input_side[15:0] | output_side[31:16]
//   word2: input_channel[11:0] | output_channel[23:12] | slot[27:24] | zero[31:28]
// kernel_size and stride2 are precomputed products so the engine never
// multiplies; slot bits [1:0] give the order inside a parallel-layer group
// and bits [3:2] the group size (host-side only).
struct LayerDescriptor {
    OpType op_type = OpType::idle;
    std::uint8_t stride = 0;
    std::uint8_t kernel = 0;
    std::uint8_t padding = 0;
    std::uint8_t kernel_size = 0;
    std::uint8_t stride2 = 0;
    std::uint16_t input_side = 0;
    std::uint16_t output_side = 0;
    std::uint16_t input_channel = 0;
    std::uint16_t output_channel = 0;
    std::uint8_t slot = 0;

    std::size_t slot_order() const { return slot & 0x3; }
    std::size_t slot_group_size() const { return (slot >> 2) & 0x3; }

    bool operator==(const LayerDescriptor&) const = default;
};

inline constexpr std::size_t kDescriptorBytes = 12;

void validate_descriptor(const LayerDescriptor& d);
std::array<std::uint8_t, kDescriptorBytes> encode_descriptor(const LayerDescriptor& d);
LayerDescriptor decode_descriptor(std::span<const std::uint8_t> bytes);

enum class MaxpoolInit : std::uint8_t {
    zero,     // 0x0000, faithful to the hardware timing diagrams
    neg_inf,  // 0xFC00, mathematically correct for negative inputs
};

struct EngineConfig {
    std::size_t precision_bits = 16;
    std::size_t parallelism = 8;  // lanes per cache line, power of two
    std::size_t max_kernel = 14;
    std::size_t max_output_side = 128;  // fsum cache depth
    std::size_t cmd_burst_len = 3;      // 32-bit words per descriptor

    std::size_t data_cache_depth = 1024;
    std::size_t weight_cache_depth = 8192;
    std::size_t bias_cache_depth = 1024;
    std::size_t cmd_fifo_depth = 1024;    // 32-bit words
    std::size_t result_fifo_depth = 1024; // 16-bit words
    std::size_t pipe_fifo_depth = 512;    // P/F/M/S FIFOs, in lines

    MaxpoolInit maxpool_init = MaxpoolInit::zero;
    LatencyTable latency;
    bool flush_subnormals = false;

    void validate() const;
    std::size_t max_layers() const { return cmd_fifo_depth / cmd_burst_len; }
    std::size_t aligned_channels(std::size_t c) const {
        return (c + parallelism - 1) / parallelism * parallelism;
    }
};

void validate_capacity(const LayerDescriptor& d, const EngineConfig& cfg);

// Engine work unit. Convolution slices by (filter group, output row) with
// weights reloaded once per group; pooling slices by (channel group, row).
struct Piece {
    std::size_t group = 0;
    std::size_t row = 0;
    std::size_t lanes_begin = 0;   // first output lane of the group
    std::size_t lane_count = 0;    // filters (conv) or channels (pool) in the group
    std::size_t data_lines = 0;
    std::size_t weight_lines = 0;  // zero for pooling
    std::size_t result_words = 0;
};

std::vector<Piece> plan_pieces(const LayerDescriptor& d, const EngineConfig& cfg);

struct NetworkLayer {
    std::string name;
    std::string op;  // conv, maxpool, avgpool, dropout, flatten
    std::size_t kernel = 0;
    std::size_t stride = 0;
    Pad4 pad;
    std::size_t output_channel = 0;
    std::uint8_t slot_tag = 0;
};

struct NetworkDescription {
    std::size_t input_side = 0;
    std::size_t input_channels = 0;
    std::vector<NetworkLayer> layers;
};

NetworkDescription parse_network(std::istream& in);
NetworkDescription load_network(const std::string& path);

struct LayerPlan {
    std::string name;
    LayerDescriptor desc;
    Pad4 pad;                       // surface padding applied host-side
    std::size_t group_id = 0;       // nonzero for slot-group members
    std::size_t weight_bytes = 0;
    std::size_t bias_bytes = 0;
    std::size_t data_bytes = 0;     // total pushed across all pieces
    std::size_t result_bytes = 0;
};

struct CompiledNetwork {
    std::size_t input_side = 0;
    std::size_t input_channels = 0;
    std::vector<LayerPlan> layers;          // engine-executed, execution order
    std::vector<std::string> skipped;       // inference no-ops (dropout, flatten)

    std::vector<std::uint8_t> command_stream() const;
};

CompiledNetwork compile_network(const NetworkDescription& net, const EngineConfig& cfg);

// Layer weights: n filters of k*k*ci values, channel lowest within each tap,
// plus one bias per filter.
struct LayerBlob {
    std::size_t n = 0;
    std::size_t k = 0;
    std::size_t ci = 0;
    std::vector<Half> filters;  // n * k * k * ci
    std::vector<Half> biases;   // n

    std::span<const Half> filter(std::size_t i) const {
        return std::span<const Half>(filters).subspan(i * k * k * ci, k * k * ci);
    }
};

using BlobMap = std::map<std::string, LayerBlob>;

void write_blobs(const std::string& path, const BlobMap& blobs);
BlobMap read_blobs(const std::string& path);

}  // namespace facc
