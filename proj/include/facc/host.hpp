#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "facc/channel.hpp"
#include "facc/engine.hpp"
#include "facc/isa.hpp"
#include "facc/tensor.hpp"

namespace facc {

struct HostOptions {
    std::array<double, 3> means_bgr{0.0, 0.0, 0.0};
    double scale = 1.0;
    bool two_threads = false;  // pump with a separate consumer thread
    std::size_t channel_capacity = 1024;         // words per direction
    std::size_t transport_timeout = 10'000'000;  // pump events without progress
    std::size_t top_k = 5;
    bool verify = false;  // also run the float64 reference per layer
};

struct LayerReport {
    std::string name;
    std::size_t output_side = 0;
    std::size_t output_channels = 0;
    std::size_t pieces = 0;
    CycleStats stats;
    std::size_t bytes_to_engine = 0;
    std::size_t bytes_from_engine = 0;
    double max_abs_err = 0.0;  // verify mode only
    double max_rel_err = 0.0;  // verify mode, over elements with |reference| >= 1e-2
};

struct InferenceReport {
    std::vector<LayerReport> layers;
    std::uint64_t total_cycles = 0;
    std::size_t command_bytes = 0;
    std::size_t bytes_to_engine = 0;
    std::size_t bytes_from_engine = 0;
    std::vector<std::size_t> top_classes;
    std::vector<double> top_probs;
    bool verified = false;
    bool top1_agrees = false;
    double worst_rel_err = 0.0;

    std::string to_text() const;
    std::string to_json() const;
};

// Interleaved RGB bytes, square side: channels land lowest and reversed to
// BGR, each byte scaled then reduced by its channel mean (BGR order).
Tensor preprocess_image(std::span<const std::uint8_t> rgb_interleaved, std::size_t side,
                        const std::array<double, 3>& means_bgr, double scale = 1.0);

// Indices by descending value; equal values keep ascending index order.
std::vector<std::size_t> argsort_desc(std::span<const double> values);

// Moves words through the channel into sink, either producing and consuming
// interleaved on this thread or with a separate consumer thread. Both modes
// deliver identical sinks; only transfer-log timestamps may differ.
void pump_words(TransactionChannel& ch, std::span<const std::uint32_t> words,
                std::vector<std::uint32_t>& sink, const HostOptions& opt);

// Delivers the whole command stream into the engine's command FIFO before
// any compute starts.
void load_commands(std::span<const std::uint8_t> stream, TransactionChannel& ch,
                   EngineState& engine, const HostOptions& opt = {});

// Executes one layer as a loop over planned pieces: weights and bias lines
// cross to_engine once per output-lane group, data tiles per piece, results
// return over from_engine (the completed result transfer is the interrupt).
// `pad` is the surface padding the descriptor's geometry assumes; `blob` is
// required for convolution and ignored for pooling.
Tensor run_layer(const LayerDescriptor& d, const Pad4& pad, const Tensor& input,
                 const LayerBlob* blob, EngineState& engine, TransactionChannel& to_engine,
                 TransactionChannel& from_engine, const HostOptions& opt = {},
                 LayerReport* report = nullptr);

InferenceReport run_network(const CompiledNetwork& net, const BlobMap& blobs,
                            const Tensor& image, EngineState& engine,
                            const HostOptions& opt = {});

// run_network with the per-layer float64 reference enabled: each layer's
// engine output is compared against the reference applied to the same input,
// and the final classes against a fully chained reference pass.
InferenceReport verify_against_oracle(const CompiledNetwork& net, const BlobMap& blobs,
                                      const Tensor& image, EngineState& engine,
                                      const HostOptions& opt = {});

// Pure float64 forward pass over the compiled plan, no engine involved.
// Returns the final-layer values in channel order.
std::vector<double> reference_logits(const CompiledNetwork& net, const BlobMap& blobs,
                                     const Tensor& image);

}  // namespace facc
