#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>

#include "facc/isa.hpp"

namespace facc {

// Everything a batch run needs, resolved up front so missing or malformed
// inputs fail before any simulation starts.
struct RunManifest {
    std::string network;
    std::string blobs;
    std::string image;
    std::size_t image_side = 0;
    std::array<double, 3> means_bgr{0.0, 0.0, 0.0};
    double scale = 1.0;
    std::size_t top_k = 5;
    EngineConfig config;
    std::string report_text;  // output paths, empty means stdout only
    std::string report_json;
};

RunManifest load_manifest(const std::string& path, const EngineConfig& base);

// JSON object of overrides applied on top of `base`; keys mirror the build
// macros (parallelism, max_kernel, max_o_side, cmd_burst_len, ...).
EngineConfig load_config_file(const std::string& path, const EngineConfig& base);

// One row per descriptor; compiling then decoding the stream prints the same
// bytes, which is the round-trip check the compile verb leans on.
std::string descriptor_table(std::span<const LayerDescriptor> descs);

int cli_main(int argc, const char* const* argv);

}  // namespace facc
