#include "facc/isa.hpp"

#include <fstream>
#include <sstream>

#include "facc/errors.hpp"

namespace facc {

const char* op_name(OpType op) {
    switch (op) {
        case OpType::idle: return "idle";
        case OpType::conv_relu: return "conv_relu";
        case OpType::maxpool: return "maxpool";
        case OpType::avgpool: return "avgpool";
    }
    return "unknown";
}

namespace {

std::uint32_t read_word(std::span<const std::uint8_t> bytes, std::size_t word) {
    std::size_t i = word * 4;
    return static_cast<std::uint32_t>(bytes[i]) | static_cast<std::uint32_t>(bytes[i + 1]) << 8 |
           static_cast<std::uint32_t>(bytes[i + 2]) << 16 |
           static_cast<std::uint32_t>(bytes[i + 3]) << 24;
}

void write_word(std::array<std::uint8_t, kDescriptorBytes>& out, std::size_t word,
                std::uint32_t value) {
    std::size_t i = word * 4;
    out[i] = static_cast<std::uint8_t>(value);
    out[i + 1] = static_cast<std::uint8_t>(value >> 8);
    out[i + 2] = static_cast<std::uint8_t>(value >> 16);
    out[i + 3] = static_cast<std::uint8_t>(value >> 24);
}

bool is_pool(OpType op) { return op == OpType::maxpool || op == OpType::avgpool; }

}  // namespace

void validate_descriptor(const LayerDescriptor& d) {
    if (static_cast<std::uint8_t>(d.op_type) > 3) {
        throw CommandError("unknown op_type");
    }
    if (d.stride > 15 || d.kernel > 15 || d.padding > 15 || d.slot > 15) {
        throw CommandError("nibble field out of range");
    }
    if (d.input_channel > 4095 || d.output_channel > 4095) {
        throw CommandError("channel field exceeds 12 bits");
    }
    if (d.kernel_size != d.kernel * d.kernel) {
        throw CommandError("kernel_size must equal kernel squared");
    }
    if (d.stride2 != d.stride * d.kernel) {
        throw CommandError("stride2 must equal stride times kernel");
    }
    if (d.op_type == OpType::idle) return;

    if (d.kernel == 0 || d.stride == 0) throw CommandError("compute op needs kernel and stride");
    if (d.input_channel == 0 || d.output_channel == 0) {
        throw CommandError("compute op needs channels");
    }
    std::size_t expect;
    try {
        expect = output_side(d.input_side, d.kernel, d.padding, d.stride);
    } catch (const GeometryError& e) {
        throw CommandError(std::string("descriptor geometry: ") + e.what());
    }
    if (expect != d.output_side) {
        throw CommandError("output_side does not follow from input geometry");
    }
    if (is_pool(d.op_type) && d.input_channel != d.output_channel) {
        throw CommandError("pooling must preserve channel count");
    }
}

std::array<std::uint8_t, kDescriptorBytes> encode_descriptor(const LayerDescriptor& d) {
    validate_descriptor(d);
    std::array<std::uint8_t, kDescriptorBytes> out{};
    std::uint32_t w0 = static_cast<std::uint32_t>(d.op_type) |
                       static_cast<std::uint32_t>(d.stride) << 4 |
                       static_cast<std::uint32_t>(d.kernel) << 8 |
                       static_cast<std::uint32_t>(d.padding) << 12 |
                       static_cast<std::uint32_t>(d.kernel_size) << 16 |
                       static_cast<std::uint32_t>(d.stride2) << 24;
    std::uint32_t w1 = static_cast<std::uint32_t>(d.input_side) |
                       static_cast<std::uint32_t>(d.output_side) << 16;
    std::uint32_t w2 = static_cast<std::uint32_t>(d.input_channel) |
                       static_cast<std::uint32_t>(d.output_channel) << 12 |
                       static_cast<std::uint32_t>(d.slot) << 24;
    write_word(out, 0, w0);
    write_word(out, 1, w1);
    write_word(out, 2, w2);
    return out;
}

LayerDescriptor decode_descriptor(std::span<const std::uint8_t> bytes) {
    if (bytes.size() != kDescriptorBytes) throw CommandError("descriptor must be 12 bytes");
    std::uint32_t w0 = read_word(bytes, 0);
    std::uint32_t w1 = read_word(bytes, 1);
    std::uint32_t w2 = read_word(bytes, 2);
    if ((w2 >> 28) != 0) throw CommandError("reserved descriptor bits set");
    LayerDescriptor d;
    std::uint32_t op = w0 & 0xF;
    if (op > 3) throw CommandError("unknown op_type");
    d.op_type = static_cast<OpType>(op);
    d.stride = static_cast<std::uint8_t>((w0 >> 4) & 0xF);
    d.kernel = static_cast<std::uint8_t>((w0 >> 8) & 0xF);
    d.padding = static_cast<std::uint8_t>((w0 >> 12) & 0xF);
    d.kernel_size = static_cast<std::uint8_t>((w0 >> 16) & 0xFF);
    d.stride2 = static_cast<std::uint8_t>((w0 >> 24) & 0xFF);
    d.input_side = static_cast<std::uint16_t>(w1 & 0xFFFF);
    d.output_side = static_cast<std::uint16_t>(w1 >> 16);
    d.input_channel = static_cast<std::uint16_t>(w2 & 0xFFF);
    d.output_channel = static_cast<std::uint16_t>((w2 >> 12) & 0xFFF);
    d.slot = static_cast<std::uint8_t>((w2 >> 24) & 0xF);
    validate_descriptor(d);
    return d;
}

void EngineConfig::validate() const {
    if (precision_bits != 16) throw CommandError("only 16-bit lanes are supported");
    if (parallelism == 0 || (parallelism & (parallelism - 1)) != 0) {
        throw CommandError("parallelism must be a power of two");
    }
    if (cmd_burst_len * 4 != kDescriptorBytes) {
        throw CommandError("cmd_burst_len must cover exactly one 12-byte descriptor");
    }
    if (max_kernel == 0 || max_kernel > 15) throw CommandError("max_kernel must be 1..15");
    if (max_output_side == 0 || data_cache_depth == 0 || weight_cache_depth == 0 ||
        bias_cache_depth == 0 || cmd_fifo_depth == 0 || result_fifo_depth == 0 ||
        pipe_fifo_depth == 0) {
        throw CommandError("cache and FIFO depths must be nonzero");
    }
}

void validate_capacity(const LayerDescriptor& d, const EngineConfig& cfg) {
    if (d.op_type == OpType::idle) return;
    if (d.kernel > cfg.max_kernel) {
        throw CapacityError("kernel exceeds the configured maximum");
    }
    if (d.op_type == OpType::conv_relu) {
        // Weight cache holds one filter group: parallelism filters of
        // kernel_size * input_channel values over parallelism lanes.
        std::size_t weight_lines =
            static_cast<std::size_t>(d.input_channel) * d.kernel_size;
        if (weight_lines > cfg.weight_cache_depth) {
            throw CapacityError("weight cache: input_channel * kernel_size exceeds depth");
        }
        if (d.output_side > cfg.result_fifo_depth) {
            throw CapacityError("result FIFO: convolution row does not fit");
        }
        if (d.output_side > cfg.max_output_side) {
            throw CapacityError("fsum cache: output side exceeds depth");
        }
        if (cfg.aligned_channels(d.output_channel) > cfg.bias_cache_depth) {
            throw CapacityError("bias cache: too many output channels");
        }
    } else {
        if (cfg.parallelism * d.output_side > cfg.result_fifo_depth) {
            throw CapacityError("result FIFO: pooling row does not fit");
        }
    }
}

std::vector<Piece> plan_pieces(const LayerDescriptor& d, const EngineConfig& cfg) {
    validate_descriptor(d);
    validate_capacity(d, cfg);
    std::vector<Piece> pieces;
    if (d.op_type == OpType::idle) return pieces;

    std::size_t p = cfg.parallelism;
    std::size_t out = d.output_side;
    std::size_t ks = d.kernel_size;
    bool conv = d.op_type == OpType::conv_relu;
    std::size_t ci_groups = conv ? cfg.aligned_channels(d.input_channel) / p : 1;
    std::size_t lines_per_point = ks * ci_groups;
    if (lines_per_point > cfg.data_cache_depth) {
        throw CapacityError("data cache: one output point's lines do not fit");
    }
    std::size_t cols_per_piece = std::min(out, cfg.data_cache_depth / lines_per_point);

    std::size_t lane_total = conv ? d.output_channel : cfg.aligned_channels(d.input_channel);
    std::size_t groups = (lane_total + p - 1) / p;
    for (std::size_t g = 0; g < groups; ++g) {
        std::size_t lanes = std::min(p, lane_total - g * p);
        for (std::size_t row = 0; row < out; ++row) {
            for (std::size_t col = 0; col < out; col += cols_per_piece) {
                Piece piece;
                piece.group = g;
                piece.row = row;
                piece.lanes_begin = g * p;
                piece.lane_count = lanes;
                std::size_t cols = std::min(cols_per_piece, out - col);
                piece.data_lines = cols * lines_per_point;
                piece.weight_lines = conv ? lanes * ks * ci_groups : 0;
                piece.result_words = conv ? lanes * cols : p * cols;
                pieces.push_back(piece);
            }
        }
    }
    return pieces;
}

namespace {

NetworkLayer parse_layer_line(const std::string& line, std::size_t line_no) {
    std::istringstream ss(line);
    NetworkLayer layer;
    unsigned k = 0, s = 0, pt = 0, pl = 0, pb = 0, pr = 0, oc = 0, tag = 0;
    if (!(ss >> layer.name >> layer.op >> k >> s >> pt >> pl >> pb >> pr >> oc >> tag)) {
        throw ParseError("network line " + std::to_string(line_no) +
                         ": expected `name op k s pad_t pad_l pad_b pad_r out_ch slot_tag`");
    }
    std::string extra;
    if (ss >> extra) {
        throw ParseError("network line " + std::to_string(line_no) + ": trailing tokens");
    }
    if (layer.op != "conv" && layer.op != "maxpool" && layer.op != "avgpool" &&
        layer.op != "dropout" && layer.op != "flatten") {
        throw ParseError("network line " + std::to_string(line_no) + ": unknown op `" +
                         layer.op + "`");
    }
    if (tag > 15) {
        throw ParseError("network line " + std::to_string(line_no) + ": slot_tag exceeds 4 bits");
    }
    layer.kernel = k;
    layer.stride = s;
    layer.pad = Pad4(pt, pl, pb, pr);
    layer.output_channel = oc;
    layer.slot_tag = static_cast<std::uint8_t>(tag);
    return layer;
}

}  // namespace

NetworkDescription parse_network(std::istream& in) {
    NetworkDescription net;
    std::string line;
    std::size_t line_no = 0;
    bool have_input = false;
    while (std::getline(in, line)) {
        ++line_no;
        std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream probe(line);
        std::string first;
        if (!(probe >> first)) continue;
        if (!have_input) {
            if (first != "input") {
                throw ParseError("network file must start with `input <side> <channels>`");
            }
            std::istringstream ss(line);
            std::string kw;
            if (!(ss >> kw >> net.input_side >> net.input_channels) || net.input_side == 0 ||
                net.input_channels == 0) {
                throw ParseError("malformed input header on line " + std::to_string(line_no));
            }
            have_input = true;
            continue;
        }
        net.layers.push_back(parse_layer_line(line, line_no));
    }
    if (!have_input) throw ParseError("network file has no input header");
    if (net.layers.empty()) throw ParseError("no layers");
    return net;
}

NetworkDescription load_network(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open network file: " + path);
    return parse_network(in);
}

namespace {

struct ChainState {
    std::size_t side;
    std::size_t channels;
};

LayerPlan compile_one(const NetworkLayer& layer, ChainState in, const EngineConfig& cfg) {
    LayerDescriptor d;
    if (layer.op == "conv") {
        d.op_type = OpType::conv_relu;
    } else if (layer.op == "maxpool") {
        d.op_type = OpType::maxpool;
    } else {
        d.op_type = OpType::avgpool;
    }
    if (layer.kernel > 15 || layer.stride > 15) {
        throw CommandError(layer.name + ": kernel/stride exceed descriptor nibbles");
    }

    const Pad4& pad = layer.pad;
    bool symmetric = pad.top == pad.bottom && pad.left == pad.right && pad.top == pad.left;
    std::size_t in_side;
    std::size_t padding;
    if (symmetric) {
        in_side = in.side;
        padding = pad.top;
    } else {
        // Uneven padding is folded into the surface before transfer; the
        // descriptor then sees the grown side with no padding of its own.
        if (pad.vertical() != pad.horizontal()) {
            throw GeometryError(layer.name + ": padding must keep the surface square");
        }
        in_side = in.side + pad.vertical();
        padding = 0;
    }
    if (padding > 15) throw CommandError(layer.name + ": padding exceeds descriptor nibble");

    std::size_t out_side;
    try {
        out_side = output_side(in_side, layer.kernel, padding, layer.stride);
    } catch (const GeometryError& e) {
        throw GeometryError(layer.name + ": " + e.what());
    }

    d.stride = static_cast<std::uint8_t>(layer.stride);
    d.kernel = static_cast<std::uint8_t>(layer.kernel);
    d.padding = static_cast<std::uint8_t>(padding);
    d.kernel_size = static_cast<std::uint8_t>(layer.kernel * layer.kernel);
    d.stride2 = static_cast<std::uint8_t>(layer.stride * layer.kernel);
    d.input_side = static_cast<std::uint16_t>(in_side);
    d.output_side = static_cast<std::uint16_t>(out_side);
    d.input_channel = static_cast<std::uint16_t>(in.channels);
    d.output_channel = static_cast<std::uint16_t>(
        d.op_type == OpType::conv_relu ? layer.output_channel : in.channels);
    d.slot = layer.slot_tag;
    if (d.op_type != OpType::conv_relu && layer.output_channel != in.channels) {
        throw GeometryError(layer.name + ": pooling cannot change the channel count");
    }
    validate_descriptor(d);
    validate_capacity(d, cfg);

    LayerPlan plan;
    plan.name = layer.name;
    plan.desc = d;
    plan.pad = pad;

    std::size_t p = cfg.parallelism;
    std::size_t ci_al = cfg.aligned_channels(d.input_channel);
    std::size_t out_sq = out_side * out_side;
    if (d.op_type == OpType::conv_relu) {
        std::size_t fgroups = (d.output_channel + p - 1) / p;
        plan.weight_bytes = d.output_channel * d.kernel_size * ci_al * 2;
        plan.bias_bytes = d.output_channel * p * 2;
        plan.data_bytes = fgroups * out_sq * d.kernel_size * ci_al * 2;
        plan.result_bytes = d.output_channel * out_sq * 2;
    } else {
        std::size_t cgroups = ci_al / p;
        plan.data_bytes = cgroups * out_sq * d.kernel_size * p * 2;
        plan.result_bytes = cgroups * out_sq * p * 2;
    }
    return plan;
}

}  // namespace

CompiledNetwork compile_network(const NetworkDescription& net, const EngineConfig& cfg) {
    cfg.validate();
    CompiledNetwork out;
    out.input_side = net.input_side;
    out.input_channels = net.input_channels;

    ChainState state{net.input_side, net.input_channels};
    std::size_t next_group_id = 1;
    std::size_t i = 0;
    while (i < net.layers.size()) {
        const NetworkLayer& layer = net.layers[i];
        if (layer.op == "dropout" || layer.op == "flatten") {
            if (layer.output_channel != state.channels) {
                throw GeometryError(layer.name + ": pass-through layer cannot change channels");
            }
            out.skipped.push_back(layer.name);
            ++i;
            continue;
        }
        if (layer.slot_tag == 0) {
            LayerPlan plan = compile_one(layer, state, cfg);
            state.side = plan.desc.output_side;
            state.channels = plan.desc.output_channel;
            out.layers.push_back(std::move(plan));
            ++i;
            continue;
        }

        // Parallel-layer group: every member consumes the same input and the
        // outputs concatenate channel-wise, in slot order.
        std::size_t size = (layer.slot_tag >> 2) & 0x3;
        if (size < 2) throw CommandError(layer.name + ": slot group size must be 2 or 3");
        if (i + size > net.layers.size()) {
            throw CommandError(layer.name + ": slot group runs past the end of the network");
        }
        std::size_t group_side = 0;
        std::size_t group_channels = 0;
        for (std::size_t m = 0; m < size; ++m) {
            const NetworkLayer& member = net.layers[i + m];
            std::size_t msize = (member.slot_tag >> 2) & 0x3;
            std::size_t morder = member.slot_tag & 0x3;
            if (msize != size || morder != m) {
                throw CommandError(member.name + ": slot group members must be contiguous, " +
                                   "same size, orders ascending from zero");
            }
            LayerPlan plan = compile_one(member, state, cfg);
            plan.group_id = next_group_id;
            if (m == 0) {
                group_side = plan.desc.output_side;
            } else if (plan.desc.output_side != group_side) {
                throw GeometryError(member.name + ": slot group members disagree on output side");
            }
            group_channels += plan.desc.output_channel;
            out.layers.push_back(std::move(plan));
        }
        ++next_group_id;
        state.side = group_side;
        state.channels = group_channels;
        i += size;
    }

    if (out.layers.size() > cfg.max_layers()) {
        throw CapacityError("layer count exceeds command FIFO capacity (" +
                            std::to_string(cfg.max_layers()) + " layers)");
    }
    return out;
}

std::vector<std::uint8_t> CompiledNetwork::command_stream() const {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(layers.size() * kDescriptorBytes);
    for (const auto& layer : layers) {
        auto enc = encode_descriptor(layer.desc);
        bytes.insert(bytes.end(), enc.begin(), enc.end());
    }
    return bytes;
}

namespace {

void write_u32(std::ostream& out, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

bool read_u32(std::istream& in, std::uint32_t& v) {
    std::uint8_t b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
    v = static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
        static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
    return true;
}

void write_halves(std::ostream& out, const std::vector<Half>& values) {
    for (Half h : values) {
        std::uint8_t b[2] = {static_cast<std::uint8_t>(h.bits()),
                             static_cast<std::uint8_t>(h.bits() >> 8)};
        out.write(reinterpret_cast<const char*>(b), 2);
    }
}

void read_halves(std::istream& in, std::vector<Half>& values, std::size_t count,
                 const std::string& path) {
    values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint8_t b[2];
        if (!in.read(reinterpret_cast<char*>(b), 2)) {
            throw ParseError("truncated blob file: " + path);
        }
        values[i] = Half::from_bits(static_cast<std::uint16_t>(b[0] | b[1] << 8));
    }
}

}  // namespace

void write_blobs(const std::string& path, const BlobMap& blobs) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot open blob file for writing: " + path);
    for (const auto& [name, blob] : blobs) {
        write_u32(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(out, static_cast<std::uint32_t>(blob.n));
        write_u32(out, static_cast<std::uint32_t>(blob.k));
        write_u32(out, static_cast<std::uint32_t>(blob.ci));
        if (blob.filters.size() != blob.n * blob.k * blob.k * blob.ci ||
            blob.biases.size() != blob.n) {
            throw GeometryError("blob `" + name + "` has inconsistent sizes");
        }
        write_halves(out, blob.filters);
        write_halves(out, blob.biases);
    }
}

BlobMap read_blobs(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open blob file: " + path);
    BlobMap blobs;
    std::uint32_t name_len;
    while (read_u32(in, name_len)) {
        if (name_len == 0 || name_len > 4096) throw ParseError("bad blob record in " + path);
        std::string name(name_len, '\0');
        if (!in.read(name.data(), name_len)) throw ParseError("truncated blob file: " + path);
        std::uint32_t n, k, ci;
        if (!read_u32(in, n) || !read_u32(in, k) || !read_u32(in, ci)) {
            throw ParseError("truncated blob file: " + path);
        }
        LayerBlob blob;
        blob.n = n;
        blob.k = k;
        blob.ci = ci;
        read_halves(in, blob.filters, static_cast<std::size_t>(n) * k * k * ci, path);
        read_halves(in, blob.biases, n, path);
        if (!blobs.emplace(std::move(name), std::move(blob)).second) {
            throw ParseError("duplicate blob record in " + path);
        }
    }
    return blobs;
}

}  // namespace facc
