#include "facc/host.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <utility>

#include "facc/errors.hpp"
#include "facc/fp16.hpp"
#include "facc/oracle.hpp"
#include "json.hpp"

namespace facc {

namespace {

std::vector<std::uint32_t> pack_halves(std::span<const Half> values) {
    std::vector<std::uint32_t> words((values.size() + 1) / 2, 0);
    for (std::size_t i = 0; i < values.size(); ++i)
        words[i / 2] |= static_cast<std::uint32_t>(values[i].bits()) << (16 * (i & 1));
    return words;
}

std::vector<Half> unpack_halves(std::span<const std::uint32_t> words, std::size_t count) {
    std::vector<Half> values(count);
    for (std::size_t i = 0; i < count; ++i)
        values[i] = Half::from_bits(static_cast<std::uint16_t>(words[i / 2] >> (16 * (i & 1))));
    return values;
}

// One marshalling hop: pack, pump, unpack. The received values, not the
// originals, feed the next stage, so a transport fault cannot hide.
std::vector<Half> transfer_halves(TransactionChannel& ch, std::span<const Half> values,
                                  const HostOptions& opt) {
    std::vector<std::uint32_t> words = pack_halves(values);
    std::vector<std::uint32_t> sink;
    pump_words(ch, words, sink, opt);
    return unpack_halves(sink, values.size());
}

struct StagedWeights {
    std::vector<std::vector<Half>> filter_lines;
    std::vector<Half> biases;
};

std::vector<Half> pad_filter_channels(std::span<const Half> filter, std::size_t k,
                                      std::size_t c, std::size_t c_aligned) {
    std::vector<Half> out(k * k * c_aligned);
    for (std::size_t tap = 0; tap < k * k; ++tap)
        for (std::size_t ch = 0; ch < c; ++ch) out[tap * c_aligned + ch] = filter[tap * c + ch];
    return out;
}

// Weight lines for every filter of the group followed by one bias line per
// filter (lane 0 carries the value) cross the channel in a single burst.
StagedWeights stage_group_weights(const LayerBlob& blob, const Piece& piece,
                                  const LayerDescriptor& d, std::size_t c_aligned,
                                  std::size_t lanes, TransactionChannel& ch,
                                  const HostOptions& opt, std::size_t& bytes_to_engine) {
    const std::size_t k = d.kernel;
    const std::size_t lines_per_filter = static_cast<std::size_t>(d.kernel_size) *
                                         (c_aligned / lanes);
    std::vector<Half> halves;
    halves.reserve(piece.lane_count * (lines_per_filter + 1) * lanes);
    for (std::size_t f = 0; f < piece.lane_count; ++f) {
        std::vector<Half> padded =
            pad_filter_channels(blob.filter(piece.lanes_begin + f), k, blob.ci, c_aligned);
        std::vector<Half> lines = filter_weight_lines(padded, k, c_aligned, lanes);
        halves.insert(halves.end(), lines.begin(), lines.end());
    }
    for (std::size_t f = 0; f < piece.lane_count; ++f) {
        halves.push_back(blob.biases[piece.lanes_begin + f]);
        for (std::size_t l = 1; l < lanes; ++l) halves.push_back(Half{});
    }

    std::vector<Half> received = transfer_halves(ch, halves, opt);
    bytes_to_engine += received.size() * 2;

    StagedWeights staged;
    const std::size_t block = lines_per_filter * lanes;
    for (std::size_t f = 0; f < piece.lane_count; ++f)
        staged.filter_lines.emplace_back(received.begin() + f * block,
                                         received.begin() + (f + 1) * block);
    const std::size_t bias_base = piece.lane_count * block;
    for (std::size_t f = 0; f < piece.lane_count; ++f)
        staged.biases.push_back(received[bias_base + f * lanes]);
    return staged;
}

}  // namespace

Tensor preprocess_image(std::span<const std::uint8_t> rgb_interleaved, std::size_t side,
                        const std::array<double, 3>& means_bgr, double scale) {
    if (side == 0 || rgb_interleaved.size() != side * side * 3)
        throw GeometryError("image byte count does not match the given side");
    Tensor t(side, side, 3);
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            const std::size_t base = (y * side + x) * 3;
            const double r = static_cast<double>(rgb_interleaved[base]);
            const double g = static_cast<double>(rgb_interleaved[base + 1]);
            const double b = static_cast<double>(rgb_interleaved[base + 2]);
            t.at(x, y, 0) = real_to_half(b * scale - means_bgr[0]);
            t.at(x, y, 1) = real_to_half(g * scale - means_bgr[1]);
            t.at(x, y, 2) = real_to_half(r * scale - means_bgr[2]);
        }
    }
    return t;
}

std::vector<std::size_t> argsort_desc(std::span<const double> values) {
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
    return idx;
}

void pump_words(TransactionChannel& ch, std::span<const std::uint32_t> words,
                std::vector<std::uint32_t>& sink, const HostOptions& opt) {
    sink.reserve(sink.size() + words.size());
    if (!opt.two_threads) {
        std::size_t offered = 0;
        std::uint64_t tick = 0;
        std::size_t idle = 0;
        while (offered < words.size() || ch.has_data()) {
            bool progress = false;
            if (offered < words.size() && ch.offer(words[offered], tick)) {
                ++offered;
                progress = true;
            }
            while (ch.has_data()) {
                sink.push_back(ch.take());
                progress = true;
            }
            ++tick;
            idle = progress ? 0 : idle + 1;
            if (idle > opt.transport_timeout)
                throw TransportError("transport stalled on channel " + ch.name());
        }
        return;
    }

    const std::size_t expected = words.size();
    std::vector<std::uint32_t> received;
    received.reserve(expected);
    bool consumer_timed_out = false;
    std::thread consumer([&] {
        std::size_t idle = 0;
        while (received.size() < expected) {
            if (ch.has_data()) {
                received.push_back(ch.take());
                idle = 0;
            } else if (++idle > opt.transport_timeout) {
                consumer_timed_out = true;
                return;
            } else {
                std::this_thread::yield();
            }
        }
    });

    std::size_t offered = 0;
    std::uint64_t tick = 0;
    std::size_t idle = 0;
    bool producer_timed_out = false;
    while (offered < expected) {
        if (ch.offer(words[offered], tick)) {
            ++offered;
            idle = 0;
        } else if (++idle > opt.transport_timeout) {
            producer_timed_out = true;
            break;
        } else {
            std::this_thread::yield();
        }
        ++tick;
    }
    consumer.join();
    if (producer_timed_out || consumer_timed_out)
        throw TransportError("transport stalled on channel " + ch.name());
    sink.insert(sink.end(), received.begin(), received.end());
}

void load_commands(std::span<const std::uint8_t> stream, TransactionChannel& ch,
                   EngineState& engine, const HostOptions& opt) {
    if (stream.size() % kDescriptorBytes != 0)
        throw CommandError("command stream is not a whole number of descriptors");
    const std::size_t word_count = stream.size() / 4;
    if (engine.cmd_fifo.size() + word_count > engine.cfg.cmd_fifo_depth)
        throw CapacityError("command FIFO capacity exceeded");

    std::vector<std::uint32_t> words(word_count);
    for (std::size_t i = 0; i < word_count; ++i) {
        words[i] = static_cast<std::uint32_t>(stream[4 * i]) |
                   static_cast<std::uint32_t>(stream[4 * i + 1]) << 8 |
                   static_cast<std::uint32_t>(stream[4 * i + 2]) << 16 |
                   static_cast<std::uint32_t>(stream[4 * i + 3]) << 24;
    }
    std::vector<std::uint32_t> sink;
    pump_words(ch, words, sink, opt);
    for (std::uint32_t w : sink) engine.cmd_fifo.push(w, engine.cycle);
}

Tensor run_layer(const LayerDescriptor& d, const Pad4& pad, const Tensor& input,
                 const LayerBlob* blob, EngineState& engine, TransactionChannel& to_engine,
                 TransactionChannel& from_engine, const HostOptions& opt,
                 LayerReport* report) {
    validate_descriptor(d);
    if (d.op_type == OpType::idle) return input;

    if (input.w != input.h) throw GeometryError("layer input must be square");
    if (input.c != d.input_channel) throw GeometryError("layer input channel mismatch");
    if (pad.symmetric()) {
        if (d.input_side != input.w || d.padding != pad.top)
            throw GeometryError("descriptor does not match the input surface");
    } else {
        if (pad.vertical() != pad.horizontal() || d.padding != 0 ||
            d.input_side != input.w + pad.vertical())
            throw GeometryError("descriptor does not match the padded surface");
    }

    const std::size_t lanes = engine.cfg.parallelism;
    const std::size_t out = d.output_side;
    Tensor aligned = pad_channels(pad_surface(input, pad), lanes);

    csb_dispatch(d, engine);
    const std::vector<Piece> pieces = plan_pieces(d, engine.cfg);

    Tensor result(out, out, d.output_channel);
    CycleStats total;
    std::size_t bytes_to_engine = 0;
    std::size_t bytes_from_engine = 0;

    std::size_t current_group = static_cast<std::size_t>(-1);
    std::size_t current_row = static_cast<std::size_t>(-1);
    std::size_t col_cursor = 0;

    if (d.op_type == OpType::conv_relu) {
        if (!blob) throw CommandError("convolution layer has no weight blob");
        if (blob->n != d.output_channel || blob->k != d.kernel || blob->ci != d.input_channel)
            throw GeometryError("weight blob does not match the layer");
        const std::vector<GemmTile> tiles = im2col_tiles(aligned, d.kernel, d.stride, lanes);
        StagedWeights staged;

        for (const Piece& piece : pieces) {
            if (piece.group != current_group) {
                staged = stage_group_weights(*blob, piece, d, aligned.c, lanes, to_engine, opt,
                                             bytes_to_engine);
                current_group = piece.group;
                current_row = static_cast<std::size_t>(-1);
            }
            if (piece.row != current_row) {
                current_row = piece.row;
                col_cursor = 0;
            }
            const std::size_t cols = piece.result_words / piece.lane_count;

            std::vector<Half> data;
            data.reserve(piece.data_lines * lanes);
            for (std::size_t j = 0; j < cols; ++j) {
                const GemmTile& t = tiles[piece.row * out + col_cursor + j];
                data.insert(data.end(), t.lanes.begin(), t.lanes.end());
            }
            std::vector<Half> received = transfer_halves(to_engine, data, opt);
            bytes_to_engine += received.size() * 2;

            std::vector<GemmTile> piece_tiles(cols);
            const std::size_t tile_halves = received.size() / cols;
            for (std::size_t j = 0; j < cols; ++j) {
                GemmTile& t = piece_tiles[j];
                t.lane_count = lanes;
                t.kernel_taps = tiles.front().kernel_taps;
                t.channel_groups = tiles.front().channel_groups;
                t.lanes.assign(received.begin() + j * tile_halves,
                               received.begin() + (j + 1) * tile_halves);
            }

            PieceOutput po = run_conv_piece(engine, piece_tiles, staged.filter_lines,
                                            staged.biases);
            std::vector<Half> results = transfer_halves(from_engine, po.values, opt);
            bytes_from_engine += results.size() * 2;

            for (std::size_t f = 0; f < piece.lane_count; ++f)
                for (std::size_t j = 0; j < cols; ++j)
                    result.at(col_cursor + j, piece.row, piece.lanes_begin + f) =
                        results[f * cols + j];
            total.merge(po.stats);
            col_cursor += cols;
        }
    } else {
        const std::size_t ks = d.kernel_size;
        for (const Piece& piece : pieces) {
            if (piece.group != current_group || piece.row != current_row) {
                current_group = piece.group;
                current_row = piece.row;
                col_cursor = 0;
            }
            const std::size_t cols = piece.result_words / lanes;

            std::vector<Half> data;
            data.reserve(cols * ks * lanes);
            for (std::size_t j = 0; j < cols; ++j) {
                const std::size_t x0 = (col_cursor + j) * d.stride;
                const std::size_t y0 = piece.row * d.stride;
                for (std::size_t kh = 0; kh < d.kernel; ++kh)
                    for (std::size_t kw = 0; kw < d.kernel; ++kw)
                        for (std::size_t l = 0; l < lanes; ++l)
                            data.push_back(aligned.at(x0 + kw, y0 + kh, piece.lanes_begin + l));
            }
            std::vector<Half> received = transfer_halves(to_engine, data, opt);
            bytes_to_engine += received.size() * 2;

            PieceOutput po = d.op_type == OpType::maxpool
                                 ? run_maxpool_piece(engine, received)
                                 : run_avgpool_piece(engine, received, ks);
            std::vector<Half> results = transfer_halves(from_engine, po.values, opt);
            bytes_from_engine += results.size() * 2;

            for (std::size_t j = 0; j < cols; ++j)
                for (std::size_t l = 0; l < lanes; ++l) {
                    const std::size_t ch = piece.lanes_begin + l;
                    if (ch < d.output_channel)
                        result.at(col_cursor + j, piece.row, ch) = results[j * lanes + l];
                }
            total.merge(po.stats);
            col_cursor += cols;
        }
    }

    if (report) {
        report->output_side = out;
        report->output_channels = d.output_channel;
        report->pieces = pieces.size();
        report->stats = total;
        report->bytes_to_engine = bytes_to_engine;
        report->bytes_from_engine = bytes_from_engine;
    }
    return result;
}

namespace {

// Float64 reference for one compiled layer; the convolution reference applies
// padding itself, pooling references take an already padded surface.
RefTensor ref_layer(const LayerPlan& plan, const RefTensor& input, const LayerBlob* blob) {
    const LayerDescriptor& d = plan.desc;
    if (d.op_type == OpType::conv_relu) {
        std::vector<std::vector<double>> filters(blob->n);
        for (std::size_t f = 0; f < blob->n; ++f) {
            std::span<const Half> taps = blob->filter(f);
            filters[f].resize(taps.size());
            for (std::size_t i = 0; i < taps.size(); ++i)
                filters[f][i] = half_to_real(taps[i]);
        }
        std::vector<double> biases(blob->biases.size());
        for (std::size_t i = 0; i < biases.size(); ++i)
            biases[i] = half_to_real(blob->biases[i]);
        return relu_ref(conv_ref(input, filters, biases, d.kernel, d.stride, plan.pad));
    }
    RefTensor padded = pad_surface_ref(input, plan.pad);
    return d.op_type == OpType::maxpool ? maxpool_ref(padded, d.kernel, d.stride)
                                        : avgpool_ref(padded, d.kernel, d.stride);
}

void record_errors(const Tensor& got, const RefTensor& want, LayerReport& lr) {
    for (std::size_t i = 0; i < want.data.size(); ++i) {
        const double g = half_to_real(got.data[i]);
        const double w = want.data[i];
        const double abs_err = std::abs(g - w);
        lr.max_abs_err = std::max(lr.max_abs_err, abs_err);
        if (std::abs(w) >= 1e-2)
            lr.max_rel_err = std::max(lr.max_rel_err, abs_err / std::abs(w));
    }
}

RefTensor concat_ref(const std::vector<RefTensor>& parts) {
    std::size_t c = 0;
    for (const RefTensor& p : parts) c += p.c;
    RefTensor out(parts.front().w, parts.front().h, c);
    std::size_t base = 0;
    for (const RefTensor& p : parts) {
        for (std::size_t y = 0; y < p.h; ++y)
            for (std::size_t x = 0; x < p.w; ++x)
                for (std::size_t ch = 0; ch < p.c; ++ch) out.at(x, y, base + ch) = p.at(x, y, ch);
        base += p.c;
    }
    return out;
}

const LayerBlob* find_blob(const BlobMap& blobs, const LayerPlan& plan) {
    if (plan.desc.op_type != OpType::conv_relu) return nullptr;
    auto it = blobs.find(plan.name);
    if (it == blobs.end()) throw ParseError("no weight blob for layer " + plan.name);
    return &it->second;
}

}  // namespace

InferenceReport run_network(const CompiledNetwork& net, const BlobMap& blobs,
                            const Tensor& image, EngineState& engine, const HostOptions& opt) {
    if (net.layers.empty()) throw CommandError("network has no layers");
    if (image.w != net.input_side || image.h != net.input_side ||
        image.c != net.input_channels)
        throw GeometryError("input tensor does not match the network");

    InferenceReport rep;
    rep.verified = opt.verify;
    TransactionChannel to_engine("to_engine", opt.channel_capacity);
    TransactionChannel from_engine("from_engine", opt.channel_capacity);

    while (!engine.cmd_fifo.empty()) engine.cmd_fifo.pop();  // restart semantics
    const std::vector<std::uint8_t> cmds = net.command_stream();
    load_commands(cmds, to_engine, engine, opt);
    rep.command_bytes = cmds.size();

    Tensor current = image;
    RefTensor ref_chain = opt.verify ? to_ref(image) : RefTensor{};

    std::size_t i = 0;
    while (i < net.layers.size()) {
        std::size_t group_end = i + 1;
        if (net.layers[i].group_id != 0) {
            while (group_end < net.layers.size() &&
                   net.layers[group_end].group_id == net.layers[i].group_id)
                ++group_end;
        }

        const Tensor group_input = current;
        std::vector<std::pair<std::size_t, Tensor>> parts;
        std::vector<RefTensor> ref_parts;
        for (std::size_t j = i; j < group_end; ++j) {
            const LayerPlan& plan = net.layers[j];

            std::array<std::uint8_t, kDescriptorBytes> raw{};
            for (std::size_t w = 0; w < 3; ++w) {
                const std::uint32_t word = engine.cmd_fifo.pop();
                raw[4 * w] = static_cast<std::uint8_t>(word);
                raw[4 * w + 1] = static_cast<std::uint8_t>(word >> 8);
                raw[4 * w + 2] = static_cast<std::uint8_t>(word >> 16);
                raw[4 * w + 3] = static_cast<std::uint8_t>(word >> 24);
            }
            if (decode_descriptor(raw) != plan.desc)
                throw CommandError("command stream diverged from the compiled plan");

            const LayerBlob* blob = find_blob(blobs, plan);
            LayerReport lr;
            lr.name = plan.name;
            Tensor out = run_layer(plan.desc, plan.pad, group_input, blob, engine, to_engine,
                                   from_engine, opt, &lr);

            if (opt.verify) {
                RefTensor ref_in = to_ref(group_input);
                record_errors(out, ref_layer(plan, ref_in, blob), lr);
                rep.worst_rel_err = std::max(rep.worst_rel_err, lr.max_rel_err);
            }

            rep.total_cycles += lr.stats.total_cycles;
            rep.bytes_to_engine += lr.bytes_to_engine;
            rep.bytes_from_engine += lr.bytes_from_engine;
            rep.layers.push_back(lr);
            parts.emplace_back(plan.desc.slot_order(), std::move(out));
            if (opt.verify)
                ref_parts.push_back(ref_layer(net.layers[j], ref_chain, blob));
        }

        if (parts.size() == 1) {
            current = std::move(parts.front().second);
            if (opt.verify) ref_chain = std::move(ref_parts.front());
        } else {
            std::sort(parts.begin(), parts.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });
            std::vector<Tensor> ordered;
            for (auto& pr : parts) ordered.push_back(std::move(pr.second));
            current = concat_channels(ordered);
            if (opt.verify) ref_chain = concat_ref(ref_parts);
        }
        i = group_end;
    }

    std::vector<double> logits(current.data.size());
    for (std::size_t n = 0; n < logits.size(); ++n) logits[n] = half_to_real(current.data[n]);
    const std::vector<double> probs = softmax_ref(logits);
    const std::vector<std::size_t> order = argsort_desc(probs);
    const std::size_t k = std::min(opt.top_k, order.size());
    for (std::size_t n = 0; n < k; ++n) {
        rep.top_classes.push_back(order[n]);
        rep.top_probs.push_back(probs[order[n]]);
    }

    if (opt.verify) {
        const std::vector<double> ref_probs = softmax_ref(ref_chain.data);
        const std::vector<std::size_t> ref_order = argsort_desc(ref_probs);
        rep.top1_agrees = !order.empty() && !ref_order.empty() && order[0] == ref_order[0];
    }
    return rep;
}

InferenceReport verify_against_oracle(const CompiledNetwork& net, const BlobMap& blobs,
                                      const Tensor& image, EngineState& engine,
                                      const HostOptions& opt) {
    HostOptions verify_opt = opt;
    verify_opt.verify = true;
    return run_network(net, blobs, image, engine, verify_opt);
}

std::vector<double> reference_logits(const CompiledNetwork& net, const BlobMap& blobs,
                                     const Tensor& image) {
    if (net.layers.empty()) throw CommandError("network has no layers");
    if (image.w != net.input_side || image.h != net.input_side ||
        image.c != net.input_channels)
        throw GeometryError("input tensor does not match the network");

    RefTensor chain = to_ref(image);
    std::size_t i = 0;
    while (i < net.layers.size()) {
        std::size_t group_end = i + 1;
        if (net.layers[i].group_id != 0) {
            while (group_end < net.layers.size() &&
                   net.layers[group_end].group_id == net.layers[i].group_id)
                ++group_end;
        }
        if (group_end == i + 1) {
            chain = ref_layer(net.layers[i], chain, find_blob(blobs, net.layers[i]));
        } else {
            std::vector<RefTensor> parts;  // compiled order is slot order
            for (std::size_t j = i; j < group_end; ++j)
                parts.push_back(ref_layer(net.layers[j], chain, find_blob(blobs, net.layers[j])));
            chain = concat_ref(parts);
        }
        i = group_end;
    }
    return chain.data;
}

std::string InferenceReport::to_text() const {
    std::ostringstream os;
    os << "layer              side   ch   pieces       cycles     bytes_in    bytes_out";
    if (verified) os << "      max_abs      max_rel";
    os << '\n';
    for (const LayerReport& lr : layers) {
        os << std::left << std::setw(18) << lr.name << std::right << std::setw(5)
           << lr.output_side << std::setw(5) << lr.output_channels << std::setw(9) << lr.pieces
           << std::setw(13) << lr.stats.total_cycles << std::setw(13) << lr.bytes_to_engine
           << std::setw(13) << lr.bytes_from_engine;
        if (verified) {
            os << std::setw(13) << std::scientific << std::setprecision(3) << lr.max_abs_err
               << std::setw(13) << lr.max_rel_err;
            os.unsetf(std::ios::floatfield);
        }
        os << '\n';
    }
    os << "total cycles " << total_cycles << ", command bytes " << command_bytes
       << ", to engine " << bytes_to_engine << ", from engine " << bytes_from_engine << '\n';
    for (std::size_t n = 0; n < top_classes.size(); ++n) {
        os << "top" << (n + 1) << " class " << top_classes[n] << " p=" << std::fixed
           << std::setprecision(6) << top_probs[n] << '\n';
        os.unsetf(std::ios::floatfield);
    }
    if (verified) {
        os << "worst relative error " << std::scientific << std::setprecision(3)
           << worst_rel_err << ", top1 " << (top1_agrees ? "agrees" : "DISAGREES") << '\n';
    }
    return os.str();
}

std::string InferenceReport::to_json() const {
    nlohmann::json j;
    j["command_bytes"] = command_bytes;
    j["total_cycles"] = total_cycles;
    j["bytes_to_engine"] = bytes_to_engine;
    j["bytes_from_engine"] = bytes_from_engine;
    j["verified"] = verified;
    if (verified) {
        j["top1_agrees"] = top1_agrees;
        j["worst_rel_err"] = worst_rel_err;
    }
    j["top_classes"] = top_classes;
    j["top_probs"] = top_probs;
    nlohmann::json layer_array = nlohmann::json::array();
    for (const LayerReport& lr : layers) {
        nlohmann::json lj;
        lj["name"] = lr.name;
        lj["output_side"] = lr.output_side;
        lj["output_channels"] = lr.output_channels;
        lj["pieces"] = lr.pieces;
        lj["cycles"] = lr.stats.total_cycles;
        lj["mul_busy"] = lr.stats.mul_busy;
        lj["stall_cycles"] = lr.stats.stall_cycles;
        lj["issue_bubbles"] = lr.stats.issue_bubbles;
        lj["bytes_to_engine"] = lr.bytes_to_engine;
        lj["bytes_from_engine"] = lr.bytes_from_engine;
        if (verified) {
            lj["max_abs_err"] = lr.max_abs_err;
            lj["max_rel_err"] = lr.max_rel_err;
        }
        layer_array.push_back(lj);
    }
    j["layers"] = layer_array;
    return j.dump(2);
}

}  // namespace facc
