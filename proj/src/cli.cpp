#include "facc/cli.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "facc/channel.hpp"
#include "facc/engine.hpp"
#include "facc/errors.hpp"
#include "facc/host.hpp"
#include "facc/oracle.hpp"

namespace facc {

namespace {

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path);
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in),
                                     std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const void* data, std::size_t size) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw ParseError("cannot write " + path);
}

nlohmann::json parse_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
}

EngineConfig apply_config(const nlohmann::json& j, EngineConfig cfg, const std::string& where) {
    if (!j.is_object()) throw ParseError(where + ": config must be an object");
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "precision_bits") cfg.precision_bits = value.get<std::size_t>();
            else if (key == "parallelism") cfg.parallelism = value.get<std::size_t>();
            else if (key == "max_kernel") cfg.max_kernel = value.get<std::size_t>();
            else if (key == "max_o_side") cfg.max_output_side = value.get<std::size_t>();
            else if (key == "cmd_burst_len") cfg.cmd_burst_len = value.get<std::size_t>();
            else if (key == "data_cache_depth") cfg.data_cache_depth = value.get<std::size_t>();
            else if (key == "weight_cache_depth") cfg.weight_cache_depth = value.get<std::size_t>();
            else if (key == "bias_cache_depth") cfg.bias_cache_depth = value.get<std::size_t>();
            else if (key == "cmd_fifo_depth") cfg.cmd_fifo_depth = value.get<std::size_t>();
            else if (key == "result_fifo_depth") cfg.result_fifo_depth = value.get<std::size_t>();
            else if (key == "pipe_fifo_depth") cfg.pipe_fifo_depth = value.get<std::size_t>();
            else if (key == "flush_subnormals") cfg.flush_subnormals = value.get<bool>();
            else if (key == "maxpool_init") {
                const std::string v = value.get<std::string>();
                if (v == "zero") cfg.maxpool_init = MaxpoolInit::zero;
                else if (v == "neg_inf") cfg.maxpool_init = MaxpoolInit::neg_inf;
                else throw ParseError(where + ": maxpool_init must be zero or neg_inf");
            } else if (key == "latency") {
                for (const auto& [lk, lv] : value.items()) {
                    if (lk == "mul") cfg.latency.mul = lv.get<std::size_t>();
                    else if (lk == "add") cfg.latency.add = lv.get<std::size_t>();
                    else if (lk == "cmp") cfg.latency.cmp = lv.get<std::size_t>();
                    else if (lk == "div") cfg.latency.div = lv.get<std::size_t>();
                    else if (lk == "fifo_write") cfg.latency.fifo_write = lv.get<std::size_t>();
                    else throw ParseError(where + ": unknown latency field " + lk);
                }
            } else {
                throw ParseError(where + ": unknown config key " + key);
            }
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(where + ": bad value for " + key + ": " + e.what());
        }
    }
    return cfg;
}

}  // namespace

EngineConfig load_config_file(const std::string& path, const EngineConfig& base) {
    EngineConfig cfg = apply_config(parse_json_file(path), base, path);
    cfg.validate();
    return cfg;
}

RunManifest load_manifest(const std::string& path, const EngineConfig& base) {
    const nlohmann::json j = parse_json_file(path);
    if (!j.is_object()) throw ParseError(path + ": manifest must be an object");

    RunManifest m;
    m.config = base;
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "network") m.network = value.get<std::string>();
            else if (key == "blobs") m.blobs = value.get<std::string>();
            else if (key == "image") {
                m.image = value.at("path").get<std::string>();
                m.image_side = value.at("side").get<std::size_t>();
            } else if (key == "means_bgr") {
                const auto v = value.get<std::vector<double>>();
                if (v.size() != 3) throw ParseError(path + ": means_bgr needs 3 values");
                std::copy(v.begin(), v.end(), m.means_bgr.begin());
            } else if (key == "scale") m.scale = value.get<double>();
            else if (key == "top_k") m.top_k = value.get<std::size_t>();
            else if (key == "config") m.config = apply_config(value, m.config, path);
            else if (key == "report_text") m.report_text = value.get<std::string>();
            else if (key == "report_json") m.report_json = value.get<std::string>();
            else throw ParseError(path + ": unknown manifest key " + key);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path + ": bad value for " + key + ": " + e.what());
        }
    }
    if (m.network.empty()) throw ParseError(path + ": manifest needs a network path");
    if (m.image.empty()) throw ParseError(path + ": manifest needs an image path and side");
    m.config.validate();
    return m;
}

std::string descriptor_table(std::span<const LayerDescriptor> descs) {
    std::ostringstream os;
    os << "idx  op           k   s  pad  ksz   s2     in    out     ci     co  slot\n";
    for (std::size_t i = 0; i < descs.size(); ++i) {
        const LayerDescriptor& d = descs[i];
        os << std::setw(3) << i << "  " << std::left << std::setw(10) << op_name(d.op_type)
           << std::right << std::setw(3) << +d.kernel << std::setw(4) << +d.stride
           << std::setw(5) << +d.padding << std::setw(5) << +d.kernel_size << std::setw(5)
           << +d.stride2 << std::setw(7) << d.input_side << std::setw(7) << d.output_side
           << std::setw(7) << d.input_channel << std::setw(7) << d.output_channel
           << std::setw(6) << +d.slot << '\n';
    }
    return os.str();
}

namespace {

int cmd_compile(const std::string& net_path, const std::string& out_path,
                const EngineConfig& cfg) {
    const CompiledNetwork net = compile_network(load_network(net_path), cfg);

    std::vector<LayerDescriptor> descs;
    for (const LayerPlan& p : net.layers) descs.push_back(p.desc);
    std::cout << descriptor_table(descs) << '\n';

    std::cout << "layer               pieces  weight_bytes  bias_bytes    data_bytes  "
                 "result_bytes\n";
    std::size_t weight = 0, bias = 0, data = 0, result = 0;
    for (const LayerPlan& p : net.layers) {
        std::cout << std::left << std::setw(18) << p.name << std::right << std::setw(8)
                  << plan_pieces(p.desc, cfg).size() << std::setw(14) << p.weight_bytes
                  << std::setw(12) << p.bias_bytes << std::setw(14) << p.data_bytes
                  << std::setw(14) << p.result_bytes << '\n';
        weight += p.weight_bytes;
        bias += p.bias_bytes;
        data += p.data_bytes;
        result += p.result_bytes;
    }
    const std::vector<std::uint8_t> stream = net.command_stream();
    std::cout << "totals: " << net.layers.size() << " layers, " << stream.size()
              << " command bytes, " << weight + bias << " weight bytes, " << data
              << " data bytes, " << result << " result bytes\n";
    if (!net.skipped.empty()) {
        std::cout << "folded away:";
        for (const std::string& name : net.skipped) std::cout << ' ' << name;
        std::cout << '\n';
    }
    if (!out_path.empty()) {
        write_file(out_path, stream.data(), stream.size());
        std::cout << "wrote " << stream.size() << " bytes to " << out_path << '\n';
    }
    return 0;
}

int cmd_decode(const std::string& stream_path) {
    const std::vector<std::uint8_t> bytes = read_file(stream_path);
    if (bytes.size() % kDescriptorBytes != 0)
        throw CommandError(stream_path + " is not a whole number of descriptors");
    std::vector<LayerDescriptor> descs;
    for (std::size_t off = 0; off < bytes.size(); off += kDescriptorBytes)
        descs.push_back(decode_descriptor(
            std::span<const std::uint8_t>(bytes).subspan(off, kDescriptorBytes)));
    std::cout << descriptor_table(descs);
    return 0;
}

int cmd_stats(const std::string& net_path, const EngineConfig& cfg) {
    const CompiledNetwork net = compile_network(load_network(net_path), cfg);
    std::cout << "layer               side    ch  pieces      bytes_in     bytes_out\n";
    std::size_t in_total = 0, out_total = 0;
    for (const LayerPlan& p : net.layers) {
        const std::size_t in = p.weight_bytes + p.bias_bytes + p.data_bytes;
        std::cout << std::left << std::setw(18) << p.name << std::right << std::setw(6)
                  << p.desc.output_side << std::setw(6) << p.desc.output_channel
                  << std::setw(8) << plan_pieces(p.desc, cfg).size() << std::setw(14) << in
                  << std::setw(14) << p.result_bytes << '\n';
        in_total += in;
        out_total += p.result_bytes;
    }
    std::cout << "totals: " << net.layers.size() << " layers, "
              << net.command_stream().size() << " command bytes, " << in_total
              << " bytes in, " << out_total << " bytes out\n";
    return 0;
}

int cmd_gen(const std::string& net_path, const std::string& blobs_path,
            const std::string& image_path, std::uint32_t seed, const EngineConfig& cfg) {
    const CompiledNetwork net = compile_network(load_network(net_path), cfg);
    std::mt19937 rng(seed);

    BlobMap blobs;
    std::uniform_real_distribution<double> wdist(0.05, 0.15);
    for (const LayerPlan& p : net.layers) {
        if (p.desc.op_type != OpType::conv_relu) continue;
        LayerBlob b;
        b.n = p.desc.output_channel;
        b.k = p.desc.kernel;
        b.ci = p.desc.input_channel;
        b.filters.resize(b.n * b.k * b.k * b.ci);
        for (Half& v : b.filters) v = real_to_half(wdist(rng));
        b.biases.resize(b.n);
        for (Half& v : b.biases) v = real_to_half(wdist(rng));
        blobs[p.name] = std::move(b);
    }
    write_blobs(blobs_path, blobs);

    std::uniform_int_distribution<int> bdist(0, 255);
    std::vector<std::uint8_t> image(net.input_side * net.input_side * net.input_channels);
    for (std::uint8_t& v : image) v = static_cast<std::uint8_t>(bdist(rng));
    write_file(image_path, image.data(), image.size());

    std::cout << "wrote " << blobs.size() << " weight blobs to " << blobs_path
              << " and a side-" << net.input_side << " image to " << image_path << '\n';
    return 0;
}

void print_topk(const std::vector<double>& probs, const std::vector<std::size_t>& order,
                std::size_t top_k) {
    const std::size_t k = std::min(top_k, order.size());
    for (std::size_t n = 0; n < k; ++n) {
        std::cout << "top" << (n + 1) << " class " << order[n] << " p=" << std::fixed
                  << std::setprecision(6) << probs[order[n]] << '\n';
        std::cout.unsetf(std::ios::floatfield);
    }
}

int cmd_run(const RunManifest& m, bool reference, bool verify, std::size_t threads,
            double tolerance) {
    const CompiledNetwork net = compile_network(load_network(m.network), m.config);
    const BlobMap blobs = m.blobs.empty() ? BlobMap{} : read_blobs(m.blobs);
    for (const LayerPlan& p : net.layers) {
        if (p.desc.op_type != OpType::conv_relu) continue;
        const auto it = blobs.find(p.name);
        if (it == blobs.end()) throw ParseError("no weight blob for layer " + p.name);
        const LayerBlob& b = it->second;
        if (b.n != p.desc.output_channel || b.k != p.desc.kernel ||
            b.ci != p.desc.input_channel)
            throw GeometryError("blob shape mismatch for layer " + p.name);
    }
    const std::vector<std::uint8_t> raw = read_file(m.image);
    if (raw.size() != m.image_side * m.image_side * 3)
        throw GeometryError(m.image + ": expected " +
                            std::to_string(m.image_side * m.image_side * 3) + " bytes, got " +
                            std::to_string(raw.size()));
    const Tensor input = preprocess_image(raw, m.image_side, m.means_bgr, m.scale);

    if (reference) {
        const std::vector<double> probs = softmax_ref(reference_logits(net, blobs, input));
        print_topk(probs, argsort_desc(probs), m.top_k);
        return 0;
    }

    HostOptions opt;
    opt.means_bgr = m.means_bgr;
    opt.scale = m.scale;
    opt.top_k = m.top_k;
    opt.two_threads = threads >= 2;
    opt.verify = verify;

    EngineState engine{m.config};
    const InferenceReport rep = run_network(net, blobs, input, engine, opt);

    const std::string text = rep.to_text();
    std::cout << text;
    if (!m.report_text.empty()) write_file(m.report_text, text.data(), text.size());
    if (!m.report_json.empty()) {
        const std::string json = rep.to_json() + "\n";
        write_file(m.report_json, json.data(), json.size());
    }
    if (verify && !(rep.top1_agrees && rep.worst_rel_err <= tolerance)) {
        std::cout << "verification failed: budget " << tolerance << '\n';
        return 3;
    }
    return 0;
}

int cmd_bitonic(std::size_t n) {
    const std::vector<ComparatorStage> net = bitonic_network(n);
    std::cout << net.size() << " stages, " << n / 2 << " comparators\n";
    for (std::size_t s = 0; s < net.size(); ++s) {
        std::cout << "stage " << std::setw(2) << s << ":";
        for (const Comparator& c : net[s].pairs)
            std::cout << ' ' << c.lo << (c.ascending ? '<' : '>') << c.hi;
        std::cout << '\n';
    }
    return 0;
}

int cmd_accumulate(std::size_t len, std::size_t adders) {
    if (len == 0 || adders == 0) throw GeometryError("length and adders must be positive");
    AccumulationSchedule sched;
    pipeline_accumulate(std::vector<double>(len, 0.0), adders, &sched);
    const std::vector<std::size_t> counts = sched.fetch_counts();
    for (std::size_t i = 0; i < counts.size(); ++i)
        std::cout << (i ? " " : "") << counts[i];
    std::cout << '\n';
    std::cout << counts.size() << " cycles with " << adders << " adders\n";
    return 0;
}

int cmd_mec(std::size_t side, std::size_t k, std::size_t s) {
    if (k == 0 || s == 0 || side < k) throw GeometryError("need side >= k >= 1 and s >= 1");
    if ((side - k) % s != 0) throw GeometryError("stride does not tile the side");

    const RefTensor input(side, side, 1);
    const std::vector<std::vector<double>> filters{std::vector<double>(k * k, 0.0)};
    const std::vector<double> biases{0.0};
    MecTrace trace;
    conv_mec(input, filters, biases, k, s, Pad4{}, &trace);

    const bool uniform = std::all_of(trace.fetch_counts.begin(), trace.fetch_counts.end(),
                                     [&](std::size_t c) { return c == trace.fetch_counts[0]; });
    if (!uniform || trace.fetch_counts.empty())
        throw GeometryError("streaming fetch counts are not uniform");
    std::cout << "mec fetches per element: " << trace.fetch_counts[0] << '\n';

    const std::vector<std::size_t> covering = covering_window_counts(side, k, s);
    std::cout << "im2col interior fetches: "
              << *std::max_element(covering.begin(), covering.end()) << '\n';
    std::cout << "adjacent window overlap: " << trace.neighbor_overlap << '\n';
    return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"stream-architecture FP16 CNN accelerator model"};
    app.fallthrough();
    app.require_subcommand(1);

    std::string config_path;
    app.add_option("--config", config_path, "engine configuration JSON")
        ->envname("FACC_CONFIG");

    auto* compile = app.add_subcommand("compile", "turn a network description into a "
                                                  "command stream and parameter table");
    std::string compile_path, compile_out;
    bool decode = false;
    compile->add_option("path", compile_path,
                        "network description, or command stream with --decode")
        ->required();
    compile->add_option("-o,--out", compile_out, "write the command stream here");
    compile->add_flag("--decode", decode, "treat the input as an encoded command stream");

    auto* run = app.add_subcommand("run", "run a manifest through the engine model");
    std::string run_manifest;
    bool run_reference = false, run_verify = false;
    std::size_t run_threads = 1;
    double run_tolerance = 0.02;
    run->add_option("manifest", run_manifest, "JSON run manifest")->required();
    run->add_flag("--reference", run_reference, "wide-precision forward pass only");
    run->add_flag("--verify", run_verify, "check every layer against the reference");
    run->add_option("--threads", run_threads, "2 pumps the channels from a second thread");
    run->add_option("--tolerance", run_tolerance, "relative error budget for --verify");

    auto* verify = app.add_subcommand("verify", "run with reference checks; exit 0 only "
                                                "inside tolerance");
    std::string verify_manifest;
    std::size_t verify_threads = 1;
    double verify_tolerance = 0.02;
    verify->add_option("manifest", verify_manifest, "JSON run manifest")->required();
    verify->add_option("--threads", verify_threads, "2 pumps the channels from a second thread");
    verify->add_option("--tolerance", verify_tolerance, "relative error budget");

    auto* stats = app.add_subcommand("stats", "per-layer traffic and piece counts");
    std::string stats_path;
    stats->add_option("network", stats_path, "network description")->required();

    auto* gen = app.add_subcommand("gen", "synthesize random weights and an input image "
                                          "for a network");
    std::string gen_net, gen_blobs, gen_image;
    std::uint32_t gen_seed = 1;
    gen->add_option("network", gen_net, "network description")->required();
    gen->add_option("--blobs", gen_blobs, "weight blob output path")->required();
    gen->add_option("--image", gen_image, "raw image output path")->required();
    gen->add_option("--seed", gen_seed, "generator seed");

    auto* alg = app.add_subcommand("alg", "algorithm schedules");
    alg->require_subcommand(1);
    auto* bitonic = alg->add_subcommand("bitonic", "sorting network stage schedule");
    std::size_t bitonic_n = 8;
    bitonic->add_option("n", bitonic_n, "input count, power of two")->required();
    auto* accumulate = alg->add_subcommand("accumulate", "fixed-adder reduction schedule");
    std::size_t acc_len = 0, acc_adders = 0;
    accumulate->add_option("len", acc_len, "sequence length")->required();
    accumulate->add_option("adders", acc_adders, "adder budget")->required();
    auto* mec = alg->add_subcommand("mec", "streaming vs tiled lowering access counts");
    std::size_t mec_side = 7, mec_k = 3, mec_s = 1;
    mec->add_option("--side", mec_side, "input side")->required();
    mec->add_option("--k", mec_k, "kernel side");
    mec->add_option("--s", mec_s, "stride");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        EngineConfig cfg;
        if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
        cfg.validate();

        if (*compile)
            return decode ? cmd_decode(compile_path) : cmd_compile(compile_path, compile_out, cfg);
        if (*run)
            return cmd_run(load_manifest(run_manifest, cfg), run_reference, run_verify,
                           run_threads, run_tolerance);
        if (*verify)
            return cmd_run(load_manifest(verify_manifest, cfg), false, true, verify_threads,
                           verify_tolerance);
        if (*stats) return cmd_stats(stats_path, cfg);
        if (*gen) return cmd_gen(gen_net, gen_blobs, gen_image, gen_seed, cfg);
        if (*bitonic) return cmd_bitonic(bitonic_n);
        if (*accumulate) return cmd_accumulate(acc_len, acc_adders);
        if (*mec) return cmd_mec(mec_side, mec_k, mec_s);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace facc
