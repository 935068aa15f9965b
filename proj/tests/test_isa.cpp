#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>
#include <sstream>

#include "facc/errors.hpp"
#include "facc/isa.hpp"

using facc::EngineConfig;
using facc::LayerDescriptor;
using facc::OpType;

namespace {

LayerDescriptor conv1_descriptor() {
    LayerDescriptor d;
    d.op_type = OpType::conv_relu;
    d.stride = 2;
    d.kernel = 3;
    d.padding = 0;
    d.kernel_size = 9;
    d.stride2 = 6;
    d.input_side = 227;
    d.output_side = 113;
    d.input_channel = 3;
    d.output_channel = 64;
    d.slot = 0;
    return d;
}

LayerDescriptor random_valid(std::mt19937& rng) {
    LayerDescriptor d;
    unsigned op = rng() % 4;
    d.op_type = static_cast<OpType>(op);
    if (d.op_type == OpType::idle) return d;

    std::size_t k = 1 + rng() % 6;
    std::size_t s = 1 + rng() % 3;
    std::size_t out = 1 + rng() % 200;
    std::size_t p = rng() % 3;
    if (2 * p >= (out - 1) * s + k) p = 0;
    std::size_t in = (out - 1) * s + k - 2 * p;

    d.kernel = static_cast<std::uint8_t>(k);
    d.stride = static_cast<std::uint8_t>(s);
    d.padding = static_cast<std::uint8_t>(p);
    d.kernel_size = static_cast<std::uint8_t>(k * k);
    d.stride2 = static_cast<std::uint8_t>(s * k);
    d.input_side = static_cast<std::uint16_t>(in);
    d.output_side = static_cast<std::uint16_t>(out);
    d.input_channel = static_cast<std::uint16_t>(1 + rng() % 4095);
    d.output_channel = d.op_type == OpType::conv_relu
                           ? static_cast<std::uint16_t>(1 + rng() % 4095)
                           : d.input_channel;
    d.slot = static_cast<std::uint8_t>(rng() % 16);
    return d;
}

}  // namespace

TEST_CASE("descriptor encode: frozen first-layer image") {
    auto bytes = facc::encode_descriptor(conv1_descriptor());
    const std::uint8_t want[12] = {0x21, 0x03, 0x09, 0x06, 0xE3, 0x00,
                                   0x71, 0x00, 0x03, 0x00, 0x04, 0x00};
    for (std::size_t i = 0; i < 12; ++i) CHECK(bytes[i] == want[i]);
}

TEST_CASE("descriptor encode: idle is all zeros") {
    auto bytes = facc::encode_descriptor(LayerDescriptor{});
    for (std::size_t i = 0; i < 12; ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("descriptor round trip over random valid instances") {
    std::mt19937 rng(21);
    for (int trial = 0; trial < 10000; ++trial) {
        LayerDescriptor d = random_valid(rng);
        auto bytes = facc::encode_descriptor(d);
        LayerDescriptor back = facc::decode_descriptor(bytes);
        CHECK(back == d);
        CHECK(facc::encode_descriptor(back) == bytes);
    }
}

TEST_CASE("descriptor validation rejects malformed fields") {
    LayerDescriptor d = conv1_descriptor();

    d.kernel_size = 8;
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);

    d = conv1_descriptor();
    d.stride2 = 7;
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);

    d = conv1_descriptor();
    d.output_side = 112;
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);

    d = conv1_descriptor();
    d.input_side = 228;  // (228 - 3) is not divisible by the stride
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);

    d = conv1_descriptor();
    d.op_type = OpType::maxpool;
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);  // ci != co

    d = conv1_descriptor();
    d.kernel = 16;
    CHECK_THROWS_AS(facc::encode_descriptor(d), facc::CommandError);
}

TEST_CASE("descriptor decode rejects malformed bytes") {
    auto bytes = facc::encode_descriptor(conv1_descriptor());

    auto bad = bytes;
    bad[11] |= 0xF0;  // reserved bits
    CHECK_THROWS_AS(facc::decode_descriptor(bad), facc::CommandError);

    bad = bytes;
    bad[0] = (bad[0] & 0xF0) | 0x05;  // op nibble out of range
    CHECK_THROWS_AS(facc::decode_descriptor(bad), facc::CommandError);

    bad = bytes;
    bad[2] = 8;  // kernel_size no longer kernel squared
    CHECK_THROWS_AS(facc::decode_descriptor(bad), facc::CommandError);

    std::vector<std::uint8_t> short_bytes(bytes.begin(), bytes.begin() + 11);
    CHECK_THROWS_AS(facc::decode_descriptor(short_bytes), facc::CommandError);
}

TEST_CASE("engine config validation") {
    EngineConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.max_layers() == 341);
    CHECK(cfg.aligned_channels(3) == 8);
    CHECK(cfg.aligned_channels(16) == 16);

    EngineConfig bad = cfg;
    bad.cmd_burst_len = 4;
    CHECK_THROWS_AS(bad.validate(), facc::CommandError);

    bad = cfg;
    bad.parallelism = 6;
    CHECK_THROWS_AS(bad.validate(), facc::CommandError);

    bad = cfg;
    bad.precision_bits = 32;
    CHECK_THROWS_AS(bad.validate(), facc::CommandError);
}

TEST_CASE("capacity rules") {
    EngineConfig cfg;

    LayerDescriptor d;
    d.op_type = OpType::conv_relu;
    d.kernel = 3;
    d.stride = 1;
    d.kernel_size = 9;
    d.stride2 = 3;
    d.input_side = 5;
    d.output_side = 3;
    d.input_channel = 910;  // 910 * 9 = 8190 fits the 8192-deep weight cache
    d.output_channel = 64;
    CHECK_NOTHROW(facc::validate_capacity(d, cfg));

    d.input_channel = 911;
    CHECK_THROWS_AS(facc::validate_capacity(d, cfg), facc::CapacityError);

    LayerDescriptor wide;
    wide.op_type = OpType::conv_relu;
    wide.kernel = 3;
    wide.stride = 1;
    wide.kernel_size = 9;
    wide.stride2 = 3;
    wide.input_side = 131;
    wide.output_side = 129;  // exceeds the 128-entry fsum cache
    wide.input_channel = 8;
    wide.output_channel = 8;
    CHECK_THROWS_AS(facc::validate_capacity(wide, cfg), facc::CapacityError);

    LayerDescriptor pool;
    pool.op_type = OpType::maxpool;
    pool.kernel = 1;
    pool.stride = 1;
    pool.kernel_size = 1;
    pool.stride2 = 1;
    pool.input_side = 129;  // 8 lanes * 129 exceeds the 1024-word result FIFO
    pool.output_side = 129;
    pool.input_channel = 8;
    pool.output_channel = 8;
    CHECK_THROWS_AS(facc::validate_capacity(pool, cfg), facc::CapacityError);

    CHECK_NOTHROW(facc::validate_capacity(LayerDescriptor{}, cfg));
}

TEST_CASE("network parsing") {
    std::istringstream text(
        "# comment line\n"
        "input 8 3\n"
        "\n"
        "c1 conv 3 1 1 1 1 1 16 0  # trailing comment\n"
        "p1 maxpool 2 2 0 0 0 0 16 0\n");
    facc::NetworkDescription net = facc::parse_network(text);
    CHECK(net.input_side == 8);
    CHECK(net.input_channels == 3);
    REQUIRE(net.layers.size() == 2);
    CHECK(net.layers[0].name == "c1");
    CHECK(net.layers[0].pad.top == 1);
    CHECK(net.layers[1].op == "maxpool");

    std::istringstream no_header("c1 conv 3 1 0 0 0 0 16 0\n");
    CHECK_THROWS_AS(facc::parse_network(no_header), facc::ParseError);

    std::istringstream no_layers("input 8 3\n");
    CHECK_THROWS_WITH_AS(facc::parse_network(no_layers), "no layers", facc::ParseError);

    std::istringstream bad_op("input 8 3\nc1 sigmoid 3 1 0 0 0 0 16 0\n");
    CHECK_THROWS_AS(facc::parse_network(bad_op), facc::ParseError);

    std::istringstream trailing("input 8 3\nc1 conv 3 1 0 0 0 0 16 0 junk\n");
    CHECK_THROWS_AS(facc::parse_network(trailing), facc::ParseError);
}

TEST_CASE("compile reproduces the published layer chain") {
    facc::NetworkDescription net =
        facc::load_network(std::string(FACC_FIXTURE_DIR) + "/squeezenet_v11.net");
    facc::CompiledNetwork compiled = facc::compile_network(net, EngineConfig{});

    REQUIRE(compiled.layers.size() == 30);
    REQUIRE(compiled.skipped.size() == 2);
    CHECK(compiled.skipped[0] == "drop9");
    CHECK(compiled.skipped[1] == "flatten");
    CHECK(compiled.command_stream().size() == 30 * 12);

    struct Expect {
        const char* name;
        OpType op;
        std::size_t in_side, out_side, ci, co;
    };
    const Expect table[] = {
        {"conv1", OpType::conv_relu, 227, 113, 3, 64},
        {"pool1", OpType::maxpool, 113, 56, 64, 64},
        {"fire2_squeeze1x1", OpType::conv_relu, 56, 56, 64, 16},
        {"fire2_expand1x1", OpType::conv_relu, 56, 56, 16, 64},
        {"fire2_expand3x3", OpType::conv_relu, 56, 56, 16, 64},
        {"fire3_squeeze1x1", OpType::conv_relu, 56, 56, 128, 16},
        {"fire3_expand1x1", OpType::conv_relu, 56, 56, 16, 64},
        {"fire3_expand3x3", OpType::conv_relu, 56, 56, 16, 64},
        {"pool3", OpType::maxpool, 57, 28, 128, 128},
        {"fire4_squeeze1x1", OpType::conv_relu, 28, 28, 128, 32},
        {"fire4_expand1x1", OpType::conv_relu, 28, 28, 32, 128},
        {"fire4_expand3x3", OpType::conv_relu, 28, 28, 32, 128},
        {"fire5_squeeze1x1", OpType::conv_relu, 28, 28, 256, 32},
        {"fire5_expand1x1", OpType::conv_relu, 28, 28, 32, 128},
        {"fire5_expand3x3", OpType::conv_relu, 28, 28, 32, 128},
        {"pool5", OpType::maxpool, 29, 14, 256, 256},
        {"fire6_squeeze1x1", OpType::conv_relu, 14, 14, 256, 48},
        {"fire6_expand1x1", OpType::conv_relu, 14, 14, 48, 192},
        {"fire6_expand3x3", OpType::conv_relu, 14, 14, 48, 192},
        {"fire7_squeeze1x1", OpType::conv_relu, 14, 14, 384, 48},
        {"fire7_expand1x1", OpType::conv_relu, 14, 14, 48, 192},
        {"fire7_expand3x3", OpType::conv_relu, 14, 14, 48, 192},
        {"fire8_squeeze1x1", OpType::conv_relu, 14, 14, 384, 64},
        {"fire8_expand1x1", OpType::conv_relu, 14, 14, 64, 256},
        {"fire8_expand3x3", OpType::conv_relu, 14, 14, 64, 256},
        {"fire9_squeeze1x1", OpType::conv_relu, 14, 14, 512, 64},
        {"fire9_expand1x1", OpType::conv_relu, 14, 14, 64, 256},
        {"fire9_expand3x3", OpType::conv_relu, 14, 14, 64, 256},
        {"conv10", OpType::conv_relu, 14, 14, 512, 1000},
        {"pool10", OpType::avgpool, 14, 1, 1000, 1000},
    };
    for (std::size_t i = 0; i < 30; ++i) {
        INFO("layer ", table[i].name);
        const facc::LayerPlan& plan = compiled.layers[i];
        CHECK(plan.name == table[i].name);
        CHECK(plan.desc.op_type == table[i].op);
        CHECK(plan.desc.input_side == table[i].in_side);
        CHECK(plan.desc.output_side == table[i].out_side);
        CHECK(plan.desc.input_channel == table[i].ci);
        CHECK(plan.desc.output_channel == table[i].co);
        CHECK_NOTHROW(facc::validate_capacity(plan.desc, EngineConfig{}));
    }

    // uneven pool padding moves into the surface: descriptor sees 57, pad 0
    CHECK(compiled.layers[8].desc.padding == 0);
    CHECK(compiled.layers[8].pad.bottom == 1);
    CHECK(compiled.layers[8].pad.right == 1);
    CHECK(compiled.layers[8].pad.top == 0);

    // expand pairs share a group id, squeeze layers do not
    CHECK(compiled.layers[2].group_id == 0);
    CHECK(compiled.layers[3].group_id != 0);
    CHECK(compiled.layers[3].group_id == compiled.layers[4].group_id);
    CHECK(compiled.layers[6].group_id == compiled.layers[7].group_id);
    CHECK(compiled.layers[6].group_id != compiled.layers[3].group_id);

    // pool10 compiles to a global average with kernel == input side
    CHECK(compiled.layers[29].desc.kernel == 14);
    CHECK(compiled.layers[29].desc.kernel_size == 196);
}

TEST_CASE("compile enforces the command FIFO layer budget") {
    facc::NetworkDescription net;
    net.input_side = 8;
    net.input_channels = 8;
    for (int i = 0; i < 341; ++i) {
        facc::NetworkLayer layer;
        layer.name = "l" + std::to_string(i);
        layer.op = "maxpool";
        layer.kernel = 1;
        layer.stride = 1;
        layer.output_channel = 8;
        net.layers.push_back(layer);
    }
    CHECK(facc::compile_network(net, EngineConfig{}).layers.size() == 341);

    facc::NetworkLayer extra = net.layers.back();
    extra.name = "l341";
    net.layers.push_back(extra);
    CHECK_THROWS_AS(facc::compile_network(net, EngineConfig{}), facc::CapacityError);
}

TEST_CASE("compile rejects broken slot groups and chains") {
    facc::NetworkDescription net;
    net.input_side = 8;
    net.input_channels = 8;
    facc::NetworkLayer a;
    a.name = "a";
    a.op = "conv";
    a.kernel = 1;
    a.stride = 1;
    a.output_channel = 16;
    a.slot_tag = 8;  // claims a group of two, but no partner follows
    net.layers.push_back(a);
    CHECK_THROWS_AS(facc::compile_network(net, EngineConfig{}), facc::CommandError);

    facc::NetworkLayer b = a;
    b.name = "b";
    b.slot_tag = 8;  // wrong order: should be 9
    net.layers.push_back(b);
    CHECK_THROWS_AS(facc::compile_network(net, EngineConfig{}), facc::CommandError);

    net.layers[1].slot_tag = 9;
    CHECK_NOTHROW(facc::compile_network(net, EngineConfig{}));

    facc::NetworkDescription bad;
    bad.input_side = 8;
    bad.input_channels = 8;
    facc::NetworkLayer pool;
    pool.name = "p";
    pool.op = "maxpool";
    pool.kernel = 2;
    pool.stride = 2;
    pool.output_channel = 16;  // pooling cannot change channels
    bad.layers.push_back(pool);
    CHECK_THROWS_AS(facc::compile_network(bad, EngineConfig{}), facc::GeometryError);
}

TEST_CASE("piece plan geometry") {
    EngineConfig cfg;

    auto pieces = facc::plan_pieces(conv1_descriptor(), cfg);
    REQUIRE(pieces.size() == 8 * 113);  // 8 filter groups, one row each
    CHECK(pieces[0].data_lines == 113 * 9);  // fits the 1024-line data cache
    CHECK(pieces[0].weight_lines == 8 * 9);
    CHECK(pieces[0].result_words == 8 * 113);
    CHECK(pieces[0].lane_count == 8);
    for (const auto& piece : pieces) {
        CHECK(piece.data_lines <= cfg.data_cache_depth);
        CHECK(piece.result_words <= cfg.result_fifo_depth);
    }

    LayerDescriptor pool10;
    pool10.op_type = OpType::avgpool;
    pool10.kernel = 14;
    pool10.stride = 1;
    pool10.kernel_size = 196;
    pool10.stride2 = 14;
    pool10.input_side = 14;
    pool10.output_side = 1;
    pool10.input_channel = 1000;
    pool10.output_channel = 1000;
    auto pp = facc::plan_pieces(pool10, cfg);
    REQUIRE(pp.size() == 125);
    CHECK(pp[0].data_lines == 196);
    CHECK(pp[0].weight_lines == 0);
    CHECK(pp[0].result_words == 8);

    // rows wider than the data cache split into column segments
    LayerDescriptor fat;
    fat.op_type = OpType::conv_relu;
    fat.kernel = 3;
    fat.stride = 1;
    fat.kernel_size = 9;
    fat.stride2 = 3;
    fat.input_side = 102;
    fat.output_side = 100;
    fat.input_channel = 64;  // 8 groups: 72 lines per point, 14 points per piece
    fat.output_channel = 8;
    auto fp = facc::plan_pieces(fat, cfg);
    CHECK(fp.size() == 100 * 8);  // ceil(100 / 14) = 8 segments per row
    CHECK(fp[0].data_lines == 14 * 72);
    CHECK(fp[7].data_lines == 2 * 72);  // 100 = 7 * 14 + 2
}

TEST_CASE("weight blob round trip") {
    facc::BlobMap blobs;
    std::mt19937 rng(31);
    for (const char* name : {"alpha", "beta"}) {
        facc::LayerBlob blob;
        blob.n = 3;
        blob.k = 3;
        blob.ci = 4;
        blob.filters.resize(blob.n * blob.k * blob.k * blob.ci);
        blob.biases.resize(blob.n);
        for (auto& h : blob.filters) h = facc::Half::from_bits(static_cast<std::uint16_t>(rng()));
        for (auto& h : blob.biases) h = facc::Half::from_bits(static_cast<std::uint16_t>(rng()));
        blobs[name] = blob;
    }
    const std::string path = "blobs_roundtrip.bin";
    facc::write_blobs(path, blobs);
    facc::BlobMap back = facc::read_blobs(path);
    REQUIRE(back.size() == 2);
    for (const auto& [name, blob] : blobs) {
        const facc::LayerBlob& got = back.at(name);
        CHECK(got.n == blob.n);
        CHECK(got.k == blob.k);
        CHECK(got.ci == blob.ci);
        REQUIRE(got.filters.size() == blob.filters.size());
        for (std::size_t i = 0; i < blob.filters.size(); ++i) {
            CHECK(got.filters[i] == blob.filters[i]);
        }
        for (std::size_t i = 0; i < blob.n; ++i) CHECK(got.biases[i] == blob.biases[i]);
        CHECK(got.filter(1).size() == 36);
        CHECK(got.filter(1)[0] == blob.filters[36]);
    }
    std::remove(path.c_str());

    CHECK_THROWS_AS(facc::read_blobs("missing_blobs.bin"), facc::ParseError);
    {
        std::FILE* f = std::fopen("truncated_blobs.bin", "wb");
        std::uint8_t junk[6] = {5, 0, 0, 0, 'a', 'b'};
        std::fwrite(junk, 1, sizeof junk, f);
        std::fclose(f);
    }
    CHECK_THROWS_AS(facc::read_blobs("truncated_blobs.bin"), facc::ParseError);
    std::remove("truncated_blobs.bin");
}
