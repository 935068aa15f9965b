#include "facc/tensor.hpp"

#include <fstream>

#include "facc/errors.hpp"

namespace facc {
namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xFF), static_cast<char>((v >> 8) & 0xFF),
                 static_cast<char>((v >> 16) & 0xFF), static_cast<char>((v >> 24) & 0xFF)};
    os.write(b, 4);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw ParseError("tensor blob: truncated header");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

std::size_t output_side(std::size_t w, std::size_t k, std::size_t p, std::size_t s) {
    return output_side_padded(w + 2 * p, k, s);
}

std::size_t output_side_padded(std::size_t padded_w, std::size_t k, std::size_t s) {
    if (k == 0 || s == 0) throw GeometryError("output side: kernel and stride must be nonzero");
    if (padded_w < k) throw GeometryError("output side: kernel larger than padded surface");
    std::size_t span = padded_w - k;
    if (span % s != 0) {
        throw GeometryError("output side: stride does not divide padded surface");
    }
    return span / s + 1;
}

Tensor pad_surface(const Tensor& t, const Pad4& pad) {
    Tensor out(t.w + pad.horizontal(), t.h + pad.vertical(), t.c);
    // Tensor zero-initialises to bit pattern 0x0000 (+0.0).
    for (std::size_t y = 0; y < t.h; ++y) {
        for (std::size_t x = 0; x < t.w; ++x) {
            for (std::size_t ch = 0; ch < t.c; ++ch) {
                out.at(x + pad.left, y + pad.top, ch) = t.at(x, y, ch);
            }
        }
    }
    return out;
}

Tensor pad_channels(const Tensor& t, std::size_t parallelism) {
    if (parallelism == 0) throw GeometryError("pad channels: parallelism must be nonzero");
    std::size_t aligned = (t.c + parallelism - 1) / parallelism * parallelism;
    if (aligned == t.c) return t;
    Tensor out(t.w, t.h, aligned);
    for (std::size_t y = 0; y < t.h; ++y) {
        for (std::size_t x = 0; x < t.w; ++x) {
            for (std::size_t ch = 0; ch < t.c; ++ch) {
                out.at(x, y, ch) = t.at(x, y, ch);
            }
        }
    }
    return out;
}

std::vector<GemmTile> im2col_tiles(const Tensor& padded, std::size_t k, std::size_t s,
                                   std::size_t parallelism) {
    if (padded.c % parallelism != 0) {
        throw GeometryError("im2col: channels not aligned to parallelism");
    }
    std::size_t out_w = output_side_padded(padded.w, k, s);
    std::size_t out_h = output_side_padded(padded.h, k, s);
    std::size_t groups = padded.c / parallelism;

    std::vector<GemmTile> tiles;
    tiles.reserve(out_w * out_h);
    for (std::size_t ho = 0; ho < out_h; ++ho) {
        for (std::size_t wo = 0; wo < out_w; ++wo) {
            GemmTile tile;
            tile.lane_count = parallelism;
            tile.kernel_taps = k * k;
            tile.channel_groups = groups;
            tile.lanes.reserve(groups * k * k * parallelism);
            for (std::size_t g = 0; g < groups; ++g) {
                for (std::size_t kh = 0; kh < k; ++kh) {
                    for (std::size_t kw = 0; kw < k; ++kw) {
                        std::size_t x = wo * s + kw;
                        std::size_t y = ho * s + kh;
                        const Half* src = padded.data.data() + padded.index(x, y, g * parallelism);
                        tile.lanes.insert(tile.lanes.end(), src, src + parallelism);
                    }
                }
            }
            tiles.push_back(std::move(tile));
        }
    }
    return tiles;
}

std::vector<Half> filter_weight_lines(std::span<const Half> filter, std::size_t k,
                                      std::size_t c, std::size_t parallelism) {
    if (c % parallelism != 0) {
        throw GeometryError("weight lines: channels not aligned to parallelism");
    }
    if (filter.size() != k * k * c) {
        throw GeometryError("weight lines: filter size does not match k*k*c");
    }
    std::size_t groups = c / parallelism;
    std::vector<Half> lines;
    lines.reserve(filter.size());
    for (std::size_t g = 0; g < groups; ++g) {
        for (std::size_t kh = 0; kh < k; ++kh) {
            for (std::size_t kw = 0; kw < k; ++kw) {
                std::size_t base = (kh * k + kw) * c + g * parallelism;
                for (std::size_t lane = 0; lane < parallelism; ++lane) {
                    lines.push_back(filter[base + lane]);
                }
            }
        }
    }
    return lines;
}

LineBuffer serdes_pack(std::span<const std::uint16_t> stream, std::size_t burst_len) {
    if (burst_len == 0) throw GeometryError("serdes: burst length must be nonzero");
    if (stream.size() % burst_len != 0) {
        throw GeometryError("serdes: word count not divisible by burst length");
    }
    LineBuffer buf;
    buf.lanes_per_line = burst_len;
    buf.words.assign(stream.begin(), stream.end());
    return buf;
}

std::vector<std::uint16_t> serdes_unpack(const LineBuffer& lines) {
    return lines.words;
}

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw GeometryError("concat: no parts");
    std::size_t total_c = 0;
    for (const Tensor& p : parts) {
        if (p.w != parts[0].w || p.h != parts[0].h) {
            throw GeometryError("concat: surface dimensions differ between parts");
        }
        total_c += p.c;
    }
    Tensor out(parts[0].w, parts[0].h, total_c);
    for (std::size_t y = 0; y < out.h; ++y) {
        for (std::size_t x = 0; x < out.w; ++x) {
            std::size_t ch = 0;
            for (const Tensor& p : parts) {
                for (std::size_t pc = 0; pc < p.c; ++pc) {
                    out.at(x, y, ch++) = p.at(x, y, pc);
                }
            }
        }
    }
    return out;
}

void write_tensor_blob(const std::string& path, const Tensor& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ParseError("tensor blob: cannot open for writing: " + path);
    os.write("FACC", 4);
    os.put('\x01');
    write_u32(os, static_cast<std::uint32_t>(t.w));
    write_u32(os, static_cast<std::uint32_t>(t.h));
    write_u32(os, static_cast<std::uint32_t>(t.c));
    for (Half v : t.data) {
        os.put(static_cast<char>(v.bits() & 0xFF));
        os.put(static_cast<char>(v.bits() >> 8));
    }
    if (!os) throw ParseError("tensor blob: write failed: " + path);
}

Tensor read_tensor_blob(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ParseError("tensor blob: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::string(magic, 4) != "FACC") {
        throw ParseError("tensor blob: bad magic");
    }
    int version = is.get();
    if (version != 1) throw ParseError("tensor blob: unsupported version");
    std::uint32_t w = read_u32(is);
    std::uint32_t h = read_u32(is);
    std::uint32_t c = read_u32(is);
    Tensor t(w, h, c);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
        int lo = is.get();
        int hi = is.get();
        if (lo < 0 || hi < 0) throw ParseError("tensor blob: truncated payload");
        t.data[i] = Half::from_bits(static_cast<std::uint16_t>(lo | (hi << 8)));
    }
    return t;
}

}  // namespace facc
