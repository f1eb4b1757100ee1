#include "openess/formats.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace openess::formats {

namespace {

[[noreturn]] void fail(const std::string& what) { throw std::runtime_error(what); }

void read_exact(std::istream& in, void* dst, std::size_t n, const char* context) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n)
        fail(std::string(context) + ": truncated payload");
}

std::uint16_t read_u16(std::istream& in, const char* ctx) {
    unsigned char b[2];
    read_exact(in, b, 2, ctx);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t read_u32(std::istream& in, const char* ctx) {
    unsigned char b[4];
    read_exact(in, b, 4, ctx);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::uint64_t read_u64(std::istream& in, const char* ctx) {
    unsigned char b[8];
    read_exact(in, b, 8, ctx);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

float read_f32(std::istream& in, const char* ctx) {
    const std::uint32_t bits = read_u32(in, ctx);
    float f;
    std::memcpy(&f, &bits, 4);
    return f;
}

void write_u16(std::ostream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                                static_cast<unsigned char>(v >> 8)};
    out.write(reinterpret_cast<const char*>(b), 2);
}

void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f32(std::ostream& out, float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32(out, bits);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("cannot open " + path);
    return in;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("cannot write " + path);
    return out;
}

void validate_event(const events::EventStream& s, const events::Event& e,
                    std::uint64_t prev_t, bool have_prev) {
    if (e.x >= s.width || e.y >= s.height) fail("EVT1: coordinate out of range");
    if (e.p != 1 && e.p != -1) fail("EVT1: polarity not in {-1,+1}");
    if (have_prev && e.t < prev_t) fail("EVT1: non-monotone timestamps");
}

events::EventStream read_evt1_text(std::istream& in) {
    std::string tag;
    events::EventStream s;
    if (!(in >> tag) || tag != "EVT1t") fail("EVT1: malformed header");
    long long w = 0, h = 0;
    if (!(in >> w >> h) || w <= 0 || h <= 0) fail("EVT1: malformed header");
    s.width = static_cast<std::uint32_t>(w);
    s.height = static_cast<std::uint32_t>(h);
    std::uint64_t prev = 0;
    bool have_prev = false;
    long long t, x, y, p;
    while (in >> t >> x >> y >> p) {
        if (t < 0 || x < 0 || y < 0 || x > 0xFFFF || y > 0xFFFF)
            fail("EVT1: coordinate out of range");
        events::Event e{static_cast<std::uint64_t>(t), static_cast<std::uint16_t>(x),
                        static_cast<std::uint16_t>(y), static_cast<std::int8_t>(p)};
        validate_event(s, e, prev, have_prev);
        prev = e.t;
        have_prev = true;
        s.events.push_back(e);
    }
    if (!in.eof() && in.fail()) fail("EVT1: malformed record");
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// EVT1
// ---------------------------------------------------------------------------

events::EventStream read_evt1(std::istream& in) {
    char magic[4];
    read_exact(in, magic, 4, "EVT1");
    if (std::memcmp(magic, "EVT1", 4) != 0) fail("EVT1: malformed header");
    // Text variant: "EVT1t W H". The 't' + whitespace pair disambiguates from
    // the binary width field.
    const int peek1 = in.peek();
    if (peek1 == 't') {
        in.get();
        const int peek2 = in.peek();
        if (peek2 == ' ' || peek2 == '\t' || peek2 == '\n' || peek2 == '\r') {
            std::stringstream text;
            text << "EVT1t" << in.rdbuf();
            return read_evt1_text(text);
        }
        in.unget();
    }
    events::EventStream s;
    s.width = read_u32(in, "EVT1");
    s.height = read_u32(in, "EVT1");
    if (s.width == 0 || s.height == 0) fail("EVT1: malformed header");
    const std::uint64_t n = read_u64(in, "EVT1");
    s.events.reserve(n);
    std::uint64_t prev = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        events::Event e;
        e.t = read_u64(in, "EVT1");
        e.x = read_u16(in, "EVT1");
        e.y = read_u16(in, "EVT1");
        unsigned char tail[2];
        read_exact(in, tail, 2, "EVT1");
        e.p = static_cast<std::int8_t>(tail[0]);
        validate_event(s, e, prev, i > 0);
        prev = e.t;
        s.events.push_back(e);
    }
    return s;
}

events::EventStream read_evt1_file(const std::string& path) {
    auto in = open_in(path);
    return read_evt1(in);
}

void write_evt1(std::ostream& out, const events::EventStream& stream) {
    out.write("EVT1", 4);
    write_u32(out, stream.width);
    write_u32(out, stream.height);
    write_u64(out, stream.events.size());
    for (const auto& e : stream.events) {
        write_u64(out, e.t);
        write_u16(out, e.x);
        write_u16(out, e.y);
        const unsigned char tail[2] = {static_cast<unsigned char>(e.p), 0};
        out.write(reinterpret_cast<const char*>(tail), 2);
    }
}

void write_evt1_text(std::ostream& out, const events::EventStream& stream) {
    out << "EVT1t " << stream.width << ' ' << stream.height << '\n';
    for (const auto& e : stream.events)
        out << e.t << ' ' << e.x << ' ' << e.y << ' ' << static_cast<int>(e.p) << '\n';
}

void write_evt1_file(const std::string& path, const events::EventStream& stream) {
    auto out = open_out(path);
    write_evt1(out, stream);
}

// ---------------------------------------------------------------------------
// MASK1
// ---------------------------------------------------------------------------

superpixel::SuperpixelMap read_mask1(std::istream& in,
                                     std::optional<std::uint32_t> strict_segments) {
    char magic[5];
    read_exact(in, magic, 5, "MASK1");
    if (std::memcmp(magic, "MASK1", 5) != 0) fail("MASK1: malformed header");
    superpixel::SuperpixelMap map;
    map.height = read_u32(in, "MASK1");
    map.width = read_u32(in, "MASK1");
    if (map.height == 0 || map.width == 0) fail("MASK1: malformed header");
    const std::size_t n = static_cast<std::size_t>(map.height) * map.width;
    map.labels.resize(n);
    std::uint32_t max_label = 0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint32_t v = read_u32(in, "MASK1: truncated mask");
        map.labels[i] = v;
        if (v == superpixel::kUnassigned) continue;
        if (strict_segments && v >= *strict_segments)
            fail("MASK1: label >= declared segment count");
        if (!any || v > max_label) max_label = v;
        any = true;
    }
    map.segment_count = any ? max_label + 1 : 0;
    return map;
}

superpixel::SuperpixelMap read_mask1_file(const std::string& path,
                                          std::optional<std::uint32_t> strict_segments) {
    auto in = open_in(path);
    return read_mask1(in, strict_segments);
}

void write_mask1(std::ostream& out, const superpixel::SuperpixelMap& map) {
    out.write("MASK1", 5);
    write_u32(out, map.height);
    write_u32(out, map.width);
    for (std::uint32_t v : map.labels) write_u32(out, v);
}

void write_mask1_file(const std::string& path, const superpixel::SuperpixelMap& map) {
    auto out = open_out(path);
    write_mask1(out, map);
}

// ---------------------------------------------------------------------------
// FMAP1
// ---------------------------------------------------------------------------

FeatureMap read_fmap1(std::istream& in, bool strict_finite) {
    char magic[5];
    read_exact(in, magic, 5, "FMAP1");
    if (std::memcmp(magic, "FMAP1", 5) != 0) fail("FMAP1: malformed header");
    const std::uint32_t d = read_u32(in, "FMAP1");
    const std::uint32_t h = read_u32(in, "FMAP1");
    const std::uint32_t w = read_u32(in, "FMAP1");
    if (d == 0 || h == 0 || w == 0) fail("FMAP1: malformed header");
    FeatureMap map(d, h, w);
    for (std::size_t i = 0; i < map.size(); ++i) {
        const float f = read_f32(in, "FMAP1: truncated payload");
        if (strict_finite && !std::isfinite(f)) fail("FMAP1: non-finite value");
        map.values[i] = f;
    }
    return map;
}

FeatureMap read_fmap1_file(const std::string& path, bool strict_finite) {
    auto in = open_in(path);
    return read_fmap1(in, strict_finite);
}

void write_fmap1(std::ostream& out, const FeatureMap& map) {
    out.write("FMAP1", 5);
    write_u32(out, map.channels);
    write_u32(out, map.height);
    write_u32(out, map.width);
    for (double v : map.values) write_f32(out, static_cast<float>(v));
}

void write_fmap1_file(const std::string& path, const FeatureMap& map) {
    auto out = open_out(path);
    write_fmap1(out, map);
}

// ---------------------------------------------------------------------------
// TEMB1
// ---------------------------------------------------------------------------

embedding::TextEmbeddingSet read_temb1(std::istream& in) {
    char magic[5];
    read_exact(in, magic, 5, "TEMB1");
    if (std::memcmp(magic, "TEMB1", 5) != 0) fail("TEMB1: malformed header");
    const std::uint32_t z = read_u32(in, "TEMB1");
    const std::uint32_t d = read_u32(in, "TEMB1");
    if (d == 0) fail("TEMB1: malformed header");
    embedding::TextEmbeddingSet set;
    set.dim = d;
    for (std::uint32_t i = 0; i < z; ++i) {
        const std::uint16_t len = read_u16(in, "TEMB1");
        std::string name(len, '\0');
        read_exact(in, name.data(), len, "TEMB1");
        std::vector<double> vec(d);
        double norm_sq = 0.0;
        for (std::uint32_t k = 0; k < d; ++k) {
            vec[k] = read_f32(in, "TEMB1: truncated payload");
            norm_sq += vec[k] * vec[k];
        }
        const double norm = std::sqrt(norm_sq);
        if (!(norm > 1e-12)) fail("TEMB1: zero-norm embedding for class " + name);
        for (double& v : vec) v /= norm;
        for (const auto& existing : set.names)
            if (existing == name) fail("TEMB1: duplicate class name " + name);
        set.names.push_back(std::move(name));
        set.vectors.push_back(std::move(vec));
    }
    return set;
}

embedding::TextEmbeddingSet read_temb1_file(const std::string& path) {
    auto in = open_in(path);
    return read_temb1(in);
}

void write_temb1(std::ostream& out, const embedding::TextEmbeddingSet& set) {
    out.write("TEMB1", 5);
    write_u32(out, set.class_count());
    write_u32(out, set.dim);
    for (std::uint32_t i = 0; i < set.class_count(); ++i) {
        write_u16(out, static_cast<std::uint16_t>(set.names[i].size()));
        out.write(set.names[i].data(), static_cast<std::streamsize>(set.names[i].size()));
        for (double v : set.vectors[i]) write_f32(out, static_cast<float>(v));
    }
}

void write_temb1_file(const std::string& path, const embedding::TextEmbeddingSet& set) {
    auto out = open_out(path);
    write_temb1(out, set);
}

// ---------------------------------------------------------------------------
// LBL1
// ---------------------------------------------------------------------------

LabelMap read_lbl1(std::istream& in) {
    char magic[4];
    read_exact(in, magic, 4, "LBL1");
    if (std::memcmp(magic, "LBL1", 4) != 0) fail("LBL1: malformed header");
    const std::uint32_t h = read_u32(in, "LBL1");
    const std::uint32_t w = read_u32(in, "LBL1");
    if (h == 0 || w == 0) fail("LBL1: malformed header");
    LabelMap map(h, w);
    read_exact(in, map.ids.data(), map.ids.size(), "LBL1: truncated payload");
    return map;
}

LabelMap read_lbl1_file(const std::string& path) {
    auto in = open_in(path);
    return read_lbl1(in);
}

void write_lbl1(std::ostream& out, const LabelMap& map) {
    out.write("LBL1", 4);
    write_u32(out, map.height);
    write_u32(out, map.width);
    out.write(reinterpret_cast<const char*>(map.ids.data()),
              static_cast<std::streamsize>(map.ids.size()));
}

void write_lbl1_file(const std::string& path, const LabelMap& map) {
    auto out = open_out(path);
    write_lbl1(out, map);
}

// ---------------------------------------------------------------------------
// ENC1
// ---------------------------------------------------------------------------

encoder::EncoderParams read_enc1(std::istream& in) {
    char magic[4];
    read_exact(in, magic, 4, "ENC1");
    if (std::memcmp(magic, "ENC1", 4) != 0) fail("ENC1: malformed header");
    const std::uint32_t n = read_u32(in, "ENC1");
    struct Shape {
        std::uint32_t in, out, kh, kw;
    };
    std::vector<Shape> shapes(n);
    for (auto& s : shapes) {
        s.in = read_u32(in, "ENC1");
        s.out = read_u32(in, "ENC1");
        s.kh = read_u32(in, "ENC1");
        s.kw = read_u32(in, "ENC1");
        if (s.in == 0 || s.out == 0 || s.kh == 0 || s.kw == 0) fail("ENC1: malformed shape");
    }
    encoder::EncoderParams params;
    for (const auto& s : shapes) {
        encoder::ConvLayer layer;
        layer.in_channels = s.in;
        layer.out_channels = s.out;
        layer.weights.resize(static_cast<std::size_t>(s.out) * s.in * s.kh * s.kw);
        layer.bias.resize(s.out);
        for (double& wv : layer.weights) wv = read_f32(in, "ENC1: truncated payload");
        for (double& bv : layer.bias) bv = read_f32(in, "ENC1: truncated payload");
        params.layers.push_back(std::move(layer));
    }
    return params;
}

encoder::EncoderParams read_enc1_file(const std::string& path) {
    auto in = open_in(path);
    return read_enc1(in);
}

void write_enc1(std::ostream& out, const encoder::EncoderParams& params) {
    out.write("ENC1", 4);
    write_u32(out, static_cast<std::uint32_t>(params.layers.size()));
    for (const auto& l : params.layers) {
        write_u32(out, l.in_channels);
        write_u32(out, l.out_channels);
        write_u32(out, 3);
        write_u32(out, 3);
    }
    for (const auto& l : params.layers) {
        for (double v : l.weights) write_f32(out, static_cast<float>(v));
        for (double v : l.bias) write_f32(out, static_cast<float>(v));
    }
}

void write_enc1_file(const std::string& path, const encoder::EncoderParams& params) {
    auto out = open_out(path);
    write_enc1(out, params);
}

// Projection heads ride in the same container as a single 1x1 "layer".
distill::ProjectionHead read_head_file(const std::string& path) {
    auto in = open_in(path);
    char magic[4];
    read_exact(in, magic, 4, "ENC1");
    if (std::memcmp(magic, "ENC1", 4) != 0) fail("ENC1: malformed header");
    const std::uint32_t n = read_u32(in, "ENC1");
    if (n != 1) fail("head file: expected a single layer");
    const std::uint32_t din = read_u32(in, "ENC1");
    const std::uint32_t dout = read_u32(in, "ENC1");
    const std::uint32_t kh = read_u32(in, "ENC1");
    const std::uint32_t kw = read_u32(in, "ENC1");
    if (kh != 1 || kw != 1) fail("head file: expected 1x1 shape");
    distill::ProjectionHead head;
    head.in_dim = din;
    head.out_dim = dout;
    head.weight.resize(static_cast<std::size_t>(din) * dout);
    head.bias.resize(dout);
    for (double& v : head.weight) v = read_f32(in, "head file: truncated payload");
    for (double& v : head.bias) v = read_f32(in, "head file: truncated payload");
    return head;
}

void write_head_file(const std::string& path, const distill::ProjectionHead& head) {
    auto out = open_out(path);
    out.write("ENC1", 4);
    write_u32(out, 1);
    write_u32(out, head.in_dim);
    write_u32(out, head.out_dim);
    write_u32(out, 1);
    write_u32(out, 1);
    for (double v : head.weight) write_f32(out, static_cast<float>(v));
    for (double v : head.bias) write_f32(out, static_cast<float>(v));
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

FeatureMap read_pgm(std::istream& in) {
    std::string magic;
    in >> magic;
    if (magic != "P5") fail("PGM: expected P5");
    auto next_token = [&in]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        fail("PGM: truncated header");
    };
    const int w = std::stoi(next_token());
    const int h = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255) fail("PGM: bad header");
    in.get();  // single whitespace after maxval
    FeatureMap map(1, static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(w));
    std::vector<unsigned char> row(static_cast<std::size_t>(w));
    for (int y = 0; y < h; ++y) {
        read_exact(in, row.data(), row.size(), "PGM: truncated payload");
        for (int x = 0; x < w; ++x) map.at(0, y, x) = row[static_cast<std::size_t>(x)];
    }
    return map;
}

FeatureMap read_pgm_file(const std::string& path) {
    auto in = open_in(path);
    return read_pgm(in);
}

void write_pgm(std::ostream& out, const FeatureMap& image) {
    if (image.channels != 1) fail("PGM: expected a single-channel image");
    out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
    for (std::uint32_t y = 0; y < image.height; ++y)
        for (std::uint32_t x = 0; x < image.width; ++x) {
            double v = image.at(0, y, x);
            v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
            const unsigned char b = static_cast<unsigned char>(std::lround(v));
            out.write(reinterpret_cast<const char*>(&b), 1);
        }
}

void write_pgm_file(const std::string& path, const FeatureMap& image) {
    auto out = open_out(path);
    write_pgm(out, image);
}

void write_similarity_pgm_file(const std::string& path, const FeatureMap& similarity) {
    FeatureMap scaled(1, similarity.height, similarity.width);
    for (std::size_t i = 0; i < similarity.size(); ++i)
        scaled.values[i] = (similarity.values[i] + 1.0) * 0.5 * 255.0;
    write_pgm_file(path, scaled);
}

FeatureMap read_image_or_fmap(const std::string& path) {
    auto in = open_in(path);
    char head[2] = {0, 0};
    in.read(head, 2);
    in.seekg(0);
    if (head[0] == 'P' && head[1] == '5') return read_pgm(in);
    return read_fmap1(in);
}

}  // namespace openess::formats
