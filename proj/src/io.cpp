#include "pel/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>

#include "pel/rng.hpp"

namespace pel {

namespace {

constexpr char kBitstreamMagic[5] = {'P', 'E', 'L', 'B', '1'};
constexpr char kSamplesMagic[5] = {'P', 'E', 'L', 'S', '1'};

void put_u64le(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64le(std::string& out, double v) { put_u64le(out, std::bit_cast<uint64_t>(v)); }

void put_varint(std::string& out, uint64_t v) {
    while (v >= 0x80) {
        out.push_back(static_cast<char>((v & 0x7f) | 0x80));
        v >>= 7;
    }
    out.push_back(static_cast<char>(v));
}

uint64_t zigzag(int64_t s) { return (static_cast<uint64_t>(s) << 1) ^ static_cast<uint64_t>(s >> 63); }
int64_t unzigzag(uint64_t z) { return static_cast<int64_t>(z >> 1) ^ -static_cast<int64_t>(z & 1); }

struct Reader {
    const std::string& data;
    size_t pos = 0;
    const char* what;

    void need(size_t k) const {
        if (pos + k > data.size()) throw ConfigError(std::string(what) + ": truncated file");
    }
    uint64_t u64le() {
        need(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(data[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    double f64le() { return std::bit_cast<double>(u64le()); }
    uint64_t varint() {
        uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            need(1);
            const uint8_t b = static_cast<uint8_t>(data[pos++]);
            v |= static_cast<uint64_t>(b & 0x7f) << shift;
            if (!(b & 0x80)) return v;
        }
        throw ConfigError(std::string(what) + ": varint overflow");
    }
    void magic(const char (&m)[5]) {
        need(5);
        if (std::memcmp(data.data() + pos, m, 5) != 0) throw ConfigError(std::string(what) + ": bad magic");
        pos += 5;
    }
    int64_t count(const char* field) {
        const uint64_t v = u64le();
        if (v > (1ull << 40)) throw ConfigError(std::string(what) + ": implausible " + field);
        return static_cast<int64_t>(v);
    }
    void done() const {
        if (pos != data.size()) throw ConfigError(std::string(what) + ": trailing bytes");
    }
};

std::string read_file_bytes(const std::filesystem::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string(what) + ": cannot open " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw ConfigError(std::string(what) + ": read failure on " + path.string());
    return data;
}

void write_file_bytes(const std::filesystem::path& path, const std::string& data, const char* what) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError(std::string(what) + ": cannot open " + path.string() + " for writing");
    out.write(data.data(), static_cast<std::streamsize>(data.size()));
    out.flush();
    if (!out) throw NumericalError(std::string(what) + ": write failure on " + path.string());
}

}  // namespace

void write_bitstream(const std::filesystem::path& path, const Bitstream& y) {
    std::string buf;
    buf.reserve(38 + y.symbols.size() * 2);
    buf.append(kBitstreamMagic, 5);
    buf.push_back(static_cast<char>(y.kind));
    put_f64le(buf, y.delta);
    put_f64le(buf, y.offset);
    put_u64le(buf, static_cast<uint64_t>(y.n));
    put_u64le(buf, static_cast<uint64_t>(y.d));
    for (int64_t s : y.symbols) put_varint(buf, zigzag(s));
    write_file_bytes(path, buf, "bitstream");
}

Bitstream read_bitstream(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path, "bitstream");
    Reader r{data, 0, "bitstream"};
    r.magic(kBitstreamMagic);
    r.need(1);
    const uint8_t kind = static_cast<uint8_t>(data[r.pos++]);
    if (kind > 2) throw ConfigError("bitstream: unknown codec kind byte");
    Bitstream y;
    y.kind = static_cast<CodecKind>(kind);
    y.delta = r.f64le();
    y.offset = r.f64le();
    y.n = r.count("sample count");
    y.d = r.count("dimension");
    if (y.d < 1 || y.n < 0) throw ConfigError("bitstream: invalid shape");
    y.symbols.resize(static_cast<size_t>(y.n) * static_cast<size_t>(y.d));
    for (auto& s : y.symbols) s = unzigzag(r.varint());
    r.done();
    return y;
}

void write_samples(const std::filesystem::path& path, const SampleBatch& x) {
    std::string buf;
    buf.reserve(21 + x.values.size() * 8);
    buf.append(kSamplesMagic, 5);
    put_u64le(buf, static_cast<uint64_t>(x.n));
    put_u64le(buf, static_cast<uint64_t>(x.d));
    for (double v : x.values) put_f64le(buf, v);
    write_file_bytes(path, buf, "samples");
}

SampleBatch read_samples(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path, "samples");
    Reader r{data, 0, "samples"};
    r.magic(kSamplesMagic);
    const int64_t n = r.count("sample count");
    const int64_t d = r.count("dimension");
    if (d < 1 || n < 0) throw ConfigError("samples: invalid shape");
    SampleBatch x(n, d);
    for (auto& v : x.values) v = r.f64le();
    r.done();
    return x;
}

std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    write_file_bytes(path, content, "text");
}

std::string read_text_file(const std::filesystem::path& path) { return read_file_bytes(path, "text"); }

uint64_t hash_file(const std::filesystem::path& path) {
    const std::string data = read_file_bytes(path, "hash");
    return fnv1a64(data.data(), data.size());
}

}  // namespace pel
