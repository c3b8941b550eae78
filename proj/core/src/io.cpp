#include "hybridsent/io.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

#include "hybridsent/errors.hpp"

namespace hybridsent {

namespace {

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u16(std::ostream& out, std::uint16_t v) {
    const unsigned char b[2] = {static_cast<unsigned char>(v & 0xFF),
                                static_cast<unsigned char>(v >> 8)};
    put_bytes(out, b, 2);
}

void put_u32(std::ostream& out, std::uint32_t v) {
    const unsigned char b[4] = {
        static_cast<unsigned char>(v & 0xFF), static_cast<unsigned char>((v >> 8) & 0xFF),
        static_cast<unsigned char>((v >> 16) & 0xFF), static_cast<unsigned char>(v >> 24)};
    put_bytes(out, b, 4);
}

void get_bytes(std::istream& in, void* p, std::size_t n, const std::string& what) {
    in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) {
        throw DataError("truncated file while reading " + what);
    }
}

std::uint16_t get_u16(std::istream& in, const std::string& what) {
    unsigned char b[2];
    get_bytes(in, b, 2, what);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
    unsigned char b[4];
    get_bytes(in, b, 4, what);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void get_f32_block(std::istream& in, float* dst, std::size_t count, const std::string& what) {
    // Bulk read; the payload is little-endian, matching all supported hosts.
    static_assert(sizeof(float) == 4);
    get_bytes(in, dst, count * 4, what);
}

void put_f32_block(std::ostream& out, const float* src, std::size_t count) {
    put_bytes(out, src, count * 4);
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open for reading: " + path);
    return in;
}

void expect_magic(std::istream& in, const char* magic, const std::string& path) {
    char buf[4];
    get_bytes(in, buf, 4, "magic of " + path);
    if (std::memcmp(buf, magic, 4) != 0) {
        throw DataError("bad magic in " + path + ": expected " + magic);
    }
}

}  // namespace

void write_ntc1(const std::string& path, const std::vector<NamedTensor>& tensors) {
    std::ofstream out = open_out(path);
    put_bytes(out, "NTC1", 4);
    put_u32(out, static_cast<std::uint32_t>(tensors.size()));
    for (const NamedTensor& t : tensors) {
        if (t.name.size() > 0xFFFF) throw DataError("tensor name too long: " + t.name);
        put_u16(out, static_cast<std::uint16_t>(t.name.size()));
        put_bytes(out, t.name.data(), t.name.size());
        const auto& shape = t.value.shape();
        if (shape.size() > 0xFF) throw DataError("tensor rank too large: " + t.name);
        const unsigned char rank = static_cast<unsigned char>(shape.size());
        put_bytes(out, &rank, 1);
        for (const std::size_t d : shape) put_u32(out, static_cast<std::uint32_t>(d));
        put_f32_block(out, t.value.data(), t.value.size());
    }
    if (!out) throw DataError("write failure: " + path);
}

std::vector<NamedTensor> read_ntc1(const std::string& path) {
    std::ifstream in = open_in(path);
    expect_magic(in, "NTC1", path);
    const std::uint32_t count = get_u32(in, "tensor count of " + path);
    std::vector<NamedTensor> tensors;
    tensors.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        const std::uint16_t name_len = get_u16(in, "tensor name length");
        t.name.resize(name_len);
        get_bytes(in, t.name.data(), name_len, "tensor name");
        unsigned char rank;
        get_bytes(in, &rank, 1, "tensor rank of " + t.name);
        std::vector<std::size_t> shape(rank);
        std::size_t volume = 1;
        for (unsigned r = 0; r < rank; ++r) {
            shape[r] = get_u32(in, "dims of " + t.name);
            volume *= shape[r];
        }
        std::vector<float> data(rank == 0 ? 0 : volume);
        get_f32_block(in, data.data(), data.size(), "payload of " + t.name);
        t.value = Tensorf(std::move(shape), std::move(data));
        tensors.push_back(std::move(t));
    }
    return tensors;
}

struct FeatureCacheWriter::Impl {
    std::ofstream out;
    std::string path;
    std::uint32_t expected = 0;
    std::uint32_t written = 0;
    std::size_t volume = 0;
    bool closed = false;
};

FeatureCacheWriter::FeatureCacheWriter(const std::string& path, std::uint32_t record_count,
                                       std::uint32_t seq_len, std::uint32_t hidden)
    : impl_(std::make_unique<Impl>()) {
    impl_->out = open_out(path);
    impl_->path = path;
    impl_->expected = record_count;
    impl_->volume = static_cast<std::size_t>(seq_len) * hidden;
    put_bytes(impl_->out, "BFC1", 4);
    put_u32(impl_->out, record_count);
    put_u32(impl_->out, seq_len);
    put_u32(impl_->out, hidden);
}

FeatureCacheWriter::~FeatureCacheWriter() = default;

void FeatureCacheWriter::append(const FeatureRecord& record) {
    if (impl_->closed) throw DataError("feature cache writer already closed");
    if (record.values.size() != impl_->volume) {
        throw DataError("feature record size mismatch in " + impl_->path);
    }
    put_bytes(impl_->out, &record.label, 1);
    put_u32(impl_->out, record.mask_count);
    put_f32_block(impl_->out, record.values.data(), record.values.size());
    ++impl_->written;
}

void FeatureCacheWriter::close() {
    if (impl_->closed) return;
    impl_->closed = true;
    if (impl_->written != impl_->expected) {
        throw DataError("feature cache " + impl_->path + ": wrote " +
                        std::to_string(impl_->written) + " of " + std::to_string(impl_->expected) +
                        " records");
    }
    impl_->out.flush();
    if (!impl_->out) throw DataError("write failure: " + impl_->path);
    impl_->out.close();
}

void write_bfc1(const std::string& path, const FeatureCache& cache) {
    FeatureCacheWriter writer(path, static_cast<std::uint32_t>(cache.records.size()),
                              cache.seq_len, cache.hidden);
    for (const FeatureRecord& rec : cache.records) writer.append(rec);
    writer.close();
}

FeatureCache read_bfc1(const std::string& path) {
    std::ifstream in = open_in(path);
    expect_magic(in, "BFC1", path);
    FeatureCache cache;
    const std::uint32_t count = get_u32(in, "record count of " + path);
    cache.seq_len = get_u32(in, "L of " + path);
    cache.hidden = get_u32(in, "H of " + path);
    const std::size_t volume = static_cast<std::size_t>(cache.seq_len) * cache.hidden;
    cache.records.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        FeatureRecord& rec = cache.records[i];
        get_bytes(in, &rec.label, 1, "record label");
        rec.mask_count = get_u32(in, "record mask popcount");
        rec.values.resize(volume);
        get_f32_block(in, rec.values.data(), volume, "record payload");
    }
    return cache;
}

std::vector<RawExample> read_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open dataset: " + path);
    std::vector<RawExample> examples;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path + ":" + std::to_string(lineno) + ": invalid JSON: " + e.what());
        }
        if (!obj.is_object() || !obj.contains("text") || !obj.contains("label")) {
            throw DataError(path + ":" + std::to_string(lineno) +
                            ": expected object with \"text\" and \"label\"");
        }
        RawExample ex;
        ex.text = obj["text"].get<std::string>();
        ex.label = obj["label"].get<int>();
        if (ex.label != 0 && ex.label != 1) {
            throw DataError(path + ":" + std::to_string(lineno) + ": label must be 0 or 1, got " +
                            std::to_string(ex.label));
        }
        examples.push_back(std::move(ex));
    }
    return examples;
}

void write_jsonl(const std::string& path, const std::vector<RawExample>& examples) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path);
    for (const RawExample& ex : examples) {
        nlohmann::json obj;
        obj["text"] = ex.text;
        obj["label"] = ex.label;
        out << obj.dump() << '\n';
    }
    if (!out) throw DataError("write failure: " + path);
}

}  // namespace hybridsent
