#include "fcgan/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace fcgan {

namespace {

constexpr char kMagic[8] = {'F', 'C', 'G', 'A', 'N', 'C', 'K', 'P'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    template <class T>
    void pod(T v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void str(const std::string& s) {
        pod<std::uint64_t>(s.size());
        bytes_.insert(bytes_.end(), s.begin(), s.end());
    }
    void tensor(const Tensor& t, TensorPrecision precision) {
        pod<std::uint8_t>(static_cast<std::uint8_t>(precision));
        pod<std::uint32_t>(static_cast<std::uint32_t>(t.rank()));
        for (auto d : t.shape()) pod<std::uint64_t>(d);
        for (double v : t.data()) {
            if (precision == TensorPrecision::f64) {
                pod<double>(v);
            } else {
                pod<float>(static_cast<float>(v));
            }
        }
    }
    std::vector<char>& bytes() { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    explicit Reader(const std::vector<char>& bytes) : bytes_(bytes) {}

    template <class T>
    T pod() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::string str() {
        auto n = pod<std::uint64_t>();
        need(n);
        std::string s(bytes_.data() + pos_, n);
        pos_ += n;
        return s;
    }
    Tensor tensor() {
        auto precision = pod<std::uint8_t>();
        if (precision > 1) throw CheckpointError("checkpoint: unknown tensor precision");
        auto rank = pod<std::uint32_t>();
        Shape shape(rank);
        for (auto& d : shape) d = pod<std::uint64_t>();
        const auto n = shape_size(shape);
        need(n * (precision == 1 ? 8 : 4));
        std::vector<double> values(n);
        for (auto& v : values) v = precision == 1 ? pod<double>() : static_cast<double>(pod<float>());
        return Tensor(std::move(shape), std::move(values));
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw CheckpointError("checkpoint: truncated payload");
    }
    const std::vector<char>& bytes_;
    std::size_t pos_ = 0;
};

std::uint32_t crc_of(const std::vector<char>& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
    return static_cast<std::uint32_t>(crc);
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const CheckpointData& data, TensorPrecision precision) {
    Writer w;
    w.str(data.config_json);
    w.pod<std::uint64_t>(data.step);
    w.str(data.rng_state);
    w.pod<std::uint64_t>(data.counters.size());
    for (const auto& [name, value] : data.counters) {
        w.str(name);
        w.pod<std::uint64_t>(value);
    }
    w.pod<std::uint64_t>(data.groups.size());
    for (const auto& [group, params] : data.groups) {
        w.str(group);
        w.pod<std::uint64_t>(params.size());
        for (const auto& e : params.entries()) {
            w.str(e.name);
            w.tensor(e.value, precision);
        }
    }
    w.pod<std::uint64_t>(data.history.size());
    for (const auto& r : data.history) {
        w.pod<std::uint64_t>(r.step);
        w.pod<std::uint64_t>(r.epoch);
        for (double v : {r.losses.source_d, r.losses.source_g, r.losses.class_d, r.losses.class_g, r.losses.total_d,
                         r.losses.total_g}) {
            w.pod<double>(v);
        }
    }

    const auto& payload = w.bytes();
    Writer file;
    file.bytes().insert(file.bytes().end(), std::begin(kMagic), std::end(kMagic));
    file.pod<std::uint32_t>(kCheckpointVersion);
    file.pod<std::uint64_t>(payload.size());
    file.bytes().insert(file.bytes().end(), payload.begin(), payload.end());
    file.pod<std::uint32_t>(crc_of(payload));

    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out.write(file.bytes().data(), static_cast<std::streamsize>(file.bytes().size()));
        if (!out) throw CheckpointError("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
    Reader header(bytes);
    if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CheckpointError(path.string() + ": not a checkpoint file");
    }
    for (std::size_t i = 0; i < sizeof kMagic; ++i) header.pod<char>();
    const auto version = header.pod<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    }
    const auto size = header.pod<std::uint64_t>();
    const std::size_t offset = sizeof kMagic + 4 + 8;
    if (bytes.size() != offset + size + 4) throw CheckpointError(path.string() + ": truncated checkpoint");
    std::vector<char> payload(bytes.begin() + static_cast<std::ptrdiff_t>(offset),
                              bytes.begin() + static_cast<std::ptrdiff_t>(offset + size));
    std::uint32_t stored;
    std::memcpy(&stored, bytes.data() + offset + size, 4);
    if (stored != crc_of(payload)) throw CheckpointError(path.string() + ": checksum mismatch (corrupt checkpoint)");

    Reader r(payload);
    CheckpointData data;
    data.config_json = r.str();
    data.step = r.pod<std::uint64_t>();
    data.rng_state = r.str();
    for (auto n = r.pod<std::uint64_t>(); n > 0; --n) {
        auto name = r.str();
        data.counters[name] = r.pod<std::uint64_t>();
    }
    for (auto n = r.pod<std::uint64_t>(); n > 0; --n) {
        auto group = r.str();
        ParameterSet params;
        for (auto k = r.pod<std::uint64_t>(); k > 0; --k) {
            auto name = r.str();
            params.add(std::move(name), r.tensor());
        }
        data.groups[group] = std::move(params);
    }
    for (auto n = r.pod<std::uint64_t>(); n > 0; --n) {
        StepRecord rec;
        rec.step = r.pod<std::uint64_t>();
        rec.epoch = r.pod<std::uint64_t>();
        rec.losses.source_d = r.pod<double>();
        rec.losses.source_g = r.pod<double>();
        rec.losses.class_d = r.pod<double>();
        rec.losses.class_g = r.pod<double>();
        rec.losses.total_d = r.pod<double>();
        rec.losses.total_g = r.pod<double>();
        data.history.push_back(rec);
    }
    if (!r.done()) throw CheckpointError(path.string() + ": trailing bytes in payload");
    return data;
}

}  // namespace fcgan
