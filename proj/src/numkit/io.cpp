#include "latentcast/numkit/io.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace latentcast::numkit {

namespace {

std::mutex audit_registry_mutex;
std::vector<ReadAudit*> active_audits;

}  // namespace

ReadAudit::ReadAudit() {
    std::lock_guard lock(audit_registry_mutex);
    active_audits.push_back(this);
}

ReadAudit::~ReadAudit() {
    std::lock_guard lock(audit_registry_mutex);
    std::erase(active_audits, this);
}

std::vector<std::filesystem::path> ReadAudit::paths() const {
    std::lock_guard lock(mutex_);
    return paths_;
}

void note_read(const std::filesystem::path& path) {
    std::lock_guard lock(audit_registry_mutex);
    if (active_audits.empty()) return;
    const auto canonical = std::filesystem::weakly_canonical(path);
    for (ReadAudit* audit : active_audits) {
        std::lock_guard inner(audit->mutex_);
        audit->paths_.push_back(canonical);
    }
}
namespace {

static_assert(std::endian::native == std::endian::little, "tensor IO assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in, const char* what) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("truncated tensor: ") + what);
    return v;
}

}  // namespace

void write_tensor(std::ostream& out, const Tensor& t) {
    out.write(kTensorMagic, 4);
    put<std::uint32_t>(out, kTensorFormatVersion);
    put<std::uint8_t>(out, kDtypeF32);
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) put<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.ptr()), static_cast<std::streamsize>(t.size() * sizeof(float)));
}

Tensor read_tensor(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4)) throw FormatError("truncated tensor: magic");
    if (std::memcmp(magic, kTensorMagic, 4) != 0) throw FormatError("bad tensor magic");
    const auto version = get<std::uint32_t>(in, "version");
    if (version != kTensorFormatVersion) {
        throw FormatError("unsupported tensor format version " + std::to_string(version));
    }
    const auto dtype = get<std::uint8_t>(in, "dtype");
    if (dtype != kDtypeF32) throw FormatError("unsupported tensor dtype code " + std::to_string(dtype));
    const auto rank = get<std::uint8_t>(in, "rank");
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::int64_t>(get<std::uint64_t>(in, "dims"));
    Tensor t(shape);
    const auto bytes = static_cast<std::streamsize>(t.size() * sizeof(float));
    if (bytes > 0 && !in.read(reinterpret_cast<char*>(t.ptr()), bytes)) throw FormatError("truncated tensor: payload");
    return t;
}

std::string encode_tensor(const Tensor& t) {
    std::ostringstream out(std::ios::binary);
    write_tensor(out, t);
    return std::move(out).str();
}

Tensor decode_tensor(std::string_view bytes) {
    std::istringstream in(std::string(bytes), std::ios::binary);
    return read_tensor(in);
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) { write_text_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::filesystem::path& path) {
    note_read(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open tensor file " + path.string());
    try {
        return read_tensor(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string sha256_hex(std::span<const unsigned char> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string sha256_hex(std::string_view bytes) {
    return sha256_hex(std::span(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()));
}

std::string file_sha256(const std::filesystem::path& path) {
    // Bypasses the read audit: hashing an artifact is bookkeeping, not a use.
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return sha256_hex(ss.str());
}

std::string checksum(const ParamStore& params) {
    std::string buffer;
    for (const auto& [name, p] : params) {
        buffer += name;
        buffer.push_back('\0');
        buffer += encode_tensor(p.value);
    }
    return sha256_hex(buffer);
}

void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, const nlohmann::json& meta) {
    std::filesystem::create_directories(dir);
    nlohmann::json index = nlohmann::json::array();
    for (const auto& [name, p] : params) {
        const std::string file = name + ".lten";
        save_tensor(dir / file, p.value);
        index.push_back({{"name", name}, {"file", file}, {"shape", p.value.shape()}});
    }
    nlohmann::json manifest = {{"format", "latentcast-checkpoint"},
                               {"version", 1},
                               {"checksum", checksum(params)},
                               {"params", index},
                               {"meta", meta}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
    auto manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
    if (manifest.value("format", "") != "latentcast-checkpoint") {
        throw FormatError(dir.string() + ": not a checkpoint directory");
    }
    return manifest;
}

}  // namespace

nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir) { return read_checkpoint_manifest(dir).at("meta"); }

ParamStore load_param_store(const std::filesystem::path& dir) {
    const auto manifest = read_checkpoint_manifest(dir);
    ParamStore store;
    for (const auto& entry : manifest.at("params")) {
        store.create(entry.at("name").get<std::string>(), Tensor(entry.at("shape").get<Shape>()));
    }
    load_checkpoint(dir, store);
    return store;
}

nlohmann::json load_checkpoint(const std::filesystem::path& dir, ParamStore& params) {
    const auto manifest = read_checkpoint_manifest(dir);
    std::size_t seen = 0;
    for (const auto& entry : manifest.at("params")) {
        const auto name = entry.at("name").get<std::string>();
        auto& p = params.at(name);
        Tensor t = load_tensor(dir / entry.at("file").get<std::string>());
        if (t.shape() != p.value.shape()) throw ShapeError("load_checkpoint(" + name + ")", p.value.shape(), t.shape());
        p.value = std::move(t);
        ++seen;
    }
    if (seen != params.size()) {
        throw FormatError(dir.string() + ": checkpoint holds " + std::to_string(seen) + " parameters, model has " +
                          std::to_string(params.size()));
    }
    if (manifest.at("checksum").get<std::string>() != checksum(params)) {
        throw FormatError(dir.string() + ": checkpoint checksum mismatch");
    }
    return manifest.at("meta");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
    note_read(path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

}  // namespace latentcast::numkit
