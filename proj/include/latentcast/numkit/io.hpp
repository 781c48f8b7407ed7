#pragma once

#include "latentcast/numkit/nn.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <mutex>
#include <span>
#include <stdexcept>
#include <string>

namespace latentcast::numkit {

/// Bad magic, unsupported version or dtype, truncated payload.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Tensor file layout, little-endian throughout:
//   "LTEN" | u32 version | u8 dtype (0 = f32) | u8 rank | rank x u64 dims | payload
inline constexpr char kTensorMagic[4] = {'L', 'T', 'E', 'N'};
inline constexpr std::uint32_t kTensorFormatVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 0;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);
std::string encode_tensor(const Tensor& t);
Tensor decode_tensor(std::string_view bytes);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

/// Content hash over names, shapes and values of every parameter.
std::string checksum(const ParamStore& params);

/// Checkpoint directory: one tensor file per parameter plus manifest.json
/// holding the parameter index and caller metadata under "meta".
void save_checkpoint(const std::filesystem::path& dir, const ParamStore& params, const nlohmann::json& meta);

/// Loads values into an already-constructed store; names and shapes must
/// match exactly. Returns the stored metadata.
nlohmann::json load_checkpoint(const std::filesystem::path& dir, ParamStore& params);
/// Builds a store with every parameter the checkpoint lists, then loads it.
ParamStore load_param_store(const std::filesystem::path& dir);
nlohmann::json read_checkpoint_meta(const std::filesystem::path& dir);

/// Records every file opened through load_tensor or read_text_file, from any
/// thread, while the object is alive. Audits may nest.
class ReadAudit {
public:
    ReadAudit();
    ~ReadAudit();
    ReadAudit(const ReadAudit&) = delete;
    ReadAudit& operator=(const ReadAudit&) = delete;

    std::vector<std::filesystem::path> paths() const;

private:
    friend void note_read(const std::filesystem::path& path);
    mutable std::mutex mutex_;
    std::vector<std::filesystem::path> paths_;
};

void note_read(const std::filesystem::path& path);

/// Writes text to `path` via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace latentcast::numkit
