#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mvhom {

/// Lower-case hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

/// Dense little-endian double array with a shape. On disk:
///   "MVHB" | u32 version (1) | u32 rank | u64 shape[rank] | f64 data[prod(shape)]
struct Blob {
  std::vector<std::uint64_t> shape;
  std::vector<double> data;

  std::size_t element_count() const noexcept;
};

std::string encode_blob(const Blob& blob);
/// IntegrityError (naming `name`) on a bad magic, version or length.
Blob decode_blob(std::string_view bytes, const std::string& name);

/// A run directory: files are written relative to `root`, and their digests
/// collected for the manifest.
class Archive {
 public:
  explicit Archive(std::filesystem::path root);

  const std::filesystem::path& root() const noexcept { return root_; }

  /// Writes the bytes (creating parent directories) and records the digest.
  void write(const std::string& name, std::string_view bytes);
  void write_blob(const std::string& name, const Blob& blob);

  const std::map<std::string, std::string>& digests() const noexcept { return digests_; }

 private:
  std::filesystem::path root_;
  std::map<std::string, std::string> digests_;
};

std::string read_file(const std::filesystem::path& path);

}  // namespace mvhom
