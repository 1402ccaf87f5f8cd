#include "mvhom/archive.hpp"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "mvhom/errors.hpp"

namespace mvhom {

static_assert(std::endian::native == std::endian::little, "blob I/O assumes a little-endian host");

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md, &len) != 1)
    throw IoError("SHA-256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::size_t Blob::element_count() const noexcept {
  std::size_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

namespace {

template <class T>
void append(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T take(std::string_view bytes, std::size_t& pos, const std::string& name) {
  if (pos + sizeof(T) > bytes.size()) throw IntegrityError(name, "blob truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string encode_blob(const Blob& blob) {
  if (blob.element_count() != blob.data.size()) throw DomainError("blob shape does not match its data");
  std::string out = "MVHB";
  append<std::uint32_t>(out, 1);
  append<std::uint32_t>(out, static_cast<std::uint32_t>(blob.shape.size()));
  for (auto s : blob.shape) append<std::uint64_t>(out, s);
  out.append(reinterpret_cast<const char*>(blob.data.data()), blob.data.size() * sizeof(double));
  return out;
}

Blob decode_blob(std::string_view bytes, const std::string& name) {
  if (bytes.substr(0, 4) != "MVHB") throw IntegrityError(name, "not a blob (bad magic)");
  std::size_t pos = 4;
  if (take<std::uint32_t>(bytes, pos, name) != 1) throw IntegrityError(name, "unsupported blob version");
  const auto rank = take<std::uint32_t>(bytes, pos, name);
  if (rank > 8) throw IntegrityError(name, "implausible blob rank");
  Blob b;
  for (std::uint32_t r = 0; r < rank; ++r) b.shape.push_back(take<std::uint64_t>(bytes, pos, name));
  const std::size_t count = b.element_count();
  if (bytes.size() - pos != count * sizeof(double)) throw IntegrityError(name, "blob length mismatch");
  b.data.resize(count);
  std::memcpy(b.data.data(), bytes.data() + pos, count * sizeof(double));
  return b;
}

Archive::Archive(std::filesystem::path root) : root_(std::move(root)) {
  std::error_code ec;
  std::filesystem::create_directories(root_, ec);
  if (ec) throw IoError("cannot create " + root_.string() + ": " + ec.message());
}

void Archive::write(const std::string& name, std::string_view bytes) {
  const auto path = root_ / name;
  std::error_code ec;
  std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path.string());
  digests_[name] = sha256_hex(bytes);
}

void Archive::write_blob(const std::string& name, const Blob& blob) { write(name, encode_blob(blob)); }

}  // namespace mvhom
