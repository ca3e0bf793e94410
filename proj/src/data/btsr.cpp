#include "tgseg/data/btsr.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace tgseg::data {

namespace {

constexpr char kMagic[4] = {'B', 'T', 'S', 'R'};
constexpr std::uint8_t kVersion = 1;
// Caps payload at 2^32 elements; anything larger (or a zero extent) is
// rejected before allocation.
constexpr std::uint64_t kMaxElems = 1ULL << 32;

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

}  // namespace

void write_tensor_file(const ad::TensorF& t, const std::filesystem::path& path) {
  std::string buf;
  buf.reserve(9 + 4 * t.rank() + 4 * t.numel());
  buf.append(kMagic, 4);
  buf.push_back(static_cast<char>(kVersion));
  put_u32(buf, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t e : t.shape) put_u32(buf, static_cast<std::uint32_t>(e));
  for (float v : t.data) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(IoErrorKind::open_failed, "cannot open for write: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(IoErrorKind::open_failed, "write failed: " + path.string());
}

ad::TensorF read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(IoErrorKind::open_failed, "cannot open: " + path.string());
  std::vector<unsigned char> raw((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  const std::string name = path.string();
  if (raw.size() < 4 || std::memcmp(raw.data(), kMagic, 4) != 0)
    throw IoError(IoErrorKind::bad_magic, "bad magic in " + name);
  if (raw.size() < 5 || raw[4] != kVersion)
    throw IoError(IoErrorKind::bad_version, "unsupported version in " + name);
  if (raw.size() < 9)
    throw IoError(IoErrorKind::truncated, "header cut short in " + name);
  const std::uint32_t rank = get_u32(raw.data() + 5);
  if (rank > 8)
    throw IoError(IoErrorKind::extent_overflow,
                  "rank " + std::to_string(rank) + " too large in " + name);
  std::size_t off = 9;
  if (raw.size() < off + 4ULL * rank)
    throw IoError(IoErrorKind::truncated, "extent list cut short in " + name);
  ad::Shape shape(rank);
  std::uint64_t numel = 1;
  for (std::uint32_t d = 0; d < rank; ++d) {
    const std::uint32_t e = get_u32(raw.data() + off);
    off += 4;
    if (e == 0)
      throw IoError(IoErrorKind::extent_overflow, "zero extent in " + name);
    numel *= e;
    if (numel > kMaxElems)
      throw IoError(IoErrorKind::extent_overflow,
                    "extent product overflows in " + name);
    shape[d] = e;
  }
  const std::uint64_t payload = raw.size() - off;
  if (payload < numel * 4)
    throw IoError(IoErrorKind::truncated,
                  "payload holds " + std::to_string(payload / 4) + " reals, " +
                      std::to_string(numel) + " declared, in " + name);
  if (payload > numel * 4)
    throw IoError(IoErrorKind::trailing_data,
                  std::to_string(payload - numel * 4) + " trailing bytes in " + name);
  ad::TensorF t(shape);
  for (std::uint64_t i = 0; i < numel; ++i) {
    const std::uint32_t bits = get_u32(raw.data() + off + 4 * i);
    std::memcpy(&t.data[i], &bits, 4);
  }
  return t;
}

}  // namespace tgseg::data
