#include "cloudpatch/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cloudpatch/raster.hpp"

namespace cloudpatch {

namespace fs = std::filesystem;

namespace {

constexpr char kMagic[4] = {'P', 'R', 'M', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

class Reader {
 public:
  Reader(std::vector<char> bytes, const fs::path& path) : bytes_(std::move(bytes)), path_(path) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, &bytes_[pos_], 4);
    if constexpr (std::endian::native == std::endian::big) v = __builtin_bswap32(v);
    pos_ += 4;
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(&bytes_[pos_], n);
    pos_ += n;
    return s;
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorKind::kTruncatedFile, path_.string() + ": checkpoint ends early");
    }
  }

  std::vector<char> bytes_;
  fs::path path_;
  std::size_t pos_ = 0;
};

}  // namespace

void write_checkpoint(const Checkpoint& checkpoint, const fs::path& path) {
  std::string out(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(checkpoint.header.size()));
  out += checkpoint.header;
  put_u32(out, static_cast<std::uint32_t>(checkpoint.blobs.size()));
  for (const auto& nb : checkpoint.blobs) {
    put_u32(out, static_cast<std::uint32_t>(nb.name.size()));
    out += nb.name;
    put_u32(out, static_cast<std::uint32_t>(nb.blob.shape.size()));
    for (auto d : nb.blob.shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : nb.blob.values) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  write_file_atomic(path, out);
}

Checkpoint read_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIoFailure, "cannot open " + path.string());
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw Error(ErrorKind::kBadMagic, path.string() + " is not a PRM1 checkpoint");
  }
  Reader r(std::move(bytes), path);
  r.text(4);
  Checkpoint ck;
  ck.header = r.text(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t b = 0; b < count; ++b) {
    NamedBlob nb;
    nb.name = r.text(r.u32());
    const std::uint32_t rank = r.u32();
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      nb.blob.shape.push_back(r.u32());
      n *= nb.blob.shape.back();
    }
    nb.blob.values.resize(n);
    for (auto& v : nb.blob.values) v = std::bit_cast<float>(r.u32());
    ck.blobs.push_back(std::move(nb));
  }
  return ck;
}

Checkpoint to_checkpoint(const ParamSet<float>& params, std::string header) {
  Checkpoint ck{std::move(header), {}};
  for (const auto& layer : params.layers) {
    layer.for_each_blob([&](std::string_view role, const Blob<float>& blob) {
      ck.blobs.push_back({layer.name + "/" + std::string(role), blob});
    });
  }
  return ck;
}

void load_into(const Checkpoint& checkpoint, ParamSet<float>& params) {
  std::size_t expected = 0;
  for (auto& layer : params.layers) {
    layer.for_each_blob([&](std::string_view role, Blob<float>& blob) {
      ++expected;
      const std::string name = layer.name + "/" + std::string(role);
      for (const auto& nb : checkpoint.blobs) {
        if (nb.name != name) continue;
        if (nb.blob.shape != blob.shape || nb.blob.values.size() != blob.values.size()) {
          throw Error(ErrorKind::kShapeMismatch, "checkpoint blob " + name + " has the wrong shape");
        }
        blob.values = nb.blob.values;
        return;
      }
      throw Error(ErrorKind::kShapeMismatch, "checkpoint lacks blob " + name);
    });
  }
  if (expected != checkpoint.blobs.size()) {
    throw Error(ErrorKind::kShapeMismatch, "checkpoint holds extra blobs");
  }
}

}  // namespace cloudpatch
