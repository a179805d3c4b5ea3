#include "attloc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <string>

#include "attloc/errors.hpp"
#include "attloc/tags.hpp"

namespace attloc {

namespace {

constexpr char kMagic[4] = {'A', 'T', 'L', 'C'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xFF));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xFF));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xFF));
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw DataError("checkpoint: truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos + static_cast<std::size_t>(i)]) << (8 * i);
    pos += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes.data() + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.norm.mean.size() != static_cast<std::size_t>(kMelBands) ||
      ckpt.norm.std.size() != static_cast<std::size_t>(kMelBands)) {
    throw std::invalid_argument("checkpoint: norm stats must have 40 bins");
  }

  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kCheckpointVersion);

  put_u32(out, kMelBands);
  for (double v : ckpt.norm.mean) put_f64(out, v);
  for (double v : ckpt.norm.std) put_f64(out, v);

  put_u32(out, ckpt.mode == ModelMode::kBaseline ? 0u : 1u);

  std::uint32_t count = 0;
  visit_tensors(ckpt.params, [&](const std::string&, const Matrix&, TensorKind) { ++count; });
  put_u32(out, count);
  visit_tensors(ckpt.params, [&](const std::string& name, const Matrix& t, TensorKind) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_u32(out, 2);  // rank
    put_u32(out, static_cast<std::uint32_t>(t.rows()));
    put_u32(out, static_cast<std::uint32_t>(t.cols()));
    for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, t.data()[i]);
  });
  return out;
}

Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic, not an ATLC file");
  }
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version) +
                    ", expected " + std::to_string(kCheckpointVersion));
  }

  Checkpoint ckpt;
  const std::uint32_t bins = r.u32();
  if (bins != static_cast<std::uint32_t>(kMelBands)) {
    throw DataError("checkpoint: norm stats have " + std::to_string(bins) + " bins");
  }
  ckpt.norm.mean.resize(kMelBands);
  ckpt.norm.std.resize(kMelBands);
  for (double& v : ckpt.norm.mean) v = r.f64();
  for (double& v : ckpt.norm.std) v = r.f64();

  const std::uint32_t mode = r.u32();
  if (mode > 1) throw DataError("checkpoint: bad mode " + std::to_string(mode));
  ckpt.mode = mode == 0 ? ModelMode::kBaseline : ModelMode::kAttLoc;

  ckpt.params = zero_params();
  std::map<std::string, Matrix*> expected;
  visit_tensors(ckpt.params,
                [&](const std::string& name, Matrix& t, TensorKind) { expected[name] = &t; });

  const std::uint32_t count = r.u32();
  if (count != expected.size()) {
    throw DataError("checkpoint: has " + std::to_string(count) + " tensors, expected " +
                    std::to_string(expected.size()));
  }
  std::map<std::string, bool> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const std::string name = r.str(name_len);
    const auto it = expected.find(name);
    if (it == expected.end()) throw DataError("checkpoint: unknown tensor '" + name + "'");
    if (seen[name]) throw DataError("checkpoint: duplicate tensor '" + name + "'");
    seen[name] = true;

    const std::uint32_t rank = r.u32();
    if (rank != 2) throw DataError("checkpoint: tensor '" + name + "' has rank " + std::to_string(rank));
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    Matrix& t = *it->second;
    if (rows != t.rows() || cols != t.cols()) {
      throw DataError("checkpoint: tensor '" + name + "' is " + std::to_string(rows) + "x" +
                      std::to_string(cols) + ", expected " + std::to_string(t.rows()) + "x" +
                      std::to_string(t.cols()));
    }
    for (std::size_t j = 0; j < t.size(); ++j) t.data()[j] = r.f64();
  }
  if (r.pos != bytes.size()) throw DataError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace attloc
