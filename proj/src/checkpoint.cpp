#include "agn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <vector>

#include "agn/error.hpp"
#include "agn/fileio.hpp"

namespace agn {
namespace {

constexpr char kMagic[4] = {'A', 'G', 'N', '1'};
const std::string kAdamM = "@adam.m.";
const std::string kAdamV = "@adam.v.";
const std::string kAdamStep = "@adam.step";

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  bool done() const { return pos >= buf.size(); }
  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw FormatError("checkpoint truncated");
  }
  std::uint64_t u(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
    pos += static_cast<std::size_t>(bytes);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void put_array(std::string& out, const std::string& name, const NDArray& a) {
  put_u32(out, static_cast<std::uint32_t>(name.size()));
  out += name;
  put_u32(out, static_cast<std::uint32_t>(a.rank()));
  for (auto d : a.shape()) put_u64(out, d);
  for (double v : a.raw()) put_u64(out, std::bit_cast<std::uint64_t>(v));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store, std::uint64_t config_hash,
                     bool with_optimizer) {
  std::map<std::string, const NDArray*> entries;
  NDArray step = NDArray::vector({static_cast<double>(store.step())});
  for (const auto& [name, p] : store.params()) {
    entries.emplace(name, &p.value);
    if (with_optimizer) {
      entries.emplace(kAdamM + name, &p.m);
      entries.emplace(kAdamV + name, &p.v);
    }
  }
  if (with_optimizer) entries.emplace(kAdamStep, &step);

  std::string out(kMagic, 4);
  put_u64(out, config_hash);
  for (const auto& [name, arr] : entries) put_array(out, name, *arr);

  write_file_atomic(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r{buf};
  if (r.str(4) != std::string(kMagic, 4)) throw FormatError(path + ": bad checkpoint magic");
  Checkpoint ck;
  ck.config_hash = r.u(8);
  std::map<std::string, NDArray> raw;
  while (!r.done()) {
    const auto len = static_cast<std::size_t>(r.u(4));
    std::string name = r.str(len);
    const auto rank = static_cast<std::size_t>(r.u(4));
    Shape shape(rank);
    for (auto& d : shape) d = static_cast<std::size_t>(r.u(8));
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(r.u(8));
    raw.insert_or_assign(std::move(name), NDArray(std::move(shape), std::move(data)));
  }
  for (auto& [name, arr] : raw) {
    if (name.rfind("@adam.", 0) == 0) continue;
    ck.store.set(name, arr);
  }
  for (auto& [name, arr] : raw) {
    if (name == kAdamStep) {
      ck.store.set_step(static_cast<std::int64_t>(arr[0]));
    } else if (name.rfind(kAdamM, 0) == 0) {
      ck.store.at(name.substr(kAdamM.size())).m = arr;
    } else if (name.rfind(kAdamV, 0) == 0) {
      ck.store.at(name.substr(kAdamV.size())).v = arr;
    }
  }
  return ck;
}

void load_into(const std::string& path, ParamStore& store, std::uint64_t expected_hash) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.config_hash != expected_hash)
    throw FormatError(path + ": checkpoint config hash does not match model configuration");
  for (auto& [name, p] : ck.store.params()) {
    Parameter& dst = store.at(name);
    if (dst.value.shape() != p.value.shape())
      throw ShapeError("checkpoint parameter " + name + " has shape " +
                       shape_str(p.value.shape()) + ", model expects " +
                       shape_str(dst.value.shape()));
    dst = p;
  }
  store.set_step(ck.store.step());
}

}  // namespace agn
