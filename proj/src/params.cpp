#include "cvr/params.hpp"

#include <array>
#include <cmath>
#include <fstream>

#include "cvr/error.hpp"

namespace cvr::model {
namespace {

constexpr std::array<char, 4> kMagic{'C', 'V', 'R', 'P'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_string(std::ostream& out, std::string_view s) {
  if (s.size() > 0xFFFF) throw Error(Errc::SchemaError, "name too long for checkpoint");
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(Errc::TruncatedFile, path.string());
  }
  return value;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto n = get<std::uint16_t>(in, path);
  std::string s(n, '\0');
  if (!in.read(s.data(), n)) throw Error(Errc::TruncatedFile, path.string());
  return s;
}

std::ifstream open_checked(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::BadMagic, path.string());
  }
  if (get<std::uint32_t>(in, path) != kVersion) {
    throw Error(Errc::BadMagic, path.string() + ": unsupported checkpoint version");
  }
  return in;
}

}  // namespace

void xavier_uniform(math::Matrix& w, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
  for (double& v : w.data) v = (2.0 * uniform01(rng) - 1.0) * a;
}

std::uint64_t Checkpoint::meta_value(std::string_view name) const {
  for (const auto& [key, value] : meta) {
    if (key == name) return value;
  }
  throw Error(Errc::SchemaError, "checkpoint lacks meta '" + std::string(name) + "'");
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put_string(out, ckpt.kind);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  for (const auto& [key, value] : ckpt.meta) {
    put_string(out, key);
    put<std::uint64_t>(out, value);
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.values.size() != t.rows * t.cols) {
      throw Error(Errc::ShapeMismatch, "tensor " + t.name + " has inconsistent shape");
    }
    put_string(out, t.name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rows));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.cols));
    out.write(reinterpret_cast<const char*>(t.values.data()),
              static_cast<std::streamsize>(t.values.size() * sizeof(double)));
  }
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = open_checked(path);
  Checkpoint ckpt;
  ckpt.kind = get_string(in, path);
  const auto n_meta = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_meta; ++i) {
    auto key = get_string(in, path);
    ckpt.meta.emplace_back(std::move(key), get<std::uint64_t>(in, path));
  }
  const auto n_tensors = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    NamedTensor t;
    t.name = get_string(in, path);
    t.rows = get<std::uint32_t>(in, path);
    t.cols = get<std::uint32_t>(in, path);
    t.values.resize(t.rows * t.cols);
    if (!in.read(reinterpret_cast<char*>(t.values.data()),
                 static_cast<std::streamsize>(t.values.size() * sizeof(double)))) {
      throw Error(Errc::TruncatedFile, path.string());
    }
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

std::string peek_checkpoint_kind(const std::filesystem::path& path) {
  auto in = open_checked(path);
  return get_string(in, path);
}

void read_tensors(const Checkpoint& ckpt, std::vector<TensorRef> dst) {
  if (ckpt.tensors.size() != dst.size()) {
    throw Error(Errc::ShapeMismatch, "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                                         " tensors, model expects " + std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const auto& src = ckpt.tensors[i];
    if (src.name != dst[i].name || src.rows != dst[i].rows || src.cols != dst[i].cols) {
      throw Error(Errc::ShapeMismatch, "checkpoint tensor " + src.name + " does not match " +
                                           std::string(dst[i].name));
    }
    std::copy(src.values.begin(), src.values.end(), dst[i].values.begin());
  }
}

}  // namespace cvr::model
