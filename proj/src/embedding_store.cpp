#include "cvr/embedding_store.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cvr/error.hpp"

namespace cvr::data {
namespace {

constexpr std::array<char, 4> kMagic{'C', 'V', 'R', 'E'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::istream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(Errc::TruncatedFile, path.string());
  }
  return value;
}

}  // namespace

EmbeddingStore::EmbeddingStore(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw Error(Errc::DimMismatch, "embedding dimension must be positive");
}

void EmbeddingStore::add(std::string id, math::ConstSpan values) {
  if (values.size() != dim_) {
    throw Error(Errc::DimMismatch, "'" + id + "' has " + std::to_string(values.size()) +
                                       " values, store dim is " + std::to_string(dim_));
  }
  if (id.size() > 0xFFFF) throw Error(Errc::SchemaError, "id longer than 65535 bytes");
  if (index_.contains(id)) throw Error(Errc::DuplicateId, id);
  index_.emplace(id, ids_.size());
  ids_.push_back(std::move(id));
  for (double v : values) values_.push_back(static_cast<double>(static_cast<float>(v)));
}

bool EmbeddingStore::contains(std::string_view id) const { return index_.find(id) != index_.end(); }

math::ConstSpan EmbeddingStore::get(std::string_view id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(Errc::MissingEmbedding, std::string(id));
  return {values_.data() + it->second * dim_, dim_};
}

void EmbeddingStore::normalize_all() {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    math::MutSpan row(values_.data() + i * dim_, dim_);
    const auto unit = math::l2_normalize(row);
    std::copy(unit.begin(), unit.end(), row.begin());
  }
}

void EmbeddingStore::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(dim_));
  write_pod<std::uint64_t>(out, ids_.size());
  std::vector<float> row(dim_);
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    write_pod<std::uint16_t>(out, static_cast<std::uint16_t>(ids_[i].size()));
    out.write(ids_[i].data(), static_cast<std::streamsize>(ids_[i].size()));
    for (std::size_t j = 0; j < dim_; ++j) row[j] = static_cast<float>(values_[i * dim_ + j]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

EmbeddingStore EmbeddingStore::load(const std::filesystem::path& path, bool normalize) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(Errc::BadMagic, path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw Error(Errc::BadMagic, path.string() + ": unsupported version " + std::to_string(version));
  }
  const auto dim = read_pod<std::uint32_t>(in, path);
  const auto count = read_pod<std::uint64_t>(in, path);
  EmbeddingStore store(dim);
  std::vector<float> row(dim);
  std::vector<double> promoted(dim);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto id_len = read_pod<std::uint16_t>(in, path);
    std::string id(id_len, '\0');
    if (!in.read(id.data(), id_len)) throw Error(Errc::TruncatedFile, path.string());
    if (!in.read(reinterpret_cast<char*>(row.data()),
                 static_cast<std::streamsize>(dim * sizeof(float)))) {
      throw Error(Errc::TruncatedFile, path.string());
    }
    std::copy(row.begin(), row.end(), promoted.begin());
    store.add(std::move(id), promoted);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(Errc::DimMismatch, path.string() + ": trailing bytes after " +
                                       std::to_string(count) + " records");
  }
  if (normalize) store.normalize_all();
  return store;
}

}  // namespace cvr::data
