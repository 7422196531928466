#pragma once
// Keyed store of fixed-dimension embeddings.
//
// On-disk layout (little-endian):
//   "CVRE" | u32 version=1 | u32 dim | u64 count
//   count x ( u16 id_len | id bytes (UTF-8) | dim x f32 )
// Values are held as float64 in memory; add() rounds to float32 precision so
// an in-memory store and its saved file always hold the same numbers.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cvr/math.hpp"

namespace cvr::data {

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
};
template <class V>
using StringMap = std::unordered_map<std::string, V, StringHash, std::equal_to<>>;

class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }

  // Throws DuplicateId, DimMismatch.
  void add(std::string id, math::ConstSpan values);
  bool contains(std::string_view id) const;
  // Throws MissingEmbedding.
  math::ConstSpan get(std::string_view id) const;
  // Normalizes every vector in place (NormUnderflow on a zero vector).
  void normalize_all();

  void save(const std::filesystem::path& path) const;
  static EmbeddingStore load(const std::filesystem::path& path, bool normalize);

  bool operator==(const EmbeddingStore& other) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
  StringMap<std::size_t> index_;
};

}  // namespace cvr::data
