#pragma once
// Named parameter tensors shared by every trainable model, Xavier
// initialization, and the checkpoint container.
//
// Checkpoint layout (little-endian):
//   "CVRP" | u32 version=1 | u16 len | kind bytes
//   u32 n_meta  x ( u16 len | name | u64 value )
//   u32 n_tensors x ( u16 len | name | u32 rows | u32 cols | rows*cols f64 )

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cvr/math.hpp"
#include "cvr/rng.hpp"

namespace cvr::model {

struct TensorRef {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<double> values;
};

struct ConstTensorRef {
  std::string_view name;
  std::size_t rows;
  std::size_t cols;
  std::span<const double> values;
};

inline TensorRef ref(std::string_view name, math::Matrix& m) {
  return {name, m.rows, m.cols, m.data};
}
inline TensorRef ref(std::string_view name, math::Vector& v) { return {name, v.size(), 1, v}; }
inline ConstTensorRef ref(std::string_view name, const math::Matrix& m) {
  return {name, m.rows, m.cols, m.data};
}
inline ConstTensorRef ref(std::string_view name, const math::Vector& v) {
  return {name, v.size(), 1, v};
}

// Anything exposing tensors() in a fixed order.
template <class P>
concept ParamSet = requires(P& p, const P& cp) {
  { p.tensors() } -> std::same_as<std::vector<TensorRef>>;
  { cp.tensors() } -> std::same_as<std::vector<ConstTensorRef>>;
};

template <ParamSet P>
void fill(P& p, double value) {
  for (auto& t : p.tensors()) std::fill(t.values.begin(), t.values.end(), value);
}

template <ParamSet P>
P zeros_like(const P& p) {
  P out = p;
  fill(out, 0.0);
  return out;
}

// dst += alpha * src
template <ParamSet P>
void accumulate(P& dst, const P& src, double alpha = 1.0) {
  auto d = dst.tensors();
  const auto s = src.tensors();
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (std::size_t j = 0; j < d[i].values.size(); ++j) d[i].values[j] += alpha * s[i].values[j];
  }
}

template <ParamSet P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  for (const auto& t : p.tensors()) n += t.values.size();
  return n;
}

// Uniform(-a, a), a = sqrt(6 / (fan_in + fan_out)).
void xavier_uniform(math::Matrix& w, Rng& rng);

struct NamedTensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  bool operator==(const NamedTensor&) const = default;
};

struct Checkpoint {
  std::string kind;
  std::vector<std::pair<std::string, std::uint64_t>> meta;
  std::vector<NamedTensor> tensors;

  std::uint64_t meta_value(std::string_view name) const;  // SchemaError if absent
  bool operator==(const Checkpoint&) const = default;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
std::string peek_checkpoint_kind(const std::filesystem::path& path);

template <ParamSet P>
void write_tensors(const P& p, Checkpoint& ckpt) {
  for (const auto& t : p.tensors()) {
    ckpt.tensors.push_back(
        {std::string(t.name), t.rows, t.cols, std::vector<double>(t.values.begin(), t.values.end())});
  }
}

// Copies checkpoint tensors into an already-shaped parameter set.
// Throws ShapeMismatch on any name/shape disagreement.
void read_tensors(const Checkpoint& ckpt, std::vector<TensorRef> dst);

}  // namespace cvr::model
