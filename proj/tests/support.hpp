#pragma once
// Shared helpers for the test suites: random inputs and central finite
// differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "cvr/math.hpp"
#include "cvr/params.hpp"
#include "cvr/rng.hpp"

namespace cvr::testing {

inline constexpr double kFdStep = 1e-4;
inline constexpr double kFdTolerance = 1e-4;

inline math::Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  math::Vector v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

inline math::Vector random_unit(std::size_t n, Rng& rng) {
  return math::l2_normalize(random_vector(n, rng));
}

inline math::Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng,
                                  double scale = 1.0) {
  math::Matrix m(rows, cols);
  m.data = random_vector(rows * cols, rng, scale);
  return m;
}

// Relative error per entry, |a - n| / max(|a|, |n|, floor). The floor keeps
// entries that are zero up to round-off from dominating.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric,
                          double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric[i]), floor});
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

// Central differences of f with respect to every entry of x (x is restored).
inline std::vector<double> fd_gradient(const std::function<double()>& f, std::span<double> x,
                                       double h = kFdStep) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f();
    x[i] = keep - h;
    const double down = f();
    x[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Finite-difference check of every tensor of a parameter set. `loss` reads
// the parameters; `analytic` holds gradients in the same layout.
template <model::ParamSet P>
double max_param_rel_err(P& params, const P& analytic, const std::function<double()>& loss) {
  double worst = 0.0;
  auto refs = params.tensors();
  const auto grads = analytic.tensors();
  for (std::size_t t = 0; t < refs.size(); ++t) {
    const auto numeric = fd_gradient(loss, refs[t].values);
    const std::vector<double> a(grads[t].values.begin(), grads[t].values.end());
    worst = std::max(worst, max_rel_err(a, numeric));
  }
  return worst;
}

}  // namespace cvr::testing

#include <filesystem>
#include <string>
#include <unistd.h>

namespace cvr::testing {

// Scratch directory removed on destruction.
class ScratchDir {
 public:
  explicit ScratchDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() /
              ("cvr_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() { std::filesystem::remove_all(path_); }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace cvr::testing

#include "cvr/annotations.hpp"
#include "cvr/embedding_store.hpp"

namespace cvr::testing {

// Random annotation set whose every video has at least `min_other` clips in
// other videos, so any pool of size min_other + 1 can be filled.
inline data::AnnotationSet random_annotations(Rng& rng, std::size_t min_other = 9) {
  static const char* kWords[] = {"add", "salt", "stir", "pan", "egg", "cut", "onion", "oil", "mix", "bake"};
  std::uniform_int_distribution<int> n_tasks(1, 4), n_videos(1, 5), n_steps(1, 7), gap(1, 3),
      word(0, 9), n_words(1, 3);
  for (;;) {
    data::AnnotationSet ann;
    const int tasks = n_tasks(rng);
    for (int t = 0; t < tasks; ++t) {
      const int videos = n_videos(rng);
      for (int v = 0; v < videos; ++v) {
        data::VideoRecord rec;
        rec.video_id = "t" + std::to_string(t) + "v" + std::to_string(v);
        rec.task_id = "task" + std::to_string(t);
        const int steps = n_steps(rng);
        int index = 0;
        for (int s = 0; s < steps; ++s) {
          std::string caption;
          for (int w = n_words(rng); w > 0; --w) caption += std::string(kWords[word(rng)]) + " ";
          rec.steps.push_back({rec.video_id + "_c" + std::to_string(s), index, caption,
                               "step" + std::to_string(s)});
          index += gap(rng);
        }
        ann.videos.push_back(std::move(rec));
      }
    }
    const std::size_t total = ann.clip_count();
    bool ok = true;
    for (const auto& v : ann.videos) ok = ok && total - v.steps.size() >= min_other;
    if (ok) return ann;
  }
}

// Random caption vectors for every clip of `ann`.
inline data::EmbeddingStore random_captions(const data::AnnotationSet& ann, std::size_t d, Rng& rng) {
  data::EmbeddingStore s(d);
  for (const auto& v : ann.videos) {
    for (const auto& step : v.steps) s.add(step.clip_id, random_unit(d, rng));
  }
  return s;
}

}  // namespace cvr::testing
