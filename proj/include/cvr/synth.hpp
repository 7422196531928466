#pragma once
// Synthetic procedural world with known identity / state structure.
// Each task owns a sequence of step directions in the state subspace; each
// video owns an identity vector in the identity subspace. The clip at step t
// is normalize(identity + sum_{k<=t} direction_k + noise) and its instruction
// text is normalize(direction_t + text noise). Captions reuse the text.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cvr/annotations.hpp"
#include "cvr/benchmark_file.hpp"
#include "cvr/embedding_store.hpp"
#include "cvr/math.hpp"

namespace cvr::synth {

struct WorldSpec {
  std::size_t d = 64;
  std::size_t d_id = 16;
  std::size_t d_st = 32;  // the remaining d - d_id - d_st coordinates carry only noise
  std::size_t n_tasks = 8;
  std::size_t videos_per_task = 6;
  std::size_t steps_per_video = 6;
  double identity_scale = 1.0;
  double state_scale = 0.5;
  double noise = 0.3;
  double text_noise = 0.3;
  std::uint64_t seed = 42;

  bool operator==(const WorldSpec&) const = default;
};

void check_spec(const WorldSpec& spec);  // BadSpec
std::string dump_spec(const WorldSpec& spec);
WorldSpec parse_spec(std::string_view json_text, WorldSpec base = {});

std::string video_id(std::size_t task, std::size_t video);
std::string clip_id(std::size_t task, std::size_t video, std::size_t step);

struct Latents {
  WorldSpec spec;
  std::vector<std::vector<math::Vector>> directions;  // [task][step]
  std::vector<math::Vector> identities;               // [task * videos_per_task + video]
  data::StringMap<math::Vector> clean;                // clip id -> identity + cumulative state
};

std::string dump_latents(const Latents& latents);
Latents parse_latents(std::string_view json_text);

struct World {
  data::AnnotationSet annotations;
  data::EmbeddingStore clips;
  data::EmbeddingStore text;      // keyed by clip id
  data::EmbeddingStore captions;  // keyed by clip id
  Latents latents;
};

// Bit-identical for a given spec.
World generate(const WorldSpec& spec);

// Scores each candidate by cosine between the noise-free latent of the ground
// truth clip and the candidate's observed embedding. Uses generator
// knowledge; an upper reference for trained scorers.
std::vector<double> oracle_scores(const data::QueryInstance& query, const Latents& latents,
                                  const data::EmbeddingStore& clips);

void save_world(const World& world, const std::filesystem::path& dir);

}  // namespace cvr::synth
