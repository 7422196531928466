#pragma once
// Videos -> ordered step clips with captions and task/step labels.
//
// JSON layout:
//   {"videos": [{"video_id": "...", "task_id": "...",
//                "steps": [{"clip_id": "...", "step_index": 0, "caption": "...",
//                           "task_step_label": "..."}]}]}
// task_step_label is optional.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "cvr/embedding_store.hpp"

namespace cvr::data {

struct StepRecord {
  std::string clip_id;
  int step_index = 0;
  std::string caption;
  std::optional<std::string> task_step_label;

  bool operator==(const StepRecord&) const = default;
};

struct VideoRecord {
  std::string video_id;
  std::string task_id;
  std::vector<StepRecord> steps;

  bool operator==(const VideoRecord&) const = default;
};

struct AnnotationSet {
  std::vector<VideoRecord> videos;

  std::size_t clip_count() const;
  bool operator==(const AnnotationSet&) const = default;
};

// Structural checks: unique video ids, globally unique clip ids, strictly
// increasing step_index per video. Throws DuplicateId / NonMonotoneSteps.
void check_annotations(const AnnotationSet& ann);

AnnotationSet parse_annotations(std::string_view json_text);  // SchemaError + check_annotations
std::string dump_annotations(const AnnotationSet& ann);
AnnotationSet load_annotations(const std::filesystem::path& path);
void save_annotations(const AnnotationSet& ann, const std::filesystem::path& path);

struct ValidationReport {
  std::vector<std::string> missing_clip_embeddings;
  std::vector<std::string> missing_text_embeddings;
  std::vector<std::string> missing_caption_embeddings;

  bool ok() const {
    return missing_clip_embeddings.empty() && missing_text_embeddings.empty() &&
           missing_caption_embeddings.empty();
  }
};

// Text and caption stores are keyed by clip_id; pass nullptr to skip them.
ValidationReport validate(const AnnotationSet& ann, const EmbeddingStore& clips,
                          const EmbeddingStore* text = nullptr,
                          const EmbeddingStore* captions = nullptr);
// Throws MissingEmbedding naming the first few missing ids.
void require_valid(const ValidationReport& report);

}  // namespace cvr::data
