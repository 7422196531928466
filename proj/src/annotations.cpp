#include "cvr/annotations.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cvr/error.hpp"
#include "json.hpp"

namespace cvr::data {

using nlohmann::json;

std::size_t AnnotationSet::clip_count() const {
  std::size_t n = 0;
  for (const auto& v : videos) n += v.steps.size();
  return n;
}

void check_annotations(const AnnotationSet& ann) {
  std::unordered_set<std::string> video_ids;
  std::unordered_set<std::string> clip_ids;
  for (const auto& video : ann.videos) {
    if (!video_ids.insert(video.video_id).second) {
      throw Error(Errc::DuplicateId, "video " + video.video_id);
    }
    for (std::size_t i = 0; i < video.steps.size(); ++i) {
      const auto& step = video.steps[i];
      if (!clip_ids.insert(step.clip_id).second) throw Error(Errc::DuplicateId, "clip " + step.clip_id);
      if (i > 0 && step.step_index <= video.steps[i - 1].step_index) {
        throw Error(Errc::NonMonotoneSteps,
                    "video " + video.video_id + " at clip " + step.clip_id);
      }
    }
  }
}

namespace {

template <class T>
T field(const json& obj, const char* name, const char* where) {
  auto it = obj.find(name);
  if (it == obj.end()) throw Error(Errc::SchemaError, std::string(where) + " lacks '" + name + "'");
  try {
    return it->get<T>();
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string(where) + "." + name + ": " + e.what());
  }
}

}  // namespace

AnnotationSet parse_annotations(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(Errc::SchemaError, e.what());
  }
  if (!doc.is_object() || !doc.contains("videos") || !doc["videos"].is_array()) {
    throw Error(Errc::SchemaError, "annotation root must be an object with a 'videos' array");
  }
  AnnotationSet ann;
  for (const auto& v : doc["videos"]) {
    if (!v.is_object()) throw Error(Errc::SchemaError, "video entry must be an object");
    VideoRecord video;
    video.video_id = field<std::string>(v, "video_id", "video");
    video.task_id = field<std::string>(v, "task_id", "video");
    const auto steps = field<json>(v, "steps", "video");
    if (!steps.is_array()) throw Error(Errc::SchemaError, "video.steps must be an array");
    for (const auto& s : steps) {
      if (!s.is_object()) throw Error(Errc::SchemaError, "step entry must be an object");
      StepRecord step;
      step.clip_id = field<std::string>(s, "clip_id", "step");
      step.step_index = field<int>(s, "step_index", "step");
      step.caption = field<std::string>(s, "caption", "step");
      if (auto it = s.find("task_step_label"); it != s.end() && !it->is_null()) {
        if (!it->is_string()) throw Error(Errc::SchemaError, "task_step_label must be a string");
        step.task_step_label = it->get<std::string>();
      }
      video.steps.push_back(std::move(step));
    }
    ann.videos.push_back(std::move(video));
  }
  check_annotations(ann);
  return ann;
}

std::string dump_annotations(const AnnotationSet& ann) {
  json videos = json::array();
  for (const auto& video : ann.videos) {
    json steps = json::array();
    for (const auto& s : video.steps) {
      json js = {{"clip_id", s.clip_id}, {"step_index", s.step_index}, {"caption", s.caption}};
      if (s.task_step_label) js["task_step_label"] = *s.task_step_label;
      steps.push_back(std::move(js));
    }
    videos.push_back({{"video_id", video.video_id}, {"task_id", video.task_id}, {"steps", steps}});
  }
  return json{{"videos", videos}}.dump(1) + "\n";
}

AnnotationSet load_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_annotations(buffer.str());
}

void save_annotations(const AnnotationSet& ann, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << dump_annotations(ann);
}

ValidationReport validate(const AnnotationSet& ann, const EmbeddingStore& clips,
                          const EmbeddingStore* text, const EmbeddingStore* captions) {
  ValidationReport report;
  for (const auto& video : ann.videos) {
    for (const auto& step : video.steps) {
      if (!clips.contains(step.clip_id)) report.missing_clip_embeddings.push_back(step.clip_id);
      if (text != nullptr && !text->contains(step.clip_id)) {
        report.missing_text_embeddings.push_back(step.clip_id);
      }
      if (captions != nullptr && !captions->contains(step.clip_id)) {
        report.missing_caption_embeddings.push_back(step.clip_id);
      }
    }
  }
  return report;
}

void require_valid(const ValidationReport& report) {
  if (report.ok()) return;
  std::string message;
  auto append = [&](const char* what, const std::vector<std::string>& ids) {
    if (ids.empty()) return;
    message += std::string(message.empty() ? "" : "; ") + what + " (" +
               std::to_string(ids.size()) + "):";
    for (std::size_t i = 0; i < ids.size() && i < 5; ++i) message += " " + ids[i];
  };
  append("clip", report.missing_clip_embeddings);
  append("text", report.missing_text_embeddings);
  append("caption", report.missing_caption_embeddings);
  throw Error(Errc::MissingEmbedding, message);
}

}  // namespace cvr::data
