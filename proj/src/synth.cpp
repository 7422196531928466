#include "cvr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "cvr/error.hpp"
#include "cvr/io.hpp"
#include "cvr/rng.hpp"
#include "json.hpp"

namespace cvr::synth {

using json = nlohmann::ordered_json;
using math::Vector;

void check_spec(const WorldSpec& s) {
  auto bad = [](const std::string& msg) { throw Error(Errc::BadSpec, msg); };
  if (s.d_id == 0 || s.d_st == 0) bad("identity and state subspaces must be nonempty");
  if (s.d_id + s.d_st > s.d) bad("subspaces exceed d");
  if (s.n_tasks == 0 || s.videos_per_task == 0 || s.steps_per_video == 0) bad("empty world");
  if (!(s.identity_scale > 0) || !(s.state_scale > 0)) bad("identity/state scales must be > 0");
  if (!(s.noise >= 0) || !(s.text_noise >= 0)) bad("noise scales must be >= 0");
}

std::string dump_spec(const WorldSpec& s) {
  json j;
  j["d"] = s.d;
  j["d_id"] = s.d_id;
  j["d_st"] = s.d_st;
  j["n_tasks"] = s.n_tasks;
  j["videos_per_task"] = s.videos_per_task;
  j["steps_per_video"] = s.steps_per_video;
  j["identity_scale"] = s.identity_scale;
  j["state_scale"] = s.state_scale;
  j["noise"] = s.noise;
  j["text_noise"] = s.text_noise;
  j["seed"] = s.seed;
  return j.dump(1) + "\n";
}

WorldSpec parse_spec(std::string_view text, WorldSpec s) {
  try {
    const json j = json::parse(text);
    if (!j.is_object()) throw Error(Errc::SchemaError, "world spec must be an object");
    for (const auto& [key, v] : j.items()) {
      if (key == "d") s.d = v.get<std::size_t>();
      else if (key == "d_id") s.d_id = v.get<std::size_t>();
      else if (key == "d_st") s.d_st = v.get<std::size_t>();
      else if (key == "n_tasks") s.n_tasks = v.get<std::size_t>();
      else if (key == "videos_per_task") s.videos_per_task = v.get<std::size_t>();
      else if (key == "steps_per_video") s.steps_per_video = v.get<std::size_t>();
      else if (key == "identity_scale") s.identity_scale = v.get<double>();
      else if (key == "state_scale") s.state_scale = v.get<double>();
      else if (key == "noise") s.noise = v.get<double>();
      else if (key == "text_noise") s.text_noise = v.get<double>();
      else if (key == "seed") s.seed = v.get<std::uint64_t>();
      else throw Error(Errc::SchemaError, "unknown world spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("world spec: ") + e.what());
  }
  check_spec(s);
  return s;
}

std::string video_id(std::size_t task, std::size_t video) {
  return "t" + std::to_string(task) + "_v" + std::to_string(video);
}

std::string clip_id(std::size_t task, std::size_t video, std::size_t step) {
  return video_id(task, video) + "_s" + std::to_string(step);
}

namespace {

// Gaussian direction of norm `scale` inside coordinates [begin, begin + len).
Vector subspace_vector(std::size_t d, std::size_t begin, std::size_t len, double scale, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(d, 0.0);
  double n2 = 0.0;
  for (std::size_t i = begin; i < begin + len; ++i) {
    v[i] = normal(rng);
    n2 += v[i] * v[i];
  }
  const double k = scale / std::sqrt(n2);
  for (std::size_t i = begin; i < begin + len; ++i) v[i] *= k;
  return v;
}

// Isotropic noise with expected norm about `scale`.
void add_noise(Vector& v, double scale, Rng& rng) {
  if (scale == 0.0) return;
  std::normal_distribution<double> normal;
  const double k = scale / std::sqrt(static_cast<double>(v.size()));
  for (double& x : v) x += k * normal(rng);
}

}  // namespace

World generate(const WorldSpec& spec) {
  check_spec(spec);
  World w{{}, data::EmbeddingStore(spec.d), data::EmbeddingStore(spec.d),
          data::EmbeddingStore(spec.d), {}};
  w.latents.spec = spec;
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    Rng rng = make_rng(derive_seed(derive_seed(spec.seed, "task"), t));
    std::vector<Vector> dirs;
    for (std::size_t k = 0; k < spec.steps_per_video; ++k) {
      dirs.push_back(subspace_vector(spec.d, spec.d_id, spec.d_st, spec.state_scale, rng));
    }
    w.latents.directions.push_back(std::move(dirs));
  }
  for (std::size_t t = 0; t < spec.n_tasks; ++t) {
    for (std::size_t v = 0; v < spec.videos_per_task; ++v) {
      const std::string vid = video_id(t, v);
      Rng rng = make_rng(derive_seed(derive_seed(spec.seed, "video"), vid));
      Vector identity = subspace_vector(spec.d, 0, spec.d_id, spec.identity_scale, rng);
      data::VideoRecord rec{vid, "task" + std::to_string(t), {}};
      Vector state(spec.d, 0.0);
      for (std::size_t k = 0; k < spec.steps_per_video; ++k) {
        const std::string cid = clip_id(t, v, k);
        const Vector& dir = w.latents.directions[t][k];
        math::add_into(dir, state);
        Vector clean = math::add(identity, state);
        Vector clip = clean;
        add_noise(clip, spec.noise, rng);
        Vector text = dir;
        add_noise(text, spec.text_noise, rng);
        w.clips.add(cid, math::l2_normalize(clip));
        const Vector t_unit = math::l2_normalize(text);
        w.text.add(cid, t_unit);
        w.captions.add(cid, t_unit);
        w.latents.clean.emplace(cid, std::move(clean));
        rec.steps.push_back({cid, static_cast<int>(k),
                             "task" + std::to_string(t) + " step" + std::to_string(k),
                             "step" + std::to_string(k)});
      }
      w.latents.identities.push_back(std::move(identity));
      w.annotations.videos.push_back(std::move(rec));
    }
  }
  return w;
}

std::vector<double> oracle_scores(const data::QueryInstance& query, const Latents& latents,
                                  const data::EmbeddingStore& clips) {
  const auto it = latents.clean.find(query.gt_clip_id);
  if (it == latents.clean.end()) {
    throw Error(Errc::MissingEmbedding, "no latent for " + query.gt_clip_id);
  }
  std::vector<double> out;
  for (const auto& c : query.candidates) out.push_back(math::cosine_sim(it->second, clips.get(c.clip_id)));
  return out;
}

std::string dump_latents(const Latents& l) {
  json j;
  j["spec"] = json::parse(dump_spec(l.spec));
  j["directions"] = l.directions;
  j["identities"] = l.identities;
  json clean = json::object();
  std::vector<std::string> ids;
  for (const auto& [id, v] : l.clean) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) clean[id] = l.clean.at(id);
  j["clean"] = std::move(clean);
  return j.dump() + "\n";
}

Latents parse_latents(std::string_view text) {
  try {
    const json j = json::parse(text);
    Latents l;
    l.spec = parse_spec(j.at("spec").dump());
    l.directions = j.at("directions").get<std::vector<std::vector<Vector>>>();
    l.identities = j.at("identities").get<std::vector<Vector>>();
    for (const auto& [id, v] : j.at("clean").items()) l.clean.emplace(id, v.get<Vector>());
    return l;
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, std::string("latents: ") + e.what());
  }
}

void save_world(const World& w, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  data::save_annotations(w.annotations, dir / "ann.json");
  w.clips.save(dir / "clips.emb");
  w.text.save(dir / "text.emb");
  w.captions.save(dir / "captions.emb");
  write_text(dir / "latents.json", dump_latents(w.latents));
  write_text(dir / "world.json", dump_spec(w.latents.spec));
}

}  // namespace cvr::synth
