#include "cvr/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "cvr/error.hpp"
#include "cvr/evaluation.hpp"
#include "cvr/io.hpp"
#include "cvr/kernels.hpp"
#include "cvr/mining.hpp"
#include "cvr/pipeline.hpp"
#include "cvr/synth.hpp"
#include "json.hpp"

namespace cvr::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::string isa = "auto";
};

void add_common(CLI::App* app, Common& c, bool config_is_world = false) {
  app->add_option("--config", c.config,
                  config_is_world ? "world spec JSON" : "run config JSON (flags override it)");
  app->add_option("--out", c.out, "output directory")->required();
  app->add_option("--seed", c.seed, "global seed");
  app->add_option("--workers", c.workers, "worker threads (outputs do not depend on it)");
  app->add_option("--isa", c.isa, "kernel set: auto, scalar or avx2");
}

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

data::RunConfig resolve(const Common& c) {
  data::RunConfig cfg;
  if (!c.config.empty()) cfg = data::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.workers) cfg.workers = *c.workers;
  data::check_config(cfg);
  return cfg;
}

// Records inputs, config and produced artifacts of one run. Paths are kept as
// given so reruns with the same arguments give identical manifests.
class Manifest {
 public:
  Manifest(std::string command, const Common& c) : out_(c.out) {
    fs::create_directories(out_);
    j_["command"] = std::move(command);
    j_["inputs"] = json::array();
    j_["artifacts"] = json::array();
  }

  void input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    j_["inputs"].push_back({{"role", role}, {"path", path}, {"digest", file_digest(path)}});
  }

  void config(const data::RunConfig& cfg) {
    write("config.json", data::dump_config(cfg), false);
    j_["seed"] = cfg.seed;
    j_["config_hash"] = hex(data::config_hash(cfg));
  }

  void world(const synth::WorldSpec& spec) {
    j_["seed"] = spec.seed;
    j_["config_hash"] = hex(stable_hash(synth::dump_spec(spec)));
  }

  // Writes a text artifact and records its digest.
  void write(const std::string& name, std::string_view text, bool record = true) {
    write_text(out_ / name, text);
    if (record) artifact(name);
  }

  void artifact(const std::string& name) {
    j_["artifacts"].push_back({{"name", name}, {"digest", file_digest(out_ / name)}});
  }

  fs::path path(const std::string& name) const { return out_ / name; }

  void finish() { write_text(out_ / "manifest.json", j_.dump(1) + "\n"); }

 private:
  fs::path out_;
  json j_;
};

data::EmbeddingStore load_store(const std::string& path) {
  return data::EmbeddingStore::load(path, true);
}

int exit_code(Errc code) {
  switch (code) {
    case Errc::UsageError:
      return 2;
    case Errc::BadMagic:
    case Errc::DimMismatch:
    case Errc::DuplicateId:
    case Errc::TruncatedFile:
    case Errc::IoError:
    case Errc::SchemaError:
    case Errc::NonMonotoneSteps:
    case Errc::MissingEmbedding:
    case Errc::InvalidQuery:
    case Errc::InsufficientCandidates:
    case Errc::MissingCaptionEmbedding:
    case Errc::HistoryTooLong:
    case Errc::MissingContext:
    case Errc::EmptyGrid:
    case Errc::BadSpec:
      return 3;
    default:
      return 4;
  }
}

json weights_json(const eval::GridResult& g) {
  return {{"w_v", g.best.w_v}, {"w_p", g.best.w_p}, {"acc", g.acc}, {"mnr", g.mnr}};
}

eval::EnsembleWeights read_weights(const std::string& path, const char* key) {
  try {
    const json j = json::parse(read_text(path));
    const auto& w = j.at(key);
    return {w.at("w_v").get<double>(), w.at("w_p").get<double>()};
  } catch (const json::exception& e) {
    throw Error(Errc::SchemaError, "weights file " + path + ": " + e.what());
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Consistent video retrieval: benchmark mining, CAST training and evaluation"};
  app.require_subcommand(1);
  Common c;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate the synthetic procedural world");
  add_common(synth_cmd, c, true);

  // mine
  std::string ann_path, captions_path, clips_path, text_path, bench_path, ckpt_path, label;
  std::optional<std::size_t> context_len;
  std::optional<std::string> identity_strategy, easy_strategy;
  auto* mine_cmd = app.add_subcommand("mine", "mine the hard-negative benchmark");
  add_common(mine_cmd, c);
  mine_cmd->add_option("--ann", ann_path, "annotation JSON")->required();
  mine_cmd->add_option("--captions", captions_path, "caption embedding store");
  mine_cmd->add_option("--context-len", context_len, "context window L");
  mine_cmd->add_option("--identity-strategy", identity_strategy,
                       "caption-knn, task-step, task-step-fallback or lexical");
  mine_cmd->add_option("--easy-strategy", easy_strategy, "diff-video or diff-task");

  // split
  std::optional<double> train_frac;
  auto* split_cmd = app.add_subcommand("split", "split annotations by video");
  add_common(split_cmd, c);
  split_cmd->add_option("--ann", ann_path, "annotation JSON")->required();
  split_cmd->add_option("--train-frac", train_frac, "fraction of videos for training");

  // train
  std::string model_name = "cast";
  std::optional<std::size_t> epochs, batch_size;
  auto* train_cmd = app.add_subcommand("train", "train a predictor or learned late fusion");
  add_common(train_cmd, c);
  train_cmd->add_option("--ann", ann_path, "training annotation JSON")->required();
  train_cmd->add_option("--clips", clips_path, "clip embedding store")->required();
  train_cmd->add_option("--text", text_path, "query text embedding store")->required();
  train_cmd->add_option("--captions", captions_path, "caption embedding store");
  train_cmd->add_option("--model", model_name, "cast, ef-direct, ef-residual or late-fusion");
  train_cmd->add_option("--context-len", context_len, "context window L");
  train_cmd->add_option("--epochs", epochs, "training epochs");
  train_cmd->add_option("--batch-size", batch_size, "batch size");

  // grid
  auto* grid_cmd = app.add_subcommand("grid", "select ensemble weights on a validation benchmark");
  add_common(grid_cmd, c);
  grid_cmd->add_option("--bench", bench_path, "validation benchmark JSON")->required();
  grid_cmd->add_option("--clips", clips_path, "clip embedding store")->required();
  grid_cmd->add_option("--text", text_path, "query text embedding store")->required();
  grid_cmd->add_option("--ckpt", ckpt_path, "predictor checkpoint")->required();

  // eval
  std::string mode_name = "text", weights_path, latents_path;
  std::optional<double> wv, wp, alpha;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate one scoring mode on a benchmark");
  add_common(eval_cmd, c);
  eval_cmd->add_option("--bench", bench_path, "benchmark JSON")->required();
  eval_cmd->add_option("--clips", clips_path, "clip embedding store")->required();
  eval_cmd->add_option("--text", text_path, "query text embedding store")->required();
  eval_cmd->add_option("--mode", mode_name,
                       "text, vis, cast, heuristic-late-fusion, semantic-ensemble, full-ensemble, "
                       "learned-late-fusion or oracle");
  eval_cmd->add_option("--ckpt", ckpt_path, "predictor or late-fusion checkpoint");
  eval_cmd->add_option("--weights", weights_path, "weights JSON written by grid");
  eval_cmd->add_option("--wv", wv, "visual-continuity weight");
  eval_cmd->add_option("--wp", wp, "predicted-state weight");
  eval_cmd->add_option("--alpha", alpha, "heuristic late-fusion weight");
  eval_cmd->add_option("--latents", latents_path, "synthetic world latents (oracle mode)");
  eval_cmd->add_option("--label", label, "row label in the report (default: the mode)");

  // sweep
  std::vector<std::size_t> lengths{0, 1, 3, 5};
  double val_frac = 0.25;
  auto* sweep_cmd = app.add_subcommand("sweep", "retrain and evaluate CAST per context length");
  add_common(sweep_cmd, c);
  sweep_cmd->add_option("--ann", ann_path, "annotation JSON")->required();
  sweep_cmd->add_option("--clips", clips_path, "clip embedding store")->required();
  sweep_cmd->add_option("--text", text_path, "query text embedding store")->required();
  sweep_cmd->add_option("--captions", captions_path, "caption embedding store");
  sweep_cmd->add_option("--lengths", lengths, "context lengths")->delimiter(',');
  sweep_cmd->add_option("--val-frac", val_frac, "share of training videos held out for weights");
  sweep_cmd->add_option("--train-frac", train_frac, "fraction of videos for training");
  sweep_cmd->add_option("--epochs", epochs, "training epochs");
  sweep_cmd->add_option("--batch-size", batch_size, "batch size");

  // report
  std::vector<std::string> report_paths;
  std::string macro_label;
  auto* report_cmd = app.add_subcommand("report", "render eval reports as a table and CSV");
  add_common(report_cmd, c);
  report_cmd->add_option("--reports", report_paths, "report JSON files")->required()->delimiter(',');
  report_cmd->add_option("--macro-label", macro_label, "append a macro-average row with this label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    kernels::set_active_isa(kernels::parse_isa(c.isa));

    if (synth_cmd->parsed()) {
      synth::WorldSpec spec;
      if (!c.config.empty()) spec = synth::parse_spec(read_text(c.config));
      if (c.seed) spec.seed = *c.seed;
      synth::check_spec(spec);
      Manifest m("synth", c);
      m.input("config", c.config);
      m.world(spec);
      const auto world = synth::generate(spec);
      synth::save_world(world, c.out);
      for (const char* name : {"ann.json", "clips.emb", "text.emb", "captions.emb", "latents.json", "world.json"}) {
        m.artifact(name);
      }
      m.finish();
      return 0;
    }

    data::RunConfig cfg = resolve(c);
    if (context_len) cfg.context_len = *context_len;
    if (identity_strategy) cfg.identity_strategy = *identity_strategy;
    if (easy_strategy) cfg.easy_strategy = *easy_strategy;
    if (train_frac) cfg.train_frac = *train_frac;
    if (epochs) cfg.epochs = *epochs;
    if (batch_size) cfg.batch_size = *batch_size;
    data::check_config(cfg);

    if (mine_cmd->parsed()) {
      Manifest m("mine", c);
      m.input("ann", ann_path);
      m.input("captions", captions_path);
      m.config(cfg);
      const auto ann = data::load_annotations(ann_path);
      std::optional<data::EmbeddingStore> captions;
      if (!captions_path.empty()) captions = load_store(captions_path);
      const auto mined = bench::mine_benchmark(ann, cfg.context_len, bench::rules_from_config(cfg),
                                               captions ? &*captions : nullptr, cfg.workers);
      m.write("benchmark.json", data::dump_benchmark(mined.benchmark));
      m.write("mining_report.json", bench::dump_mining_report(mined.report));
      m.finish();
      return 0;
    }

    if (split_cmd->parsed()) {
      Manifest m("split", c);
      m.input("ann", ann_path);
      m.config(cfg);
      const auto [train, held_out] =
          bench::split_by_video(data::load_annotations(ann_path), cfg.train_frac, cfg.seed);
      m.write("train_ann.json", data::dump_annotations(train));
      m.write("eval_ann.json", data::dump_annotations(held_out));
      m.finish();
      return 0;
    }

    if (train_cmd->parsed()) {
      const auto kind = train::parse_model_kind(model_name);
      Manifest m("train", c);
      m.input("ann", ann_path);
      m.input("clips", clips_path);
      m.input("text", text_path);
      m.input("captions", captions_path);
      m.config(cfg);
      const auto ann = data::load_annotations(ann_path);
      const auto clips = load_store(clips_path);
      const auto text = load_store(text_path);
      std::optional<data::EmbeddingStore> captions;
      if (!captions_path.empty()) captions = load_store(captions_path);
      data::require_valid(data::validate(ann, clips, &text, captions ? &*captions : nullptr));
      const pipeline::Sources src{&clips, &text, captions ? &*captions : nullptr};
      const auto trained = pipeline::train_model(kind, ann, src, cfg);
      model::save_checkpoint(trained.checkpoint, m.path("checkpoint.bin"));
      m.artifact("checkpoint.bin");
      m.write("loss.csv", train::loss_curve_csv(trained.curve));
      m.finish();
      return 0;
    }

    if (grid_cmd->parsed()) {
      Manifest m("grid", c);
      m.input("bench", bench_path);
      m.input("clips", clips_path);
      m.input("text", text_path);
      m.input("ckpt", ckpt_path);
      m.config(cfg);
      const auto bench = data::load_benchmark(bench_path);
      const auto clips = load_store(clips_path);
      const auto text = load_store(text_path);
      const auto predictor = pipeline::predictor_from_checkpoint(model::load_checkpoint(ckpt_path));
      const auto table = eval::compute_triples(bench, {&clips, &text}, &predictor, cfg.workers);
      const auto sel = pipeline::select_weights(bench, table, cfg);
      json w;
      w["full"] = weights_json(sel.full);
      w["semantic"] = weights_json(sel.semantic);
      m.write("weights.json", w.dump(1) + "\n");
      m.write("grid.csv", eval::grid_csv(sel.full));
      m.finish();
      return 0;
    }

    if (eval_cmd->parsed()) {
      const bool oracle = mode_name == "oracle";
      eval::Scorer scorer;
      if (!oracle) scorer.mode = eval::parse_mode(mode_name);
      const bool wants_ckpt =
          !oracle && (eval::needs_predictor(scorer.mode) || scorer.mode == eval::Mode::LearnedLateFusion);
      if (wants_ckpt && ckpt_path.empty()) {
        throw Error(Errc::UsageError, "mode " + mode_name + " requires --ckpt");
      }
      if (oracle && latents_path.empty()) {
        throw Error(Errc::UsageError, "mode oracle requires --latents");
      }
      const bool ensemble = scorer.mode == eval::Mode::FullEnsemble ||
                            scorer.mode == eval::Mode::SemanticEnsemble;
      if (!oracle && ensemble) {
        if (!weights_path.empty()) {
          scorer.weights = read_weights(
              weights_path, scorer.mode == eval::Mode::FullEnsemble ? "full" : "semantic");
        } else if (wp && (wv || scorer.mode == eval::Mode::SemanticEnsemble)) {
          scorer.weights = {wv.value_or(0.0), *wp};
        } else {
          throw Error(Errc::UsageError, "mode " + mode_name + " requires --weights or --wv/--wp");
        }
      }
      scorer.alpha = alpha.value_or(cfg.heuristic_alpha);

      Manifest m("eval", c);
      m.input("bench", bench_path);
      m.input("clips", clips_path);
      m.input("text", text_path);
      m.input("ckpt", ckpt_path);
      m.input("weights", weights_path);
      m.input("latents", latents_path);
      m.config(cfg);
      const auto bench = data::load_benchmark(bench_path);
      const auto clips = load_store(clips_path);
      const auto text = load_store(text_path);
      eval::EvalReport report;
      if (oracle) {
        const auto latents = synth::parse_latents(read_text(latents_path));
        std::vector<std::vector<double>> scores;
        for (const auto& q : bench.queries) scores.push_back(synth::oracle_scores(q, latents, clips));
        report = eval::summarize(bench, scores);
        report.label = "oracle";
      } else {
        eval::Predictor predictor;
        std::optional<model::LateFusionParams> late;
        if (wants_ckpt) {
          const auto ckpt = model::load_checkpoint(ckpt_path);
          if (scorer.mode == eval::Mode::LearnedLateFusion) {
            late = model::late_fusion_from_checkpoint(ckpt);
            scorer.late_fusion = &*late;
          } else {
            predictor = pipeline::predictor_from_checkpoint(ckpt);
            scorer.predictor = &predictor;
          }
        }
        report = eval::evaluate(bench, {&clips, &text}, scorer, cfg.workers);
        report.label = mode_name;
      }
      if (!label.empty()) report.label = label;
      m.write("report.json", eval::dump_report(report));
      m.write("per_query.csv", eval::report_csv(report));
      m.finish();
      std::cout << eval::render_table({report});
      return 0;
    }

    if (sweep_cmd->parsed()) {
      Manifest m("sweep", c);
      m.input("ann", ann_path);
      m.input("clips", clips_path);
      m.input("text", text_path);
      m.input("captions", captions_path);
      m.config(cfg);
      const auto ann = data::load_annotations(ann_path);
      const auto clips = load_store(clips_path);
      const auto text = load_store(text_path);
      std::optional<data::EmbeddingStore> captions;
      if (!captions_path.empty()) captions = load_store(captions_path);
      const pipeline::Sources src{&clips, &text, captions ? &*captions : nullptr};
      const auto rows = pipeline::context_sweep(ann, src, cfg, lengths, val_frac);
      m.write("sweep.csv", pipeline::sweep_csv(rows));
      m.finish();
      std::cout << pipeline::sweep_csv(rows);
      return 0;
    }

    if (report_cmd->parsed()) {
      Manifest m("report", c);
      std::vector<eval::EvalReport> reports;
      for (const auto& p : report_paths) {
        m.input("report", p);
        reports.push_back(eval::parse_report(read_text(p)));
      }
      if (!macro_label.empty()) reports.push_back(eval::macro_average(reports, macro_label));
      m.write("table.txt", eval::render_table(reports));
      m.write("summary.csv", eval::summary_csv(reports));
      m.finish();
      std::cout << eval::render_table(reports);
      return 0;
    }
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 4;
  }
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace cvr::cli
