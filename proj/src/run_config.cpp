#include "cvr/run_config.hpp"

#include <fstream>
#include <sstream>

#include "cvr/error.hpp"
#include "cvr/rng.hpp"
#include "json.hpp"

namespace cvr::data {

using nlohmann::ordered_json;

std::vector<double> tenths_grid(int first_tenth, int last_tenth) {
  std::vector<double> grid;
  for (int i = first_tenth; i <= last_tenth; ++i) grid.push_back(i / 10.0);
  return grid;
}

void check_config(const RunConfig& cfg) {
  auto bad = [](const std::string& what) { throw Error(Errc::BadSpec, what); };
  if (!(cfg.tau > 0.0)) bad("tau must be positive");
  if (cfg.pool_size < 2) bad("pool_size must be at least 2");
  if (cfg.batch_size == 0) bad("batch_size must be positive");
  if (cfg.n_heads == 0) bad("n_heads must be positive");
  if (!(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0)) bad("dropout_rate must be in [0,1)");
  if (!(cfg.train_frac > 0.0 && cfg.train_frac < 1.0)) bad("train_frac must be in (0,1)");
  if (cfg.lr < 0.0 || cfg.weight_decay < 0.0) bad("lr and weight_decay must be nonnegative");
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) {
    bad("adam betas must be in [0,1)");
  }
  if (cfg.lambda_s < 0.0 || cfg.lambda_i < 0.0) bad("loss weights must be nonnegative");
  if (cfg.workers == 0) bad("workers must be positive");
  for (double w : cfg.grid_wv) if (w < 0.0) bad("grid_wv entries must be nonnegative");
  for (double w : cfg.grid_wp) if (w < 0.0) bad("grid_wp entries must be nonnegative");
}

namespace {

ordered_json to_json(const RunConfig& c) {
  return ordered_json{
      {"d", c.d},
      {"context_len", c.context_len},
      {"pool_size", c.pool_size},
      {"max_state_negs", c.max_state_negs},
      {"max_ident_negs", c.max_ident_negs},
      {"identity_strategy", c.identity_strategy},
      {"easy_strategy", c.easy_strategy},
      {"avoid_immediate_predecessor", c.avoid_immediate_predecessor},
      {"tau", c.tau},
      {"lambda_s", c.lambda_s},
      {"lambda_i", c.lambda_i},
      {"drop_zero_negatives", c.drop_zero_negatives},
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"beta1", c.beta1},
      {"beta2", c.beta2},
      {"adam_eps", c.adam_eps},
      {"batch_size", c.batch_size},
      {"epochs", c.epochs},
      {"n_heads", c.n_heads},
      {"dropout_rate", c.dropout_rate},
      {"grid_wv", c.grid_wv},
      {"grid_wp", c.grid_wp},
      {"heuristic_alpha", c.heuristic_alpha},
      {"train_frac", c.train_frac},
      {"seed", c.seed},
      {"workers", c.workers},
  };
}

template <class T>
void overlay(const ordered_json& doc, const char* key, T& slot) {
  if (auto it = doc.find(key); it != doc.end()) {
    try {
      slot = it->get<T>();
    } catch (const ordered_json::exception& e) {
      throw Error(Errc::SchemaError, std::string("config key '") + key + "': " + e.what());
    }
  }
}

}  // namespace

std::string dump_config(const RunConfig& cfg) { return to_json(cfg).dump(1) + "\n"; }

RunConfig parse_config(std::string_view json_text, const RunConfig& base) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(json_text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(Errc::SchemaError, e.what());
  }
  if (!doc.is_object()) throw Error(Errc::SchemaError, "config must be a JSON object");
  const ordered_json known = to_json(base);
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw Error(Errc::SchemaError, "unknown config key '" + key + "'");
  }
  RunConfig c = base;
  overlay(doc, "d", c.d);
  overlay(doc, "context_len", c.context_len);
  overlay(doc, "pool_size", c.pool_size);
  overlay(doc, "max_state_negs", c.max_state_negs);
  overlay(doc, "max_ident_negs", c.max_ident_negs);
  overlay(doc, "identity_strategy", c.identity_strategy);
  overlay(doc, "easy_strategy", c.easy_strategy);
  overlay(doc, "avoid_immediate_predecessor", c.avoid_immediate_predecessor);
  overlay(doc, "tau", c.tau);
  overlay(doc, "lambda_s", c.lambda_s);
  overlay(doc, "lambda_i", c.lambda_i);
  overlay(doc, "drop_zero_negatives", c.drop_zero_negatives);
  overlay(doc, "lr", c.lr);
  overlay(doc, "weight_decay", c.weight_decay);
  overlay(doc, "beta1", c.beta1);
  overlay(doc, "beta2", c.beta2);
  overlay(doc, "adam_eps", c.adam_eps);
  overlay(doc, "batch_size", c.batch_size);
  overlay(doc, "epochs", c.epochs);
  overlay(doc, "n_heads", c.n_heads);
  overlay(doc, "dropout_rate", c.dropout_rate);
  overlay(doc, "grid_wv", c.grid_wv);
  overlay(doc, "grid_wp", c.grid_wp);
  overlay(doc, "heuristic_alpha", c.heuristic_alpha);
  overlay(doc, "train_frac", c.train_frac);
  overlay(doc, "seed", c.seed);
  overlay(doc, "workers", c.workers);
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), base);
}

std::uint64_t config_hash(const RunConfig& cfg) {
  RunConfig canonical = cfg;
  canonical.workers = 1;  // parallelism never changes outputs
  return stable_hash(dump_config(canonical));
}

}  // namespace cvr::data
