#pragma once
// Every tunable of a pipeline run. Serialized as a flat JSON object whose keys
// match the field names; a config file only needs the keys it overrides.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cvr::data {

std::vector<double> tenths_grid(int first_tenth, int last_tenth);

struct RunConfig {
  std::size_t d = 0;  // 0: take the dimension from the clip store
  std::size_t context_len = 5;
  std::size_t pool_size = 10;
  std::size_t max_state_negs = 3;
  std::size_t max_ident_negs = 3;
  std::string identity_strategy = "caption-knn";
  std::string easy_strategy = "diff-video";
  bool avoid_immediate_predecessor = true;

  double tau = 0.07;
  double lambda_s = 5.0;
  double lambda_i = 1.0;
  bool drop_zero_negatives = false;
  double lr = 1e-4;
  double weight_decay = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 512;
  std::size_t epochs = 30;
  std::size_t n_heads = 8;
  double dropout_rate = 0.1;

  std::vector<double> grid_wv = tenths_grid(0, 5);   // 0.0 .. 0.5
  std::vector<double> grid_wp = tenths_grid(2, 15);  // 0.2 .. 1.5
  double heuristic_alpha = 0.5;

  double train_frac = 0.8;
  std::uint64_t seed = 42;
  std::size_t workers = 1;

  bool operator==(const RunConfig&) const = default;
};

// Throws BadSpec on out-of-range values.
void check_config(const RunConfig& cfg);

std::string dump_config(const RunConfig& cfg);
// Overlays the keys present in `json_text` onto `base`. Unknown keys and
// wrongly typed values raise SchemaError.
RunConfig parse_config(std::string_view json_text, const RunConfig& base = {});
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base = {});
std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace cvr::data
