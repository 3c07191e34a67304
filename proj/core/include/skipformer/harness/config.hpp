#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "skipformer/harness/synthetic.hpp"
#include "skipformer/skipmodel.hpp"

namespace skf::harness {

struct OptimizerConfig {
  double lr = 1e-3;  // peak, reached at the end of warmup
  std::size_t warmup_steps = 500;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-9;
  double grad_clip = 5.0;  // global L2 norm; 0 disables
};

struct TrainingConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::size_t eval_every = 0;  // optimizer steps; 0 evaluates once per epoch
  std::uint64_t seed = 1;
};

enum class DecodeMethod { kGreedy, kRescoring };

struct DecodeConfig {
  DecodeMethod method = DecodeMethod::kGreedy;
  std::size_t beam = 4;
  double ctc_weight = 0.5;
};

struct DataConfig {
  std::filesystem::path train_features;
  std::filesystem::path train_transcripts;
  std::filesystem::path dev_features;  // optional
  std::filesystem::path dev_transcripts;
};

struct RunConfig {
  model::ModelConfig model;
  model::LossWeights loss;
  OptimizerConfig optimizer;
  TrainingConfig training;
  DecodeConfig decode;
  DataConfig data;
  SyntheticSpec synthetic;
  std::filesystem::path out_dir = "run";

  void validate() const;
};

DecodeMethod decode_method_from_string(const std::string& s);
std::string to_string(DecodeMethod m);

// Every section and key is optional; unknown keys are rejected.
RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace skf::harness
