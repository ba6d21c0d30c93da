#pragma once

#include <nlohmann/json.hpp>

#include "twincount/baseline_cv.hpp"
#include "twincount/dataio.hpp"
#include "twincount/hyperopt.hpp"
#include "twincount/synthgen.hpp"
#include "twincount/training.hpp"
#include "twincount/twinvae.hpp"

namespace twincount {

// Strict JSON bindings: unknown keys are rejected, missing keys keep their
// defaults. Used by the CLI config file, checkpoints and scenes.json.

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const CellSpec& c);
void from_json(const nlohmann::json& j, CellSpec& c);
void to_json(nlohmann::json& j, const SceneSpec& s);
void from_json(const nlohmann::json& j, SceneSpec& s);
void to_json(nlohmann::json& j, const GeneratorConfig& c);
void from_json(const nlohmann::json& j, GeneratorConfig& c);

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const OptimizerConfig& c);
void from_json(const nlohmann::json& j, OptimizerConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

void to_json(nlohmann::json& j, const WatershedParams& p);
void from_json(const nlohmann::json& j, WatershedParams& p);
void to_json(nlohmann::json& j, const GridSpec& g);
void from_json(const nlohmann::json& j, GridSpec& g);

void to_json(nlohmann::json& j, const Dimension& d);
void from_json(const nlohmann::json& j, Dimension& d);
void to_json(nlohmann::json& j, const SearchSpace& s);
void from_json(const nlohmann::json& j, SearchSpace& s);

// Desk-scale truncation settings for hyperparameter search trials.
struct HpoConfig {
  int budget = 20;
  int trial_train_images = 400;
  int trial_test_images = 100;
  long trial_max_epochs = 120;
  double channel_scale = 0.25;
};
void to_json(nlohmann::json& j, const HpoConfig& c);
void from_json(const nlohmann::json& j, HpoConfig& c);

// Composite configuration consumed by the CLI; flags override fields.
struct RunConfig {
  GeneratorConfig generator = GeneratorConfig::defaults(Style::syn_pc);
  ModelConfig model;
  TrainConfig train;
  GridSpec grid;
  SearchSpace search_space = SearchSpace::default_space();
  HpoConfig hpo;
  uint64_t seed = 0;
};
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::string& path);

}  // namespace twincount
