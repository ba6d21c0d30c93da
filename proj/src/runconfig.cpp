#include "twincount/json_io.hpp"

#include <fstream>
#include <set>
#include <string>

#include "twincount/errors.hpp"

namespace twincount {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed,
                const char* what) {
  if (!j.is_object())
    throw ValidationError(std::string(what) + ": expected a JSON object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ValidationError(std::string(what) + ": unknown key '" + key + "'");
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

// --- ModelConfig -----------------------------------------------------------

void to_json(json& j, const ModelConfig& c) {
  j = json{{"channel_scale", c.channel_scale},
           {"latent_dim", c.latent_dim},
           {"shared_conv_channels", c.shared_conv_channels},
           {"fc_hidden", c.fc_hidden},
           {"dropout_rate", c.dropout_rate},
           {"leaky_slope", c.leaky_slope},
           {"regressor_tap_shared_decoder", c.regressor_tap_shared_decoder}};
}

void from_json(const json& j, ModelConfig& c) {
  check_keys(j,
             {"channel_scale", "latent_dim", "shared_conv_channels", "fc_hidden",
              "dropout_rate", "leaky_slope", "regressor_tap_shared_decoder"},
             "model");
  maybe(j, "channel_scale", c.channel_scale);
  maybe(j, "latent_dim", c.latent_dim);
  maybe(j, "shared_conv_channels", c.shared_conv_channels);
  maybe(j, "fc_hidden", c.fc_hidden);
  maybe(j, "dropout_rate", c.dropout_rate);
  maybe(j, "leaky_slope", c.leaky_slope);
  maybe(j, "regressor_tap_shared_decoder", c.regressor_tap_shared_decoder);
  if (c.channel_scale <= 0) throw ValidationError("channel_scale must be > 0");
  if (c.latent_dim < 2) throw ValidationError("latent_dim must be >= 2");
}

// --- synthgen --------------------------------------------------------------

void to_json(json& j, const CellSpec& c) {
  j = json{{"center_x", c.center_x},
           {"center_y", c.center_y},
           {"radius_a", c.radius_a},
           {"radius_b", c.radius_b},
           {"rotation", c.rotation},
           {"interior_brightness", c.interior_brightness},
           {"membrane_brightness", c.membrane_brightness},
           {"membrane_width", c.membrane_width},
           {"blur_sigma", c.blur_sigma},
           {"deformation_amplitude", c.deformation_amplitude}};
}

void from_json(const json& j, CellSpec& c) {
  check_keys(j,
             {"center_x", "center_y", "radius_a", "radius_b", "rotation",
              "interior_brightness", "membrane_brightness", "membrane_width",
              "blur_sigma", "deformation_amplitude"},
             "cell");
  maybe(j, "center_x", c.center_x);
  maybe(j, "center_y", c.center_y);
  maybe(j, "radius_a", c.radius_a);
  maybe(j, "radius_b", c.radius_b);
  maybe(j, "rotation", c.rotation);
  maybe(j, "interior_brightness", c.interior_brightness);
  maybe(j, "membrane_brightness", c.membrane_brightness);
  maybe(j, "membrane_width", c.membrane_width);
  maybe(j, "blur_sigma", c.blur_sigma);
  maybe(j, "deformation_amplitude", c.deformation_amplitude);
}

void to_json(json& j, const SceneSpec& s) {
  j = json{{"cells", s.cells},
           {"background_id", s.background_id},
           {"background_brightness_scale", s.background_brightness_scale},
           {"noise_amplitude", s.noise_amplitude},
           {"global_blur_sigma", s.global_blur_sigma},
           {"smudges", s.smudges},
           {"seed", s.seed}};
}

void from_json(const json& j, SceneSpec& s) {
  check_keys(j,
             {"cells", "background_id", "background_brightness_scale",
              "noise_amplitude", "global_blur_sigma", "smudges", "seed"},
             "scene");
  maybe(j, "cells", s.cells);
  maybe(j, "background_id", s.background_id);
  maybe(j, "background_brightness_scale", s.background_brightness_scale);
  maybe(j, "noise_amplitude", s.noise_amplitude);
  maybe(j, "global_blur_sigma", s.global_blur_sigma);
  maybe(j, "smudges", s.smudges);
  maybe(j, "seed", s.seed);
}

void to_json(json& j, const GeneratorConfig& c) {
  json dist = json::object();
  for (const auto& [k, p] : c.count_distribution) dist[std::to_string(k)] = p;
  j = json{{"style", to_string(c.style)},
           {"count_distribution", dist},
           {"overlap_policy",
            c.overlap.kind == OverlapPolicy::Kind::forbid ? "forbid" : "allow"},
           {"min_center_distance_factor", c.overlap.min_center_distance_factor},
           {"max_overlap_fraction", c.overlap.max_overlap_fraction},
           {"radius_min", c.radius_min},
           {"radius_max", c.radius_max},
           {"aspect_min", c.aspect_min},
           {"interior_brightness_min", c.interior_brightness_min},
           {"interior_brightness_max", c.interior_brightness_max},
           {"membrane_brightness_min", c.membrane_brightness_min},
           {"membrane_brightness_max", c.membrane_brightness_max},
           {"membrane_width_min", c.membrane_width_min},
           {"membrane_width_max", c.membrane_width_max},
           {"cell_blur_min", c.cell_blur_min},
           {"cell_blur_max", c.cell_blur_max},
           {"deformation_min", c.deformation_min},
           {"deformation_max", c.deformation_max},
           {"global_blur_min", c.global_blur_min},
           {"global_blur_max", c.global_blur_max},
           {"noise_min", c.noise_min},
           {"noise_max", c.noise_max},
           {"background_brightness_scale_min", c.background_brightness_scale_min},
           {"background_brightness_scale_max", c.background_brightness_scale_max},
           {"background_bank_size", c.background_bank_size},
           {"smudges_min", c.smudges_min},
           {"smudges_max", c.smudges_max}};
}

void from_json(const json& j, GeneratorConfig& c) {
  check_keys(j,
             {"style", "count_distribution", "overlap_policy",
              "min_center_distance_factor", "max_overlap_fraction", "radius_min",
              "radius_max", "aspect_min", "interior_brightness_min",
              "interior_brightness_max", "membrane_brightness_min",
              "membrane_brightness_max", "membrane_width_min",
              "membrane_width_max", "cell_blur_min", "cell_blur_max",
              "deformation_min", "deformation_max", "global_blur_min",
              "global_blur_max", "noise_min", "noise_max",
              "background_brightness_scale_min", "background_brightness_scale_max",
              "background_bank_size", "smudges_min", "smudges_max"},
             "generator");
  Style style = Style::syn_pc;
  if (j.contains("style")) style = style_from_string(j.at("style").get<std::string>());
  c = GeneratorConfig::defaults(style);
  if (j.contains("count_distribution")) {
    c.count_distribution.clear();
    for (const auto& [k, p] : j.at("count_distribution").items())
      c.count_distribution[std::stoi(k)] = p.get<double>();
  }
  if (j.contains("overlap_policy")) {
    const std::string kind = j.at("overlap_policy");
    if (kind == "forbid")
      c.overlap.kind = OverlapPolicy::Kind::forbid;
    else if (kind == "allow")
      c.overlap.kind = OverlapPolicy::Kind::allow;
    else
      throw ValidationError("overlap_policy must be 'forbid' or 'allow'");
  }
  maybe(j, "min_center_distance_factor", c.overlap.min_center_distance_factor);
  maybe(j, "max_overlap_fraction", c.overlap.max_overlap_fraction);
  maybe(j, "radius_min", c.radius_min);
  maybe(j, "radius_max", c.radius_max);
  maybe(j, "aspect_min", c.aspect_min);
  maybe(j, "interior_brightness_min", c.interior_brightness_min);
  maybe(j, "interior_brightness_max", c.interior_brightness_max);
  maybe(j, "membrane_brightness_min", c.membrane_brightness_min);
  maybe(j, "membrane_brightness_max", c.membrane_brightness_max);
  maybe(j, "membrane_width_min", c.membrane_width_min);
  maybe(j, "membrane_width_max", c.membrane_width_max);
  maybe(j, "cell_blur_min", c.cell_blur_min);
  maybe(j, "cell_blur_max", c.cell_blur_max);
  maybe(j, "deformation_min", c.deformation_min);
  maybe(j, "deformation_max", c.deformation_max);
  maybe(j, "global_blur_min", c.global_blur_min);
  maybe(j, "global_blur_max", c.global_blur_max);
  maybe(j, "noise_min", c.noise_min);
  maybe(j, "noise_max", c.noise_max);
  maybe(j, "background_brightness_scale_min", c.background_brightness_scale_min);
  maybe(j, "background_brightness_scale_max", c.background_brightness_scale_max);
  maybe(j, "background_bank_size", c.background_bank_size);
  maybe(j, "smudges_min", c.smudges_min);
  maybe(j, "smudges_max", c.smudges_max);
}

// --- dataio ----------------------------------------------------------------

void to_json(json& j, const AugmentConfig& c) {
  j = json{{"hflip_prob", c.hflip_prob},
           {"vflip_prob", c.vflip_prob},
           {"crop_scale", c.crop_scale},
           {"rot90", c.rot90},
           {"noise_amplitude", c.noise_amplitude}};
}

void from_json(const json& j, AugmentConfig& c) {
  check_keys(j, {"hflip_prob", "vflip_prob", "crop_scale", "rot90", "noise_amplitude"},
             "augment");
  maybe(j, "hflip_prob", c.hflip_prob);
  maybe(j, "vflip_prob", c.vflip_prob);
  maybe(j, "crop_scale", c.crop_scale);
  maybe(j, "rot90", c.rot90);
  maybe(j, "noise_amplitude", c.noise_amplitude);
}

// --- training --------------------------------------------------------------

void to_json(json& j, const LossWeights& w) {
  j = json{{"w_rec_nat", w.w_rec_nat},
           {"w_rec_syn", w.w_rec_syn},
           {"w_regr_nat", w.w_regr_nat},
           {"w_regr_syn", w.w_regr_syn},
           {"w_kld_nat", w.w_kld_nat},
           {"w_kld_syn", w.w_kld_syn},
           {"rec_kind", w.rec_kind == RecKind::mse ? "mse" : "bce"},
           {"bce_decay_rate", w.bce_decay_rate}};
}

void from_json(const json& j, LossWeights& w) {
  check_keys(j,
             {"w_rec_nat", "w_rec_syn", "w_regr_nat", "w_regr_syn", "w_kld_nat",
              "w_kld_syn", "rec_kind", "bce_decay_rate"},
             "weights");
  maybe(j, "w_rec_nat", w.w_rec_nat);
  maybe(j, "w_rec_syn", w.w_rec_syn);
  maybe(j, "w_regr_nat", w.w_regr_nat);
  maybe(j, "w_regr_syn", w.w_regr_syn);
  maybe(j, "w_kld_nat", w.w_kld_nat);
  maybe(j, "w_kld_syn", w.w_kld_syn);
  if (j.contains("rec_kind")) {
    const std::string k = j.at("rec_kind");
    if (k == "mse")
      w.rec_kind = RecKind::mse;
    else if (k == "bce")
      w.rec_kind = RecKind::bce;
    else
      throw ValidationError("rec_kind must be 'mse' or 'bce'");
  }
  maybe(j, "bce_decay_rate", w.bce_decay_rate);
}

void to_json(json& j, const OptimizerConfig& c) {
  j = json{{"kind", c.kind == OptKind::adam ? "adam" : "radam"},
           {"learning_rate", c.learning_rate},
           {"beta1", c.beta1},
           {"beta2", c.beta2},
           {"epsilon", c.epsilon},
           {"weight_decay", c.weight_decay},
           {"weight_decay_per_step", c.weight_decay_per_step}};
}

void from_json(const json& j, OptimizerConfig& c) {
  check_keys(j,
             {"kind", "learning_rate", "beta1", "beta2", "epsilon", "weight_decay",
              "weight_decay_per_step"},
             "optimizer");
  if (j.contains("kind")) {
    const std::string k = j.at("kind");
    if (k == "adam")
      c.kind = OptKind::adam;
    else if (k == "radam")
      c.kind = OptKind::radam;
    else
      throw ValidationError("optimizer kind must be 'adam' or 'radam'");
  }
  maybe(j, "learning_rate", c.learning_rate);
  maybe(j, "beta1", c.beta1);
  maybe(j, "beta2", c.beta2);
  maybe(j, "epsilon", c.epsilon);
  maybe(j, "weight_decay", c.weight_decay);
  maybe(j, "weight_decay_per_step", c.weight_decay_per_step);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"batch_size_syn", c.batch_size_syn},
           {"batch_size_nat", c.batch_size_nat},
           {"max_epochs", c.max_epochs},
           {"regressor_start_epoch", c.regressor_start_epoch},
           {"early_stop_patience", c.early_stop_patience},
           {"early_stop_min_improvement", c.early_stop_min_improvement},
           {"val_fraction", c.val_fraction},
           {"seed", c.seed},
           {"weights", c.weights},
           {"optimizer", c.optimizer},
           {"augment", c.augment},
           {"augment_nat", c.augment_nat},
           {"augment_syn", c.augment_syn},
           {"max_seconds", c.max_seconds}};
}

void from_json(const json& j, TrainConfig& c) {
  check_keys(j,
             {"batch_size_syn", "batch_size_nat", "max_epochs",
              "regressor_start_epoch", "early_stop_patience",
              "early_stop_min_improvement", "val_fraction", "seed", "weights",
              "optimizer", "augment", "augment_nat", "augment_syn", "max_seconds"},
             "train");
  maybe(j, "batch_size_syn", c.batch_size_syn);
  maybe(j, "batch_size_nat", c.batch_size_nat);
  maybe(j, "max_epochs", c.max_epochs);
  maybe(j, "regressor_start_epoch", c.regressor_start_epoch);
  maybe(j, "early_stop_patience", c.early_stop_patience);
  maybe(j, "early_stop_min_improvement", c.early_stop_min_improvement);
  maybe(j, "val_fraction", c.val_fraction);
  maybe(j, "seed", c.seed);
  maybe(j, "weights", c.weights);
  maybe(j, "optimizer", c.optimizer);
  maybe(j, "augment", c.augment);
  maybe(j, "augment_nat", c.augment_nat);
  maybe(j, "augment_syn", c.augment_syn);
  maybe(j, "max_seconds", c.max_seconds);
}

// --- baseline_cv -----------------------------------------------------------

void to_json(json& j, const WatershedParams& p) {
  j = json{{"crop_margin", p.crop_margin},
           {"blur_kernel", p.blur_kernel},
           {"threshold", p.threshold},
           {"polarity", to_string(p.polarity)},
           {"distance_peak_min", p.distance_peak_min},
           {"min_region_area", p.min_region_area}};
}

void from_json(const json& j, WatershedParams& p) {
  check_keys(j,
             {"crop_margin", "blur_kernel", "threshold", "polarity",
              "distance_peak_min", "min_region_area"},
             "watershed");
  maybe(j, "crop_margin", p.crop_margin);
  maybe(j, "blur_kernel", p.blur_kernel);
  maybe(j, "threshold", p.threshold);
  if (j.contains("polarity"))
    p.polarity = polarity_from_string(j.at("polarity").get<std::string>());
  maybe(j, "distance_peak_min", p.distance_peak_min);
  maybe(j, "min_region_area", p.min_region_area);
}

void to_json(json& j, const GridSpec& g) {
  std::vector<std::string> pol;
  for (auto p : g.polarity) pol.push_back(to_string(p));
  j = json{{"crop_margin", g.crop_margin},
           {"blur_kernel", g.blur_kernel},
           {"threshold", g.threshold},
           {"polarity", pol},
           {"distance_peak_min", g.distance_peak_min},
           {"min_region_area", g.min_region_area}};
}

void from_json(const json& j, GridSpec& g) {
  check_keys(j,
             {"crop_margin", "blur_kernel", "threshold", "polarity",
              "distance_peak_min", "min_region_area"},
             "grid");
  maybe(j, "crop_margin", g.crop_margin);
  maybe(j, "blur_kernel", g.blur_kernel);
  maybe(j, "threshold", g.threshold);
  if (j.contains("polarity")) {
    g.polarity.clear();
    for (const auto& p : j.at("polarity"))
      g.polarity.push_back(polarity_from_string(p.get<std::string>()));
  }
  maybe(j, "distance_peak_min", g.distance_peak_min);
  maybe(j, "min_region_area", g.min_region_area);
}

// --- hyperopt --------------------------------------------------------------

void to_json(json& j, const Dimension& d) {
  j = json{{"name", d.name},
           {"lower", d.lower},
           {"upper", d.upper},
           {"log_scale", d.log_scale},
           {"integer", d.integer}};
}

void from_json(const json& j, Dimension& d) {
  check_keys(j, {"name", "lower", "upper", "log_scale", "integer"}, "dimension");
  maybe(j, "name", d.name);
  maybe(j, "lower", d.lower);
  maybe(j, "upper", d.upper);
  maybe(j, "log_scale", d.log_scale);
  maybe(j, "integer", d.integer);
}

void to_json(json& j, const SearchSpace& s) { j = json{{"dims", s.dims}}; }

void from_json(const json& j, SearchSpace& s) {
  check_keys(j, {"dims"}, "search_space");
  maybe(j, "dims", s.dims);
}

void to_json(json& j, const HpoConfig& c) {
  j = json{{"budget", c.budget},
           {"trial_train_images", c.trial_train_images},
           {"trial_test_images", c.trial_test_images},
           {"trial_max_epochs", c.trial_max_epochs},
           {"channel_scale", c.channel_scale}};
}

void from_json(const json& j, HpoConfig& c) {
  check_keys(j,
             {"budget", "trial_train_images", "trial_test_images",
              "trial_max_epochs", "channel_scale"},
             "hpo");
  maybe(j, "budget", c.budget);
  maybe(j, "trial_train_images", c.trial_train_images);
  maybe(j, "trial_test_images", c.trial_test_images);
  maybe(j, "trial_max_epochs", c.trial_max_epochs);
  maybe(j, "channel_scale", c.channel_scale);
}

// --- run config ------------------------------------------------------------

void to_json(json& j, const RunConfig& c) {
  j = json{{"generator", c.generator}, {"model", c.model},
           {"train", c.train},         {"grid", c.grid},
           {"search_space", c.search_space}, {"hpo", c.hpo},
           {"seed", c.seed}};
}

void from_json(const json& j, RunConfig& c) {
  check_keys(j, {"generator", "model", "train", "grid", "search_space", "hpo", "seed"},
             "config");
  maybe(j, "generator", c.generator);
  maybe(j, "model", c.model);
  maybe(j, "train", c.train);
  maybe(j, "grid", c.grid);
  maybe(j, "search_space", c.search_space);
  maybe(j, "hpo", c.hpo);
  maybe(j, "seed", c.seed);
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw ValidationError("malformed JSON in " + path + ": " + e.what());
  }
  try {
    return j.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ValidationError("invalid config in " + path + ": " + e.what());
  }
}

}  // namespace twincount
