#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "twincount/baseline_cv.hpp"
#include "twincount/dataio.hpp"
#include "twincount/errors.hpp"
#include "twincount/evaluation.hpp"
#include "twincount/hyperopt.hpp"
#include "twincount/json_io.hpp"
#include "twincount/synthgen.hpp"
#include "twincount/training.hpp"
#include "twincount/twinvae.hpp"

namespace tc = twincount;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

// exit codes: 0 success, 1 usage, 2 validation, 3 runtime failure
constexpr int kExitUsage = 1;
constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 3;

// Holds an exclusive lock file inside a run directory.
class RunLock {
 public:
  explicit RunLock(const std::string& dir) : path_(dir + "/.twincount.lock") {
    fs::create_directories(dir);
    if (fs::exists(path_))
      throw tc::IoError("run directory is locked by another writer: " + path_);
    std::ofstream f(path_);
    f << "locked\n";
  }
  ~RunLock() {
    std::error_code ec;
    fs::remove(path_, ec);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::string path_;
};

uint64_t resolve_seed(const std::optional<uint64_t>& flag_seed,
                      const tc::RunConfig& cfg) {
  if (flag_seed) return *flag_seed;
  if (cfg.seed != 0) return cfg.seed;
  if (const char* env = std::getenv("TWINCOUNT_SEED"))
    return std::strtoull(env, nullptr, 10);
  return 0;
}

void write_run_record(const std::string& out_dir, const tc::RunConfig& cfg,
                      uint64_t seed, const std::string& command) {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = cfg;
  j["seed"] = seed;
  j["version"] = kVersion;
  std::ofstream f(out_dir + "/run.json");
  f << j.dump(2) << "\n";
}

tc::RunConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return tc::RunConfig{};
  return tc::load_run_config(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"twincount: twin-VAE cell counting on synthetic and natural-role "
               "microscopy imagery"};
  app.require_subcommand(1);

  std::string config_path, out_dir, data_dir, syn_dir, nat_dir, checkpoint_path;
  std::optional<uint64_t> seed_flag;
  int n_images = 1000;
  std::string style_name = "syn-pc", preset;
  std::optional<long> epochs_flag;
  std::optional<double> channel_scale_flag;
  std::string source_domain = "nat", target_domain = "syn";
  int translate_n = 16;
  std::optional<int> budget_flag;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON run configuration");
    cmd->add_option("--seed", seed_flag, "seed (overrides config and TWINCOUNT_SEED)");
  };

  auto* gen = app.add_subcommand("generate", "generate a synthetic dataset");
  add_common(gen);
  gen->add_option("--style", style_name,
                  "syn-pc | syn-bf | pseudo-nat-pc | pseudo-nat-bf");
  gen->add_option("--n", n_images, "number of images")->check(CLI::PositiveNumber);
  gen->add_option("--out", out_dir, "output directory")->required();

  auto* trn = app.add_subcommand("train", "train the twin model");
  add_common(trn);
  trn->add_option("--preset", preset, "pc | bf (published regimes)");
  trn->add_option("--syn", syn_dir, "synthetic dataset directory");
  trn->add_option("--nat", nat_dir, "natural-role dataset directory");
  trn->add_option("--out", out_dir, "run directory")->required();
  trn->add_option("--epochs", epochs_flag, "override max epochs");
  trn->add_option("--channel-scale", channel_scale_flag, "override channel scale");

  auto* eva = app.add_subcommand("evaluate", "evaluate a checkpoint on a dataset");
  add_common(eva);
  eva->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  eva->add_option("--data", data_dir, "dataset directory")->required();
  eva->add_option("--out", out_dir, "output directory")->required();

  auto* bas = app.add_subcommand("baseline", "watershed baseline grid search");
  add_common(bas);
  bas->add_option("--data", data_dir, "labeled dataset directory")->required();
  bas->add_option("--out", out_dir, "output directory")->required();

  auto* hpo = app.add_subcommand("hpo", "Bayesian hyperparameter search");
  add_common(hpo);
  hpo->add_option("--budget", budget_flag, "number of trials");
  hpo->add_option("--out", out_dir, "output directory")->required();

  auto* xlat = app.add_subcommand("translate", "cross-domain translations");
  add_common(xlat);
  xlat->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  xlat->add_option("--data", data_dir, "dataset directory")->required();
  xlat->add_option("--source-domain", source_domain, "nat | syn");
  xlat->add_option("--target-domain", target_domain, "nat | syn");
  xlat->add_option("--n", translate_n, "number of images to translate");
  xlat->add_option("--out", out_dir, "output directory")->required();

  auto* emb = app.add_subcommand("embed", "export shared-representation latents");
  add_common(emb);
  emb->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  emb->add_option("--data", data_dir, "dataset directory")->required();
  emb->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    tc::RunConfig cfg = load_config_or_default(config_path);
    const uint64_t seed = resolve_seed(seed_flag, cfg);

    if (gen->parsed()) {
      if (gen->count("--style")) cfg.generator = tc::GeneratorConfig::defaults(
          tc::style_from_string(style_name));
      RunLock lock(out_dir);
      const auto manifest = tc::generate_dataset(cfg.generator, n_images, seed, out_dir);
      write_run_record(out_dir, cfg, seed, "generate");
      std::printf("generate: wrote %zu images (style %s) to %s\n",
                  manifest.size(), tc::to_string(cfg.generator.style), out_dir.c_str());
      return 0;
    }

    if (trn->parsed()) {
      if (syn_dir.empty() && nat_dir.empty())
        throw tc::ValidationError("train: need --syn and/or --nat");
      if (!preset.empty()) {
        if (preset == "pc")
          cfg.train = tc::TrainConfig::preset_pc();
        else if (preset == "bf")
          cfg.train = tc::TrainConfig::preset_bf();
        else
          throw tc::ValidationError("unknown preset: " + preset);
      }
      if (epochs_flag) cfg.train.max_epochs = *epochs_flag;
      if (channel_scale_flag) cfg.model.channel_scale = *channel_scale_flag;
      cfg.train.seed = seed;

      std::optional<tc::DatasetManifest> syn_data, nat_data;
      if (!syn_dir.empty()) syn_data = tc::load_dataset(syn_dir);
      if (!nat_dir.empty()) nat_data = tc::load_dataset(nat_dir);

      RunLock lock(out_dir);
      write_run_record(out_dir, cfg, seed, "train");
      tc::TwinVAE<float> model(cfg.model, seed);
      const auto result =
          tc::train(model, syn_data ? &*syn_data : nullptr,
                    nat_data ? &*nat_data : nullptr, cfg.train, out_dir);
      std::printf("train: %ld epochs (%ld steps), best epoch %ld (val loss %.6g), "
                  "checkpoint %s\n",
                  result.epochs_run, result.total_steps, result.best_epoch,
                  result.best_val_loss, result.checkpoint_path.c_str());
      return 0;
    }

    if (eva->parsed()) {
      const auto data = tc::load_dataset(data_dir);
      auto model = tc::load_checkpoint(checkpoint_path);
      RunLock lock(out_dir);
      const auto report = tc::evaluate(*model, data);
      tc::write_metrics_json(report, out_dir + "/metrics.json");
      tc::write_per_count_csv(report, out_dir + "/per_count.csv");
      write_run_record(out_dir, cfg, seed, "evaluate");
      std::printf("evaluate: n=%zu MAE %.4f, MRE %.2f%%, accuracy %.2f%%\n",
                  report.n, report.mae, report.mre * 100.0,
                  report.accuracy * 100.0);
      return 0;
    }

    if (bas->parsed()) {
      const auto data = tc::load_dataset(data_dir);
      RunLock lock(out_dir);
      std::printf("baseline: grid of %zu points over %zu images\n",
                  cfg.grid.total(), data.size());
      const auto result = tc::grid_search(data, cfg.grid);
      tc::write_grid_csv(result, out_dir + "/grid_results.csv");
      tc::write_params_json(result.best, out_dir + "/best_params.json");
      write_run_record(out_dir, cfg, seed, "baseline");
      std::printf("baseline: best MAE %.4f, MRE %.2f%%, accuracy %.2f%%\n",
                  result.best_report.mae, result.best_report.mre * 100.0,
                  result.best_report.accuracy * 100.0);
      return 0;
    }

    if (hpo->parsed()) {
      if (budget_flag) cfg.hpo.budget = *budget_flag;
      RunLock lock(out_dir);
      write_run_record(out_dir, cfg, seed, "hpo");

      // desk-scale trial data, generated once
      auto syn_cfg = tc::GeneratorConfig::defaults(tc::Style::syn_pc);
      auto nat_cfg = tc::GeneratorConfig::defaults(tc::Style::pseudo_nat_pc);
      const std::string trial_dir = out_dir + "/trial_data";
      const auto syn_train = tc::generate_dataset(
          syn_cfg, cfg.hpo.trial_train_images, tc::derive_seed(seed, 1), trial_dir + "/syn");
      const auto nat_train = tc::generate_dataset(
          nat_cfg, cfg.hpo.trial_train_images, tc::derive_seed(seed, 2), trial_dir + "/nat");
      const auto nat_test = tc::generate_dataset(
          nat_cfg, cfg.hpo.trial_test_images, tc::derive_seed(seed, 3), trial_dir + "/nat_test");

      int trial_no = 0;
      auto objective = [&](const std::vector<double>& raw) {
        tc::ModelConfig mc = cfg.model;
        mc.channel_scale = cfg.hpo.channel_scale;
        tc::TrainConfig trc = cfg.train;
        trc.max_epochs = cfg.hpo.trial_max_epochs;
        trc.regressor_start_epoch =
            std::min<long>(trc.regressor_start_epoch, trc.max_epochs / 4);
        trc.seed = tc::derive_seed(seed, 0x7819, trial_no);
        for (size_t i = 0; i < cfg.search_space.dims.size(); ++i) {
          const std::string& name = cfg.search_space.dims[i].name;
          const double v = raw[i];
          if (name == "learning_rate") trc.optimizer.learning_rate = v;
          else if (name == "latent_dim") mc.latent_dim = static_cast<int>(v);
          else if (name == "shared_conv_channels")
            mc.shared_conv_channels = static_cast<int>(v);
          else if (name == "w_rec") trc.weights.w_rec_nat = trc.weights.w_rec_syn = v;
          else if (name == "w_regr") trc.weights.w_regr_nat = trc.weights.w_regr_syn = v;
          else if (name == "w_kld") trc.weights.w_kld_nat = trc.weights.w_kld_syn = v;
          else throw tc::ValidationError("unknown search dimension: " + name);
        }
        const std::string run_dir = out_dir + "/trial_" + std::to_string(trial_no);
        ++trial_no;
        tc::TwinVAE<float> model(mc, trc.seed);
        tc::train(model, &syn_train, &nat_train, trc, run_dir);
        return tc::evaluate(model, nat_test).mae;
      };

      const auto result = tc::run_search(cfg.search_space, cfg.hpo.budget, objective,
                                         seed, out_dir + "/history.jsonl");
      nlohmann::json best;
      best["objective"] = result.best.objective;
      nlohmann::json raw_cfg = nlohmann::json::object();
      for (size_t k = 0; k < cfg.search_space.dims.size(); ++k)
        raw_cfg[cfg.search_space.dims[k].name] = result.best.raw[k];
      best["raw_config"] = raw_cfg;
      std::ofstream bf(out_dir + "/best.json");
      bf << best.dump(2) << "\n";
      std::printf("hpo: %d trials, best objective (nat MAE) %.4f\n",
                  cfg.hpo.budget, result.best.objective);
      return 0;
    }

    if (xlat->parsed()) {
      const auto data = tc::load_dataset(data_dir);
      auto model = tc::load_checkpoint(checkpoint_path);
      RunLock lock(out_dir);
      const tc::Domain src = tc::domain_from_string(source_domain);
      const tc::Domain tgt = tc::domain_from_string(target_domain);
      const int n = std::min<int>(translate_n, static_cast<int>(data.size()));
      for (int i = 0; i < n; ++i) {
        const auto& s = data.samples[i];
        const auto res = tc::translate(*model, s.image, src, tgt);
        const std::string stem = s.id.substr(0, s.id.rfind('.'));
        tc::write_png(res.source, out_dir + "/" + stem + ".src.png");
        tc::write_png(res.translated, out_dir + "/" + stem + ".xlat.png");
      }
      write_run_record(out_dir, cfg, seed, "translate");
      std::printf("translate: wrote %d %s->%s pairs to %s\n", n,
                  source_domain.c_str(), target_domain.c_str(), out_dir.c_str());
      return 0;
    }

    if (emb->parsed()) {
      const auto data = tc::load_dataset(data_dir);
      auto model = tc::load_checkpoint(checkpoint_path);
      RunLock lock(out_dir);
      tc::export_latents(*model, data, out_dir + "/latents.csv");
      write_run_record(out_dir, cfg, seed, "embed");
      std::printf("embed: wrote %zu latent vectors (dim %d) to %s/latents.csv\n",
                  data.size(), model->config().latent_dim, out_dir.c_str());
      return 0;
    }
  } catch (const tc::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
