#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "twincount/dataio.hpp"
#include "twincount/image.hpp"
#include "twincount/tensor.hpp"
#include "twincount/twinvae.hpp"

namespace twincount {

enum class RecKind { mse, bce };

struct LossWeights {
  double w_rec_nat = 100.0, w_rec_syn = 100.0;
  double w_regr_nat = 3.0, w_regr_syn = 3.0;
  double w_kld_nat = 2.0, w_kld_syn = 2.0;
  RecKind rec_kind = RecKind::mse;
  // multiplicative per-epoch decay of the reconstruction weight, BCE only
  double bce_decay_rate = 3e-5;

  double w_rec(Domain d) const { return d == Domain::nat ? w_rec_nat : w_rec_syn; }
  double w_regr(Domain d) const { return d == Domain::nat ? w_regr_nat : w_regr_syn; }
  double w_kld(Domain d) const { return d == Domain::nat ? w_kld_nat : w_kld_syn; }
  double effective_w_rec(Domain d, long epoch) const;

  void validate() const;
};

// Scalar op-level losses (means over pixels / closed forms).
double mse_loss(const Image& x, const Image& recon);
double bce_loss(const Image& x, const Image& recon);
// -0.5 * sum(1 + logvar - mu^2 - exp(logvar)) for one latent vector
double kld_loss(const std::vector<double>& mu, const std::vector<double>& logvar);
double regr_loss(double estimate, int label);

// Batch losses; gradients (scaled by `grad_scale`) are written when the
// output pointers are non-null.
template <typename T>
double rec_loss_batch(RecKind kind, const Tensor<T>& x, const Tensor<T>& recon,
                      Tensor<T>* d_recon, double grad_scale);
template <typename T>
double kld_loss_batch(const Tensor<T>& mu, const Tensor<T>& logvar,
                      Tensor<T>* d_mu, Tensor<T>* d_logvar, double grad_scale);
// mean over the batch; unlabeled samples contribute zero
template <typename T>
double regr_loss_batch(const Tensor<T>& estimate,
                       const std::vector<std::optional<int>>& labels,
                       Tensor<T>* d_estimate, double grad_scale);

struct LossReport {
  double total = 0.0;
  double rec_nat = 0.0, rec_syn = 0.0;
  double regr_nat = 0.0, regr_syn = 0.0;
  double kld_nat = 0.0, kld_syn = 0.0;
  long epoch = 0;
};

// One domain's slice of a training step, as seen by the loss.
template <typename T>
struct DomainPass {
  const ForwardOutput<T>* out = nullptr;
  const Tensor<T>* x = nullptr;
  const std::vector<std::optional<int>>* labels = nullptr;
};

// Weighted twin loss across both domains; either pass may be absent.
template <typename T>
LossReport twin_loss(const DomainPass<T>& nat, const DomainPass<T>& syn,
                     const LossWeights& weights, long epoch);

enum class OptKind { adam, radam };

struct OptimizerConfig {
  OptKind kind = OptKind::adam;
  double learning_rate = 1.3e-4;
  double beta1 = 0.9, beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-5;  // decoupled, applied once per epoch
  bool weight_decay_per_step = false;

  void validate() const;
};

// Adam / rectified Adam with decoupled weight decay. Throws DivergenceError
// on non-finite gradients.
template <typename T>
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& cfg, std::vector<nn::Param<T>*> params);

  void step();
  void apply_weight_decay();
  void set_frozen(const nn::Param<T>* param, bool frozen);
  long t() const { return t_; }

  // RAdam rectification term; the momentum-only branch applies while <= 4.
  static double radam_rho(long t, double beta2);

 private:
  OptimizerConfig cfg_;
  std::vector<nn::Param<T>*> params_;
  std::vector<char> frozen_;
  std::vector<std::vector<T>> m_, v_;
  long t_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

struct TrainConfig {
  int batch_size_syn = 128;
  int batch_size_nat = 128;
  long max_epochs = 50000;
  long regressor_start_epoch = 100;
  long early_stop_patience = 2000;
  double early_stop_min_improvement = 1e-4;
  double val_fraction = 0.1;
  uint64_t seed = 0;
  LossWeights weights;
  OptimizerConfig optimizer;
  AugmentConfig augment;
  bool augment_nat = true;
  bool augment_syn = true;
  double max_seconds = 0.0;  // 0 = no wall-clock limit

  // published regimes: MSE + Adam @128 for phase contrast, BCE + RAdam @64
  // for bright field
  static TrainConfig preset_pc();
  static TrainConfig preset_bf();

  void validate() const;
};

struct TrainResult {
  long epochs_run = 0;
  long total_steps = 0;
  long best_epoch = -1;
  double best_val_loss = 0.0;
  std::string checkpoint_path;
  std::string loss_log_path;
  std::vector<LossReport> epoch_reports;
};

// Paired-batch loop over one synthetic and one natural dataset (either may be
// absent for single-branch training). Writes best.ckpt, loss_log.csv and
// train_config.json into out_dir.
TrainResult train(TwinVAE<float>& model, const DatasetManifest* syn_data,
                  const DatasetManifest* nat_data, const TrainConfig& config,
                  const std::string& out_dir);

}  // namespace twincount
