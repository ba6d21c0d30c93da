#include "twincount/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"
#include "twincount/json_io.hpp"

namespace twincount {

double LossWeights::effective_w_rec(Domain d, long epoch) const {
  const double base = w_rec(d);
  if (rec_kind != RecKind::bce) return base;
  return base * std::pow(1.0 - bce_decay_rate, static_cast<double>(epoch));
}

void LossWeights::validate() const {
  for (double w : {w_rec_nat, w_rec_syn, w_regr_nat, w_regr_syn, w_kld_nat, w_kld_syn})
    if (w < 0) throw ValidationError("loss weights must be non-negative");
  if (bce_decay_rate < 0 || bce_decay_rate >= 1)
    throw ValidationError("bce_decay_rate must lie in [0,1)");
}

// ---------------------------------------------------------------------------
// scalar op-level losses

double mse_loss(const Image& x, const Image& recon) {
  if (x.width != recon.width || x.height != recon.height)
    throw ValidationError("mse_loss: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(recon.pixels[i]) - x.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(x.size());
}

double bce_loss(const Image& x, const Image& recon) {
  if (x.width != recon.width || x.height != recon.height)
    throw ValidationError("bce_loss: shape mismatch");
  constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
  double acc = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double t = x.pixels[i];
    const double r = std::clamp(static_cast<double>(recon.pixels[i]), kLo, kHi);
    acc += -(t * std::log(r) + (1.0 - t) * std::log(1.0 - r));
  }
  return acc / static_cast<double>(x.size());
}

double kld_loss(const std::vector<double>& mu, const std::vector<double>& logvar) {
  if (mu.size() != logvar.size())
    throw ValidationError("kld_loss: length mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < mu.size(); ++i)
    acc += 1.0 + logvar[i] - mu[i] * mu[i] - std::exp(logvar[i]);
  return -0.5 * acc;
}

double regr_loss(double estimate, int label) {
  const double d = estimate - label;
  return d * d;
}

// ---------------------------------------------------------------------------
// batch losses with gradients

template <typename T>
double rec_loss_batch(RecKind kind, const Tensor<T>& x, const Tensor<T>& recon,
                      Tensor<T>* d_recon, double grad_scale) {
  if (x.data.size() != recon.data.size())
    throw ValidationError("rec_loss_batch: shape mismatch");
  const double inv = 1.0 / static_cast<double>(x.data.size());
  if (d_recon) d_recon->resize(recon.n, recon.c, recon.h, recon.w);
  double acc = 0.0;
  if (kind == RecKind::mse) {
    for (size_t i = 0; i < x.data.size(); ++i) {
      const double d = static_cast<double>(recon.data[i]) - x.data[i];
      acc += d * d;
      if (d_recon) d_recon->data[i] = static_cast<T>(grad_scale * 2.0 * d * inv);
    }
  } else {
    constexpr double kLo = 1e-7, kHi = 1.0 - 1e-7;
    for (size_t i = 0; i < x.data.size(); ++i) {
      const double t = x.data[i];
      const double raw = recon.data[i];
      const double r = std::clamp(raw, kLo, kHi);
      acc += -(t * std::log(r) + (1.0 - t) * std::log(1.0 - r));
      if (d_recon) {
        const double g = (raw > kLo && raw < kHi)
                             ? (r - t) / (r * (1.0 - r))
                             : 0.0;  // clamp region: flat
        d_recon->data[i] = static_cast<T>(grad_scale * g * inv);
      }
    }
  }
  return acc * inv;
}

template <typename T>
double kld_loss_batch(const Tensor<T>& mu, const Tensor<T>& logvar,
                      Tensor<T>* d_mu, Tensor<T>* d_logvar, double grad_scale) {
  const double inv_n = 1.0 / static_cast<double>(mu.n);
  if (d_mu) d_mu->resize(mu.n, mu.c, 1, 1);
  if (d_logvar) d_logvar->resize(mu.n, mu.c, 1, 1);
  double acc = 0.0;
  for (size_t i = 0; i < mu.data.size(); ++i) {
    const double m = mu.data[i];
    const double lv = logvar.data[i];
    acc += 1.0 + lv - m * m - std::exp(lv);
    if (d_mu) d_mu->data[i] = static_cast<T>(grad_scale * m * inv_n);
    if (d_logvar)
      d_logvar->data[i] =
          static_cast<T>(grad_scale * (-0.5) * (1.0 - std::exp(lv)) * inv_n);
  }
  return -0.5 * acc * inv_n;
}

template <typename T>
double regr_loss_batch(const Tensor<T>& estimate,
                       const std::vector<std::optional<int>>& labels,
                       Tensor<T>* d_estimate, double grad_scale) {
  if (static_cast<size_t>(estimate.n) != labels.size())
    throw ValidationError("regr_loss_batch: labels/estimates mismatch");
  const double inv = 1.0 / static_cast<double>(estimate.n);
  if (d_estimate) d_estimate->resize(estimate.n, 1, 1, 1);
  double acc = 0.0;
  for (int i = 0; i < estimate.n; ++i) {
    if (!labels[i].has_value()) {
      if (d_estimate) d_estimate->data[i] = T(0);
      continue;
    }
    const double d = static_cast<double>(estimate.data[i]) - *labels[i];
    acc += d * d;
    if (d_estimate) d_estimate->data[i] = static_cast<T>(grad_scale * 2.0 * d * inv);
  }
  return acc * inv;
}

template double rec_loss_batch<float>(RecKind, const Tensor<float>&,
                                      const Tensor<float>&, Tensor<float>*, double);
template double rec_loss_batch<double>(RecKind, const Tensor<double>&,
                                       const Tensor<double>&, Tensor<double>*, double);
template double kld_loss_batch<float>(const Tensor<float>&, const Tensor<float>&,
                                      Tensor<float>*, Tensor<float>*, double);
template double kld_loss_batch<double>(const Tensor<double>&, const Tensor<double>&,
                                       Tensor<double>*, Tensor<double>*, double);
template double regr_loss_batch<float>(const Tensor<float>&,
                                       const std::vector<std::optional<int>>&,
                                       Tensor<float>*, double);
template double regr_loss_batch<double>(const Tensor<double>&,
                                        const std::vector<std::optional<int>>&,
                                        Tensor<double>*, double);

template <typename T>
LossReport twin_loss(const DomainPass<T>& nat, const DomainPass<T>& syn,
                     const LossWeights& weights, long epoch) {
  LossReport rep;
  rep.epoch = epoch;
  auto side = [&](const DomainPass<T>& pass, Domain d, double& rec, double& regr,
                  double& kld) {
    if (!pass.out) return;
    rec = rec_loss_batch<T>(weights.rec_kind, *pass.x, pass.out->recon, nullptr, 0);
    kld = kld_loss_batch<T>(pass.out->mu, pass.out->logvar, nullptr, nullptr, 0);
    regr = regr_loss_batch<T>(pass.out->estimate, *pass.labels, nullptr, 0);
    rep.total += weights.effective_w_rec(d, epoch) * rec +
                 weights.w_regr(d) * regr + weights.w_kld(d) * kld;
  };
  side(nat, Domain::nat, rep.rec_nat, rep.regr_nat, rep.kld_nat);
  side(syn, Domain::syn, rep.rec_syn, rep.regr_syn, rep.kld_syn);
  return rep;
}

template LossReport twin_loss<float>(const DomainPass<float>&,
                                     const DomainPass<float>&, const LossWeights&,
                                     long);
template LossReport twin_loss<double>(const DomainPass<double>&,
                                      const DomainPass<double>&, const LossWeights&,
                                      long);

// ---------------------------------------------------------------------------
// optimizers

void OptimizerConfig::validate() const {
  if (learning_rate <= 0) throw ValidationError("learning_rate must be positive");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ValidationError("betas must lie in [0,1)");
  if (epsilon <= 0) throw ValidationError("epsilon must be positive");
  if (weight_decay < 0) throw ValidationError("weight_decay must be non-negative");
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& cfg, std::vector<nn::Param<T>*> params)
    : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  frozen_.assign(params_.size(), 0);
  m_.resize(params_.size());
  v_.resize(params_.size());
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i].assign(params_[i]->size(), T(0));
    v_[i].assign(params_[i]->size(), T(0));
  }
}

template <typename T>
void Optimizer<T>::set_frozen(const nn::Param<T>* param, bool frozen) {
  for (size_t i = 0; i < params_.size(); ++i)
    if (params_[i] == param) frozen_[i] = frozen ? 1 : 0;
}

template <typename T>
double Optimizer<T>::radam_rho(long t, double beta2) {
  const double rho_inf = 2.0 / (1.0 - beta2) - 1.0;
  const double b2t = std::pow(beta2, static_cast<double>(t));
  return rho_inf - 2.0 * static_cast<double>(t) * b2t / (1.0 - b2t);
}

template <typename T>
void Optimizer<T>::step() {
  ++t_;
  const double b1 = cfg_.beta1, b2 = cfg_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  const double lr = cfg_.learning_rate;

  double rect = 0.0;
  bool rectified = false;
  if (cfg_.kind == OptKind::radam) {
    const double rho_inf = 2.0 / (1.0 - b2) - 1.0;
    const double rho_t = radam_rho(t_, b2);
    if (rho_t > 4.0) {
      rectified = true;
      rect = std::sqrt(((rho_t - 4.0) * (rho_t - 2.0) * rho_inf) /
                       ((rho_inf - 4.0) * (rho_inf - 2.0) * rho_t));
    }
  }

  for (size_t p = 0; p < params_.size(); ++p) {
    if (frozen_[p]) continue;
    auto& param = *params_[p];
    auto& m = m_[p];
    auto& v = v_[p];
    for (size_t i = 0; i < param.size(); ++i) {
      const double g = param.grad[i];
      if (!std::isfinite(g))
        throw DivergenceError("non-finite gradient in " + param.name);
      const double mi = b1 * m[i] + (1.0 - b1) * g;
      const double vi = b2 * v[i] + (1.0 - b2) * g * g;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / bc1;
      double update;
      if (cfg_.kind == OptKind::adam) {
        update = lr * mhat / (std::sqrt(vi / bc2) + cfg_.epsilon);
      } else if (rectified) {
        update = lr * rect * mhat / (std::sqrt(vi / bc2) + cfg_.epsilon);
      } else {
        update = lr * mhat;  // momentum-only branch while rho_t <= 4
      }
      param.value[i] = static_cast<T>(param.value[i] - update);
    }
  }
}

template <typename T>
void Optimizer<T>::apply_weight_decay() {
  if (cfg_.weight_decay <= 0) return;
  const double keep = 1.0 - cfg_.weight_decay;
  for (size_t p = 0; p < params_.size(); ++p) {
    if (frozen_[p]) continue;
    for (auto& w : params_[p]->value) w = static_cast<T>(w * keep);
  }
}

template class Optimizer<float>;
template class Optimizer<double>;

// ---------------------------------------------------------------------------
// training loop

TrainConfig TrainConfig::preset_pc() {
  TrainConfig cfg;
  cfg.batch_size_syn = 128;
  cfg.batch_size_nat = 128;
  cfg.weights.rec_kind = RecKind::mse;
  cfg.optimizer.kind = OptKind::adam;
  return cfg;
}

TrainConfig TrainConfig::preset_bf() {
  TrainConfig cfg;
  cfg.batch_size_syn = 64;
  cfg.batch_size_nat = 64;
  cfg.weights.rec_kind = RecKind::bce;
  cfg.optimizer.kind = OptKind::radam;
  return cfg;
}

void TrainConfig::validate() const {
  if (batch_size_syn < 1 || batch_size_nat < 1)
    throw ValidationError("batch sizes must be >= 1");
  if (max_epochs < 1) throw ValidationError("max_epochs must be >= 1");
  if (regressor_start_epoch < 0 || regressor_start_epoch > max_epochs)
    throw ValidationError("regressor_start_epoch must lie in [0, max_epochs]");
  if (early_stop_patience < 1) throw ValidationError("patience must be >= 1");
  if (early_stop_min_improvement < 0)
    throw ValidationError("min improvement must be >= 0");
  if (val_fraction < 0 || val_fraction >= 1)
    throw ValidationError("val_fraction must lie in [0,1)");
  weights.validate();
  optimizer.validate();
  augment.validate();
}

namespace {

struct DomainData {
  Domain domain;
  DatasetManifest train, val;
  int batch_size = 0;
  bool augment = false;
};

DomainData split_domain(const DatasetManifest& data, Domain domain, int batch_size,
                        bool augment, double val_fraction, uint64_t seed) {
  DomainData dd;
  dd.domain = domain;
  dd.batch_size = batch_size;
  dd.augment = augment;
  std::vector<size_t> order(data.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, 0x59717, static_cast<uint64_t>(domain)));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_int(0, static_cast<int>(i) - 1)]);
  const size_t n_val = static_cast<size_t>(std::lround(val_fraction * data.size()));
  if (n_val >= data.size())
    throw ValidationError("validation split leaves no training data");
  dd.train.dir = data.dir;
  dd.val.dir = data.dir;
  for (size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? dd.val : dd.train).samples.push_back(data.samples[order[i]]);
  }
  return dd;
}

// Forward + loss for one domain batch; backpropagates when training.
void run_domain_pass(TwinVAE<float>& model, const Batch& batch,
                     const LossWeights& weights, long epoch, bool regr_active,
                     uint64_t seed, nn::Mode mode, bool do_backward,
                     LossReport& rep) {
  const Domain d = batch.domain;
  const auto out = model.forward(batch.images, d, mode, seed);

  const double w_rec_eff = weights.effective_w_rec(d, epoch);
  const double w_regr = regr_active ? weights.w_regr(d) : 0.0;
  const double w_kld = weights.w_kld(d);

  Tensor<float> d_recon, d_est, d_mu, d_logvar;
  const double rec =
      rec_loss_batch(weights.rec_kind, batch.images, out.recon,
                     do_backward ? &d_recon : nullptr, w_rec_eff);
  const double kld =
      kld_loss_batch(out.mu, out.logvar, do_backward ? &d_mu : nullptr,
                     do_backward ? &d_logvar : nullptr, w_kld);
  const double regr = regr_loss_batch(
      out.estimate, batch.labels,
      (do_backward && w_regr > 0) ? &d_est : nullptr, w_regr);

  if (do_backward) model.backward(d_recon, d_est, d_mu, d_logvar, out, d, mode);

  (d == Domain::nat ? rep.rec_nat : rep.rec_syn) += rec;
  (d == Domain::nat ? rep.kld_nat : rep.kld_syn) += kld;
  (d == Domain::nat ? rep.regr_nat : rep.regr_syn) += regr;
  rep.total += w_rec_eff * rec + w_regr * regr + w_kld * kld;
}

struct Snapshot {
  std::vector<std::vector<float>> values;
  std::vector<float> bn_mean, bn_var;

  void capture(TwinVAE<float>& model) {
    values.clear();
    for (auto* p : model.params()) values.push_back(p->value);
    bn_mean = model.bn_running_mean();
    bn_var = model.bn_running_var();
  }
  void restore(TwinVAE<float>& model) const {
    auto ps = model.params();
    for (size_t i = 0; i < ps.size(); ++i) ps[i]->value = values[i];
    model.bn_running_mean() = bn_mean;
    model.bn_running_var() = bn_var;
  }
  bool empty() const { return values.empty(); }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

TrainResult train(TwinVAE<float>& model, const DatasetManifest* syn_data,
                  const DatasetManifest* nat_data, const TrainConfig& config,
                  const std::string& out_dir) {
  config.validate();
  if (!syn_data && !nat_data)
    throw ValidationError("train: need at least one dataset");
  if (syn_data && syn_data->empty())
    throw ValidationError("train: synthetic dataset is empty");
  if (nat_data && nat_data->empty())
    throw ValidationError("train: natural dataset is empty");
  std::filesystem::create_directories(out_dir);

  std::optional<DomainData> dd_syn, dd_nat;
  if (syn_data)
    dd_syn = split_domain(*syn_data, Domain::syn, config.batch_size_syn,
                          config.augment_syn, config.val_fraction, config.seed);
  if (nat_data)
    dd_nat = split_domain(*nat_data, Domain::nat, config.batch_size_nat,
                          config.augment_nat, config.val_fraction, config.seed);

  // one epoch = one pass over the synthetic set when present
  DomainData* primary = dd_syn ? &*dd_syn : &*dd_nat;
  DomainData* secondary = (dd_syn && dd_nat) ? &*dd_nat : nullptr;

  {
    nlohmann::json j = config;
    std::ofstream f(out_dir + "/train_config.json");
    f << j.dump(2) << "\n";
  }

  Optimizer<float> opt(config.optimizer, model.params());
  const auto regr_params = model.regressor_params();
  bool regr_active = config.regressor_start_epoch <= 0;
  for (auto* p : regr_params) opt.set_frozen(p, !regr_active);

  const std::string log_path = out_dir + "/loss_log.csv";
  std::ofstream log(log_path, std::ios::trunc);
  log << "epoch,total,rec_nat,rec_syn,regr_nat,regr_syn,kld_nat,kld_syn,lr,"
         "w_rec_eff\n";

  TrainResult result;
  result.loss_log_path = log_path;
  result.checkpoint_path = out_dir + "/best.ckpt";

  Snapshot best;
  double best_val = std::numeric_limits<double>::infinity();
  long best_epoch = -1;

  std::vector<Batch> sec_batches;
  size_t sec_pos = 0;
  uint64_t sec_refill = 0;

  const bool has_val = !primary->val.empty() || (secondary && !secondary->val.empty());
  const auto t_start = std::chrono::steady_clock::now();

  long epoch = 0;
  for (; epoch < config.max_epochs; ++epoch) {
    if (!regr_active && epoch >= config.regressor_start_epoch) {
      regr_active = true;
      for (auto* p : regr_params) opt.set_frozen(p, false);
    }
    const uint64_t epoch_seed = derive_seed(config.seed, 0xE70C, epoch);
    Rng shuffle_rng(derive_seed(epoch_seed, 0x051));
    auto batches = make_batches(primary->train, primary->batch_size, shuffle_rng,
                                primary->augment ? &config.augment : nullptr);

    LossReport epoch_sum;
    epoch_sum.epoch = epoch;
    for (size_t step = 0; step < batches.size(); ++step) {
      const uint64_t step_seed = derive_seed(epoch_seed, 0x57E9, step);
      model.zero_grad();
      LossReport rep;
      rep.epoch = epoch;
      run_domain_pass(model, batches[step], config.weights, epoch, regr_active,
                      step_seed, nn::Mode::train, true, rep);
      if (secondary) {
        if (sec_pos >= sec_batches.size()) {
          Rng r2(derive_seed(config.seed, 0x5EC0, sec_refill++));
          sec_batches = make_batches(secondary->train, secondary->batch_size, r2,
                                     secondary->augment ? &config.augment : nullptr);
          sec_pos = 0;
        }
        run_domain_pass(model, sec_batches[sec_pos++], config.weights, epoch,
                        regr_active, step_seed, nn::Mode::train, true, rep);
      }
      if (!std::isfinite(rep.total))
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) +
                              ", step " + std::to_string(step) + ": total loss " +
                              std::to_string(rep.total));
      opt.step();
      if (config.optimizer.weight_decay_per_step) opt.apply_weight_decay();
      ++result.total_steps;

      epoch_sum.total += rep.total;
      epoch_sum.rec_nat += rep.rec_nat;
      epoch_sum.rec_syn += rep.rec_syn;
      epoch_sum.regr_nat += rep.regr_nat;
      epoch_sum.regr_syn += rep.regr_syn;
      epoch_sum.kld_nat += rep.kld_nat;
      epoch_sum.kld_syn += rep.kld_syn;
    }
    if (!config.optimizer.weight_decay_per_step) opt.apply_weight_decay();

    const double inv_steps = 1.0 / static_cast<double>(batches.size());
    LossReport mean = epoch_sum;
    mean.total *= inv_steps;
    mean.rec_nat *= inv_steps;
    mean.rec_syn *= inv_steps;
    mean.regr_nat *= inv_steps;
    mean.regr_syn *= inv_steps;
    mean.kld_nat *= inv_steps;
    mean.kld_syn *= inv_steps;
    result.epoch_reports.push_back(mean);

    // validation in eval mode (z = mu, dropout off, running batch stats)
    double val_total = mean.total;
    if (has_val) {
      LossReport vrep;
      vrep.epoch = epoch;
      int vbatches = 0;
      for (DomainData* dd : {primary, secondary}) {
        if (!dd || dd->val.empty()) continue;
        Rng vr(derive_seed(config.seed, 0x7A1, static_cast<uint64_t>(dd->domain)));
        for (auto& vb : make_batches(dd->val, dd->batch_size, vr, nullptr)) {
          run_domain_pass(model, vb, config.weights, epoch, regr_active,
                          derive_seed(epoch_seed, 0x7A17E), nn::Mode::eval, false,
                          vrep);
          ++vbatches;
        }
      }
      val_total = vrep.total / std::max(1, vbatches);
    }

    const double w_rec_eff = config.weights.effective_w_rec(
        secondary || !dd_syn ? Domain::nat : Domain::syn, epoch);
    log << epoch << ',' << fmt(mean.total) << ',' << fmt(mean.rec_nat) << ','
        << fmt(mean.rec_syn) << ',' << fmt(mean.regr_nat) << ','
        << fmt(mean.regr_syn) << ',' << fmt(mean.kld_nat) << ','
        << fmt(mean.kld_syn) << ',' << fmt(config.optimizer.learning_rate) << ','
        << fmt(w_rec_eff) << "\n";
    log.flush();

    if (best_epoch < 0 || val_total < best_val - config.early_stop_min_improvement) {
      best_val = val_total;
      best_epoch = epoch;
      best.capture(model);
    }
    if (has_val && epoch - best_epoch >= config.early_stop_patience) {
      ++epoch;
      break;
    }
    if (config.max_seconds > 0) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
              .count();
      if (elapsed > config.max_seconds) {
        ++epoch;
        break;
      }
    }
  }

  result.epochs_run = epoch;
  result.best_epoch = best_epoch;
  result.best_val_loss = best_val;
  if (!best.empty()) best.restore(model);
  save_checkpoint(model, result.checkpoint_path,
                  {config.seed, static_cast<uint64_t>(best_epoch),
                   static_cast<uint64_t>(epoch), 0});
  return result;
}

}  // namespace twincount
