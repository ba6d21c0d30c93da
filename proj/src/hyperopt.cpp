#include "twincount/hyperopt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"

namespace twincount {

namespace {

constexpr double kJitterFloor = 1e-8;

// Cholesky of a symmetric positive definite matrix (row-major, n x n).
// Returns false if a pivot fails.
bool cholesky(std::vector<double>& a, int n) {
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[static_cast<size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        sum -= a[static_cast<size_t>(i) * n + k] * a[static_cast<size_t>(j) * n + k];
      if (i == j) {
        if (sum <= 0.0) return false;
        a[static_cast<size_t>(i) * n + j] = std::sqrt(sum);
      } else {
        a[static_cast<size_t>(i) * n + j] = sum / a[static_cast<size_t>(j) * n + j];
      }
    }
    for (int j = i + 1; j < n; ++j) a[static_cast<size_t>(i) * n + j] = 0.0;
  }
  return true;
}

void solve_lower(const std::vector<double>& l, int n, std::vector<double>& b) {
  for (int i = 0; i < n; ++i) {
    double sum = b[i];
    for (int k = 0; k < i; ++k) sum -= l[static_cast<size_t>(i) * n + k] * b[k];
    b[i] = sum / l[static_cast<size_t>(i) * n + i];
  }
}

void solve_upper_t(const std::vector<double>& l, int n, std::vector<double>& b) {
  for (int i = n - 1; i >= 0; --i) {
    double sum = b[i];
    for (int k = i + 1; k < n; ++k) sum -= l[static_cast<size_t>(k) * n + i] * b[k];
    b[i] = sum / l[static_cast<size_t>(i) * n + i];
  }
}

double norm_pdf(double u) { return std::exp(-0.5 * u * u) * 0.3989422804014326779; }
double norm_cdf(double u) { return 0.5 * std::erfc(-u * 0.7071067811865475244); }

double halton(uint64_t index, int base) {
  double f = 1.0, r = 0.0;
  while (index > 0) {
    f /= base;
    r += f * (index % base);
    index /= base;
  }
  return r;
}

struct GPHyper {
  std::vector<double> log_ls;
  double log_sf2 = 0.0;
  double log_sn2 = std::log(kJitterFloor);
};

double lml_for(const std::vector<std::vector<double>>& x,
               const std::vector<double>& y, const GPHyper& hp) {
  const int n = static_cast<int>(x.size());
  const int d = static_cast<int>(x[0].size());
  const double sf2 = std::exp(hp.log_sf2);
  const double sn2 = std::exp(hp.log_sn2);
  std::vector<double> k(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      double q = 0.0;
      for (int t = 0; t < d; ++t) {
        const double diff = (x[i][t] - x[j][t]) / std::exp(hp.log_ls[t]);
        q += diff * diff;
      }
      const double v = sf2 * std::exp(-0.5 * q);
      k[static_cast<size_t>(i) * n + j] = v;
      k[static_cast<size_t>(j) * n + i] = v;
    }
  for (int i = 0; i < n; ++i)
    k[static_cast<size_t>(i) * n + i] += sn2 + kJitterFloor;
  if (!cholesky(k, n)) return -std::numeric_limits<double>::infinity();
  std::vector<double> alpha = y;
  solve_lower(k, n, alpha);
  double quad = 0.0;
  for (double v : alpha) quad += v * v;
  double logdet = 0.0;
  for (int i = 0; i < n; ++i)
    logdet += std::log(k[static_cast<size_t>(i) * n + i]);
  return -0.5 * quad - logdet - 0.5 * n * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace

void SearchSpace::validate() const {
  if (dims.empty()) throw ValidationError("search space has no dimensions");
  for (const auto& d : dims) {
    if (!(d.lower < d.upper))
      throw ValidationError("dimension " + d.name + ": lower must be < upper");
    if (d.log_scale && d.lower <= 0)
      throw ValidationError("dimension " + d.name +
                            ": log scale requires positive bounds");
  }
}

std::vector<double> SearchSpace::to_raw(const std::vector<double>& unit) const {
  std::vector<double> raw(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const double u = std::clamp(unit[i], 0.0, 1.0);
    double v = d.log_scale
                   ? std::exp(std::log(d.lower) + u * (std::log(d.upper) - std::log(d.lower)))
                   : d.lower + u * (d.upper - d.lower);
    if (d.integer) v = std::clamp(std::round(v), d.lower, d.upper);
    raw[i] = v;
  }
  return raw;
}

std::vector<double> SearchSpace::to_unit(const std::vector<double>& raw) const {
  std::vector<double> unit(dims.size());
  for (size_t i = 0; i < dims.size(); ++i) {
    const auto& d = dims[i];
    const double u = d.log_scale ? (std::log(raw[i]) - std::log(d.lower)) /
                                       (std::log(d.upper) - std::log(d.lower))
                                 : (raw[i] - d.lower) / (d.upper - d.lower);
    unit[i] = std::clamp(u, 0.0, 1.0);
  }
  return unit;
}

SearchSpace SearchSpace::default_space() {
  SearchSpace s;
  s.dims = {
      {"learning_rate", 1e-5, 1e-2, true, false},
      {"latent_dim", 32, 512, true, true},
      {"shared_conv_channels", 64, 1024, true, true},
      {"w_rec", 1.0, 1000.0, true, false},
      {"w_regr", 0.1, 100.0, true, false},
      {"w_kld", 0.01, 100.0, true, false},
  };
  return s;
}

GPModel GPModel::fit(const std::vector<std::vector<double>>& points,
                     const std::vector<double>& values) {
  if (points.empty()) throw ValidationError("gp_fit: need at least one point");
  if (points.size() != values.size())
    throw ValidationError("gp_fit: points/values length mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw ValidationError("gp_fit: non-finite value");
  const int n = static_cast<int>(points.size());
  const int d = static_cast<int>(points[0].size());

  GPModel m;
  m.x_ = points;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  m.y_mean_ = mean;
  m.y_std_ = var > 1e-24 ? std::sqrt(var) : 1.0;
  m.y_.resize(n);
  for (int i = 0; i < n; ++i) m.y_[i] = (values[i] - mean) / m.y_std_;

  // multi-start random search + local refinement over the log hyperparams
  Rng rng(0x6BB5EED);
  GPHyper best;
  best.log_ls.assign(d, std::log(0.3));
  double best_lml = lml_for(m.x_, m.y_, best);

  auto random_hyper = [&] {
    GPHyper h;
    h.log_ls.resize(d);
    for (int t = 0; t < d; ++t) h.log_ls[t] = rng.uniform(std::log(0.03), std::log(5.0));
    h.log_sf2 = rng.uniform(std::log(0.05), std::log(50.0));
    h.log_sn2 = rng.uniform(std::log(kJitterFloor), std::log(0.1));
    return h;
  };

  for (int s = 0; s < 40; ++s) {
    const GPHyper h = random_hyper();
    const double v = lml_for(m.x_, m.y_, h);
    if (v > best_lml) {
      best_lml = v;
      best = h;
    }
  }
  double step = 0.8;
  for (int it = 0; it < 120; ++it) {
    GPHyper h = best;
    const int which = rng.uniform_int(0, d + 1);
    if (which < d)
      h.log_ls[which] += rng.normal() * step;
    else if (which == d)
      h.log_sf2 += rng.normal() * step;
    else
      h.log_sn2 = std::max(std::log(kJitterFloor), h.log_sn2 + rng.normal() * step);
    const double v = lml_for(m.x_, m.y_, h);
    if (v > best_lml) {
      best_lml = v;
      best = h;
    }
    step *= 0.985;
  }

  m.length_scales_.resize(d);
  for (int t = 0; t < d; ++t) m.length_scales_[t] = std::exp(best.log_ls[t]);
  m.signal_var_ = std::exp(best.log_sf2);
  m.noise_var_ = std::exp(best.log_sn2);
  m.lml_ = best_lml;

  // factorize with jitter escalation
  double jitter = kJitterFloor;
  for (;;) {
    std::vector<double> k(static_cast<size_t>(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = m.kernel(m.x_[i], m.x_[j]);
        k[static_cast<size_t>(i) * n + j] = v;
        k[static_cast<size_t>(j) * n + i] = v;
      }
    for (int i = 0; i < n; ++i)
      k[static_cast<size_t>(i) * n + i] += m.noise_var_ + jitter;
    if (cholesky(k, n)) {
      m.chol_ = std::move(k);
      break;
    }
    jitter *= 10.0;
    if (jitter > 1e-2)
      throw std::runtime_error("gp_fit: covariance stayed degenerate despite jitter");
  }
  m.alpha_ = m.y_;
  solve_lower(m.chol_, n, m.alpha_);
  solve_upper_t(m.chol_, n, m.alpha_);
  return m;
}

double GPModel::kernel(const std::vector<double>& a,
                       const std::vector<double>& b) const {
  double q = 0.0;
  for (size_t t = 0; t < a.size(); ++t) {
    const double diff = (a[t] - b[t]) / length_scales_[t];
    q += diff * diff;
  }
  return signal_var_ * std::exp(-0.5 * q);
}

std::pair<double, double> GPModel::predict(const std::vector<double>& x) const {
  const int n = static_cast<int>(x_.size());
  std::vector<double> kstar(n);
  for (int i = 0; i < n; ++i) kstar[i] = kernel(x, x_[i]);
  double mean = 0.0;
  for (int i = 0; i < n; ++i) mean += kstar[i] * alpha_[i];
  std::vector<double> v = kstar;
  solve_lower(chol_, n, v);
  double q = 0.0;
  for (double t : v) q += t * t;
  const double var = std::max(0.0, signal_var_ - q);
  return {y_mean_ + y_std_ * mean, var * y_std_ * y_std_};
}

double expected_improvement(double mean, double variance, double best_so_far) {
  if (variance < 0) throw ValidationError("expected_improvement: variance < 0");
  const double sigma = std::sqrt(variance);
  const double improve = best_so_far - mean;
  if (sigma <= 0.0) return std::max(improve, 0.0);
  const double u = improve / sigma;
  return improve * norm_cdf(u) + sigma * norm_pdf(u);
}

std::vector<double> suggest(const std::vector<Trial>& trials,
                            const SearchSpace& space, Rng& rng) {
  space.validate();
  const int d = static_cast<int>(space.size());
  static const int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29};
  if (d > static_cast<int>(sizeof(kPrimes) / sizeof(int)))
    throw ValidationError("search space has too many dimensions");

  auto snap = [&](std::vector<double> unit) {
    // integer dimensions: round in raw space, re-normalize
    return space.to_unit(space.to_raw(std::move(unit)));
  };

  std::vector<const Trial*> completed;
  for (const auto& t : trials)
    if (t.status == Trial::Status::completed) completed.push_back(&t);

  if (completed.size() < 5) {
    // skip the first entries of the Halton sequence (correlated prefix)
    const uint64_t index = trials.size() + 20;
    std::vector<double> u(d);
    for (int t = 0; t < d; ++t) u[t] = halton(index, kPrimes[t]);
    return snap(u);
  }

  std::vector<std::vector<double>> xs;
  std::vector<double> ys;
  double best_y = std::numeric_limits<double>::infinity();
  const Trial* incumbent = completed.front();
  for (const auto* t : completed) {
    xs.push_back(t->point);
    ys.push_back(t->objective);
    if (t->objective < best_y) {
      best_y = t->objective;
      incumbent = t;
    }
  }
  const GPModel gp = GPModel::fit(xs, ys);

  auto ei_at = [&](const std::vector<double>& u) {
    const auto [mean, var] = gp.predict(u);
    return expected_improvement(mean, var, best_y);
  };

  std::vector<double> best_u(d);
  double best_ei = -1.0;
  auto consider = [&](const std::vector<double>& u) {
    const double e = ei_at(u);
    if (e > best_ei) {
      best_ei = e;
      best_u = u;
    }
  };

  std::vector<double> cand(d);
  for (int i = 0; i < 2048; ++i) {
    for (int t = 0; t < d; ++t) cand[t] = rng.uniform();
    consider(cand);
  }
  for (int i = 0; i < 256; ++i) {
    for (int t = 0; t < d; ++t)
      cand[t] = std::clamp(incumbent->point[t] + 0.05 * rng.normal(), 0.0, 1.0);
    consider(cand);
  }
  // local refinement of the acquisition argmax
  double step = 0.05;
  for (int i = 0; i < 60; ++i) {
    for (int t = 0; t < d; ++t)
      cand[t] = std::clamp(best_u[t] + step * rng.normal(), 0.0, 1.0);
    consider(cand);
    step *= 0.95;
  }
  return snap(best_u);
}

SearchResult run_search(
    const SearchSpace& space, int budget,
    const std::function<double(const std::vector<double>& raw)>& objective,
    uint64_t seed, const std::string& history_path) {
  if (budget < 1) throw ValidationError("run_search: budget must be >= 1");
  space.validate();
  Rng rng(seed);

  std::ofstream hist;
  if (!history_path.empty()) {
    hist.open(history_path, std::ios::app);
    if (!hist) throw IoError("cannot open history file " + history_path);
  }

  SearchResult result;
  bool have_best = false;
  for (int i = 0; i < budget; ++i) {
    Trial t;
    t.point = suggest(result.history, space, rng);
    t.raw = space.to_raw(t.point);
    const auto t0 = std::chrono::steady_clock::now();
    try {
      t.objective = objective(t.raw);
      t.status = std::isfinite(t.objective) ? Trial::Status::completed
                                            : Trial::Status::failed;
    } catch (const std::exception&) {
      t.status = Trial::Status::failed;
      t.objective = std::numeric_limits<double>::quiet_NaN();
    }
    t.duration_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    if (hist.is_open()) {
      nlohmann::json line;
      line["point"] = t.point;
      nlohmann::json raw_cfg = nlohmann::json::object();
      for (size_t k = 0; k < space.dims.size(); ++k)
        raw_cfg[space.dims[k].name] = t.raw[k];
      line["raw_config"] = raw_cfg;
      if (t.status == Trial::Status::completed)
        line["objective"] = t.objective;
      else
        line["objective"] = nullptr;
      line["status"] =
          t.status == Trial::Status::completed ? "completed" : "failed";
      line["duration_s"] = t.duration_s;
      hist << line.dump() << "\n";
      hist.flush();
    }

    if (t.status == Trial::Status::completed &&
        (!have_best || t.objective < result.best.objective)) {
      result.best = t;
      have_best = true;
    }
    result.history.push_back(std::move(t));
  }
  if (!have_best) throw std::runtime_error("run_search: all trials failed");
  return result;
}

}  // namespace twincount
