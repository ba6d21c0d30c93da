#include "twincount/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"

namespace twincount {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

Tensor<float> image_to_tensor(const Image& img) {
  Tensor<float> t(1, 1, img.height, img.width);
  std::copy(img.pixels.begin(), img.pixels.end(), t.data.begin());
  return t;
}

Image tensor_to_image(const Tensor<float>& t, int sample) {
  Image img(t.w, t.h);
  const float* p = t.ptr(sample);
  std::copy(p, p + img.size(), img.pixels.begin());
  return img;
}

}  // namespace

MetricsReport metrics(const std::vector<double>& predictions,
                      const std::vector<int>& labels) {
  if (predictions.empty()) throw ValidationError("metrics: empty input");
  if (predictions.size() != labels.size())
    throw ValidationError("metrics: predictions/labels length mismatch");

  MetricsReport rep;
  rep.n = predictions.size();
  struct Acc {
    double ae = 0, re = 0;
    size_t hits = 0, n = 0;
  };
  std::map<int, Acc> groups;
  double ae = 0, re = 0;
  size_t hits = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int l = labels[i];
    if (l < 1)
      throw ValidationError("metrics: label " + std::to_string(l) +
                            " at index " + std::to_string(i) +
                            " (labels must be >= 1)");
    const double p = predictions[i];
    const double err = std::abs(p - l);
    const bool hit = std::lround(p) == l;  // rounds half away from zero
    ae += err;
    re += err / l;
    hits += hit;
    auto& g = groups[l];
    g.ae += err;
    g.re += err / l;
    g.hits += hit;
    ++g.n;
  }
  rep.mae = ae / rep.n;
  rep.mre = re / rep.n;
  rep.accuracy = static_cast<double>(hits) / rep.n;
  for (const auto& [l, g] : groups)
    rep.per_count[l] = {g.ae / g.n, g.re / g.n, static_cast<double>(g.hits) / g.n,
                        g.n};
  return rep;
}

MetricsReport evaluate(TwinVAE<float>& model, const DatasetManifest& manifest,
                       int batch_size) {
  if (manifest.empty()) throw ValidationError("evaluate: empty manifest");
  std::vector<double> preds;
  std::vector<int> labels;
  preds.reserve(manifest.size());
  labels.reserve(manifest.size());

  std::vector<size_t> idx;
  for (size_t start = 0; start < manifest.size(); start += batch_size) {
    idx.clear();
    for (size_t i = start; i < std::min(manifest.size(), start + batch_size); ++i)
      idx.push_back(i);
    const Batch b = pack_batch(manifest, idx);
    for (const auto& l : b.labels)
      if (!l) throw ValidationError("evaluate: manifest must be fully labeled");
    const auto out = model.forward(b.images, b.domain, nn::Mode::eval, 0);
    for (int i = 0; i < b.size; ++i) {
      preds.push_back(std::max(0.0, static_cast<double>(out.estimate.data[i])));
      labels.push_back(*b.labels[i]);
    }
  }
  return metrics(preds, labels);
}

TranslationResult translate(TwinVAE<float>& model, const Image& image,
                            Domain source_domain, Domain target_domain) {
  if (!image.is_working_resolution())
    throw ValidationError("translate: image must be 128x128");
  TranslationResult res;
  res.source = image;
  res.source_domain = source_domain;
  res.target_domain = target_domain;

  const Tensor<float> x = image_to_tensor(image);
  const auto enc = model.encode(x, source_domain, nn::Mode::eval, 0);
  const Tensor<float> recon = model.decode(enc.mu, target_domain, nn::Mode::eval, 0);
  res.translated = tensor_to_image(recon, 0);
  const Tensor<float> est_src = model.regress(enc.mu, nn::Mode::eval, 0);
  res.source_count_estimate = std::max(0.0, static_cast<double>(est_src.data[0]));

  const auto enc2 = model.encode(recon, target_domain, nn::Mode::eval, 0);
  const Tensor<float> est_xlat = model.regress(enc2.mu, nn::Mode::eval, 0);
  res.translated_count_estimate =
      std::max(0.0, static_cast<double>(est_xlat.data[0]));
  return res;
}

void export_latents(TwinVAE<float>& model, const DatasetManifest& manifest,
                    const std::string& path, int batch_size) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  const int latent = model.config().latent_dim;
  f << "id,domain,count";
  for (int i = 0; i < latent; ++i) f << ",z" << i;
  f << "\n";

  std::vector<size_t> idx;
  for (size_t start = 0; start < manifest.size(); start += batch_size) {
    idx.clear();
    for (size_t i = start; i < std::min(manifest.size(), start + batch_size); ++i)
      idx.push_back(i);
    const Batch b = pack_batch(manifest, idx);
    const auto enc = model.encode(b.images, b.domain, nn::Mode::eval, 0);
    for (int i = 0; i < b.size; ++i) {
      const Sample& s = manifest.samples[idx[i]];
      f << s.id << ',' << to_string(s.domain) << ',';
      if (s.label) f << *s.label;
      const float* mu = enc.mu.ptr(i);
      for (int d = 0; d < latent; ++d) f << ',' << fmt(mu[d]);
      f << "\n";
    }
  }
}

void write_metrics_json(const MetricsReport& report, const std::string& path) {
  nlohmann::json j;
  j["mae"] = report.mae;
  j["mre"] = report.mre;
  j["mre_percent"] = report.mre * 100.0;
  j["accuracy"] = report.accuracy;
  j["n"] = report.n;
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [count, g] : report.per_count) {
    nlohmann::json e;
    e["mae"] = g.mae;
    e["mre"] = g.mre;
    e["accuracy"] = g.accuracy;
    e["n"] = g.n;
    per[std::to_string(count)] = e;
  }
  j["per_count"] = per;
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << j.dump(2) << "\n";
}

void write_per_count_csv(const MetricsReport& report, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << "count,n,mae,mre,acc\n";
  for (const auto& [count, g] : report.per_count)
    f << count << ',' << g.n << ',' << fmt(g.mae) << ',' << fmt(g.mre) << ','
      << fmt(g.accuracy) << "\n";
}

}  // namespace twincount
