#pragma once

#include <map>
#include <string>
#include <vector>

#include "twincount/dataio.hpp"
#include "twincount/image.hpp"
#include "twincount/twinvae.hpp"

namespace twincount {

struct MetricsReport {
  double mae = 0.0;       // cells
  double mre = 0.0;       // fraction (displayed as percentage)
  double accuracy = 0.0;  // fraction with round(p) == label
  size_t n = 0;

  struct PerCount {
    double mae = 0.0, mre = 0.0, accuracy = 0.0;
    size_t n = 0;
  };
  std::map<int, PerCount> per_count;
};

// MAE, MRE, accuracy with per-count breakdown; rounding half away from zero.
// Rejects empty inputs and labels < 1 (MRE undefined at 0).
MetricsReport metrics(const std::vector<double>& predictions,
                      const std::vector<int>& labels);

// Eval-mode predictions (z = mu, estimates clamped at 0) over a fully
// labeled manifest.
MetricsReport evaluate(TwinVAE<float>& model, const DatasetManifest& manifest,
                       int batch_size = 64);

struct TranslationResult {
  Image source;
  Image translated;
  Domain source_domain = Domain::nat;
  Domain target_domain = Domain::syn;
  double source_count_estimate = 0.0;      // regressed from the source latent
  double translated_count_estimate = 0.0;  // regressed after re-encoding
};

// Encode with the source encoder (z = mu), decode with the target decoder;
// the translated image is re-encoded with the target encoder for its
// estimate. Matching domains yield a plain reconstruction.
TranslationResult translate(TwinVAE<float>& model, const Image& image,
                            Domain source_domain, Domain target_domain);

// CSV `id,domain,count,z0..z{L-1}`; empty count for unlabeled samples;
// eval-mode mu is the exported vector.
void export_latents(TwinVAE<float>& model, const DatasetManifest& manifest,
                    const std::string& path, int batch_size = 64);

void write_metrics_json(const MetricsReport& report, const std::string& path);
// plot-ready per-count table: `count,n,mae,mre,acc`
void write_per_count_csv(const MetricsReport& report, const std::string& path);

}  // namespace twincount
