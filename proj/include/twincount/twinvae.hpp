#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "twincount/nn.hpp"
#include "twincount/tensor.hpp"
#include "twincount/types.hpp"

namespace twincount {

struct ModelConfig {
  double channel_scale = 1.0;   // scales convolution channel counts
  int latent_dim = 256;
  int shared_conv_channels = 0;  // 0 = round(512 * channel_scale)
  int fc_hidden = 512;
  double dropout_rate = 0.1;
  double leaky_slope = 0.2;
  // regressor reads z by default; optionally the globally averaged shared
  // decoder feature map
  bool regressor_tap_shared_decoder = false;

  int scaled(int base) const {
    const int c = static_cast<int>(std::lround(base * channel_scale));
    return c < 1 ? 1 : c;
  }
  int shared_channels() const {
    return shared_conv_channels > 0 ? shared_conv_channels : scaled(512);
  }
};

template <typename T>
struct ForwardOutput {
  Tensor<T> recon;     // (N,1,128,128)
  Tensor<T> mu;        // (N,L)
  Tensor<T> logvar;    // (N,L)
  Tensor<T> z;         // (N,L)
  Tensor<T> eps;       // recorded reparameterization noise
  Tensor<T> estimate;  // (N,1) raw regressor output (clamp at 0 for reporting)
};

// Two VAEs joined at the innermost encoder convolution, the bottleneck and
// the first decoder deconvolution, plus a regression head on the shared code.
template <typename T>
class TwinVAE {
 public:
  TwinVAE(const ModelConfig& cfg, uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // All learnable parameters, shared tensors listed exactly once.
  std::vector<nn::Param<T>*> params();
  std::vector<const nn::Param<T>*> params() const;
  // Parameters of the regression head only (for the delayed start schedule).
  std::vector<nn::Param<T>*> regressor_params();

  void zero_grad();

  struct EncodeOut {
    Tensor<T> mu, logvar;
  };
  EncodeOut encode(const Tensor<T>& x, Domain domain, nn::Mode mode, uint64_t seed);
  // z = mu + exp(logvar/2) * eps in train mode; z = mu in eval mode
  std::pair<Tensor<T>, Tensor<T>> reparameterize(const Tensor<T>& mu,
                                                 const Tensor<T>& logvar,
                                                 nn::Mode mode, uint64_t seed);
  Tensor<T> decode(const Tensor<T>& z, Domain domain, nn::Mode mode, uint64_t seed);
  Tensor<T> regress(const Tensor<T>& z, nn::Mode mode, uint64_t seed);

  ForwardOutput<T> forward(const Tensor<T>& x, Domain domain, nn::Mode mode,
                           uint64_t seed);

  // Reverse passes; each must follow the matching forward on the same branch.
  // Gradients accumulate into the Param::grad buffers.
  Tensor<T> regress_backward(const Tensor<T>& d_estimate);       // -> d_tap
  Tensor<T> decode_backward(const Tensor<T>& d_recon, Domain domain);  // -> d_z
  void encode_backward(const Tensor<T>& d_mu, const Tensor<T>& d_logvar,
                       Domain domain);
  // Splits d_z into (d_mu, d_logvar) through the recorded eps.
  std::pair<Tensor<T>, Tensor<T>> reparameterize_backward(
      const Tensor<T>& d_z, const Tensor<T>& eps, const Tensor<T>& logvar,
      nn::Mode mode) const;

  // Full backward for one domain pass: combines decoder, regressor and KLD
  // seed gradients. d_estimate may be empty (regressor inactive).
  void backward(const Tensor<T>& d_recon, const Tensor<T>& d_estimate,
                const Tensor<T>& d_mu_extra, const Tensor<T>& d_logvar_extra,
                const ForwardOutput<T>& out, Domain domain, nn::Mode mode);

  // Spatial side lengths along the encoder (input 128 -> shared conv output)
  // and the decoder (reshaped 1x1 -> output 128).
  std::vector<int> encoder_spatial_chain() const;
  std::vector<int> decoder_spatial_chain() const;

  // Batch-norm running statistics (checkpointed as buffers).
  std::vector<T>& bn_running_mean() { return shared_dec_.bn.running_mean(); }
  std::vector<T>& bn_running_var() { return shared_dec_.bn.running_var(); }

  int regressor_input_dim() const;

 private:
  struct EncBranch {
    nn::Conv2d<T> conv1, conv2, conv3, conv4;
    nn::LeakyReLU<T> act1, act2, act3, act4;
    nn::Dropout<T> drop1, drop2, drop3, drop4;
  };
  struct SharedEnc {
    nn::Conv2d<T> conv;
    nn::LeakyReLU<T> act;
    nn::Dropout<T> drop;
    nn::Linear<T> fc;
    nn::LeakyReLU<T> fc_act;
    nn::Dropout<T> fc_drop;
    nn::Linear<T> mu_head, logvar_head;
  };
  struct SharedDec {
    nn::Linear<T> fc;
    nn::LeakyReLU<T> fc_act;
    nn::Dropout<T> fc_drop;
    nn::ConvTranspose2d<T> tconv;
    nn::BatchNorm2d<T> bn;
    nn::LeakyReLU<T> act;
  };
  struct DecBranch {
    nn::ConvTranspose2d<T> tconv1, tconv2, tconv3, tconv4, tconv5;
    nn::LeakyReLU<T> act1, act2, act3, act4;
    nn::Sigmoid<T> out_act;
  };
  struct Regressor {
    nn::Linear<T> fc1, fc2, fc3;
    nn::Dropout<T> drop1, drop2;
  };

  EncBranch& enc(Domain d) { return d == Domain::nat ? enc_nat_ : enc_syn_; }
  DecBranch& dec(Domain d) { return d == Domain::nat ? dec_nat_ : dec_syn_; }

  ModelConfig cfg_;
  int c1_, c2_, c3_, c4_, c5_, d1_, d2_, d3_, d4_, d5_;

  EncBranch enc_nat_, enc_syn_;
  SharedEnc shared_enc_;
  SharedDec shared_dec_;
  DecBranch dec_nat_, dec_syn_;
  Regressor regressor_;

  // caches for the tap variant
  Tensor<T> shared_feat_;  // act(bn(tconv)) output, (N, d1, 5, 5)
  bool regress_used_tap_ = false;
};

using TwinVAEF = TwinVAE<float>;
using TwinVAED = TwinVAE<double>;

// Named-tensor checkpoint container: magic, version, JSON header with config,
// rng state and per-tensor (name, shape, offset), then little-endian f32 data.
// Writes are atomic (temp file + rename).
void save_checkpoint(const TwinVAE<float>& model, const std::string& path,
                     const std::array<uint64_t, 4>& rng_state = {0, 0, 0, 0});
struct CheckpointData {
  ModelConfig config;
  std::array<uint64_t, 4> rng_state;
};
// Builds the model from the stored config.
std::unique_ptr<TwinVAE<float>> load_checkpoint(const std::string& path,
                                                CheckpointData* meta = nullptr);
// Loads into an existing model; shape mismatches name the offending tensor.
void load_checkpoint_into(TwinVAE<float>& model, const std::string& path,
                          CheckpointData* meta = nullptr);

extern template class TwinVAE<float>;
extern template class TwinVAE<double>;

}  // namespace twincount
