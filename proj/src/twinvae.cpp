#include "twincount/twinvae.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "twincount/errors.hpp"
#include "twincount/json_io.hpp"

namespace twincount {

namespace {

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& in) {
  Tensor<T> out(in.n, in.c, 1, 1);
  const int hw = in.h * in.w;
  const T inv = T(1) / static_cast<T>(hw);
  for (int n = 0; n < in.n; ++n)
    for (int c = 0; c < in.c; ++c) {
      const T* p = in.ptr(n) + static_cast<size_t>(c) * hw;
      T acc = T(0);
      for (int i = 0; i < hw; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc * inv;
    }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const Tensor<T>& d_out, int h, int w) {
  Tensor<T> d_in(d_out.n, d_out.c, h, w);
  const T inv = T(1) / static_cast<T>(h * w);
  for (int n = 0; n < d_out.n; ++n)
    for (int c = 0; c < d_out.c; ++c) {
      const T g = d_out.at(n, c, 0, 0) * inv;
      T* p = d_in.ptr(n) + static_cast<size_t>(c) * h * w;
      for (int i = 0; i < h * w; ++i) p[i] = g;
    }
  return d_in;
}

constexpr uint64_t kDomainKey[2] = {0xA1, 0xA2};

}  // namespace

template <typename T>
TwinVAE<T>::TwinVAE(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg) {
  c1_ = cfg.scaled(32);
  c2_ = cfg.scaled(64);
  c3_ = cfg.scaled(128);
  c4_ = cfg.scaled(256);
  c5_ = cfg.shared_channels();
  d1_ = cfg.scaled(256);
  d2_ = cfg.scaled(128);
  d3_ = cfg.scaled(64);
  d4_ = cfg.scaled(32);
  d5_ = d4_;  // the kernel-2 stride-1 layer preserves width

  const double p = cfg.dropout_rate;
  const double s = cfg.leaky_slope;

  auto build_enc = [&](EncBranch& e, const std::string& dom, uint64_t uid0) {
    const std::string base = "enc." + dom;
    e.conv1 = nn::Conv2d<T>(base + ".conv1", 1, c1_, 5, 2, 2);
    e.conv2 = nn::Conv2d<T>(base + ".conv2", c1_, c2_, 5, 2, 2);
    e.conv3 = nn::Conv2d<T>(base + ".conv3", c2_, c3_, 5, 2, 2);
    e.conv4 = nn::Conv2d<T>(base + ".conv4", c3_, c4_, 5, 2, 2);
    e.act1 = e.act2 = e.act3 = e.act4 = nn::LeakyReLU<T>(s);
    e.drop1 = nn::Dropout<T>(p, uid0 + 0);
    e.drop2 = nn::Dropout<T>(p, uid0 + 1);
    e.drop3 = nn::Dropout<T>(p, uid0 + 2);
    e.drop4 = nn::Dropout<T>(p, uid0 + 3);
  };
  build_enc(enc_nat_, "nat", 1);
  build_enc(enc_syn_, "syn", 5);

  shared_enc_.conv = nn::Conv2d<T>("enc.shared.conv", c4_, c5_, 5, 2, 2);
  shared_enc_.act = nn::LeakyReLU<T>(s);
  shared_enc_.drop = nn::Dropout<T>(p, 9);
  shared_enc_.fc = nn::Linear<T>("enc.shared.fc", c5_ * 4 * 4, cfg.fc_hidden);
  shared_enc_.fc_act = nn::LeakyReLU<T>(s);
  shared_enc_.fc_drop = nn::Dropout<T>(p, 10);
  shared_enc_.mu_head = nn::Linear<T>("enc.shared.mu", cfg.fc_hidden, cfg.latent_dim);
  shared_enc_.logvar_head =
      nn::Linear<T>("enc.shared.logvar", cfg.fc_hidden, cfg.latent_dim);

  shared_dec_.fc = nn::Linear<T>("dec.shared.fc", cfg.latent_dim, c5_);
  shared_dec_.fc_act = nn::LeakyReLU<T>(s);
  shared_dec_.fc_drop = nn::Dropout<T>(p, 11);
  shared_dec_.tconv = nn::ConvTranspose2d<T>("dec.shared.tconv", c5_, d1_, 5, 2);
  shared_dec_.bn = nn::BatchNorm2d<T>("dec.shared.bn", d1_);
  shared_dec_.act = nn::LeakyReLU<T>(s);

  auto build_dec = [&](DecBranch& d, const std::string& dom) {
    const std::string base = "dec." + dom;
    d.tconv1 = nn::ConvTranspose2d<T>(base + ".tconv1", d1_, d2_, 5, 2);
    d.tconv2 = nn::ConvTranspose2d<T>(base + ".tconv2", d2_, d3_, 5, 2);
    d.tconv3 = nn::ConvTranspose2d<T>(base + ".tconv3", d3_, d4_, 5, 2);
    d.tconv4 = nn::ConvTranspose2d<T>(base + ".tconv4", d4_, d5_, 2, 1);
    d.tconv5 = nn::ConvTranspose2d<T>(base + ".tconv5", d5_, 1, 6, 2);
    d.act1 = d.act2 = d.act3 = d.act4 = nn::LeakyReLU<T>(s);
  };
  build_dec(dec_nat_, "nat");
  build_dec(dec_syn_, "syn");

  regressor_.fc1 = nn::Linear<T>("regressor.fc1", regressor_input_dim(), 256);
  regressor_.fc2 = nn::Linear<T>("regressor.fc2", 256, 128);
  regressor_.fc3 = nn::Linear<T>("regressor.fc3", 128, 1);
  regressor_.drop1 = nn::Dropout<T>(p, 12);
  regressor_.drop2 = nn::Dropout<T>(p, 13);

  // orthogonal init, one derived seed per layer in registry order
  uint64_t ordinal = 0;
  auto next_seed = [&] { return derive_seed(seed, 0x0917, ordinal++); };
  for (auto* e : {&enc_nat_, &enc_syn_}) {
    e->conv1.init(next_seed());
    e->conv2.init(next_seed());
    e->conv3.init(next_seed());
    e->conv4.init(next_seed());
  }
  shared_enc_.conv.init(next_seed());
  shared_enc_.fc.init(next_seed());
  shared_enc_.mu_head.init(next_seed());
  shared_enc_.logvar_head.init(next_seed());
  shared_dec_.fc.init(next_seed());
  shared_dec_.tconv.init(next_seed());
  for (auto* d : {&dec_nat_, &dec_syn_}) {
    d->tconv1.init(next_seed());
    d->tconv2.init(next_seed());
    d->tconv3.init(next_seed());
    d->tconv4.init(next_seed());
    d->tconv5.init(next_seed());
  }
  regressor_.fc1.init(next_seed());
  regressor_.fc2.init(next_seed());
  regressor_.fc3.init(next_seed());
}

template <typename T>
int TwinVAE<T>::regressor_input_dim() const {
  return cfg_.regressor_tap_shared_decoder ? d1_ : cfg_.latent_dim;
}

template <typename T>
std::vector<nn::Param<T>*> TwinVAE<T>::params() {
  std::vector<nn::Param<T>*> ps;
  auto add = [&](nn::Param<T>& p) { ps.push_back(&p); };
  for (auto* e : {&enc_nat_, &enc_syn_})
    for (auto* c : {&e->conv1, &e->conv2, &e->conv3, &e->conv4}) {
      add(c->weight);
      add(c->bias);
    }
  add(shared_enc_.conv.weight);
  add(shared_enc_.conv.bias);
  for (auto* l : {&shared_enc_.fc, &shared_enc_.mu_head, &shared_enc_.logvar_head,
                  &shared_dec_.fc}) {
    add(l->weight);
    add(l->bias);
  }
  add(shared_dec_.tconv.weight);
  add(shared_dec_.tconv.bias);
  add(shared_dec_.bn.gamma);
  add(shared_dec_.bn.beta);
  for (auto* d : {&dec_nat_, &dec_syn_})
    for (auto* t : {&d->tconv1, &d->tconv2, &d->tconv3, &d->tconv4, &d->tconv5}) {
      add(t->weight);
      add(t->bias);
    }
  for (auto* l : {&regressor_.fc1, &regressor_.fc2, &regressor_.fc3}) {
    add(l->weight);
    add(l->bias);
  }
  return ps;
}

template <typename T>
std::vector<const nn::Param<T>*> TwinVAE<T>::params() const {
  auto ps = const_cast<TwinVAE<T>*>(this)->params();
  return {ps.begin(), ps.end()};
}

template <typename T>
std::vector<nn::Param<T>*> TwinVAE<T>::regressor_params() {
  std::vector<nn::Param<T>*> ps;
  for (auto* l : {&regressor_.fc1, &regressor_.fc2, &regressor_.fc3}) {
    ps.push_back(&l->weight);
    ps.push_back(&l->bias);
  }
  return ps;
}

template <typename T>
void TwinVAE<T>::zero_grad() {
  for (auto* p : params()) p->zero_grad();
}

template <typename T>
typename TwinVAE<T>::EncodeOut TwinVAE<T>::encode(const Tensor<T>& x, Domain domain,
                                                  nn::Mode mode, uint64_t seed) {
  if (x.c != 1 || x.h != 128 || x.w != 128)
    throw ValidationError("encode expects (N,1,128,128) input");
  const uint64_t dseed = derive_seed(seed, kDomainKey[static_cast<int>(domain)]);
  auto& e = enc(domain);
  Tensor<T> a, b;
  e.conv1.forward(x, a);
  e.act1.forward(a, b);
  e.drop1.forward(b, a, mode, dseed);
  e.conv2.forward(a, b);
  e.act2.forward(b, a);
  e.drop2.forward(a, b, mode, dseed);
  e.conv3.forward(b, a);
  e.act3.forward(a, b);
  e.drop3.forward(b, a, mode, dseed);
  e.conv4.forward(a, b);
  e.act4.forward(b, a);
  e.drop4.forward(a, b, mode, dseed);
  shared_enc_.conv.forward(b, a);
  shared_enc_.act.forward(a, b);
  shared_enc_.drop.forward(b, a, mode, dseed);
  Tensor<T> flat = nn::reshape(std::move(a), x.n, c5_ * 4 * 4, 1, 1);
  shared_enc_.fc.forward(flat, b);
  shared_enc_.fc_act.forward(b, flat);
  shared_enc_.fc_drop.forward(flat, b, mode, dseed);
  EncodeOut out;
  shared_enc_.mu_head.forward(b, out.mu);
  shared_enc_.logvar_head.forward(b, out.logvar);
  return out;
}

template <typename T>
void TwinVAE<T>::encode_backward(const Tensor<T>& d_mu, const Tensor<T>& d_logvar,
                                 Domain domain) {
  Tensor<T> g = shared_enc_.mu_head.backward(d_mu);
  add_into(g, shared_enc_.logvar_head.backward(d_logvar));
  g = shared_enc_.fc_drop.backward(g);
  g = shared_enc_.fc_act.backward(g);
  g = shared_enc_.fc.backward(g);
  g = nn::reshape(std::move(g), g.n, c5_, 4, 4);
  g = shared_enc_.drop.backward(g);
  g = shared_enc_.act.backward(g);
  g = shared_enc_.conv.backward(g);
  auto& e = enc(domain);
  g = e.drop4.backward(g);
  g = e.act4.backward(g);
  g = e.conv4.backward(g);
  g = e.drop3.backward(g);
  g = e.act3.backward(g);
  g = e.conv3.backward(g);
  g = e.drop2.backward(g);
  g = e.act2.backward(g);
  g = e.conv2.backward(g);
  g = e.drop1.backward(g);
  g = e.act1.backward(g);
  (void)e.conv1.backward(g);
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> TwinVAE<T>::reparameterize(const Tensor<T>& mu,
                                                           const Tensor<T>& logvar,
                                                           nn::Mode mode,
                                                           uint64_t seed) {
  Tensor<T> z = mu;
  Tensor<T> eps(mu.n, mu.c, 1, 1);
  if (mode == nn::Mode::train) {
    const int dim = mu.c;
    for (int n = 0; n < mu.n; ++n) {
      Rng rng(derive_seed(seed, 0xE9, static_cast<uint64_t>(n)));
      const T* m = mu.ptr(n);
      const T* lv = logvar.ptr(n);
      T* zp = z.ptr(n);
      T* ep = eps.ptr(n);
      for (int d = 0; d < dim; ++d) {
        const T e = static_cast<T>(rng.normal());
        ep[d] = e;
        zp[d] = m[d] + std::exp(lv[d] / T(2)) * e;
      }
    }
  }
  return {std::move(z), std::move(eps)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> TwinVAE<T>::reparameterize_backward(
    const Tensor<T>& d_z, const Tensor<T>& eps, const Tensor<T>& logvar,
    nn::Mode mode) const {
  Tensor<T> d_mu = d_z;
  Tensor<T> d_logvar(d_z.n, d_z.c, 1, 1);
  if (mode == nn::Mode::train) {
    for (size_t i = 0; i < d_z.data.size(); ++i)
      d_logvar.data[i] = d_z.data[i] * eps.data[i] *
                         std::exp(logvar.data[i] / T(2)) / T(2);
  }
  return {std::move(d_mu), std::move(d_logvar)};
}

template <typename T>
Tensor<T> TwinVAE<T>::decode(const Tensor<T>& z, Domain domain, nn::Mode mode,
                             uint64_t seed) {
  if (z.c != cfg_.latent_dim)
    throw ValidationError("decode expects latent vectors of size " +
                          std::to_string(cfg_.latent_dim));
  const uint64_t dseed = derive_seed(seed, kDomainKey[static_cast<int>(domain)] + 0x10);
  Tensor<T> a, b;
  shared_dec_.fc.forward(z, a);
  shared_dec_.fc_act.forward(a, b);
  shared_dec_.fc_drop.forward(b, a, mode, dseed);
  a = nn::reshape(std::move(a), z.n, c5_, 1, 1);
  shared_dec_.tconv.forward(a, b);
  shared_dec_.bn.forward(b, a, mode);
  shared_dec_.act.forward(a, b);
  shared_feat_ = b;
  auto& d = dec(domain);
  d.tconv1.forward(b, a);
  d.act1.forward(a, b);
  d.tconv2.forward(b, a);
  d.act2.forward(a, b);
  d.tconv3.forward(b, a);
  d.act3.forward(a, b);
  d.tconv4.forward(b, a);
  d.act4.forward(a, b);
  d.tconv5.forward(b, a);
  Tensor<T> recon;
  d.out_act.forward(a, recon);
  return recon;
}

template <typename T>
Tensor<T> TwinVAE<T>::decode_backward(const Tensor<T>& d_recon, Domain domain) {
  auto& d = dec(domain);
  Tensor<T> g = d.out_act.backward(d_recon);
  g = d.tconv5.backward(g);
  g = d.act4.backward(g);
  g = d.tconv4.backward(g);
  g = d.act3.backward(g);
  g = d.tconv3.backward(g);
  g = d.act2.backward(g);
  g = d.tconv2.backward(g);
  g = d.act1.backward(g);
  g = d.tconv1.backward(g);
  if (regress_used_tap_ && tap_grad_.size() == g.size()) add_into(g, tap_grad_);
  g = shared_dec_.act.backward(g);
  g = shared_dec_.bn.backward(g);
  g = shared_dec_.tconv.backward(g);
  g = nn::reshape(std::move(g), g.n, c5_, 1, 1);
  g = shared_dec_.fc_drop.backward(g);
  g = shared_dec_.fc_act.backward(g);
  return shared_dec_.fc.backward(g);
}

template <typename T>
Tensor<T> TwinVAE<T>::regress(const Tensor<T>& z, nn::Mode mode, uint64_t seed) {
  Tensor<T> in = z;
  regress_used_tap_ = false;
  if (cfg_.regressor_tap_shared_decoder) {
    in = global_avg_pool(shared_feat_);
    regress_used_tap_ = true;
  }
  Tensor<T> a, b;
  regressor_.fc1.forward(in, a);
  regressor_.drop1.forward(a, b, mode, derive_seed(seed, 0xC1));
  regressor_.fc2.forward(b, a);
  regressor_.drop2.forward(a, b, mode, derive_seed(seed, 0xC2));
  Tensor<T> est;
  regressor_.fc3.forward(b, est);
  return est;
}

template <typename T>
Tensor<T> TwinVAE<T>::regress_backward(const Tensor<T>& d_estimate) {
  Tensor<T> g = regressor_.fc3.backward(d_estimate);
  g = regressor_.drop2.backward(g);
  g = regressor_.fc2.backward(g);
  g = regressor_.drop1.backward(g);
  g = regressor_.fc1.backward(g);
  if (regress_used_tap_) {
    tap_grad_ = global_avg_pool_backward(g, shared_feat_.h, shared_feat_.w);
    // no direct gradient into z in tap mode
    Tensor<T> zero(g.n, cfg_.latent_dim, 1, 1);
    return zero;
  }
  return g;
}

template <typename T>
ForwardOutput<T> TwinVAE<T>::forward(const Tensor<T>& x, Domain domain,
                                     nn::Mode mode, uint64_t seed) {
  ForwardOutput<T> out;
  auto enc_out = encode(x, domain, mode, seed);
  out.mu = std::move(enc_out.mu);
  out.logvar = std::move(enc_out.logvar);
  auto [z, eps] = reparameterize(out.mu, out.logvar, mode, seed);
  out.z = std::move(z);
  out.eps = std::move(eps);
  out.recon = decode(out.z, domain, mode, seed);
  out.estimate = regress(out.z, mode, seed);
  return out;
}

template <typename T>
void TwinVAE<T>::backward(const Tensor<T>& d_recon, const Tensor<T>& d_estimate,
                          const Tensor<T>& d_mu_extra,
                          const Tensor<T>& d_logvar_extra,
                          const ForwardOutput<T>& out, Domain domain,
                          nn::Mode mode) {
  Tensor<T> d_z(out.z.n, out.z.c, 1, 1);
  if (d_estimate.size() > 0) add_into(d_z, regress_backward(d_estimate));
  if (d_recon.size() > 0) {
    add_into(d_z, decode_backward(d_recon, domain));
  } else if (regress_used_tap_) {
    Tensor<T> zeros(out.recon.n, out.recon.c, out.recon.h, out.recon.w);
    add_into(d_z, decode_backward(zeros, domain));
  }
  auto [d_mu, d_logvar] = reparameterize_backward(d_z, out.eps, out.logvar, mode);
  if (d_mu_extra.size() > 0) add_into(d_mu, d_mu_extra);
  if (d_logvar_extra.size() > 0) add_into(d_logvar, d_logvar_extra);
  encode_backward(d_mu, d_logvar, domain);
}

template <typename T>
std::vector<int> TwinVAE<T>::encoder_spatial_chain() const {
  std::vector<int> chain{128};
  int size = 128;
  for (int i = 0; i < 5; ++i) {
    size = nn::conv_out_size(size, 5, 2, 2);
    chain.push_back(size);
  }
  return chain;
}

template <typename T>
std::vector<int> TwinVAE<T>::decoder_spatial_chain() const {
  std::vector<int> chain{1};
  int size = 1;
  const int kernels[6] = {5, 5, 5, 5, 2, 6};
  const int strides[6] = {2, 2, 2, 2, 1, 2};
  for (int i = 0; i < 6; ++i) {
    size = nn::tconv_out_size(size, kernels[i], strides[i]);
    chain.push_back(size);
  }
  return chain;
}

template class TwinVAE<float>;
template class TwinVAE<double>;

// ---------------------------------------------------------------------------
// checkpoint container

namespace {

constexpr char kMagic[8] = {'T', 'W', 'I', 'N', 'V', 'A', 'E', '1'};
constexpr uint32_t kVersion = 1;

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float>* data;
};

std::vector<NamedTensor> tensor_registry(TwinVAE<float>& model) {
  std::vector<NamedTensor> ts;
  for (auto* p : model.params()) ts.push_back({p->name, p->shape, &p->value});
  const int bn_ch = static_cast<int>(model.bn_running_mean().size());
  ts.push_back({"dec.shared.bn.running_mean", {bn_ch}, &model.bn_running_mean()});
  ts.push_back({"dec.shared.bn.running_var", {bn_ch}, &model.bn_running_var()});
  return ts;
}

std::string hex_u64(uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

uint64_t parse_hex_u64(const std::string& s) {
  return std::strtoull(s.c_str(), nullptr, 16);
}

}  // namespace

void save_checkpoint(const TwinVAE<float>& model, const std::string& path,
                     const std::array<uint64_t, 4>& rng_state) {
  auto& m = const_cast<TwinVAE<float>&>(model);
  auto tensors = tensor_registry(m);

  nlohmann::json header;
  header["config"] = model.config();
  nlohmann::json rng = nlohmann::json::array();
  for (uint64_t v : rng_state) rng.push_back(hex_u64(v));
  header["rng_state"] = rng;
  nlohmann::json tlist = nlohmann::json::array();
  uint64_t offset = 0;
  for (const auto& t : tensors) {
    nlohmann::json e;
    e["name"] = t.name;
    e["shape"] = t.shape;
    e["offset"] = offset;
    e["count"] = t.data->size();
    tlist.push_back(e);
    offset += t.data->size();
  }
  header["tensors"] = tlist;
  const std::string header_str = header.dump();

  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp);
    f.write(kMagic, 8);
    const uint32_t version = kVersion;
    f.write(reinterpret_cast<const char*>(&version), 4);
    const uint64_t hlen = header_str.size();
    f.write(reinterpret_cast<const char*>(&hlen), 8);
    f.write(header_str.data(), static_cast<std::streamsize>(hlen));
    for (const auto& t : tensors)
      f.write(reinterpret_cast<const char*>(t.data->data()),
              static_cast<std::streamsize>(t.data->size() * sizeof(float)));
    if (!f) throw IoError("write failed: " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

namespace {

struct RawCheckpoint {
  nlohmann::json header;
  std::vector<char> bytes;
  size_t data_start = 0;

  const char* data() const { return bytes.data() + data_start; }
  size_t data_count() const { return (bytes.size() - data_start) / sizeof(float); }
};

RawCheckpoint read_checkpoint_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  RawCheckpoint raw;
  raw.bytes.assign((std::istreambuf_iterator<char>(f)),
                   std::istreambuf_iterator<char>());
  if (raw.bytes.size() < 20)
    throw CheckpointError("truncated checkpoint: " + path);
  if (std::memcmp(raw.bytes.data(), kMagic, 8) != 0)
    throw CheckpointError("bad magic; not a twinvae checkpoint: " + path);
  uint32_t version;
  std::memcpy(&version, raw.bytes.data() + 8, 4);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  uint64_t hlen;
  std::memcpy(&hlen, raw.bytes.data() + 12, 8);
  if (20 + hlen > raw.bytes.size())
    throw CheckpointError("truncated checkpoint header: " + path);
  try {
    raw.header = nlohmann::json::parse(raw.bytes.begin() + 20,
                                       raw.bytes.begin() + 20 + hlen);
  } catch (const nlohmann::json::exception&) {
    throw CheckpointError("corrupt checkpoint header: " + path);
  }
  raw.data_start = 20 + hlen;
  return raw;
}

void fill_from_raw(TwinVAE<float>& model, const RawCheckpoint& raw,
                   CheckpointData* meta) {
  auto tensors = tensor_registry(model);
  std::unordered_map<std::string, NamedTensor*> by_name;
  for (auto& t : tensors) by_name[t.name] = &t;

  for (const auto& e : raw.header.at("tensors")) {
    const std::string name = e.at("name");
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw CheckpointError("unknown tensor in checkpoint: " + name);
    const std::vector<int> shape = e.at("shape").get<std::vector<int>>();
    if (shape != it->second->shape)
      throw CheckpointError("shape mismatch for tensor " + name);
    const uint64_t offset = e.at("offset");
    const uint64_t count = e.at("count");
    if (offset + count > raw.data_count())
      throw CheckpointError("truncated checkpoint data at tensor " + name);
    if (count != it->second->data->size())
      throw CheckpointError("count mismatch for tensor " + name);
    std::memcpy(it->second->data->data(), raw.data() + offset * sizeof(float),
                count * sizeof(float));
  }
  if (meta) {
    meta->config = raw.header.at("config").get<ModelConfig>();
    auto rng = raw.header.at("rng_state");
    for (int i = 0; i < 4; ++i)
      meta->rng_state[i] = parse_hex_u64(rng.at(i).get<std::string>());
  }
}

}  // namespace

std::unique_ptr<TwinVAE<float>> load_checkpoint(const std::string& path,
                                                CheckpointData* meta) {
  RawCheckpoint raw = read_checkpoint_file(path);
  const ModelConfig cfg = raw.header.at("config").get<ModelConfig>();
  auto model = std::make_unique<TwinVAE<float>>(cfg, 0);
  fill_from_raw(*model, raw, meta);
  return model;
}

void load_checkpoint_into(TwinVAE<float>& model, const std::string& path,
                          CheckpointData* meta) {
  RawCheckpoint raw = read_checkpoint_file(path);
  fill_from_raw(model, raw, meta);
}

}  // namespace twincount
