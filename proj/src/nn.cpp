#include "dcg/nn.hpp"

#include <cmath>

namespace dcg::nn {

Param& ParamStore::create(const std::string& name, int rows, int cols,
                          bool trainable) {
  if (find(name) != nullptr)
    throw InternalError("duplicate parameter name: " + name);
  auto p = std::make_unique<Param>();
  p->name = name;
  p->value = Mat(rows, cols);
  p->grad = Mat(rows, cols);
  p->trainable = trainable;
  if (trainable) {
    p->adam_m = Mat(rows, cols);
    p->adam_v = Mat(rows, cols);
  }
  params_.push_back(std::move(p));
  return *params_.back();
}

Param* ParamStore::find(const std::string& name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

size_t ParamStore::num_scalars(bool trainable_only) const {
  size_t n = 0;
  for (const auto& p : params_)
    if (!trainable_only || p->trainable) n += p->value.size();
  return n;
}

void init_uniform(Param& p, Rng& rng, double lo, double hi) {
  for (size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.uniform(lo, hi);
}

void init_normal(Param& p, Rng& rng, double stddev) {
  for (size_t i = 0; i < p.value.size(); ++i) p.value[i] = rng.normal(0.0, stddev);
}

void init_xavier(Param& p, Rng& rng) {
  const double r = std::sqrt(6.0 / (p.value.rows() + p.value.cols()));
  init_uniform(p, rng, -r, r);
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
               bool zero_bias) {
  weight = &store.create(name + ".weight", in, out);
  bias = &store.create(name + ".bias", 1, out);
  init_xavier(*weight, rng);
  if (!zero_bias) init_uniform(*bias, rng, -0.01, 0.01);
}

ad::Var Linear::apply(ad::Graph& g, ad::Var x) const {
  return ad::add_rowvec(ad::matmul(x, weight->use(g)), bias->use(g));
}

Mlp::Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out,
         Rng& rng)
    : fc1(store, name + ".fc1", in, hidden, rng),
      fc2(store, name + ".fc2", hidden, out, rng) {}

ad::Var Mlp::apply(ad::Graph& g, ad::Var x) const {
  return fc2.apply(g, ad::gelu(fc1.apply(g, x)));
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim) {
  gamma = &store.create(name + ".gamma", 1, dim);
  beta = &store.create(name + ".beta", 1, dim);
  gamma->value.fill(1.0);
}

ad::Var LayerNorm::apply(ad::Graph& g, ad::Var x) const {
  return ad::layernorm_rows(x, gamma->use(g), beta->use(g));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& name,
                                       int dim, int heads, Rng& rng)
    : q_proj(store, name + ".q", dim, dim, rng),
      k_proj(store, name + ".k", dim, dim, rng),
      v_proj(store, name + ".v", dim, dim, rng),
      out_proj(store, name + ".out", dim, dim, rng),
      dim_(dim),
      heads_(heads) {
  if (dim % heads != 0) throw ConfigError("attention dim must be divisible by heads");
}

ad::Var MultiHeadAttention::apply(ad::Graph& g, ad::Var queries,
                                  ad::Var keys_values) const {
  const int dh = dim_ / heads_;
  ad::Var q = q_proj.apply(g, queries);
  ad::Var k = k_proj.apply(g, keys_values);
  ad::Var v = v_proj.apply(g, keys_values);
  std::vector<ad::Var> head_outs;
  head_outs.reserve(heads_);
  const double scaling = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads_; ++h) {
    ad::Var qh = ad::slice_cols(q, h * dh, dh);
    ad::Var kh = ad::slice_cols(k, h * dh, dh);
    ad::Var vh = ad::slice_cols(v, h * dh, dh);
    ad::Var scores = ad::scale(ad::matmul_nt(qh, kh), scaling);
    ad::Var attn = ad::softmax_rows(scores);
    head_outs.push_back(ad::matmul(attn, vh));
  }
  ad::Var merged = heads_ == 1 ? head_outs[0] : ad::concat_cols(head_outs);
  return out_proj.apply(g, merged);
}

DepthwiseConv3x3::DepthwiseConv3x3(ParamStore& store, const std::string& name,
                                   int channels, Rng& rng) {
  kernel = &store.create(name + ".kernel", channels, 9);
  bias = &store.create(name + ".bias", 1, channels);
  // Fan-in of a depthwise 3x3 tap is 9.
  const double r = std::sqrt(1.0 / 9.0);
  init_uniform(*kernel, rng, -r, r);
}

ad::Var DepthwiseConv3x3::apply(ad::Graph& g, ad::Var x, int gh, int gw) const {
  return ad::dwconv3x3(x, kernel->use(g), bias->use(g), gh, gw);
}

BnNeck::BnNeck(ParamStore& store, const std::string& name, int dim, double momentum)
    : momentum_(momentum) {
  gamma = &store.create(name + ".gamma", 1, dim);
  beta = &store.create(name + ".beta", 1, dim);
  run_mean = &store.create(name + ".run_mean", 1, dim, /*trainable=*/false);
  run_var = &store.create(name + ".run_var", 1, dim, /*trainable=*/false);
  gamma->value.fill(1.0);
  run_var->value.fill(1.0);
}

ad::Var BnNeck::apply_train(ad::Graph& g, ad::Var x) {
  Mat mu, var;
  ad::Var y = ad::batchnorm_train(x, gamma->use(g), beta->use(g), eps_, &mu, &var);
  for (int c = 0; c < mu.cols(); ++c) {
    run_mean->value(0, c) =
        (1.0 - momentum_) * run_mean->value(0, c) + momentum_ * mu(0, c);
    run_var->value(0, c) =
        (1.0 - momentum_) * run_var->value(0, c) + momentum_ * var(0, c);
  }
  return y;
}

ad::Var BnNeck::apply_eval(ad::Graph& g, ad::Var x) const {
  const int dim = run_mean->value.cols();
  // Fold running stats into a per-column affine map.
  Mat scale_row(1, dim), shift_row(1, dim);
  for (int c = 0; c < dim; ++c) {
    const double inv = 1.0 / std::sqrt(run_var->value(0, c) + eps_);
    scale_row(0, c) = inv;
    shift_row(0, c) = -run_mean->value(0, c) * inv;
  }
  ad::Var xhat = ad::add_rowvec(ad::mul_rowvec(x, g.constant(scale_row)),
                                g.constant(shift_row));
  return ad::add_rowvec(ad::mul_rowvec(xhat, gamma->use(g)), beta->use(g));
}

void Adam::step(ParamStore& store) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (auto& p : store.all()) {
    if (!p->trainable) continue;
    for (size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad[i];
      if (cfg_.weight_decay != 0.0) g += cfg_.weight_decay * p->value[i];
      p->adam_m[i] = cfg_.beta1 * p->adam_m[i] + (1.0 - cfg_.beta1) * g;
      p->adam_v[i] = cfg_.beta2 * p->adam_v[i] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = p->adam_m[i] / bc1;
      const double vhat = p->adam_v[i] / bc2;
      p->value[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

}  // namespace dcg::nn
