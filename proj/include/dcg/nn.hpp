#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dcg/autodiff.hpp"
#include "dcg/common.hpp"
#include "dcg/mat.hpp"
#include "dcg/rng.hpp"

namespace dcg::nn {

// Named tensor with gradient and Adam state. Stable address for the lifetime
// of its ParamStore; the name is the checkpoint manifest key.
struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat adam_m, adam_v;
  bool trainable = true;  // false: persistent buffer (e.g. BN running stats)

  ad::Var use(ad::Graph& g) { return g.param(&value, &grad); }
  void zero_grad() { grad.fill(0.0); }
};

class ParamStore {
 public:
  Param& create(const std::string& name, int rows, int cols, bool trainable = true);
  Param* find(const std::string& name);
  const std::vector<std::unique_ptr<Param>>& all() const { return params_; }
  void zero_grad();
  size_t num_scalars(bool trainable_only = true) const;

 private:
  std::vector<std::unique_ptr<Param>> params_;
};

void init_uniform(Param& p, Rng& rng, double lo, double hi);
void init_normal(Param& p, Rng& rng, double stddev);
// Xavier/Glorot uniform for a [fan_in x fan_out] weight.
void init_xavier(Param& p, Rng& rng);

// y = x W + b, with x [R x in], W [in x out], b [1 x out].
class Linear {
 public:
  Linear() = default;
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
         bool zero_bias = true);
  ad::Var apply(ad::Graph& g, ad::Var x) const;
  Param* weight = nullptr;
  Param* bias = nullptr;
};

// Two-layer perceptron: in -> hidden -> out with GELU between.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParamStore& store, const std::string& name, int in, int hidden, int out,
      Rng& rng);
  ad::Var apply(ad::Graph& g, ad::Var x) const;
  Linear fc1, fc2;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParamStore& store, const std::string& name, int dim);
  ad::Var apply(ad::Graph& g, ad::Var x) const;
  Param* gamma = nullptr;
  Param* beta = nullptr;
};

// Multi-head attention with separate Q/K/V/output projections. Queries may
// come from a different token sequence than keys/values (cross-attention);
// self-attention passes the same Var twice.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& store, const std::string& name, int dim, int heads,
                     Rng& rng);
  ad::Var apply(ad::Graph& g, ad::Var queries, ad::Var keys_values) const;
  int heads() const { return heads_; }
  int dim() const { return dim_; }

  Linear q_proj, k_proj, v_proj, out_proj;

 private:
  int dim_ = 0;
  int heads_ = 0;
};

// Depthwise 3x3 convolution over a token grid; wraps the ad op with params.
class DepthwiseConv3x3 {
 public:
  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(ParamStore& store, const std::string& name, int channels,
                   Rng& rng);
  ad::Var apply(ad::Graph& g, ad::Var x, int gh, int gw) const;
  Param* kernel = nullptr;  // [C x 9]
  Param* bias = nullptr;    // [1 x C], zero-initialized
};

// BatchNorm1d feature neck: batch statistics in training, running averages
// at inference. Running stats live in non-trainable buffer params so they
// are checkpointed alongside weights.
class BnNeck {
 public:
  BnNeck() = default;
  BnNeck(ParamStore& store, const std::string& name, int dim, double momentum = 0.1);
  // Training mode: uses batch statistics and updates the running buffers.
  ad::Var apply_train(ad::Graph& g, ad::Var x);
  // Inference mode: per-row affine transform with running statistics.
  ad::Var apply_eval(ad::Graph& g, ad::Var x) const;
  Param* gamma = nullptr;
  Param* beta = nullptr;
  Param* run_mean = nullptr;  // buffer
  Param* run_var = nullptr;   // buffer

 private:
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

struct AdamConfig {
  double lr = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}
  void step(ParamStore& store);
  long t() const { return t_; }
  void set_t(long t) { t_ = t; }
  AdamConfig& config() { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace dcg::nn
