#pragma once

#include <vector>

#include "dcg/dcdw.hpp"
#include "dcg/nn.hpp"

namespace dcg {

// Outcome of the modality retention mechanism. At least two modalities are
// always retained; retained and discarded partition the present set.
struct RetentionDecision {
  double tau = 0.0;
  std::vector<Modality> retained;   // fixed R < N < T order
  std::vector<Modality> discarded;  // fixed R < N < T order
};

// Bidirectional pairwise mining: cross-attention from the querying modality
// into the target, a channel-doubling depthwise 3x3 over the patch grid
// split into two tanh-gated branches, branch product, then a residual onto
// the target tokens. The class token bypasses the convolutions and rejoins
// with a plain residual.
class InterMining {
 public:
  InterMining() = default;
  InterMining(nn::ParamStore& store, const std::string& name, int dim, int heads,
              Rng& rng);

  // F_m are the querying tokens, F_n the mined target; both [1+M x D].
  ad::Var apply(ad::Graph& g, ad::Var f_m, ad::Var f_n, int gh, int gw) const;

  nn::MultiHeadAttention cross;
  nn::DepthwiseConv3x3 expand1, expand2;  // channel-doubling as two parallel DW convs
  nn::DepthwiseConv3x3 gate1, gate2;
};

// Collaboration fusion for balanced-quality samples.
class CfmModule {
 public:
  CfmModule() = default;
  CfmModule(nn::ParamStore& store, int dim, int heads, Rng& rng,
            double tau_init = 0.25);

  // tau = sigmoid(linear(sorted weight vector)). Plain-valued: tau feeds only
  // the hard retention rule. The weight slots of absent modalities are zero.
  double retention_threshold(const std::array<double, 3>& weights) const;

  // Hard retention rule over the present set: discard w_m < tau, keep at
  // least two by falling back to the top-2 by weight (ties prefer N > T > R).
  static RetentionDecision select_retained(const std::array<double, 3>& weights,
                                           double tau,
                                           const std::vector<Modality>& present);

  RetentionDecision decide(const ConfidenceBundle& bundle) const;

  // Mines every ordered pair of retained modalities and fuses the mined
  // class tokens through the arity-matched MLP. tokens runs parallel to
  // present. Requires 2 or 3 retained modalities.
  ad::Var fuse_retained(ad::Graph& g, const std::vector<ad::Var>& tokens,
                        const std::vector<Modality>& present,
                        const RetentionDecision& decision, int gh, int gw) const;

  InterMining mining;
  nn::Mlp fuse_pair;  // 2 mined class tokens  (2 retained)
  nn::Mlp fuse_all;   // 6 mined class tokens  (3 retained)
  nn::Param* ret_weight = nullptr;  // [3 x 1]
  nn::Param* ret_bias = nullptr;    // [1 x 1], initialized to logit(tau_init)
};

}  // namespace dcg
