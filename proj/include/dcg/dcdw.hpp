#pragma once

#include <array>
#include <vector>

#include "dcg/backbone.hpp"
#include "dcg/nn.hpp"

namespace dcg {

// Per-sample confidence state over the present modalities. Slots of absent
// modalities are zero; `present` lists the participating modalities in
// fixed R < N < T order.
struct ConfidenceBundle {
  std::array<double, 3> mono{};       // M_i >= 0
  std::array<double, 3> holo{};       // H_i in [0,1]
  std::array<double, 3> co_belief{};  // C_i = M_i + H_i
  std::array<double, 3> weights{};    // softmax over co-beliefs, sums to 1
  std::vector<Modality> present;

  // Weight restricted to present modalities; absent slots are 0.
  double weight(Modality m) const { return weights[modality_index(m)]; }
};

// Closed-form holo-confidence over a positive mono triple:
// H_i = (sum of the other monos) / (sum of all monos). Throws InputError on
// an all-zero triple (callers substitute the uniform [2/3, 2/3, 2/3]).
std::array<double, 3> holo_confidence(const std::array<double, 3>& mono);

// Co-belief C = M + H and softmax weights, as a plain-value bundle.
ConfidenceBundle co_belief_weights(const std::array<double, 3>& mono,
                                   const std::array<double, 3>& holo);

// Dynamic confidence-based disentangling weighting: class-token-to-patch
// cross-attention feeds one confidence head per modality; holo-confidence
// rebalances the monos; softmax over co-beliefs yields routing weights.
class DcdwModule {
 public:
  DcdwModule() = default;
  DcdwModule(nn::ParamStore& store, int dim, int heads, Rng& rng);

  // Cross-attention with the class token as the single query and the patch
  // tokens as keys/values. tokens is the full [1+M x D] matrix.
  // Throws InputError when the patch sequence is empty.
  ad::Var attend_cls_to_patches(ad::Graph& g, ad::Var tokens) const;

  // Pre-softplus confidence logit of one modality head, [1 x 1].
  ad::Var confidence_logit(ad::Graph& g, ad::Var interaction, Modality m) const;

  // Mono-confidence M_i = softplus(confidence logit) >= 0.
  ad::Var mono_confidence(ad::Graph& g, ad::Var interaction, Modality m) const;

  struct GraphOut {
    std::vector<ad::Var> interaction;  // per present modality, [1 x D]
    std::vector<ad::Var> conf_logits;  // pre-softplus, [1 x 1] each
    std::vector<ad::Var> mono;         // [1 x 1] each
    std::vector<ad::Var> holo;         // [1 x 1] each
    ad::Var weights;                   // [1 x P]
    ConfidenceBundle bundle;           // plain values
  };

  // Full DCDW pass over the present modalities (|present| >= 2). The softmax
  // runs over the present set only.
  GraphOut apply(ad::Graph& g, const std::vector<ad::Var>& tokens,
                 const std::vector<Modality>& present) const;

  // Test hook: copies the Rgb head's parameters into the other two heads.
  void tie_heads_for_test();

  const nn::Mlp& head(Modality m) const { return heads_[modality_index(m)]; }

 private:
  nn::MultiHeadAttention cls_attn_;  // shared across modalities
  std::array<nn::Mlp, 3> heads_;     // dedicated phi_i per modality
};

}  // namespace dcg
