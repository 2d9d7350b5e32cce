#pragma once

#include <vector>

#include "dcg/backbone.hpp"
#include "dcg/nn.hpp"

namespace dcg {

enum class DominantRule { PaperLiteral, InverseUncertainty };

// Dominant-modality choice for guidance fusion: argmax over
// uncertainty x weight, ties broken by larger weight then N > T > R.
struct DominantSelection {
  Modality dominant = Modality::Rgb;
  std::vector<Modality> auxiliaries;  // the remaining present modalities, R < N < T
  std::array<double, 3> uncertainty{};
  std::array<double, 3> score{};
};

// Raw and processed (conv + saliency) discrepancy token sequences.
struct DiscrepancyVars {
  ad::Var raw;
  ad::Var processed;
};

// Population variance over K stochastic passes, averaged across embedding
// dimensions. Exposed separately so tests can feed explicit pass vectors.
double mean_pass_variance(const std::vector<Mat>& passes);

// Guidance fusion for unbalanced-quality samples.
class GfmModule {
 public:
  GfmModule() = default;
  GfmModule(nn::ParamStore& store, int dim, Rng& rng);

  // Monte-Carlo-dropout epistemic uncertainty of one modality: K stochastic
  // dropout passes over the class token, mean per-dimension population
  // variance. Throws ConfigError for passes < 2.
  static double epistemic_uncertainty(const TokenFeatures& tokens, int passes,
                                      double dropout_rate, Rng rng);

  static DominantSelection select_dominant(const std::array<double, 3>& uncertainty,
                                           const std::array<double, 3>& weights,
                                           const std::vector<Modality>& present,
                                           DominantRule rule = DominantRule::PaperLiteral);

  // d = F_dom - F_aux; processed = saliency-gated 1x1 conv of d.
  DiscrepancyVars discrepancy(ad::Graph& g, ad::Var f_dom, ad::Var f_aux) const;

  // F_dom + alpha_1 x d1 + alpha_2 x d2 (alphas broadcast over tokens;
  // zero-initialized so this starts as the identity). d2 may be invalid when
  // only one auxiliary exists.
  ad::Var amplify_dominant(ad::Graph& g, ad::Var f_dom, ad::Var d1_processed,
                           ad::Var d2_processed) const;

  // F_aux + softmax_token(cos(F_dom_en, F_aux)/sqrt(D)) x d_processed.
  ad::Var guide_auxiliary(ad::Graph& g, ad::Var f_dom_en, ad::Var f_aux,
                          ad::Var d_processed) const;

  // inter_j = conv(concat(F_j_en, F_dom_en)) per auxiliary; concat with
  // F_dom_en, project to D, return the class-token slice [1 x D].
  ad::Var fuse(ad::Graph& g, ad::Var f_dom_en,
               const std::vector<ad::Var>& aux_enhanced) const;

  nn::Linear disc_conv;            // per-token D -> D, zero bias
  nn::Param* sal_weight = nullptr; // [D x 1]
  nn::Param* sal_bias = nullptr;   // [1 x 1], zero
  nn::Param* alpha1 = nullptr;     // [1 x D], zero-initialized
  nn::Param* alpha2 = nullptr;     // [1 x D], zero-initialized
  nn::Linear inter_conv;           // per-token 2D -> D
  nn::Linear proj_two_aux;         // per-token 3D -> D
  nn::Linear proj_one_aux;         // per-token 2D -> D
};

}  // namespace dcg
