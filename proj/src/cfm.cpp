#include "dcg/cfm.hpp"

#include <algorithm>
#include <cmath>

namespace dcg {

InterMining::InterMining(nn::ParamStore& store, const std::string& name, int dim,
                         int heads, Rng& rng)
    : cross(store, name + ".cross", dim, heads, rng),
      expand1(store, name + ".expand1", dim, rng),
      expand2(store, name + ".expand2", dim, rng),
      gate1(store, name + ".gate1", dim, rng),
      gate2(store, name + ".gate2", dim, rng) {}

ad::Var InterMining::apply(ad::Graph& g, ad::Var f_m, ad::Var f_n, int gh,
                           int gw) const {
  const Mat& mv = g.val(f_m);
  const Mat& nv = g.val(f_n);
  if (mv.rows() != nv.rows() || mv.cols() != nv.cols())
    throw InputError("inter_mine: token-count mismatch");
  const int M = mv.rows() - 1;
  if (M != gh * gw) throw InputError("inter_mine: grid does not match patch count");

  ad::Var attended = cross.apply(g, f_m, f_n);
  ad::Var att_cls = ad::slice_rows(attended, 0, 1);
  ad::Var att_patches = ad::slice_rows(attended, 1, M);

  ad::Var b1 = expand1.apply(g, att_patches, gh, gw);
  ad::Var b2 = expand2.apply(g, att_patches, gh, gw);
  ad::Var b1p = ad::add(ad::tanh_op(gate1.apply(g, b1, gh, gw)), b1);
  ad::Var b2p = ad::add(ad::tanh_op(gate2.apply(g, b2, gh, gw)), b2);

  ad::Var out_patches = ad::add(ad::mul(b1p, b2p), ad::slice_rows(f_n, 1, M));
  ad::Var out_cls = ad::add(att_cls, ad::slice_rows(f_n, 0, 1));
  return ad::concat_rows({out_cls, out_patches});
}

CfmModule::CfmModule(nn::ParamStore& store, int dim, int heads, Rng& rng,
                     double tau_init)
    : mining(store, "cfm.mining", dim, heads, rng),
      fuse_pair(store, "cfm.fuse_pair", 2 * dim, dim, dim, rng),
      fuse_all(store, "cfm.fuse_all", 6 * dim, dim, dim, rng) {
  ret_weight = &store.create("cfm.retention.weight", 3, 1);
  ret_bias = &store.create("cfm.retention.bias", 1, 1);
  // Zero weights + logit bias: tau starts exactly at tau_init and becomes
  // input-dependent only as the head trains.
  ret_bias->value(0, 0) = std::log(tau_init / (1.0 - tau_init));
}

double CfmModule::retention_threshold(const std::array<double, 3>& weights) const {
  std::array<double, 3> sorted = weights;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  double z = ret_bias->value(0, 0);
  for (int i = 0; i < 3; ++i) z += ret_weight->value(i, 0) * sorted[i];
  return 1.0 / (1.0 + std::exp(-z));
}

RetentionDecision CfmModule::select_retained(const std::array<double, 3>& weights,
                                             double tau,
                                             const std::vector<Modality>& present) {
  if (present.size() < 2)
    throw InputError("select_retained: need >= 2 present modalities");
  RetentionDecision d;
  d.tau = tau;
  std::vector<Modality> kept;
  for (Modality m : present)
    if (weights[modality_index(m)] >= tau) kept.push_back(m);

  if (kept.size() < 2) {
    // Fallback: top-2 by weight, ties resolved by the fixed N > T > R order.
    std::vector<Modality> ranked = present;
    std::sort(ranked.begin(), ranked.end(), [&](Modality a, Modality b) {
      const double wa = weights[modality_index(a)];
      const double wb = weights[modality_index(b)];
      if (wa != wb) return wa > wb;
      return modality_tiebreak_rank(a) < modality_tiebreak_rank(b);
    });
    kept.assign(ranked.begin(), ranked.begin() + 2);
  }

  std::sort(kept.begin(), kept.end(),
            [](Modality a, Modality b) { return modality_index(a) < modality_index(b); });
  d.retained = kept;
  for (Modality m : present)
    if (std::find(kept.begin(), kept.end(), m) == kept.end())
      d.discarded.push_back(m);
  return d;
}

RetentionDecision CfmModule::decide(const ConfidenceBundle& bundle) const {
  const double tau = retention_threshold(bundle.weights);
  return select_retained(bundle.weights, tau, bundle.present);
}

ad::Var CfmModule::fuse_retained(ad::Graph& g, const std::vector<ad::Var>& tokens,
                                 const std::vector<Modality>& present,
                                 const RetentionDecision& decision, int gh,
                                 int gw) const {
  auto token_of = [&](Modality m) -> ad::Var {
    for (size_t i = 0; i < present.size(); ++i)
      if (present[i] == m) return tokens[i];
    throw InternalError("cfm: retained modality has no tokens");
  };
  const auto& kept = decision.retained;
  if (kept.size() != 2 && kept.size() != 3)
    throw InternalError("cfm: retention floor violated");

  // All ordered pairs in lexicographic (m, n) order.
  std::vector<ad::Var> mined_cls;
  for (Modality m : kept)
    for (Modality n : kept) {
      if (m == n) continue;
      ad::Var mined = mining.apply(g, token_of(m), token_of(n), gh, gw);
      mined_cls.push_back(ad::slice_rows(mined, 0, 1));
    }
  ad::Var cat = ad::concat_cols(mined_cls);
  return kept.size() == 2 ? fuse_pair.apply(g, cat) : fuse_all.apply(g, cat);
}

}  // namespace dcg
