#include "dcg/dcdw.hpp"

#include <cmath>

#include "dcg/kernels.hpp"

namespace dcg {

std::array<double, 3> holo_confidence(const std::array<double, 3>& mono) {
  for (double m : mono)
    if (!(m >= 0.0)) throw InputError("holo_confidence: mono values must be >= 0");
  const double total = mono[0] + mono[1] + mono[2];
  if (total <= 0.0)
    throw InputError("holo_confidence: degenerate all-zero mono triple");
  return {(mono[1] + mono[2]) / total, (mono[0] + mono[2]) / total,
          (mono[0] + mono[1]) / total};
}

ConfidenceBundle co_belief_weights(const std::array<double, 3>& mono,
                                   const std::array<double, 3>& holo) {
  ConfidenceBundle b;
  b.mono = mono;
  b.holo = holo;
  for (int i = 0; i < 3; ++i) b.co_belief[i] = mono[i] + holo[i];
  Mat c(1, 3), w(1, 3);
  for (int i = 0; i < 3; ++i) c(0, i) = b.co_belief[i];
  kernels::softmax_rows(c.data(), w.data(), 1, 3);
  for (int i = 0; i < 3; ++i) b.weights[i] = w(0, i);
  b.present = {Modality::Rgb, Modality::Nir, Modality::Tir};
  return b;
}

DcdwModule::DcdwModule(nn::ParamStore& store, int dim, int heads, Rng& rng)
    : cls_attn_(store, "dcdw.cls_attn", dim, heads, rng) {
  for (Modality m : kAllModalities) {
    const std::string name = std::string("dcdw.head_") + modality_name(m);
    heads_[modality_index(m)] = nn::Mlp(store, name, dim, dim / 2, 1, rng);
  }
}

ad::Var DcdwModule::attend_cls_to_patches(ad::Graph& g, ad::Var tokens) const {
  const Mat& tv = g.val(tokens);
  if (tv.rows() < 2)
    throw InputError("attend_cls_to_patches: empty patch sequence");
  ad::Var cls = ad::slice_rows(tokens, 0, 1);
  ad::Var patches = ad::slice_rows(tokens, 1, tv.rows() - 1);
  return cls_attn_.apply(g, cls, patches);
}

ad::Var DcdwModule::confidence_logit(ad::Graph& g, ad::Var interaction,
                                     Modality m) const {
  return heads_[modality_index(m)].apply(g, interaction);
}

ad::Var DcdwModule::mono_confidence(ad::Graph& g, ad::Var interaction,
                                    Modality m) const {
  return ad::softplus(confidence_logit(g, interaction, m));
}

DcdwModule::GraphOut DcdwModule::apply(ad::Graph& g,
                                       const std::vector<ad::Var>& tokens,
                                       const std::vector<Modality>& present) const {
  if (present.size() < 2 || present.size() != tokens.size())
    throw InputError("dcdw: need >= 2 present modalities");
  GraphOut out;
  const int P = static_cast<int>(present.size());

  for (int i = 0; i < P; ++i) {
    ad::Var inter = attend_cls_to_patches(g, tokens[i]);
    ad::Var logit = confidence_logit(g, inter, present[i]);
    out.interaction.push_back(inter);
    out.conf_logits.push_back(logit);
    out.mono.push_back(ad::softplus(logit));
  }

  // H_i = (S - M_i) / S over the present set (softplus keeps S > 0).
  ad::Var mono_row = ad::concat_cols(out.mono);
  ad::Var total = ad::sum_all(mono_row);
  std::vector<ad::Var> co_belief;
  co_belief.reserve(P);
  for (int i = 0; i < P; ++i) {
    ad::Var holo_i = ad::div(ad::sub(total, out.mono[i]), total);
    out.holo.push_back(holo_i);
    co_belief.push_back(ad::add(out.mono[i], holo_i));
  }
  out.weights = ad::softmax_rows(ad::concat_cols(co_belief));

  out.bundle.present = present;
  for (int i = 0; i < P; ++i) {
    const int slot = modality_index(present[i]);
    out.bundle.mono[slot] = g.scalar(out.mono[i]);
    out.bundle.holo[slot] = g.scalar(out.holo[i]);
    out.bundle.co_belief[slot] = g.scalar(co_belief[i]);
    out.bundle.weights[slot] = g.val(out.weights)(0, i);
  }
  return out;
}

void DcdwModule::tie_heads_for_test() {
  for (Modality m : {Modality::Nir, Modality::Tir}) {
    nn::Mlp& dst = heads_[modality_index(m)];
    const nn::Mlp& src = heads_[modality_index(Modality::Rgb)];
    dst.fc1.weight->value = src.fc1.weight->value;
    dst.fc1.bias->value = src.fc1.bias->value;
    dst.fc2.weight->value = src.fc2.weight->value;
    dst.fc2.bias->value = src.fc2.bias->value;
  }
}

}  // namespace dcg
