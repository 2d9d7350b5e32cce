#include "dcg/backbone.hpp"

#include <cmath>

namespace dcg {

VisionEncoder::VisionEncoder(nn::ParamStore& store, const EncoderConfig& config,
                             Rng& rng)
    : config_(config) {
  config_.validate();
  const int D = config_.embed_dim;
  const int in_dim = config_.patch_size * config_.patch_size * 3;
  const size_t before = store.all().size();

  patch_weight_ = &store.create("encoder.patch_embed.weight", in_dim, D);
  patch_bias_ = &store.create("encoder.patch_embed.bias", 1, D);
  cls_token_ = &store.create("encoder.cls_token", 1, D);
  pos_embed_ = &store.create("encoder.pos_embed", 1 + config_.num_patches(), D);
  nn::init_xavier(*patch_weight_, rng);
  nn::init_normal(*cls_token_, rng, 0.02);
  nn::init_normal(*pos_embed_, rng, 0.02);

  blocks_.resize(config_.depth);
  for (int l = 0; l < config_.depth; ++l) {
    const std::string prefix = "encoder.block" + std::to_string(l);
    blocks_[l].ln1 = nn::LayerNorm(store, prefix + ".ln1", D);
    blocks_[l].ln2 = nn::LayerNorm(store, prefix + ".ln2", D);
    blocks_[l].attn = nn::MultiHeadAttention(store, prefix + ".attn", D,
                                             config_.heads, rng);
    blocks_[l].mlp = nn::Mlp(store, prefix + ".mlp", D, D * config_.mlp_ratio, D, rng);
  }
  ln_final_ = nn::LayerNorm(store, "encoder.ln_final", D);

  for (size_t i = before; i < store.all().size(); ++i)
    owned_.push_back(store.all()[i].get());
}

ad::Var VisionEncoder::encode(ad::Graph& g, const Image& image, bool train_mode,
                              Rng* dropout_rng) const {
  if (image.h != config_.image_height || image.w != config_.image_width)
    throw ConfigError("encode: image dimensions do not match encoder config");
  if (image.c != 1 && image.c != 3)
    throw ConfigError("encode: channel count must be 1 or 3");
  if (!image.all_finite()) throw InputError("encode: non-finite input image");

  const int p = config_.patch_size;
  const int M = config_.num_patches();
  const int gw = config_.grid_w();

  // Flattened patches; single-channel inputs are replicated to 3 channels.
  Mat patches(M, p * p * 3);
  for (int t = 0; t < M; ++t) {
    const int gy = t / gw, gx = t % gw;
    int col = 0;
    for (int dy = 0; dy < p; ++dy)
      for (int dx = 0; dx < p; ++dx)
        for (int ch = 0; ch < 3; ++ch)
          patches(t, col++) =
              image.at(gy * p + dy, gx * p + dx, image.c == 1 ? 0 : ch);
  }

  const bool drop = train_mode && config_.dropout_rate > 0.0 && dropout_rng;
  ad::Var x = ad::add_rowvec(ad::matmul(g.constant(std::move(patches)),
                                        patch_weight_->use(g)),
                             patch_bias_->use(g));
  x = ad::concat_rows({cls_token_->use(g), x});
  x = ad::add(x, pos_embed_->use(g));

  for (const Block& blk : blocks_) {
    ad::Var normed = blk.ln1.apply(g, x);
    ad::Var attn_out = blk.attn.apply(g, normed, normed);
    if (drop) attn_out = ad::dropout(attn_out, config_.dropout_rate, *dropout_rng);
    x = ad::add(x, attn_out);
    ad::Var mlp_out = blk.mlp.apply(g, blk.ln2.apply(g, x));
    if (drop) mlp_out = ad::dropout(mlp_out, config_.dropout_rate, *dropout_rng);
    x = ad::add(x, mlp_out);
  }
  return ln_final_.apply(g, x);
}

TokenFeatures VisionEncoder::encode_features(const Image& image,
                                             Modality modality) const {
  ad::Graph g;
  ad::Var tokens = encode(g, image, /*train_mode=*/false, nullptr);
  const Mat& tv = g.val(tokens);
  TokenFeatures out;
  out.modality = modality;
  out.cls = Mat(1, tv.cols());
  for (int c = 0; c < tv.cols(); ++c) out.cls(0, c) = tv(0, c);
  out.patches = Mat(tv.rows() - 1, tv.cols());
  for (int r = 1; r < tv.rows(); ++r)
    for (int c = 0; c < tv.cols(); ++c) out.patches(r - 1, c) = tv(r, c);
  if (!out.cls.all_finite() || !out.patches.all_finite())
    throw InternalError("encode: non-finite token features");
  return out;
}

void VisionEncoder::set_frozen(bool frozen) {
  frozen_ = frozen;
  for (nn::Param* p : owned_) p->trainable = !frozen;
}

}  // namespace dcg
