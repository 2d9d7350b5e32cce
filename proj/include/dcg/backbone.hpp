#pragma once

#include <vector>

#include "dcg/image.hpp"
#include "dcg/nn.hpp"

namespace dcg {

struct EncoderConfig {
  int image_height = 64;
  int image_width = 32;
  int patch_size = 8;
  int embed_dim = 32;
  int depth = 2;
  int heads = 4;
  double dropout_rate = 0.1;
  int mlp_ratio = 4;

  int grid_h() const { return image_height / patch_size; }
  int grid_w() const { return image_width / patch_size; }
  int num_patches() const { return grid_h() * grid_w(); }

  void validate() const {
    if (image_height <= 0 || image_width <= 0 || patch_size <= 0)
      throw ConfigError("encoder: dimensions must be positive");
    if (image_height % patch_size != 0 || image_width % patch_size != 0)
      throw ConfigError("encoder: image dimensions must be divisible by patch size");
    if (embed_dim < 8) throw ConfigError("encoder: embed_dim must be >= 8");
    if (depth < 1) throw ConfigError("encoder: depth must be >= 1");
    if (heads < 1 || embed_dim % heads != 0)
      throw ConfigError("encoder: heads must divide embed_dim");
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw ConfigError("encoder: dropout_rate must be in [0,1)");
  }

  bool operator==(const EncoderConfig&) const = default;
};

// Encoder output: one class token plus the patch-token sequence.
struct TokenFeatures {
  Mat cls;      // [1 x D]
  Mat patches;  // [M x D]
  Modality modality = Modality::Rgb;
};

// Small pre-LN vision transformer with learned positional embeddings. One
// parameter set shared by all three modalities.
class VisionEncoder {
 public:
  VisionEncoder(nn::ParamStore& store, const EncoderConfig& config, Rng& rng);

  // Token matrix [1+M x D]; row 0 is the class token. Dropout is applied
  // only when train_mode is true and the configured rate is positive.
  ad::Var encode(ad::Graph& g, const Image& image, bool train_mode = false,
                 Rng* dropout_rng = nullptr) const;

  // Inference-mode convenience returning plain token features.
  TokenFeatures encode_features(const Image& image, Modality modality) const;

  // Freeze/unfreeze all encoder parameters (optimizer skips frozen ones).
  void set_frozen(bool frozen);
  bool frozen() const { return frozen_; }

  const EncoderConfig& config() const { return config_; }

 private:
  struct Block {
    nn::LayerNorm ln1, ln2;
    nn::MultiHeadAttention attn;
    nn::Mlp mlp;
  };

  EncoderConfig config_;
  nn::Param* patch_weight_ = nullptr;  // [p*p*3 x D]
  nn::Param* patch_bias_ = nullptr;    // [1 x D]
  nn::Param* cls_token_ = nullptr;     // [1 x D]
  nn::Param* pos_embed_ = nullptr;     // [1+M x D]
  std::vector<Block> blocks_;
  nn::LayerNorm ln_final_;
  std::vector<nn::Param*> owned_;  // for set_frozen
  bool frozen_ = false;
};

}  // namespace dcg
