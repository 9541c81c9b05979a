#pragma once

#include <string>
#include <utility>
#include <vector>

#include "motionguide/rng.hpp"
#include "motionguide/serialize.hpp"
#include "motionguide/tensor.hpp"

namespace mg {

// Small conditional noise predictor on (1,32,32) latents. Three strided conv
// blocks encode to an (64,8,8) feature map, three transposed-conv blocks
// decode back; every block except the output layer receives projected
// timestep and condition embeddings. The deepest encoder feature map is the
// stable intermediate other components build on.
class Denoiser {
 public:
  static constexpr int kCond = 16;
  static constexpr int kTime = 32;
  static constexpr long kImage = 32;
  static constexpr long kFeatChannels = 64;
  static constexpr long kFeatSize = 8;
  static constexpr int kNormGroups = 8;

  static Denoiser init(Rng rng);

  // z (B,1,32,32), cond (B,16), one timestep per sample. Returns predicted
  // noise with the input shape.
  Tensor forward(const Tensor& z, const Tensor& cond, const std::vector<int>& t) const;

  // Deepest encoder activation, (B,64,8,8).
  Tensor encode(const Tensor& z, const Tensor& cond, const std::vector<int>& t) const;

  std::vector<Tensor> params();
  std::vector<std::pair<std::string, Tensor>> named_params() const;
  std::vector<std::pair<std::string, Tensor>> encoder_named_params() const;
  std::string encoder_fingerprint() const;  // content hash of encoder bytes

  void set_requires_grad(bool v);

  void save(const std::filesystem::path& dir, const json& extra_meta = json::object()) const;
  static Denoiser load(const std::filesystem::path& dir);

  // Sinusoidal embedding, (B,kTime), constant w.r.t. the tape.
  static Tensor time_embedding(const std::vector<int>& t);

  struct Block {
    Tensor kernel, bias;
    Tensor time_w, time_b;
    Tensor cond_w, cond_b;
    int stride = 1;
    int pad = 1;
    int out_pad = 0;
    bool transposed = false;
    bool embedded = true;
  };

 private:
  Tensor run_block(const Block& blk, const Tensor& x, const Tensor& temb,
                   const Tensor& cond) const;

  std::vector<Block> enc_;
  std::vector<Block> dec_;
};

}  // namespace mg
