#include "motionguide/classifier.hpp"

#include <cmath>
#include <stdexcept>

#include "motionguide/ops.hpp"

namespace mg {

GuidanceClassifier::GuidanceClassifier(const Denoiser* encoder, Rng rng) : encoder_(encoder) {
  if (!encoder) throw std::invalid_argument("GuidanceClassifier: encoder must not be null");
  head_w_ = Tensor::randn({Denoiser::kFeatChannels, 1}, rng,
                          std::sqrt(1.0 / static_cast<double>(Denoiser::kFeatChannels)));
  head_b_ = Tensor::zeros({1});
}

Tensor GuidanceClassifier::features(const Tensor& z_t, const std::vector<int>& t) const {
  const long B = z_t.dim(0);
  Tensor neutral = Tensor::zeros({B, Denoiser::kCond});
  Tensor feat = encoder_->encode(z_t, neutral, t);
  Tensor pooled = avg_pool2d(feat, static_cast<int>(Denoiser::kFeatSize));
  return reshape(pooled, {B, Denoiser::kFeatChannels});
}

Tensor GuidanceClassifier::logits(const Tensor& z_t, const std::vector<int>& t) const {
  return linear(features(z_t, t), head_w_, head_b_);
}

double GuidanceClassifier::logp(const Tensor& z_t, int t) const {
  if (z_t.rank() != 4 || z_t.dim(0) != 1)
    throw std::invalid_argument("GuidanceClassifier::logp: expected a single (1,1,32,32) latent, got " +
                                shape_str(z_t.shape()));
  Tensor l = logits(z_t, {t});
  return log_sigmoid(l).value();
}

Tensor GuidanceClassifier::input_grad(const Tensor& z_t, int t) const {
  std::vector<int> t_vec(static_cast<std::size_t>(z_t.dim(0)), t);
  return grad_wrt_input(
      [&](const Tensor& z) { return sum(log_sigmoid(logits(z, t_vec))); }, z_t);
}

std::vector<Tensor> GuidanceClassifier::head_params() { return {head_w_, head_b_}; }

std::vector<std::pair<std::string, Tensor>> GuidanceClassifier::named_params() const {
  return {{"head.w", head_w_}, {"head.b", head_b_}};
}

void GuidanceClassifier::save(const std::filesystem::path& dir, const json& extra_meta) const {
  Checkpoint ckpt;
  ckpt.params = named_params();
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "classifier";
  ckpt.meta["encoder_stage"] = "enc3";
  ckpt.meta["encoder_fingerprint"] = encoder_->encoder_fingerprint();
  save_checkpoint(dir, ckpt);
}

GuidanceClassifier GuidanceClassifier::load(const std::filesystem::path& dir,
                                            const Denoiser* encoder) {
  Checkpoint ckpt = load_checkpoint(dir);
  if (ckpt.meta.value("kind", "") != "classifier")
    throw std::runtime_error("not a classifier checkpoint: " + dir.string());
  GuidanceClassifier clf(encoder, Rng::seeded(0));
  std::string expect = encoder->encoder_fingerprint();
  std::string got = ckpt.meta.value("encoder_fingerprint", "");
  if (got != expect)
    throw std::runtime_error("classifier checkpoint " + dir.string() +
                             " was trained against encoder " + got +
                             ", but the loaded denoiser has encoder " + expect);
  for (auto& [name, tensor] : ckpt.params) {
    if (name == "head.w" && tensor.shape() == clf.head_w_.shape())
      clf.head_w_.array() = tensor.array();
    else if (name == "head.b" && tensor.shape() == clf.head_b_.shape())
      clf.head_b_.array() = tensor.array();
    else
      throw std::runtime_error("classifier checkpoint mismatch at " + name);
  }
  return clf;
}

}  // namespace mg
