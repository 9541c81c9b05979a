#include "motionguide/denoiser.hpp"

#include <cmath>
#include <stdexcept>

#include "motionguide/ops.hpp"

namespace mg {

namespace {

Tensor proj_weight(long in, long out, Rng& rng) {
  return Tensor::randn({in, out}, rng, std::sqrt(1.0 / static_cast<double>(in)));
}

}  // namespace

Denoiser Denoiser::init(Rng rng) {
  Denoiser d;
  auto make_block = [&rng](long cin, long cout, int ksize, int stride, int out_pad,
                           bool transposed, bool embedded) {
    Block b;
    // conv kernels are (Cout,Cin,K,K); transposed kernels are (Cin,Cout,K,K)
    Shape kshape = transposed ? Shape{cin, cout, ksize, ksize} : Shape{cout, cin, ksize, ksize};
    long fan_in = cin * ksize * ksize;
    double gain = embedded ? 2.0 : 1.0;
    b.kernel = Tensor::randn(kshape, rng, std::sqrt(gain / static_cast<double>(fan_in)));
    b.bias = Tensor::zeros({cout});
    if (embedded) {
      b.time_w = proj_weight(kTime, cout, rng);
      b.time_b = Tensor::zeros({cout});
      b.cond_w = proj_weight(kCond, cout, rng);
      b.cond_b = Tensor::zeros({cout});
    }
    b.stride = stride;
    b.pad = (ksize - 1) / 2;
    b.out_pad = out_pad;
    b.transposed = transposed;
    b.embedded = embedded;
    return b;
  };
  d.enc_.push_back(make_block(1, 16, 3, 2, 0, false, true));    // 32 -> 16
  d.enc_.push_back(make_block(16, 32, 3, 2, 0, false, true));   // 16 -> 8
  d.enc_.push_back(make_block(32, 64, 3, 1, 0, false, true));   // 8 -> 8
  d.dec_.push_back(make_block(64, 32, 3, 1, 0, true, true));    // 8 -> 8
  d.dec_.push_back(make_block(32, 16, 3, 2, 1, true, true));    // 8 -> 16
  d.dec_.push_back(make_block(16, 1, 3, 2, 1, true, false));    // 16 -> 32, plain output
  return d;
}

Tensor Denoiser::time_embedding(const std::vector<int>& t) {
  const long B = static_cast<long>(t.size());
  const int half = kTime / 2;
  Tensor emb = Tensor::zeros({B, kTime});
  for (long i = 0; i < B; ++i) {
    double tv = static_cast<double>(t[static_cast<std::size_t>(i)]);
    for (int k = 0; k < half; ++k) {
      double freq = std::exp(-std::log(10000.0) * k / (half - 1));
      emb.array()[i * kTime + 2 * k] = std::sin(tv * freq);
      emb.array()[i * kTime + 2 * k + 1] = std::cos(tv * freq);
    }
  }
  return emb;
}

Tensor Denoiser::run_block(const Block& blk, const Tensor& x, const Tensor& temb,
                           const Tensor& cond) const {
  Tensor h = blk.transposed ? conv2d_transpose(x, blk.kernel, blk.stride, blk.pad, blk.out_pad)
                            : conv2d(x, blk.kernel, blk.stride, blk.pad);
  if (!blk.embedded) return add_chan(h, blk.bias);
  // Normalize before the shifts so time/cond information survives into silu.
  // Without this the activation scale tracks the input noise level and the
  // pooled encoder features become useless to the classifier at moderate t.
  h = group_norm(h, kNormGroups);
  h = add_chan(h, blk.bias);
  h = add_rowchan(h, linear(temb, blk.time_w, blk.time_b));
  h = add_rowchan(h, linear(cond, blk.cond_w, blk.cond_b));
  return silu(h);
}

Tensor Denoiser::encode(const Tensor& z, const Tensor& cond, const std::vector<int>& t) const {
  if (z.rank() != 4 || z.dim(1) != 1 || z.dim(2) != kImage || z.dim(3) != kImage)
    throw std::invalid_argument("Denoiser: latent must be (B,1,32,32), got " +
                                shape_str(z.shape()));
  if (cond.rank() != 2 || cond.dim(0) != z.dim(0) || cond.dim(1) != kCond)
    throw std::invalid_argument("Denoiser: condition must be (B,16), got " +
                                shape_str(cond.shape()));
  if (static_cast<long>(t.size()) != z.dim(0))
    throw std::invalid_argument("Denoiser: one timestep per sample required");
  Tensor temb = time_embedding(t);
  Tensor h = z;
  for (const Block& blk : enc_) h = run_block(blk, h, temb, cond);
  return h;
}

Tensor Denoiser::forward(const Tensor& z, const Tensor& cond, const std::vector<int>& t) const {
  Tensor temb = time_embedding(t);
  Tensor h = encode(z, cond, t);
  for (const Block& blk : dec_) h = run_block(blk, h, temb, cond);
  return h;
}

std::vector<Tensor> Denoiser::params() {
  std::vector<Tensor> out;
  auto push = [&out](Block& b) {
    out.push_back(b.kernel);
    out.push_back(b.bias);
    if (b.embedded) {
      out.push_back(b.time_w);
      out.push_back(b.time_b);
      out.push_back(b.cond_w);
      out.push_back(b.cond_b);
    }
  };
  for (Block& b : enc_) push(b);
  for (Block& b : dec_) push(b);
  return out;
}

namespace {
void push_named(std::vector<std::pair<std::string, Tensor>>& out, const std::string& prefix,
                const Denoiser::Block& b) {
  out.emplace_back(prefix + ".kernel", b.kernel);
  out.emplace_back(prefix + ".bias", b.bias);
  if (b.embedded) {
    out.emplace_back(prefix + ".time_w", b.time_w);
    out.emplace_back(prefix + ".time_b", b.time_b);
    out.emplace_back(prefix + ".cond_w", b.cond_w);
    out.emplace_back(prefix + ".cond_b", b.cond_b);
  }
}
}  // namespace

std::vector<std::pair<std::string, Tensor>> Denoiser::named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < enc_.size(); ++i)
    push_named(out, "enc" + std::to_string(i + 1), enc_[i]);
  for (std::size_t i = 0; i < dec_.size(); ++i)
    push_named(out, "dec" + std::to_string(i + 1), dec_[i]);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Denoiser::encoder_named_params() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (std::size_t i = 0; i < enc_.size(); ++i)
    push_named(out, "enc" + std::to_string(i + 1), enc_[i]);
  return out;
}

std::string Denoiser::encoder_fingerprint() const {
  return hash_hex(params_bytes(encoder_named_params()));
}

void Denoiser::set_requires_grad(bool v) {
  for (Tensor& p : params()) {
    p.set_requires_grad(v);
    if (!v) p.clear_grad();
  }
}

void Denoiser::save(const std::filesystem::path& dir, const json& extra_meta) const {
  Checkpoint ckpt;
  ckpt.params = named_params();
  ckpt.meta = extra_meta;
  ckpt.meta["kind"] = "denoiser";
  ckpt.meta["encoder_stage"] = "enc3";
  save_checkpoint(dir, ckpt);
}

Denoiser Denoiser::load(const std::filesystem::path& dir) {
  Checkpoint ckpt = load_checkpoint(dir);
  if (ckpt.meta.value("kind", "") != "denoiser")
    throw std::runtime_error("not a denoiser checkpoint: " + dir.string());
  Rng dummy = Rng::seeded(0);
  Denoiser d = init(dummy);
  auto expected = d.named_params();
  if (ckpt.params.size() != expected.size())
    throw std::runtime_error("denoiser checkpoint has " + std::to_string(ckpt.params.size()) +
                             " parameters, expected " + std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    auto& [name, tensor] = expected[i];
    auto& [got_name, got] = ckpt.params[i];
    if (got_name != name || got.shape() != tensor.shape())
      throw std::runtime_error("denoiser checkpoint mismatch at " + got_name);
    tensor.array() = got.array();
  }
  return d;
}

}  // namespace mg
