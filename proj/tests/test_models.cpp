#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "motionguide/classifier.hpp"
#include "motionguide/denoiser.hpp"
#include "motionguide/ops.hpp"

using namespace mg;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir(const char* name) {
  fs::path p = fs::temp_directory_path() / "mg_model_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor toy_latents(long batch, std::uint64_t seed) {
  Rng rng = Rng::seeded(seed);
  return Tensor::randn({batch, 1, Denoiser::kImage, Denoiser::kImage}, rng);
}
}  // namespace

TEST_CASE("denoiser forward and encode shapes") {
  Denoiser model = Denoiser::init(Rng::seeded(1));
  Tensor z = toy_latents(3, 2);
  Rng crng = Rng::seeded(3);
  Tensor cond = Tensor::randn({3, Denoiser::kCond}, crng);
  std::vector<int> t = {0, 50, 199};

  Tensor eps = model.forward(z, cond, t);
  CHECK(eps.shape() == z.shape());
  Tensor feat = model.encode(z, cond, t);
  CHECK(feat.shape() == Shape{3, Denoiser::kFeatChannels, Denoiser::kFeatSize,
                              Denoiser::kFeatSize});

  CHECK_THROWS(model.forward(Tensor::zeros({3, 2, 32, 32}), cond, t));
  CHECK_THROWS(model.forward(z, Tensor::zeros({2, Denoiser::kCond}), t));
  CHECK_THROWS(model.forward(z, cond, {0, 50}));
}

TEST_CASE("rows are independent: batched forward equals per-sample forward") {
  Denoiser model = Denoiser::init(Rng::seeded(4));
  Tensor z = toy_latents(2, 5);
  Rng crng = Rng::seeded(6);
  Tensor cond = Tensor::randn({2, Denoiser::kCond}, crng);

  Tensor both = model.forward(z, cond, {10, 150});
  for (long i = 0; i < 2; ++i) {
    Tensor zi = Tensor::from({1, 1, 32, 32}, Eigen::ArrayXd(z.array().segment(i * 1024, 1024)));
    Tensor ci = Tensor::from({1, Denoiser::kCond},
                             Eigen::ArrayXd(cond.array().segment(i * Denoiser::kCond,
                                                                 Denoiser::kCond)));
    Tensor one = model.forward(zi, ci, {i == 0 ? 10 : 150});
    CHECK((one.array() - both.array().segment(i * 1024, 1024)).abs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("output depends on timestep and condition") {
  Denoiser model = Denoiser::init(Rng::seeded(7));
  Tensor z = toy_latents(1, 8);
  Rng crng = Rng::seeded(9);
  Tensor cond = Tensor::randn({1, Denoiser::kCond}, crng);
  Tensor a = model.forward(z, cond, {10});
  Tensor b = model.forward(z, cond, {190});
  CHECK((a.array() - b.array()).abs().maxCoeff() > 1e-6);
  Tensor other_cond = Tensor::randn({1, Denoiser::kCond}, crng);
  Tensor c = model.forward(z, other_cond, {10});
  CHECK((a.array() - c.array()).abs().maxCoeff() > 1e-6);
}

TEST_CASE("time embedding is sinusoidal and bounded") {
  Tensor emb = Denoiser::time_embedding({0, 7, 199});
  CHECK(emb.shape() == Shape{3, Denoiser::kTime});
  CHECK(emb.array().abs().maxCoeff() <= 1.0);
  // t = 0: sin rows 0, cos rows 1
  for (int k = 0; k < Denoiser::kTime / 2; ++k) {
    CHECK(emb[2 * k] == doctest::Approx(0.0));
    CHECK(emb[2 * k + 1] == doctest::Approx(1.0));
  }
  // distinct timesteps embed differently
  CHECK((emb.array().segment(Denoiser::kTime, Denoiser::kTime) !=
         emb.array().segment(2 * Denoiser::kTime, Denoiser::kTime)).any());
}

TEST_CASE("denoiser save/load round trips bit for bit") {
  fs::path dir = temp_dir("denoiser");
  Denoiser model = Denoiser::init(Rng::seeded(10));
  model.save(dir, {{"note", "test"}});
  Denoiser back = Denoiser::load(dir);

  auto a = model.named_params();
  auto b = back.named_params();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].first == b[i].first);
    CHECK((a[i].second.array() == b[i].second.array()).all());
  }
  // loaded model computes the same function
  Tensor z = toy_latents(1, 11);
  Tensor cond = Tensor::zeros({1, Denoiser::kCond});
  CHECK((model.forward(z, cond, {42}).array() == back.forward(z, cond, {42}).array()).all());

  CHECK_THROWS(Denoiser::load(dir / "missing"));
}

TEST_CASE("encoder fingerprint tracks encoder bytes only") {
  Denoiser model = Denoiser::init(Rng::seeded(12));
  std::string f0 = model.encoder_fingerprint();
  CHECK(f0 == model.encoder_fingerprint());  // stable

  // decoder-side change leaves the fingerprint alone
  auto named = model.named_params();
  for (auto& [name, tensor] : named)
    if (name.rfind("dec", 0) == 0 && name.find("kernel") != std::string::npos) {
      tensor.array()[0] += 1.0;
      break;
    }
  CHECK(model.encoder_fingerprint() == f0);

  // encoder-side change must move it
  for (auto& [name, tensor] : named)
    if (name.rfind("enc", 0) == 0 && name.find("kernel") != std::string::npos) {
      tensor.array()[0] += 1.0;
      break;
    }
  CHECK(model.encoder_fingerprint() != f0);
}

TEST_CASE("set_requires_grad flips every parameter") {
  Denoiser model = Denoiser::init(Rng::seeded(13));
  model.set_requires_grad(true);
  for (Tensor& p : model.params()) CHECK(p.requires_grad());
  model.set_requires_grad(false);
  for (Tensor& p : model.params()) {
    CHECK_FALSE(p.requires_grad());
    CHECK_FALSE(p.has_grad());
  }
}

TEST_CASE("classifier logits shape, logp sign, and head exposure") {
  Denoiser model = Denoiser::init(Rng::seeded(14));
  GuidanceClassifier clf(&model, Rng::seeded(15));
  Tensor z = toy_latents(4, 16);
  Tensor l = clf.logits(z, {0, 10, 100, 199});
  CHECK(l.shape() == Shape{4, 1});

  Tensor one = toy_latents(1, 17);
  double lp = clf.logp(one, 25);
  CHECK(lp < 0.0);  // log of a probability
  CHECK_THROWS(clf.logp(toy_latents(2, 18), 25));

  CHECK(clf.head_params().size() == 2);
  CHECK(clf.named_params()[0].first == "head.w");
  CHECK_THROWS(GuidanceClassifier(nullptr, Rng::seeded(0)));
}

TEST_CASE("classifier input gradient matches finite differences") {
  Denoiser model = Denoiser::init(Rng::seeded(19));
  GuidanceClassifier clf(&model, Rng::seeded(20));
  Tensor z = toy_latents(1, 21);
  int t = 60;
  Tensor g = clf.input_grad(z, t);
  REQUIRE(g.shape() == z.shape());

  Rng pick = Rng::seeded(22);
  const double h = 1e-5;
  for (int trial = 0; trial < 12; ++trial) {
    long i = static_cast<long>(pick.uniform_int(static_cast<std::uint64_t>(z.size())));
    double saved = z.array()[i];
    z.array()[i] = saved + h;
    double fp = clf.logp(z, t);
    z.array()[i] = saved - h;
    double fm = clf.logp(z, t);
    z.array()[i] = saved;
    double fd = (fp - fm) / (2 * h);
    CHECK(std::abs(g[i] - fd) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}) < 1e-3);
  }
}

TEST_CASE("input_grad rows are independent and parameters stay clean") {
  Denoiser model = Denoiser::init(Rng::seeded(23));
  GuidanceClassifier clf(&model, Rng::seeded(24));
  model.set_requires_grad(false);

  Tensor z = toy_latents(2, 25);
  Tensor g = clf.input_grad(z, 40);
  Tensor z0 = Tensor::from({1, 1, 32, 32}, Eigen::ArrayXd(z.array().segment(0, 1024)));
  Tensor g0 = clf.input_grad(z0, 40);
  CHECK((g.array().segment(0, 1024) - g0.array()).abs().maxCoeff() < 1e-12);

  for (Tensor& p : model.params()) CHECK_FALSE(p.has_grad());
  for (Tensor& p : clf.head_params()) CHECK_FALSE(p.has_grad());
}

TEST_CASE("classifier checkpoint binds to its encoder") {
  fs::path dir = temp_dir("classifier");
  Denoiser enc = Denoiser::init(Rng::seeded(26));
  GuidanceClassifier clf(&enc, Rng::seeded(27));
  clf.save(dir);

  GuidanceClassifier back = GuidanceClassifier::load(dir, &enc);
  Tensor z = toy_latents(1, 28);
  CHECK(back.logp(z, 12) == clf.logp(z, 12));

  Denoiser other = Denoiser::init(Rng::seeded(29));
  CHECK_THROWS(GuidanceClassifier::load(dir, &other));

  // a denoiser checkpoint is not a classifier checkpoint
  fs::path ddir = temp_dir("denoiser_as_classifier");
  enc.save(ddir);
  CHECK_THROWS(GuidanceClassifier::load(ddir, &enc));
  CHECK_THROWS(Denoiser::load(dir));
}
