#include "motionguide/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "motionguide/diffusion.hpp"
#include "motionguide/ops.hpp"
#include "motionguide/serialize.hpp"

namespace mg {

void TrainConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr))
    throw std::invalid_argument("TrainConfig: lr must be finite and > 0");
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"steps", steps},
          {"lr", lr},
          {"batch", batch},
          {"seed", seed},
          {"eval_every", eval_every}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const TrainConfig& defaults) {
  TrainConfig cfg = defaults;
  cfg.steps = j.value("steps", cfg.steps);
  cfg.lr = j.value("lr", cfg.lr);
  cfg.batch = j.value("batch", cfg.batch);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.eval_every = j.value("eval_every", cfg.eval_every);
  cfg.validate();
  return cfg;
}

double clip_global_norm(std::vector<Tensor>& params, double max_norm) {
  double sq = 0.0;
  for (Tensor& p : params)
    if (p.has_grad()) sq += p.grad_array().square().sum();
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    double scale = max_norm / norm;
    for (Tensor& p : params)
      if (p.has_grad()) {
        Eigen::ArrayXd g = p.grad_array() * scale;
        p.clear_grad();
        p.accumulate_grad(g);
      }
  }
  return norm;
}

void sgd_step(std::vector<Tensor>& params, double lr) {
  for (Tensor& p : params)
    if (p.has_grad()) p.array() -= lr * p.grad_array();
}

Tensor gather_rows(const Tensor& src, const std::vector<long>& idx) {
  const long N = src.dim(0);
  const long per = src.size() / N;
  Shape shape = src.shape();
  shape[0] = static_cast<long>(idx.size());
  Tensor out = Tensor::zeros(shape);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= N)
      throw std::invalid_argument("gather_rows: index " + std::to_string(idx[i]) +
                                  " out of range");
    out.array().segment(static_cast<long>(i) * per, per) =
        src.array().segment(idx[i] * per, per);
  }
  return out;
}

namespace {

constexpr double kClipNorm = 10.0;

// Adam with bias correction; moment buffers keyed by parameter order.
// Plain SGD at the standard lr sits on a plateau for hundreds of steps here,
// so adaptive scaling is what makes the short training budgets workable.
struct Adam {
  double lr;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int t = 0;
  std::vector<Eigen::ArrayXd> m, v;

  explicit Adam(double lr_in) : lr(lr_in) {}

  void step(std::vector<Tensor>& params) {
    if (m.empty()) {
      m.reserve(params.size());
      v.reserve(params.size());
      for (Tensor& p : params) {
        m.push_back(Eigen::ArrayXd::Zero(p.size()));
        v.push_back(Eigen::ArrayXd::Zero(p.size()));
      }
    }
    ++t;
    const double bc1 = 1.0 - std::pow(beta1, t);
    const double bc2 = 1.0 - std::pow(beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = params[i];
      if (!p.has_grad()) continue;
      const Eigen::ArrayXd& g = p.grad_array();
      m[i] = beta1 * m[i] + (1.0 - beta1) * g;
      v[i] = beta2 * v[i] + (1.0 - beta2) * g.square();
      p.array() -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + eps);
    }
  }
};

std::vector<long> seeded_permutation(long n, Rng rng) {
  std::vector<long> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0L);
  for (long i = n - 1; i > 0; --i) {
    long j = static_cast<long>(rng.uniform_int(static_cast<std::uint64_t>(i + 1)));
    std::swap(p[static_cast<std::size_t>(i)], p[static_cast<std::size_t>(j)]);
  }
  return p;
}

struct Split {
  std::vector<long> train;
  std::vector<long> heldout;
};

Split tail_split(long n, Rng rng, double frac = 0.1) {
  std::vector<long> perm = seeded_permutation(n, rng);
  long n_held = std::max<long>(1, static_cast<long>(std::floor(n * frac)));
  if (n_held >= n) n_held = n - 1;
  Split s;
  s.train.assign(perm.begin(), perm.end() - n_held);
  s.heldout.assign(perm.end() - n_held, perm.end());
  return s;
}

std::vector<long> draw_batch(const std::vector<long>& pool, int batch, Rng& rng) {
  std::vector<long> idx(static_cast<std::size_t>(batch));
  for (int i = 0; i < batch; ++i)
    idx[static_cast<std::size_t>(i)] =
        pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
  return idx;
}

void append_csv(const std::optional<std::filesystem::path>& path, const std::string& text) {
  if (!path) return;
  std::string existing;
  try {
    existing = read_text(*path);
  } catch (const std::exception&) {
  }
  write_text(*path, existing + text);
}

// Latents noised with frozen per-sample draws; reused for every evaluation.
struct FrozenEval {
  Tensor z_t;
  std::vector<int> t;
};

FrozenEval freeze_eval(const Tensor& z0, const std::vector<long>& idx,
                       const NoiseSchedule& sched, int t_max, Rng rng, Tensor* eps_out = nullptr) {
  Tensor z = gather_rows(z0, idx);
  const long B = z.dim(0);
  const long per = z.size() / B;
  FrozenEval ev;
  ev.t.resize(static_cast<std::size_t>(B));
  Tensor eps = Tensor::zeros(z.shape());
  for (long i = 0; i < B; ++i)
    ev.t[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(t_max + 1));
  for (long i = 0; i < z.size(); ++i) eps.array()[i] = rng.normal();
  ev.z_t = Tensor::zeros(z.shape());
  for (long i = 0; i < B; ++i) {
    int ti = ev.t[static_cast<std::size_t>(i)];
    ev.z_t.array().segment(i * per, per) =
        sched.sqrt_alpha_bar(ti) * z.array().segment(i * per, per) +
        sched.sqrt_one_minus_alpha_bar(ti) * eps.array().segment(i * per, per);
  }
  if (eps_out) *eps_out = eps;
  return ev;
}

}  // namespace

TrainResult train_denoiser(Denoiser& model, const DenoiseDataset& data,
                           const NoiseSchedule& sched, const TrainConfig& cfg,
                           const std::optional<std::filesystem::path>& loss_csv) {
  cfg.validate();
  const long N = data.z0.dim(0);
  if (N < 2) throw std::invalid_argument("train_denoiser: need at least 2 examples");
  if (data.cond.dim(0) != N)
    throw std::invalid_argument("train_denoiser: z0/cond row mismatch");

  Rng root = Rng::seeded(cfg.seed).split("train_denoiser");
  Split split = tail_split(N, root.split("split"));
  Rng batch_rng = root.split("batches");

  // Frozen held-out pass: fixed t and noise, so the curve measures the model.
  Tensor held_eps;
  FrozenEval held =
      freeze_eval(data.z0, split.heldout, sched, sched.T() - 1, root.split("heldout"), &held_eps);
  Tensor held_cond = gather_rows(data.cond, split.heldout);

  auto heldout_loss = [&]() {
    const long B = held.z_t.dim(0);
    double acc = 0.0;
    for (long lo = 0; lo < B; lo += 64) {
      long n = std::min<long>(64, B - lo);
      std::vector<long> idx(static_cast<std::size_t>(n));
      std::iota(idx.begin(), idx.end(), lo);
      Tensor zb = gather_rows(held.z_t, idx);
      Tensor cb = gather_rows(held_cond, idx);
      Tensor eb = gather_rows(held_eps, idx);
      std::vector<int> tb(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k)
        tb[k] = held.t[static_cast<std::size_t>(idx[k])];
      Tensor pred = model.forward(zb, cb, tb);
      acc += (pred.array() - eb.array()).square().sum();
    }
    return acc / static_cast<double>(held.z_t.size());
  };

  model.set_requires_grad(true);
  std::vector<Tensor> params = model.params();
  Adam opt(cfg.lr);
  TrainResult result;
  result.initial_heldout = heldout_loss();

  std::ostringstream csv;
  if (loss_csv && !std::filesystem::exists(*loss_csv)) csv << "step,loss,held_out_loss\n";

  double last_heldout = result.initial_heldout;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<long> idx = draw_batch(split.train, cfg.batch, batch_rng);
    Tensor z0_b = gather_rows(data.z0, idx);
    Tensor cond_b = gather_rows(data.cond, idx);
    DenoiseFn fn = [&](const Tensor& z_t, const std::vector<int>& t) {
      return model.forward(z_t, cond_b, t);
    };
    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      loss = denoising_loss(fn, z0_b, sched, batch_rng);
    }
    double lv = loss.value();
    if (!std::isfinite(lv)) {
      model.set_requires_grad(false);
      throw std::runtime_error("train_denoiser: diverged at step " + std::to_string(step) +
                               " (loss=" + std::to_string(lv) + "); lower the learning rate");
    }
    tape.backward(loss);
    clip_global_norm(params, kClipNorm);
    opt.step(params);
    for (Tensor& p : params) p.zero_grad();

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      last_heldout = heldout_loss();
      csv << step << "," << format_double(lv) << "," << format_double(last_heldout) << "\n";
    }
  }
  model.set_requires_grad(false);
  result.final_heldout = cfg.steps > 0 ? last_heldout : result.initial_heldout;
  result.steps_run = cfg.steps;
  append_csv(loss_csv, csv.str());
  return result;
}

TrainResult train_classifier(GuidanceClassifier& clf, const LabeledDataset& data,
                             const NoiseSchedule& sched, const TrainConfig& cfg,
                             const std::optional<std::filesystem::path>& loss_csv) {
  cfg.validate();
  const long N = data.z0.dim(0);
  if (static_cast<long>(data.labels.size()) != N)
    throw std::invalid_argument("train_classifier: z0/label row mismatch");
  long positives = 0;
  for (int y : data.labels) {
    if (y != 0 && y != 1)
      throw std::invalid_argument("train_classifier: labels must be 0 or 1");
    positives += y;
  }
  if (positives == 0 || positives == N)
    throw std::invalid_argument("train_classifier: dataset has a single class (" +
                                std::to_string(positives) + "/" + std::to_string(N) +
                                " positive); both classes are required");
  for (const auto& [name, p] : clf.encoder().encoder_named_params())
    if (p.requires_grad())
      throw std::invalid_argument("train_classifier: encoder parameter " + name +
                                  " is trainable; freeze the denoiser first");

  const std::string encoder_before = clf.encoder().encoder_fingerprint();

  Rng root = Rng::seeded(cfg.seed).split("train_classifier");
  Split split = tail_split(N, root.split("split"));
  Rng batch_rng = root.split("batches");

  // Held-out scoring at low noise: this is where guidance needs the verdict.
  FrozenEval held = freeze_eval(data.z0, split.heldout, sched, sched.T() / 4,
                                root.split("heldout"));
  std::vector<int> held_labels(split.heldout.size());
  for (std::size_t i = 0; i < split.heldout.size(); ++i)
    held_labels[i] = data.labels[static_cast<std::size_t>(split.heldout[i])];

  auto heldout_stats = [&](double* accuracy) {
    Tensor logits = clf.logits(held.z_t, held.t);
    double bce = 0.0;
    long correct = 0;
    for (long i = 0; i < logits.size(); ++i) {
      double l = logits[i];
      int y = held_labels[static_cast<std::size_t>(i)];
      double ls_pos = std::min(l, 0.0) - std::log1p(std::exp(-std::abs(l)));
      double ls_neg = std::min(-l, 0.0) - std::log1p(std::exp(-std::abs(l)));
      bce -= y ? ls_pos : ls_neg;
      correct += ((l > 0.0) == (y == 1)) ? 1 : 0;
    }
    if (accuracy) *accuracy = static_cast<double>(correct) / static_cast<double>(logits.size());
    return bce / static_cast<double>(logits.size());
  };

  std::vector<Tensor> params = clf.head_params();
  for (Tensor& p : params) p.set_requires_grad(true);
  Tensor w = params[0], b = params[1];

  // Pooled feature dimensions arrive on wildly different scales depending on
  // channel and noise level, which makes the raw head objective badly
  // conditioned. Train in a standardized parameterization (shift mu, scale
  // sig estimated once from the train split) and fold the result back into
  // (w, b) after every update; the artifact stays a plain linear head and
  // nothing downstream ever sees the calibration constants.
  const long n_feat = Denoiser::kFeatChannels;
  const long per = data.z0.size() / N;
  Eigen::ArrayXd mu = Eigen::ArrayXd::Zero(n_feat);
  Eigen::ArrayXd sig = Eigen::ArrayXd::Ones(n_feat);
  if (cfg.steps > 0) {
    Rng cal_rng = root.split("calibrate");
    const int rows = 512;
    std::vector<long> idx = draw_batch(split.train, rows, cal_rng);
    Tensor z0_c = gather_rows(data.z0, idx);
    std::vector<int> t_cal(static_cast<std::size_t>(rows));
    for (int i = 0; i < rows; ++i)
      t_cal[static_cast<std::size_t>(i)] = static_cast<int>(cal_rng.uniform_int(sched.T()));
    Tensor z_t = Tensor::zeros(z0_c.shape());
    for (long i = 0; i < rows; ++i) {
      int ti = t_cal[static_cast<std::size_t>(i)];
      double sa = sched.sqrt_alpha_bar(ti);
      double sn = sched.sqrt_one_minus_alpha_bar(ti);
      for (long k = 0; k < per; ++k)
        z_t.array()[i * per + k] = sa * z0_c.array()[i * per + k] + sn * cal_rng.normal();
    }
    Tensor f = clf.features(z_t, t_cal);
    for (long c = 0; c < n_feat; ++c) {
      double m = 0.0, sq = 0.0;
      for (long r = 0; r < rows; ++r) m += f.array()[r * n_feat + c];
      m /= rows;
      for (long r = 0; r < rows; ++r) {
        double d = f.array()[r * n_feat + c] - m;
        sq += d * d;
      }
      mu[c] = m;
      double s = std::sqrt(sq / rows);
      sig[c] = s > 1e-8 ? s : 1.0;
    }
  }

  // shadow parameters: w~ = sig .* w, b~ = b + mu . w (exact bijection)
  Tensor wt = Tensor::zeros({n_feat, 1});
  Tensor bt = Tensor::zeros({1});
  wt.array() = w.array() * sig;
  bt.array()[0] = b.array()[0] + (mu * w.array()).sum();
  std::vector<Tensor> shadow = {wt, bt};
  Adam opt(cfg.lr);

  TrainResult result;
  result.initial_heldout = heldout_stats(nullptr);

  std::ostringstream csv;
  if (loss_csv && !std::filesystem::exists(*loss_csv)) csv << "step,loss,held_out_loss\n";

  double last_heldout = result.initial_heldout;
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<long> idx = draw_batch(split.train, cfg.batch, batch_rng);
    Tensor z0_b = gather_rows(data.z0, idx);
    const long B = z0_b.dim(0);
    std::vector<int> t_vec(static_cast<std::size_t>(B));
    for (long i = 0; i < B; ++i)
      t_vec[static_cast<std::size_t>(i)] = static_cast<int>(batch_rng.uniform_int(sched.T()));
    Tensor z_t = Tensor::zeros(z0_b.shape());
    for (long i = 0; i < B; ++i) {
      int ti = t_vec[static_cast<std::size_t>(i)];
      double sa = sched.sqrt_alpha_bar(ti);
      double sn = sched.sqrt_one_minus_alpha_bar(ti);
      for (long k = 0; k < per; ++k)
        z_t.array()[i * per + k] = sa * z0_b.array()[i * per + k] + sn * batch_rng.normal();
    }
    Tensor y = Tensor::zeros({B, 1});
    Tensor y_inv = Tensor::zeros({B, 1});
    for (long i = 0; i < B; ++i) {
      int label = data.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];
      y.array()[i] = label;
      y_inv.array()[i] = 1 - label;
    }

    Tape tape;
    Tensor loss;
    {
      TapeScope scope(tape);
      Tensor logits = clf.logits(z_t, t_vec);
      Tensor ll = add(mul(y, log_sigmoid(logits)), mul(y_inv, log_sigmoid(scale(logits, -1.0))));
      loss = scale(sum(ll), -1.0 / static_cast<double>(B));
    }
    double lv = loss.value();
    if (!std::isfinite(lv))
      throw std::runtime_error("train_classifier: diverged at step " + std::to_string(step));
    tape.backward(loss);
    clip_global_norm(params, kClipNorm);
    opt.step(params);
    for (Tensor& p : params) p.zero_grad();

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      last_heldout = heldout_stats(nullptr);
      csv << step << "," << format_double(lv) << "," << format_double(last_heldout) << "\n";
    }
  }
  for (Tensor& p : params) {
    p.set_requires_grad(false);
    p.clear_grad();
  }
  result.final_heldout = cfg.steps > 0 ? last_heldout : result.initial_heldout;
  heldout_stats(&result.final_heldout_accuracy);
  result.steps_run = cfg.steps;
  append_csv(loss_csv, csv.str());

  if (clf.encoder().encoder_fingerprint() != encoder_before)
    throw std::logic_error("train_classifier: encoder bytes changed during training");
  return result;
}

double classifier_accuracy(const GuidanceClassifier& clf, const LabeledDataset& data,
                           const NoiseSchedule& sched, int t_max, std::uint64_t seed) {
  const long N = data.z0.dim(0);
  if (N == 0) throw std::invalid_argument("classifier_accuracy: empty dataset");
  if (t_max < 0 || t_max >= sched.T())
    throw std::invalid_argument("classifier_accuracy: t_max outside schedule");
  std::vector<long> all(static_cast<std::size_t>(N));
  std::iota(all.begin(), all.end(), 0L);
  FrozenEval ev = freeze_eval(data.z0, all, sched, t_max, Rng::seeded(seed).split("acc_eval"));
  long correct = 0;
  for (long lo = 0; lo < N; lo += 128) {
    long n = std::min<long>(128, N - lo);
    std::vector<long> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), lo);
    Tensor zb = gather_rows(ev.z_t, idx);
    std::vector<int> tb(idx.size());
    for (std::size_t k = 0; k < idx.size(); ++k) tb[k] = ev.t[static_cast<std::size_t>(idx[k])];
    Tensor logits = clf.logits(zb, tb);
    for (long i = 0; i < n; ++i) {
      int y = data.labels[static_cast<std::size_t>(lo + i)];
      if ((logits[i] > 0.0) == (y == 1)) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(N);
}

}  // namespace mg
