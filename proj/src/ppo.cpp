#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "alas/dsp.hpp"
#include "alas/train.hpp"

namespace alas::train {

using ad::Tensor;

TrainConfig make_train_config(const io::Config& c) {
  TrainConfig t;
  t.model = io::to_model_config(c);
  t.envc = io::to_env_config(c);
  t.task = c.get("run.task");
  t.seed = static_cast<uint64_t>(c.get_ll("run.seed"));

  t.stage1_iters = c.get_i("train.stage1_iters");
  t.stage2_iters = c.get_i("train.stage2_iters");
  t.stage3_iters = c.get_i("train.stage3_iters");
  t.stage1_episodes = c.get_i("train.stage1_episodes");
  t.stage1_batch = c.get_i("train.stage1_batch");

  t.lr = c.get_d("train.lr");
  t.gamma = c.get_d("train.gamma");
  t.gae_lambda = c.get_d("train.gae_lambda");
  t.clip_eps = c.get_d("train.clip_eps");
  t.entropy_coef = c.get_d("train.entropy_coef");
  t.value_coef = c.get_d("train.value_coef");
  t.rollout_steps = c.get_i("train.rollout_steps");
  t.minibatch = c.get_i("train.minibatch");
  t.ppo_epochs = c.get_i("train.ppo_epochs");
  t.max_grad_norm = c.get_d("train.max_grad_norm");

  t.lambda_quality = c.get_d("train.lambda_quality");
  t.lambda_disentangle = c.get_d("train.lambda_disentangle");
  t.lambda_mi = c.get_d("train.lambda_mi");
  t.lambda_r1 = c.get_d("train.lambda_r1");
  t.lambda_r2 = c.get_d("train.lambda_r2");
  t.lambda_r3 = c.get_d("train.lambda_r3");
  t.r3_as_written = c.get_b("train.r3_as_written");

  t.checkpoint_every = c.get_i("train.checkpoint_every");
  t.eval_every = c.get_i("train.eval_every");
  t.env_step_budget = c.get_i("env.step_budget");

  if (t.lambda_quality < 0 || t.lambda_disentangle < 0 || t.lambda_mi < 0 || t.lambda_r1 < 0 ||
      t.lambda_r2 < 0 || t.lambda_r3 < 0)
    throw std::runtime_error("train config: loss coefficients must be non-negative");
  if (t.stage1_iters < 0 || t.stage2_iters < 0 || t.stage3_iters < 0)
    throw std::runtime_error("train config: iteration counts must be non-negative");
  if (t.rollout_steps <= 0 || t.minibatch <= 0 || t.ppo_epochs <= 0 || t.stage1_batch <= 0)
    throw std::runtime_error("train config: batch geometry must be positive");
  return t;
}

void compute_gae(Rollout& r, double gamma, double lam) {
  if (r.T <= 0) throw std::runtime_error("gae: empty rollout");
  r.adv.assign(size_t(r.T), 0.f);
  r.ret.assign(size_t(r.T), 0.f);
  double acc = 0.0;
  for (int t = r.T - 1; t >= 0; --t) {
    double nonterm = r.done[size_t(t)] ? 0.0 : 1.0;
    double next_v = (t == r.T - 1) ? double(r.last_value) : double(r.value[size_t(t) + 1]);
    double delta = double(r.reward[size_t(t)]) + gamma * next_v * nonterm - double(r.value[size_t(t)]);
    acc = delta + gamma * lam * nonterm * acc;
    r.adv[size_t(t)] = float(acc);
    r.ret[size_t(t)] = float(acc + double(r.value[size_t(t)]));
  }
  double mean = 0.0;
  for (float a : r.adv) mean += a;
  mean /= r.T;
  double var = 0.0;
  for (float a : r.adv) var += (a - mean) * (a - mean);
  double stdev = std::sqrt(var / r.T);
  for (float& a : r.adv) a = float((a - mean) / (stdev + 1e-8));
}

namespace {

Tensor<float> flatten_steps(const Tensor<float>& z) {
  if (z.rank() == 3) return ad::merge_bt(z);
  if (z.rank() == 2) return z;
  throw std::runtime_error("fusion quality: representation batch must be rank 2 or 3");
}

// mean over rows of the squared L2 distance along the feature axis
Tensor<float> mean_sq_dist(const Tensor<float>& a, const Tensor<float>& b) {
  using namespace ad;
  return mean_all(sum_lastdim(square(sub(a, b))));
}

Tensor<float> unit_rows(const Tensor<float>& f) {
  using namespace ad;
  Tensor<float> sq = sum_lastdim(square(f));                              // [B]
  Tensor<float> inv = exp_(scale(log_(add_const(sq, 1e-8f)), -0.5f));     // 1/sqrt
  return mul_rows(f, inv);
}

}  // namespace

Tensor<float> compute_fusion_quality(const Tensor<float>& f_cross, const Tensor<float>& f_env,
                                     const Tensor<float>& f_self, const Tensor<float>& z_env,
                                     const Tensor<float>& z_self, double lambda_disentangle) {
  using namespace ad;
  Tensor<float> q = mean_sq_dist(f_cross, add(f_env, f_self));
  if (lambda_disentangle != 0.0) {
    if (!z_env.defined() || !z_self.defined())
      throw std::runtime_error("fusion quality: disentangle term needs both stream encodings");
    Tensor<float> mi = dsp::mi_estimate(flatten_steps(z_env), flatten_steps(z_self));
    q = add(q, scale(mi, float(lambda_disentangle)));
  }
  return q;
}

Tensor<float> fusion_diversity(const Tensor<float>& f_cross, const Tensor<float>& f_gate,
                               const Tensor<float>& f_moe, bool as_written) {
  using namespace ad;
  if (as_written) {
    Tensor<float> s = add(add(mean_sq_dist(f_cross, f_gate), mean_sq_dist(f_cross, f_moe)),
                          mean_sq_dist(f_gate, f_moe));
    return s;
  }
  Tensor<float> a = unit_rows(f_cross), b = unit_rows(f_gate), c = unit_rows(f_moe);
  return neg(add(add(mean_sq_dist(a, b), mean_sq_dist(a, c)), mean_sq_dist(b, c)));
}

Tensor<float> snapshot_anchor(ad::ParamStore<float>& ps, const io::Snapshot& snap,
                              const std::string& prefix) {
  using namespace ad;
  Tensor<float> acc;
  for (const auto& [name, vals] : snap) {
    if (name.rfind(prefix, 0) != 0) continue;
    Tensor<float>& p = ps.get(name);
    if (p.numel() != vals.size())
      throw std::runtime_error("snapshot anchor: size mismatch for " + name);
    Tensor<float> ref = Tensor<float>::from(vals, p.shape());
    Tensor<float> term = sum_all(square(sub(p, ref)));
    acc = acc.defined() ? add(acc, term) : term;
  }
  if (!acc.defined()) return Tensor<float>::zeros({1});
  return acc;
}

LossReport ppo_update(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                      const Rollout& ro, const PpoHyper& hp, optim::Adam<float>& opt,
                      Rng& shuffle_rng, const ExtraLoss& extra) {
  using namespace ad;
  if (ro.T <= 0) throw std::runtime_error("ppo update: empty rollout");
  if (ro.adv.size() != size_t(ro.T) || ro.ret.size() != size_t(ro.T))
    throw std::runtime_error("ppo update: advantages not computed");

  const int T = ro.T, W = ro.window, A = ro.action_dim;
  const size_t env_row = size_t(W) * size_t(ro.d_env);
  const size_t self_row = size_t(W) * size_t(ro.d_self);

  std::vector<int> order(static_cast<size_t>(T));
  for (int i = 0; i < T; ++i) order[size_t(i)] = i;

  LossReport rep;
  int updates = 0;
  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    for (int i = T - 1; i > 0; --i) std::swap(order[size_t(i)], order[shuffle_rng.uniform_int(i + 1)]);
    for (int lo = 0; lo < T; lo += hp.minibatch) {
      int B = std::min(hp.minibatch, T - lo);
      std::vector<float> be(size_t(B) * env_row), bs(size_t(B) * self_row);
      std::vector<float> ba(size_t(B) * size_t(A));
      std::vector<float> blogp(static_cast<size_t>(B)), badv(static_cast<size_t>(B)),
          bret(static_cast<size_t>(B));
      for (int b = 0; b < B; ++b) {
        int src = order[size_t(lo + b)];
        std::copy_n(ro.obs_env.data() + size_t(src) * env_row, env_row, be.data() + size_t(b) * env_row);
        std::copy_n(ro.obs_self.data() + size_t(src) * self_row, self_row,
                    bs.data() + size_t(b) * self_row);
        std::copy_n(ro.actions.data() + size_t(src) * size_t(A), size_t(A),
                    ba.data() + size_t(b) * size_t(A));
        blogp[size_t(b)] = ro.logp[size_t(src)];
        badv[size_t(b)] = ro.adv[size_t(src)];
        bret[size_t(b)] = ro.ret[size_t(src)];
      }

      Tensor<float> obs_env = Tensor<float>::from(std::move(be), {B, W, ro.d_env});
      Tensor<float> obs_self = Tensor<float>::from(std::move(bs), {B, W, ro.d_self});
      Tensor<float> actions = Tensor<float>::from(std::move(ba), {B, A});
      Tensor<float> logp_old = Tensor<float>::from(std::move(blogp), {B});
      Tensor<float> adv = Tensor<float>::from(std::move(badv), {B});
      Tensor<float> ret = Tensor<float>::from(std::move(bret), {B});

      auto out = model::policy_forward(ps, mcfg, obs_env, obs_self);
      Tensor<float> logp = model::gaussian_log_prob(out.mean, out.log_std, actions);
      Tensor<float> ratio = exp_(sub(logp, logp_old));
      Tensor<float> clipped = clamp(ratio, float(1.0 - hp.clip_eps), float(1.0 + hp.clip_eps));
      Tensor<float> surrogate = minimum(mul(ratio, adv), mul(clipped, adv));
      Tensor<float> policy_loss = neg(mean_all(surrogate));
      Tensor<float> value_loss = mean_all(square(sub(out.value, ret)));
      Tensor<float> entropy = model::gaussian_entropy(out.log_std);

      Tensor<float> loss = add(policy_loss, scale(value_loss, float(hp.value_coef)));
      loss = add(loss, scale(entropy, float(-hp.entropy_coef)));
      rep.policy += policy_loss.item();
      rep.value += value_loss.item();
      rep.entropy += entropy.item();
      rep.task += loss.item();
      if (extra) loss = add(loss, extra(out, rep));

      ps.zero_grad();
      backward(loss);
      rep.grad_norm += opt.step(ps);
      rep.total += loss.item();
      updates += 1;
    }
  }
  double inv = 1.0 / std::max(updates, 1);
  rep.policy *= inv;
  rep.value *= inv;
  rep.entropy *= inv;
  rep.task *= inv;
  rep.quality *= inv;
  rep.mi *= inv;
  rep.r1 *= inv;
  rep.r2 *= inv;
  rep.r3 *= inv;
  rep.total *= inv;
  rep.grad_norm *= inv;
  return rep;
}

}  // namespace alas::train
