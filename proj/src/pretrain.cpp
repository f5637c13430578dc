#include <algorithm>
#include <stdexcept>

#include "alas/train.hpp"

namespace alas::train {

using ad::Tensor;

namespace {

// scripted data stays short: long tails of a wandering random policy add
// bulk without adding variety
constexpr int kEpisodeCap = 150;
constexpr int kWindowStride = 2;
constexpr int kMaxWindows = 20000;

}  // namespace

WindowSet collect_pretrain_windows(const TrainConfig& cfg) {
  if (cfg.stage1_episodes <= 0) throw std::runtime_error("pretrain: no episodes configured");

  WindowSet ws;
  ws.window = cfg.model.window;
  ws.d_env = env::Env::kEnvChannels;
  ws.d_self = env::Env::kSelfChannels;

  env::Env e(cfg.envc);
  auto spec = env::make_task(cfg.task);
  if (cfg.env_step_budget > 0) spec.step_budget = std::min(spec.step_budget, cfg.env_step_budget);
  int cap = std::min(spec.step_budget, kEpisodeCap);

  env::ObsWindow win(cfg.model.window, env::Env::kRawChannels);
  auto layout = env::Env::obs_layout();
  Rng ep_seeds(cfg.seed, "stage1-episodes");
  Rng noise(cfg.seed, "stage1-noise");

  for (int ep = 0; ep < cfg.stage1_episodes && ws.n < kMaxWindows; ++ep) {
    bool scripted = ep % 2 == 0;
    auto obs = e.reset(spec, ep_seeds.next_u64());
    win.reset();
    win.push(obs);
    int pushes = 1;
    for (int t = 0; t < cap && !e.done() && ws.n < kMaxWindows; ++t) {
      std::array<double, 4> a{};
      if (scripted) {
        a = env::oracle_action(e);
        for (auto& v : a) v += noise.uniform(-0.3, 0.3);
      } else {
        for (auto& v : a) v = noise.uniform(-1.0, 1.0);
      }
      auto st = e.step(a);
      if (!st.done) {
        win.push(st.obs);
        pushes += 1;
        if (pushes % kWindowStride == 0) {
          auto [oe, os] = dsp::split_rows<float>(win.rows(), win.t(), layout);
          ws.env.insert(ws.env.end(), oe.begin(), oe.end());
          ws.self.insert(ws.self.end(), os.begin(), os.end());
          ws.n += 1;
        }
      }
    }
  }
  if (ws.n == 0) throw std::runtime_error("pretrain: collected no windows");
  return ws;
}

Tensor<float> pretrain_loss(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                            const Tensor<float>& obs_env, const Tensor<float>& obs_self,
                            LossReport& rep) {
  using namespace ad;
  Tensor<float> total;
  auto accumulate = [&](const Tensor<float>& t) {
    total = total.defined() ? add(total, t) : t;
  };

  if (mcfg.variant == "unified") {
    Tensor<float> raw = concat_lastdim(obs_env, obs_self);
    Tensor<float> z = model::conv_attn_encode(ps, mcfg, "uni.", raw);
    Tensor<float> recon = model::env_decode(ps, mcfg, z, "uni.");
    Tensor<float> l = mean_all(square(sub(recon, raw)));
    rep.env_recon = l.item();
    accumulate(l);
  } else if (mcfg.has_env()) {
    Tensor<float> z = model::env_encode(ps, mcfg, obs_env);
    Tensor<float> recon = model::env_decode(ps, mcfg, z);
    Tensor<float> l = mean_all(square(sub(recon, obs_env)));
    rep.env_recon = l.item();
    accumulate(l);
  }

  if (mcfg.has_self() && mcfg.variant != "unified" && obs_self.dim(1) >= 2) {
    Tensor<float> z = model::self_encode(ps, mcfg, obs_self);
    int T = z.dim(1);
    Tensor<float> acc;
    for (int t = 0; t + 1 < T; ++t) {
      Tensor<float> pred = model::self_predict(ps, select_axis1(z, t));
      Tensor<float> target = detach(select_axis1(z, t + 1));
      Tensor<float> l = mean_all(square(sub(pred, target)));
      acc = acc.defined() ? add(acc, l) : l;
    }
    Tensor<float> l_self = scale(acc, 1.0f / float(T - 1));
    rep.self_pred = l_self.item();
    accumulate(l_self);
  }

  if (!total.defined()) throw std::runtime_error("pretrain: variant has nothing to pretrain");
  return total;
}

}  // namespace alas::train
