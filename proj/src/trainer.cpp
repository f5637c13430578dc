#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include "alas/dsp.hpp"
#include "alas/train.hpp"

namespace alas::train {

using ad::Tensor;

namespace {

constexpr size_t kRecentEpisodes = 20;

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::string(buf);
}

// mean credit per skill kind over a set of finished episodes
struct SkillMeans {
  double follow = 0, carry = 0, climb = 0, sit = 0, lh = 0, time_s = 0;
};

SkillMeans credit_means(const std::deque<env::EpisodeResult>& eps,
                        const std::vector<env::Skill>& skills) {
  SkillMeans m;
  if (eps.empty()) return m;
  double acc[4] = {0, 0, 0, 0};
  int cnt[4] = {0, 0, 0, 0};
  for (const auto& r : eps) {
    for (size_t i = 0; i < skills.size(); ++i) {
      int k = int(skills[i]);
      acc[k] += r.per_skill_credit[i];
      cnt[k] += 1;
    }
    m.lh += r.sequence_success ? 1.0 : 0.0;
    m.time_s += r.sim_time_s;
  }
  auto rate = [&](env::Skill s) {
    int k = int(s);
    return cnt[k] ? acc[k] / cnt[k] : 0.0;
  };
  m.follow = rate(env::Skill::Follow);
  m.carry = rate(env::Skill::Carry);
  m.climb = rate(env::Skill::Climb);
  m.sit = rate(env::Skill::Sit);
  m.lh /= double(eps.size());
  m.time_s /= double(eps.size());
  return m;
}

}  // namespace

Trainer::Trainer(const io::Config& cfg, std::string out_dir)
    : raw_cfg_(cfg),
      cfg_(make_train_config(cfg)),
      out_dir_(std::move(out_dir)),
      env_(cfg_.envc),
      episode_seeds_(cfg_.seed, "episode-seeds"),
      action_rng_(cfg_.seed, "action-noise"),
      shuffle_rng_(cfg_.seed, "minibatch-shuffle") {
  if (cfg_.model.d_env != env::Env::kEnvChannels || cfg_.model.d_self != env::Env::kSelfChannels)
    throw std::runtime_error("trainer: model stream widths do not match the observation layout");
  model::init_params(ps_, cfg_.model, cfg_.seed);
  task_spec_ = env::make_task(cfg_.task);
  if (cfg_.env_step_budget > 0)
    task_spec_.step_budget = std::min(task_spec_.step_budget, cfg_.env_step_budget);
  win_ = std::make_unique<env::ObsWindow>(cfg_.model.window, env::Env::kRawChannels);
}

Trainer::~Trainer() = default;

void Trainer::push_record(IterRecord rec) {
  if (!out_dir_.empty()) {
    if (!metrics_.is_open()) {
      std::filesystem::create_directories(out_dir_);
      metrics_.open(out_dir_ + "/metrics.log", std::ios::trunc);
      if (!metrics_) throw std::runtime_error("cannot open metrics.log in " + out_dir_);
    }
    const auto& l = rec.loss;
    metrics_ << "iter " << rec.iter << " stage " << rec.stage << " env_recon " << g9(l.env_recon)
             << " self_pred " << g9(l.self_pred) << " policy " << g9(l.policy) << " value "
             << g9(l.value) << " entropy " << g9(l.entropy) << " task " << g9(l.task)
             << " quality " << g9(l.quality) << " mi " << g9(l.mi) << " r1 " << g9(l.r1) << " r2 "
             << g9(l.r2) << " r3 " << g9(l.r3) << " total " << g9(l.total) << " grad_norm "
             << g9(l.grad_norm) << " episodes " << rec.episodes << " follow " << g9(rec.follow)
             << " carry " << g9(rec.carry) << " climb " << g9(rec.climb) << " sit "
             << g9(rec.sit) << " lh " << g9(rec.lh) << " time " << g9(rec.mean_time_s) << "\n";
    metrics_.flush();
  }
  history_.push_back(std::move(rec));
}

void Trainer::write_checkpoint(const std::string& name, int stage, long long iter) {
  if (out_dir_.empty()) return;
  std::filesystem::create_directories(out_dir_);
  std::map<std::string, io::Snapshot> snaps;
  if (!snapshot_.empty()) snaps["stage1"] = snapshot_;
  io::save_checkpoint(out_dir_ + "/" + name, {raw_cfg_.hash(), stage, iter}, ps_, snaps);
}

void Trainer::ensure_env() {
  if (episode_open_) return;
  auto obs = env_.reset(task_spec_, episode_seeds_.next_u64());
  win_->reset();
  win_->push(obs);
  episode_open_ = true;
}

double Trainer::rolling_lh_success() const {
  if (recent_.empty()) return 0.0;
  double s = 0;
  for (const auto& r : recent_) s += r.sequence_success ? 1.0 : 0.0;
  return s / double(recent_.size());
}

io::Snapshot Trainer::pretrain_stage1() {
  auto t0 = std::chrono::steady_clock::now();
  auto ws = collect_pretrain_windows(cfg_);
  const int W = ws.window, de = ws.d_env, ds = ws.d_self;
  const size_t env_row = size_t(W) * size_t(de), self_row = size_t(W) * size_t(ds);

  optim::Adam<float> opt({cfg_.lr, 0.9, 0.999, 1e-8, cfg_.max_grad_norm});
  Rng shuffle(cfg_.seed, "stage1-shuffle");
  std::vector<int> order(size_t(ws.n));
  std::iota(order.begin(), order.end(), 0);
  size_t cursor = order.size();  // forces an initial shuffle

  for (int it = 0; it < cfg_.stage1_iters; ++it) {
    int B = std::min(cfg_.stage1_batch, ws.n);
    std::vector<float> be(size_t(B) * env_row), bs(size_t(B) * self_row);
    for (int b = 0; b < B; ++b) {
      if (cursor == order.size()) {
        for (size_t i = order.size() - 1; i > 0; --i)
          std::swap(order[i], order[size_t(shuffle.uniform_int(int(i) + 1))]);
        cursor = 0;
      }
      int src = order[cursor++];
      std::copy_n(ws.env.data() + size_t(src) * env_row, env_row, be.data() + size_t(b) * env_row);
      std::copy_n(ws.self.data() + size_t(src) * self_row, self_row,
                  bs.data() + size_t(b) * self_row);
    }
    Tensor<float> obs_env = Tensor<float>::from(std::move(be), {B, W, de});
    Tensor<float> obs_self = Tensor<float>::from(std::move(bs), {B, W, ds});

    IterRecord rec;
    rec.stage = 1;
    Tensor<float> loss = pretrain_loss(ps_, cfg_.model, obs_env, obs_self, rec.loss);
    ps_.zero_grad();
    ad::backward(loss);
    rec.loss.grad_norm = opt.step(ps_);
    rec.loss.total = loss.item();
    rec.iter = int(++global_iter_);
    push_record(std::move(rec));
  }

  snapshot_.clear();
  for (const char* pre : {"env.", "self.", "uni."})
    for (auto& [name, vals] : ps_.snapshot(pre)) snapshot_[name] = vals;
  completed_stage_ = std::max(completed_stage_, 1);
  write_checkpoint("ckpt_stage1.bin", 1, global_iter_);
  if (!out_dir_.empty() && timing_.is_open()) {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    timing_ << "stage 1 wall_s " << g9(secs) << "\n";
    timing_.flush();
  }
  return snapshot_;
}

Rollout Trainer::collect_rollout() {
  Rollout ro;
  ro.window = cfg_.model.window;
  ro.d_env = env::Env::kEnvChannels;
  ro.d_self = env::Env::kSelfChannels;
  ro.action_dim = cfg_.model.action_dim;
  const int T = cfg_.rollout_steps, W = ro.window, A = ro.action_dim;
  const auto layout = env::Env::obs_layout();
  ro.obs_env.reserve(size_t(T) * size_t(W) * size_t(ro.d_env));
  ro.obs_self.reserve(size_t(T) * size_t(W) * size_t(ro.d_self));
  ro.actions.reserve(size_t(T) * size_t(A));

  auto forward_window = [&]() {
    auto [oe, os] = dsp::split_rows<float>(win_->rows(), W, layout);
    Tensor<float> e = Tensor<float>::from(oe, {1, W, ro.d_env});
    Tensor<float> s = Tensor<float>::from(os, {1, W, ro.d_self});
    return model::policy_forward(ps_, cfg_.model, e, s);
  };

  for (int t = 0; t < T; ++t) {
    ensure_env();
    {
      auto [oe, os] = dsp::split_rows<float>(win_->rows(), W, layout);
      ro.obs_env.insert(ro.obs_env.end(), oe.begin(), oe.end());
      ro.obs_self.insert(ro.obs_self.end(), os.begin(), os.end());
    }
    auto out = forward_window();
    const auto& mean = out.mean.values();
    const auto& lst = out.log_std.values();

    std::array<double, 4> act{};
    double logp = 0;
    for (int i = 0; i < A; ++i) {
      double n = action_rng_.normal();
      double sd = std::exp(double(lst[size_t(i)]));
      act[size_t(i)] = double(mean[size_t(i)]) + sd * n;
      logp += -0.5 * n * n - double(lst[size_t(i)]) - 0.9189385332046727;
      ro.actions.push_back(float(act[size_t(i)]));
    }
    ro.logp.push_back(float(logp));
    ro.value.push_back(out.value.values()[0]);

    auto st = env_.step(act);
    ro.reward.push_back(float(st.reward));
    ro.done.push_back(st.done ? 1 : 0);
    if (st.done) {
      ro.finished.push_back(env_.result());
      recent_.push_back(env_.result());
      while (recent_.size() > kRecentEpisodes) recent_.pop_front();
      episode_open_ = false;
    } else {
      win_->push(st.obs);
    }
  }
  ro.T = T;
  if (ro.done.back()) {
    ro.last_value = 0.f;
  } else {
    ro.last_value = forward_window().value.values()[0];
  }
  return ro;
}

ExtraLoss Trainer::stage_extra(int stage) {
  using namespace ad;
  const bool unified = cfg_.model.variant == "unified";
  if (stage == 2) {
    if (!cfg_.model.blended_fusion() || cfg_.lambda_quality == 0.0) return {};
    double lq = cfg_.lambda_quality;
    double ld = unified ? 0.0 : cfg_.lambda_disentangle;
    return [this, lq, ld](const model::PolicyOutput<float>& out, LossReport& rep) {
      bool zok = out.z_env.defined() && out.z_self.defined();
      Tensor<float> q = compute_fusion_quality(out.f_cross, out.f_env, out.f_self, out.z_env,
                                               out.z_self, zok ? ld : 0.0);
      rep.quality += q.item();
      return scale(q, float(lq));
    };
  }
  if (stage == 3) {
    return [this, unified](const model::PolicyOutput<float>& out, LossReport& rep) {
      Tensor<float> acc = Tensor<float>::zeros({1});
      auto take = [&](const Tensor<float>& term, double lam, double& slot) {
        slot += term.item();
        if (lam != 0.0) acc = add(acc, scale(term, float(lam)));
      };
      if (!unified && out.z_env.defined() && out.z_self.defined())
        take(dsp::mi_estimate(merge_bt(out.z_env), merge_bt(out.z_self)), cfg_.lambda_mi, rep.mi);
      if (!snapshot_.empty()) {
        std::string env_pre = unified ? "uni." : "env.";
        take(snapshot_anchor(ps_, snapshot_, env_pre), cfg_.lambda_r1, rep.r1);
        take(snapshot_anchor(ps_, snapshot_, "self."), cfg_.lambda_r2, rep.r2);
      }
      if (cfg_.model.blended_fusion())
        take(fusion_diversity(out.f_cross, out.f_gate, out.f_moe, cfg_.r3_as_written),
             cfg_.lambda_r3, rep.r3);
      return acc;
    };
  }
  return {};
}

void Trainer::ppo_stage(int stage, int iters) {
  optim::Adam<float> opt({cfg_.lr, 0.9, 0.999, 1e-8, cfg_.max_grad_norm});
  PpoHyper hp;
  hp.clip_eps = cfg_.clip_eps;
  hp.entropy_coef = cfg_.entropy_coef;
  hp.value_coef = cfg_.value_coef;
  hp.epochs = cfg_.ppo_epochs;
  hp.minibatch = cfg_.minibatch;
  auto extra = stage_extra(stage);

  if (!out_dir_.empty() && !timing_.is_open()) {
    std::filesystem::create_directories(out_dir_);
    timing_.open(out_dir_ + "/timing.log", std::ios::trunc);
  }

  for (int i = 0; i < iters; ++i) {
    auto t0 = std::chrono::steady_clock::now();
    Rollout ro = collect_rollout();
    compute_gae(ro, cfg_.gamma, cfg_.gae_lambda);
    IterRecord rec;
    rec.loss = ppo_update(ps_, cfg_.model, ro, hp, opt, shuffle_rng_, extra);
    rec.stage = stage;
    rec.iter = int(++global_iter_);
    rec.episodes = int(ro.finished.size());
    SkillMeans m = credit_means(recent_, task_spec_.skills);
    rec.follow = m.follow;
    rec.carry = m.carry;
    rec.climb = m.climb;
    rec.sit = m.sit;
    rec.lh = m.lh;
    rec.mean_time_s = m.time_s;
    push_record(std::move(rec));

    if (timing_.is_open()) {
      double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      timing_ << "iter " << global_iter_ << " stage " << stage << " wall_s " << g9(secs) << "\n";
      timing_.flush();
    }
    if (cfg_.checkpoint_every > 0 && global_iter_ % cfg_.checkpoint_every == 0) {
      char name[40];
      std::snprintf(name, sizeof name, "ckpt_%06lld.bin", static_cast<long long>(global_iter_));
      write_checkpoint(name, stage, global_iter_);
    }
    if (success_stop_ > 0 && recent_.size() >= 10 && rolling_lh_success() >= success_stop_) break;
  }
}

void Trainer::train_stage2() {
  if (completed_stage_ < 1) throw std::runtime_error("stage 2: stage-1 snapshot missing");
  ps_.set_frozen_prefix("env.", true);
  ps_.set_frozen_prefix("self.", true);
  ps_.set_frozen_prefix("uni.", true);
  ppo_stage(2, cfg_.stage2_iters);
  completed_stage_ = std::max(completed_stage_, 2);
  write_checkpoint("ckpt_stage2.bin", 2, global_iter_);
}

void Trainer::train_stage3() {
  if (completed_stage_ < 2) throw std::runtime_error("stage 3: stages 1-2 incomplete");
  ps_.set_frozen_prefix("", false);
  ppo_stage(3, cfg_.stage3_iters);
  completed_stage_ = std::max(completed_stage_, 3);
  write_checkpoint("ckpt_stage3.bin", 3, global_iter_);
}

void Trainer::run(bool resume) {
  bool resumed = false;
  if (resume && !out_dir_.empty()) {
    for (int s : {2, 1}) {
      auto path = out_dir_ + "/ckpt_stage" + std::to_string(s) + ".bin";
      if (!std::filesystem::exists(path)) continue;
      std::map<std::string, io::Snapshot> snaps;
      auto meta = io::load_checkpoint(path, raw_cfg_.hash(), ps_, snaps);
      if (meta.stage != s)
        throw std::runtime_error("resume: " + path + " records stage " +
                                 std::to_string(meta.stage) + ", expected " + std::to_string(s));
      if (snaps.count("stage1")) snapshot_ = snaps["stage1"];
      completed_stage_ = s;
      global_iter_ = meta.iteration;
      resumed = true;
      break;
    }
  }
  if (!out_dir_.empty()) {
    std::filesystem::create_directories(out_dir_);
    raw_cfg_.save(out_dir_ + "/config.txt");
    auto mode = resumed ? std::ios::app : std::ios::trunc;
    if (!metrics_.is_open()) metrics_.open(out_dir_ + "/metrics.log", mode);
    if (!timing_.is_open()) timing_.open(out_dir_ + "/timing.log", mode);
  }
  if (completed_stage_ < 1) pretrain_stage1();
  if (completed_stage_ < 2) train_stage2();
  if (completed_stage_ < 3) train_stage3();
}

}  // namespace alas::train
