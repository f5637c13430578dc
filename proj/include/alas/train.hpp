#pragma once
#include <array>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "alas/checkpoint.hpp"
#include "alas/config.hpp"
#include "alas/env.hpp"
#include "alas/model.hpp"
#include "alas/optim.hpp"

// Three-stage training: representation pretraining on scripted data, fusion
// optimization with frozen encoders, then joint fine-tuning with preservation
// and diversity regularizers. PPO supplies the task loss throughout.

namespace alas::train {

struct TrainConfig {
  model::ModelConfig model;
  env::EnvConfig envc;
  std::string task = "lh1";
  uint64_t seed = 0;

  int stage1_iters = 200;
  int stage2_iters = 700;
  int stage3_iters = 1100;
  int stage1_episodes = 200;
  int stage1_batch = 64;

  double lr = 3e-4;
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int rollout_steps = 2048;
  int minibatch = 256;
  int ppo_epochs = 4;
  double max_grad_norm = 0.5;

  double lambda_quality = 0.1;
  double lambda_disentangle = 0.01;  // inside the fusion quality loss
  double lambda_mi = 0.01;           // standalone stage-3 term
  double lambda_r1 = 1e-3;
  double lambda_r2 = 1e-3;
  double lambda_r3 = 1e-4;
  bool r3_as_written = true;

  int checkpoint_every = 25;
  int eval_every = 25;
  int env_step_budget = 0;  // training-episode cap; 0 keeps the task default
};

TrainConfig make_train_config(const io::Config& c);

// ---- rollouts ----

struct Rollout {
  int T = 0;  // collected steps
  int window = 0, d_env = 0, d_self = 0, action_dim = 0;
  std::vector<float> obs_env;   // T x window x d_env
  std::vector<float> obs_self;  // T x window x d_self
  std::vector<float> actions;   // T x action_dim
  std::vector<float> logp, value, reward;
  std::vector<uint8_t> done;
  std::vector<float> adv, ret;  // filled by compute_gae
  float last_value = 0;         // bootstrap for a truncated final step
  std::vector<env::EpisodeResult> finished;
};

// GAE(gamma, lambda); advantages come out normalized to mean 0 / std 1,
// returns stay on the raw value scale
void compute_gae(Rollout& r, double gamma, double lam);

// ---- losses ----

struct LossReport {
  double env_recon = 0, self_pred = 0;
  double policy = 0, value = 0, entropy = 0, task = 0;
  double quality = 0, mi = 0, r1 = 0, r2 = 0, r3 = 0;
  double total = 0;
  double grad_norm = 0;
};

// ||f_cross - (f_env + f_self)||^2 averaged over rows, plus
// lambda * mi_estimate(z_env, z_self); z inputs may be [B,T,C] or [N,C] and
// may be left undefined when lambda is zero
ad::Tensor<float> compute_fusion_quality(const ad::Tensor<float>& f_cross,
                                         const ad::Tensor<float>& f_env,
                                         const ad::Tensor<float>& f_self,
                                         const ad::Tensor<float>& z_env,
                                         const ad::Tensor<float>& z_self,
                                         double lambda_disentangle);

// pairwise feature-distance diversity term over the three fusion outputs;
// as_written sums raw squared distances, the alternative negates the sum on
// unit-normalized features
ad::Tensor<float> fusion_diversity(const ad::Tensor<float>& f_cross,
                                   const ad::Tensor<float>& f_gate,
                                   const ad::Tensor<float>& f_moe, bool as_written);

// squared distance of current parameters to a snapshot, filtered by prefix
ad::Tensor<float> snapshot_anchor(ad::ParamStore<float>& ps, const io::Snapshot& snap,
                                  const std::string& prefix);

struct PpoHyper {
  double clip_eps = 0.2;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  int epochs = 4;
  int minibatch = 256;
};

// optional per-minibatch loss extension (stage-specific regularizers);
// receives the forward pass and may record its pieces in the report
using ExtraLoss =
    std::function<ad::Tensor<float>(const model::PolicyOutput<float>&, LossReport&)>;

// clipped-surrogate PPO update over shuffled minibatches; advantages must be
// filled. Returns minibatch-averaged losses.
LossReport ppo_update(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                      const Rollout& ro, const PpoHyper& hp, optim::Adam<float>& opt,
                      Rng& shuffle_rng, const ExtraLoss& extra = {});

// ---- stage-1 pretraining ----

// window dataset drawn from scripted-oracle and random episodes
struct WindowSet {
  int n = 0, window = 0, d_env = 0, d_self = 0;
  std::vector<float> env;   // n x window x d_env
  std::vector<float> self;  // n x window x d_self
};

WindowSet collect_pretrain_windows(const TrainConfig& cfg);

// reconstruction + next-step-prediction loss on one batch; fills report
ad::Tensor<float> pretrain_loss(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                                const ad::Tensor<float>& obs_env,
                                const ad::Tensor<float>& obs_self, LossReport& rep);

// ---- per-iteration record ----

struct IterRecord {
  int iter = 0;
  int stage = 0;
  LossReport loss;
  double follow = 0, carry = 0, climb = 0, sit = 0, lh = 0;
  double mean_time_s = 0;
  int episodes = 0;  // finished episodes inside this iteration
};

// ---- orchestration ----

class Trainer {
 public:
  // out_dir "" disables all file output (tests); otherwise the directory is
  // created and receives config.txt, metrics.log, timing.log and checkpoints
  Trainer(const io::Config& cfg, std::string out_dir);
  ~Trainer();

  // stages 1..3 in order, resuming from stage-boundary checkpoints if asked
  void run(bool resume = false);

  io::Snapshot pretrain_stage1();
  void train_stage2();
  void train_stage3();

  ad::ParamStore<float>& params() { return ps_; }
  const model::ModelConfig& model_config() const { return cfg_.model; }
  const TrainConfig& train_config() const { return cfg_; }
  const io::Snapshot& stage1_snapshot() const { return snapshot_; }
  int completed_stage() const { return completed_stage_; }
  const std::vector<IterRecord>& history() const { return history_; }

  // rolling sequence-success rate over recent training episodes
  double rolling_lh_success() const;
  // stop a PPO stage early once the rolling rate holds at or above the
  // threshold; 0 disables (default)
  void set_success_stop(double threshold) { success_stop_ = threshold; }

 private:
  void ppo_stage(int stage, int iters);
  Rollout collect_rollout();
  ExtraLoss stage_extra(int stage);
  void push_record(IterRecord rec);
  void write_checkpoint(const std::string& name, int stage, long long iter);
  void ensure_env();

  io::Config raw_cfg_;
  TrainConfig cfg_;
  std::string out_dir_;
  ad::ParamStore<float> ps_;
  io::Snapshot snapshot_;
  int completed_stage_ = 0;
  long long global_iter_ = 0;

  env::Env env_;
  env::TaskSpec task_spec_;
  std::unique_ptr<env::ObsWindow> win_;
  bool episode_open_ = false;
  Rng episode_seeds_;
  Rng action_rng_;
  Rng shuffle_rng_;
  std::deque<env::EpisodeResult> recent_;

  std::vector<IterRecord> history_;
  double success_stop_ = 0;
  std::ofstream metrics_, timing_;
};

}  // namespace alas::train
