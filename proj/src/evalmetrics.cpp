#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "alas/dsp.hpp"
#include "alas/evalmetrics.hpp"

namespace alas::eval {

using ad::Tensor;

std::optional<double> egr(double s_lhi, double s_lh1) {
  if (s_lh1 <= 0) return std::nullopt;
  return s_lhi / s_lh1;
}

std::optional<double> sgr(double s_follow, double s_carry, double s_climb, double s_sit,
                          bool climb_present) {
  if (!climb_present) s_climb = 0;
  double denom = (s_follow + s_carry) / 2;
  if (denom <= 0) return std::nullopt;
  return ((s_climb + s_sit) / 2) / denom;
}

double printed(double v) {
  // the nudge keeps ratios that are exact hundredths from truncating down
  return std::trunc(v * 100 + 1e-9) / 100;
}

namespace {

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::string(buf);
}

std::string opt_str(const std::optional<double>& v, bool two_decimals) {
  if (!v) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, two_decimals ? "%.2f" : "%.9g",
                two_decimals ? printed(*v) : *v);
  return std::string(buf);
}

Stat across(const std::vector<double>& xs) {
  Stat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= double(xs.size());
  if (xs.size() > 1) {
    double acc = 0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stdev = std::sqrt(acc / double(xs.size() - 1));
  }
  return s;
}

}  // namespace

namespace {

using WindowPolicy =
    std::function<std::array<double, 4>(const env::Env&, const env::ObsWindow&)>;

EvalReport run_trials(const WindowPolicy& act_fn, int window, const env::TaskSpec& spec,
                      const env::EnvConfig& ecfg, int n_trials,
                      const std::vector<uint64_t>& seeds) {
  if (n_trials < 1) throw std::runtime_error("evaluate: n_trials must be at least 1");
  if (seeds.empty()) throw std::runtime_error("evaluate: need at least one seed");

  EvalReport rep;
  rep.task = spec.name;
  rep.skills = spec.skills;
  rep.n_trials = n_trials;
  rep.n_seeds = int(seeds.size());

  const double budget_s = spec.step_budget * ecfg.dt;
  const size_t n_sk = spec.skills.size();

  env::Env env(ecfg);
  env::ObsWindow win(window, env::Env::kRawChannels);

  // per-seed means, one vector entry per seed
  std::vector<std::vector<double>> inst_by_seed(n_sk);
  std::vector<double> lh_by_seed, time_by_seed;

  for (uint64_t seed : seeds) {
    Rng trial_seeds(seed, "eval-trials");
    std::vector<double> inst_acc(n_sk, 0.0);
    double lh_acc = 0, time_acc = 0;

    for (int k = 0; k < n_trials; ++k) {
      auto obs = env.reset(spec, trial_seeds.next_u64());
      win.reset();
      win.push(obs);
      while (!env.done()) {
        auto st = env.step(act_fn(env, win));
        if (!st.done) win.push(st.obs);
      }
      const auto& r = env.result();
      TrialRecord tr;
      tr.eval_seed = seed;
      tr.trial = k;
      tr.credits = r.per_skill_credit;
      tr.success = r.sequence_success;
      tr.time_s = r.sequence_success ? r.sim_time_s : budget_s;
      rep.trials.push_back(tr);

      for (size_t i = 0; i < n_sk; ++i) inst_acc[i] += r.per_skill_credit[i];
      lh_acc += tr.success ? 1.0 : 0.0;
      time_acc += tr.time_s;
    }
    for (size_t i = 0; i < n_sk; ++i) inst_by_seed[i].push_back(inst_acc[i] / n_trials);
    lh_by_seed.push_back(lh_acc / n_trials);
    time_by_seed.push_back(time_acc / n_trials);
  }

  rep.per_instance.resize(n_sk);
  for (size_t i = 0; i < n_sk; ++i) rep.per_instance[i] = across(inst_by_seed[i]);
  rep.lh = across(lh_by_seed);
  rep.time_s = across(time_by_seed);

  // pool instances of the same kind before aggregating across seeds
  for (int kind = 0; kind < 4; ++kind) {
    std::vector<size_t> idx;
    for (size_t i = 0; i < n_sk; ++i)
      if (int(spec.skills[i]) == kind) idx.push_back(i);
    if (idx.empty()) continue;
    std::vector<double> pooled(seeds.size(), 0.0);
    for (size_t s = 0; s < seeds.size(); ++s) {
      for (size_t i : idx) pooled[s] += inst_by_seed[i][s];
      pooled[s] /= double(idx.size());
    }
    rep.per_skill[env::skill_name(env::Skill(kind))] = across(pooled);
  }
  return rep;
}

}  // namespace

EvalReport evaluate(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                    const env::TaskSpec& spec, const env::EnvConfig& ecfg, int n_trials,
                    const std::vector<uint64_t>& seeds) {
  const int W = mcfg.window;
  const auto layout = env::Env::obs_layout();
  WindowPolicy net = [&](const env::Env&, const env::ObsWindow& win) {
    auto [oe, os] = dsp::split_rows<float>(win.rows(), W, layout);
    Tensor<float> e = Tensor<float>::from(oe, {1, W, mcfg.d_env});
    Tensor<float> s = Tensor<float>::from(os, {1, W, mcfg.d_self});
    auto out = model::policy_forward(ps, mcfg, e, s);
    const auto& mean = out.mean.values();
    std::array<double, 4> act{};
    for (int i = 0; i < mcfg.action_dim && i < 4; ++i) act[size_t(i)] = double(mean[size_t(i)]);
    return act;
  };
  return run_trials(net, W, spec, ecfg, n_trials, seeds);
}

EvalReport evaluate_policy(const StatePolicy& policy, const env::TaskSpec& spec,
                           const env::EnvConfig& ecfg, int n_trials,
                           const std::vector<uint64_t>& seeds) {
  WindowPolicy wrap = [&](const env::Env& e, const env::ObsWindow&) { return policy(e); };
  return run_trials(wrap, 1, spec, ecfg, n_trials, seeds);
}

std::optional<double> sgr_from_report(const EvalReport& rep) {
  double follow = 0, carry = 0, climb = 0, sit = 0;
  bool have_follow = false, have_carry = false, have_climb = false, have_sit = false;
  for (size_t i = 0; i < rep.skills.size(); ++i) {
    switch (rep.skills[i]) {
      case env::Skill::Follow:
        if (!have_follow) follow = rep.per_instance[i].mean;
        have_follow = true;
        break;
      case env::Skill::Carry:
        if (!have_carry) carry = rep.per_instance[i].mean;
        have_carry = true;
        break;
      case env::Skill::Climb:
        if (!have_climb) climb = rep.per_instance[i].mean;
        have_climb = true;
        break;
      case env::Skill::Sit:
        if (!have_sit) sit = rep.per_instance[i].mean;
        have_sit = true;
        break;
    }
  }
  return sgr(follow, carry, climb, sit, have_climb);
}

std::string EvalReport::serialize() const {
  std::ostringstream out;
  out << "task " << task << "\n";
  out << "seeds " << n_seeds << " trials " << n_trials << "\n";
  for (size_t i = 0; i < skills.size(); ++i)
    out << "segment " << i << " " << env::skill_name(skills[i]) << " mean "
        << g9(per_instance[i].mean) << " std " << g9(per_instance[i].stdev) << "\n";
  for (const auto& [name, st] : per_skill)
    out << "skill " << name << " mean " << g9(st.mean) << " std " << g9(st.stdev) << "\n";
  out << "lh mean " << g9(lh.mean) << " std " << g9(lh.stdev) << "\n";
  out << "time_s mean " << g9(time_s.mean) << " std " << g9(time_s.stdev) << "\n";
  out << "egr " << opt_str(egr_value, false) << "\n";
  out << "sgr " << opt_str(sgr_value, false) << "\n";
  return out.str();
}

std::string EvalReport::trial_lines() const {
  std::ostringstream out;
  for (const auto& t : trials) {
    out << "seed " << t.eval_seed << " trial " << t.trial << " credits";
    for (double c : t.credits) out << " " << g9(c);
    out << " success " << (t.success ? 1 : 0) << " time_s " << g9(t.time_s) << "\n";
  }
  return out.str();
}

std::optional<double> measure_stream_mi(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                                        const train::WindowSet& ws) {
  if (ws.n <= 1) throw std::runtime_error("stream mi: need at least two windows");
  Tensor<float> oe = Tensor<float>::from(ws.env, {ws.n, ws.window, ws.d_env});
  Tensor<float> os = Tensor<float>::from(ws.self, {ws.n, ws.window, ws.d_self});
  auto out = model::policy_forward(ps, mcfg, oe, os);
  if (!out.z_env.defined() || !out.z_self.defined()) return std::nullopt;
  return double(dsp::mi_estimate(ad::merge_bt(out.z_env), ad::merge_bt(out.z_self)).item());
}

AblationResult run_ablation(const io::Config& base, const std::string& variant,
                            const std::string& transfer_task, const std::string& out_dir) {
  io::Config cfg = base;
  cfg.set("run.variant", variant);

  train::Trainer tr(cfg, out_dir);
  tr.run();

  AblationResult res;
  res.variant = variant;

  auto ecfg = io::to_env_config(cfg);
  auto spec_train = env::make_task(cfg.get("run.task"));
  auto spec_far = env::make_task(transfer_task);
  int n_trials = cfg.get_i("eval.n_trials");
  int n_seeds = cfg.get_i("eval.n_seeds");
  if (n_seeds < 1) throw std::runtime_error("run_ablation: eval.n_seeds must be at least 1");
  std::vector<uint64_t> seeds;
  Rng seed_src(uint64_t(cfg.get_ll("run.seed")), "eval-seeds");
  for (int i = 0; i < n_seeds; ++i) seeds.push_back(seed_src.next_u64());

  res.trained = evaluate(tr.params(), tr.model_config(), spec_train, ecfg, n_trials, seeds);
  res.transfer = evaluate(tr.params(), tr.model_config(), spec_far, ecfg, n_trials, seeds);

  res.egr_value = egr(res.transfer.lh.mean, res.trained.lh.mean);
  res.sgr_value = sgr_from_report(res.transfer);
  res.lh = res.transfer.lh.mean;
  res.transfer.egr_value = res.egr_value;
  res.transfer.sgr_value = res.sgr_value;

  // dependence between streams, measured on windows the run never trained on
  auto held = train::make_train_config(cfg);
  held.seed = held.seed ^ 0x9e3779b97f4a7c15ull;
  held.stage1_episodes = std::min(held.stage1_episodes, 20);
  res.stream_mi = measure_stream_mi(tr.params(), tr.model_config(),
                                    train::collect_pretrain_windows(held));
  return res;
}

std::string ablation_table(const std::vector<AblationResult>& rows) {
  std::ostringstream out;
  out << "variant egr sgr lh\n";
  for (const auto& r : rows) {
    char lh[16];
    std::snprintf(lh, sizeof lh, "%.2f", printed(r.lh));
    out << r.variant << " " << opt_str(r.egr_value, true) << " " << opt_str(r.sgr_value, true)
        << " " << lh << "\n";
  }
  return out.str();
}

}  // namespace alas::eval
