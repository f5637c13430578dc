#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "alas/env.hpp"
#include "alas/model.hpp"
#include "alas/train.hpp"

// Success-rate evaluation and the generalization-rate summaries: greedy
// mean-action trials batched per seed, aggregated as mean +- std across seeds.

namespace alas::eval {

// ratio of an unseen long-horizon success rate to the trained-task rate;
// empty when the reference rate is zero
std::optional<double> egr(double s_lhi, double s_lh1);

// composed-skill rate (climb, sit) over the pre-trained rate (follow, carry);
// a task without a climb segment contributes zero for climb. Empty when the
// denominator is zero.
std::optional<double> sgr(double s_follow, double s_carry, double s_climb, double s_sit,
                          bool climb_present);

// two-decimal summary-table convention (truncation toward zero)
double printed(double v);

struct Stat {
  double mean = 0;
  double stdev = 0;
};

struct TrialRecord {
  uint64_t eval_seed = 0;  // seed owning this trial batch
  int trial = 0;
  std::vector<double> credits;  // one per skill instance in the chain
  bool success = false;
  double time_s = 0;
};

struct EvalReport {
  std::string task;
  std::vector<env::Skill> skills;
  std::vector<Stat> per_instance;         // one per chain position
  std::map<std::string, Stat> per_skill;  // pooled by skill kind
  Stat lh;
  Stat time_s;
  std::optional<double> egr_value, sgr_value;  // filled by the ablation harness
  int n_trials = 0, n_seeds = 0;
  std::vector<TrialRecord> trials;

  std::string serialize() const;
  std::string trial_lines() const;  // one line per trial, replayable aggregation
};

// deterministic mean-action rollouts: n_trials per seed, per-seed means
// aggregated across seeds. Failed episodes are charged the full time budget.
EvalReport evaluate(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                    const env::TaskSpec& spec, const env::EnvConfig& ecfg, int n_trials,
                    const std::vector<uint64_t>& seeds);

// same batching and aggregation for a policy that acts on simulator state
// directly (scripted baselines)
using StatePolicy = std::function<std::array<double, 4>(const env::Env&)>;
EvalReport evaluate_policy(const StatePolicy& policy, const env::TaskSpec& spec,
                           const env::EnvConfig& ecfg, int n_trials,
                           const std::vector<uint64_t>& seeds);

// sgr() on a report's first follow/carry/climb/sit chain positions
std::optional<double> sgr_from_report(const EvalReport& rep);

// dependence between the two stream encodings over a window batch; empty when
// the variant runs a single stream
std::optional<double> measure_stream_mi(ad::ParamStore<float>& ps, const model::ModelConfig& mcfg,
                                        const train::WindowSet& ws);

struct AblationResult {
  std::string variant;
  EvalReport trained;   // on the task the run was trained for
  EvalReport transfer;  // zero-shot long-horizon task
  std::optional<double> egr_value, sgr_value;
  double lh = 0;  // transfer sequence success
  std::optional<double> stream_mi;
};

// trains the variant under the shared protocol and budget from `base`
// (run.variant overridden), then evaluates the trained task and the zero-shot
// transfer task
AblationResult run_ablation(const io::Config& base, const std::string& variant,
                            const std::string& transfer_task, const std::string& out_dir);

// one row per result: variant, egr, sgr, lh (two-decimal convention, NA kept)
std::string ablation_table(const std::vector<AblationResult>& rows);

}  // namespace alas::eval
