#include <CLI11.hpp>
#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "alas/evalmetrics.hpp"
#include "alas/replay.hpp"
#include "alas/train.hpp"

namespace fs = std::filesystem;
using namespace alas;

namespace {

struct Flags {
  std::string config, task, variant, out, file;
  std::optional<long long> seed;
  bool resume = false;
};

std::string g9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::string(buf);
}

// thread override: run.threads wins, then ALAS_THREADS, then one worker.
// Execution is sequential either way; the value is validated and reported so
// configs stay portable across machines that do set it.
int effective_threads(const io::Config& cfg) {
  int n = cfg.get_i("run.threads");
  if (n < 0) throw std::runtime_error("run.threads must be non-negative");
  if (n == 0) {
    if (const char* e = std::getenv("ALAS_THREADS")) {
      try {
        n = std::stoi(e);
      } catch (...) {
        throw CLI::ValidationError("ALAS_THREADS", "not an integer: " + std::string(e));
      }
      if (n <= 0) throw CLI::ValidationError("ALAS_THREADS", "must be positive");
    }
  }
  return n > 0 ? n : 1;
}

io::Config assemble_config(const Flags& f) {
  io::Config cfg = f.config.empty() ? io::Config::defaults() : io::Config::load(f.config);
  if (f.seed) cfg.set("run.seed", std::to_string(*f.seed));
  if (!f.task.empty()) cfg.set("run.task", f.task);
  if (!f.variant.empty()) cfg.set("run.variant", f.variant);
  if (!f.out.empty()) cfg.set("run.out", f.out);
  return cfg;
}

std::string pick_checkpoint(const std::string& dir) {
  for (const char* name : {"ckpt_stage3.bin", "ckpt_stage2.bin", "ckpt_stage1.bin"}) {
    auto p = dir + "/" + name;
    if (fs::exists(p)) return p;
  }
  throw std::runtime_error("no checkpoint found in " + dir);
}

std::vector<uint64_t> eval_seeds(uint64_t master, int n) {
  if (n < 1) throw std::runtime_error("eval.n_seeds must be at least 1");
  std::vector<uint64_t> out;
  Rng src(master, "eval-seeds");
  for (int i = 0; i < n; ++i) out.push_back(src.next_u64());
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void write_eval_files(const std::string& dir, const eval::EvalReport& rep) {
  write_text(dir + "/eval_" + rep.task + ".txt", rep.serialize());
  write_text(dir + "/eval_" + rep.task + "_trials.log", rep.trial_lines());
}

int cmd_pretrain(const Flags& f) {
  io::Config cfg = assemble_config(f);
  std::string out = cfg.get("run.out");
  std::cerr << "threads " << effective_threads(cfg) << "\n";
  fs::create_directories(out);
  cfg.save(out + "/config.txt");
  train::Trainer tr(cfg, out);
  tr.pretrain_stage1();
  std::cout << "stage 1 complete, " << tr.history().size() << " iterations, checkpoint " << out
            << "/ckpt_stage1.bin\n";
  return 0;
}

int cmd_train(const Flags& f) {
  io::Config cfg = assemble_config(f);
  std::string out = cfg.get("run.out");
  std::cerr << "threads " << effective_threads(cfg) << "\n";
  train::Trainer tr(cfg, out);
  tr.run(f.resume);
  std::cout << "training complete through stage " << tr.completed_stage() << ", "
            << tr.history().size() << " iterations this process, logs in " << out << "\n";
  return 0;
}

int cmd_eval(const Flags& f) {
  if (f.out.empty()) throw std::runtime_error("eval needs --out pointing at a run directory");
  std::string cfg_path = f.config.empty() ? f.out + "/config.txt" : f.config;
  if (!fs::exists(cfg_path)) throw std::runtime_error("config missing: " + cfg_path);
  io::Config cfg = io::Config::load(cfg_path);
  std::cerr << "threads " << effective_threads(cfg) << "\n";

  auto mcfg = io::to_model_config(cfg);
  ad::ParamStore<float> ps;
  model::init_params(ps, mcfg, uint64_t(cfg.get_ll("run.seed")));
  std::map<std::string, io::Snapshot> snaps;
  io::load_checkpoint(pick_checkpoint(f.out), cfg.hash(), ps, snaps);

  std::string task = f.task.empty() ? cfg.get("run.task") : f.task;
  auto spec = env::make_task(task);
  uint64_t master = f.seed ? uint64_t(*f.seed) : uint64_t(cfg.get_ll("run.seed"));
  auto rep = eval::evaluate(ps, mcfg, spec, io::to_env_config(cfg), cfg.get_i("eval.n_trials"),
                            eval_seeds(master, cfg.get_i("eval.n_seeds")));
  write_eval_files(f.out, rep);
  std::cout << rep.serialize();
  return 0;
}

int cmd_ablate(const Flags& f) {
  if (f.out.empty()) throw std::runtime_error("ablate needs --out for the result directory");
  Flags base_flags = f;
  base_flags.out.clear();  // run.out is set per variant below
  io::Config base = assemble_config(base_flags);
  base.set("run.variant", "full");
  std::cerr << "threads " << effective_threads(base) << "\n";
  std::string transfer = f.task.empty() ? "lh3" : f.task;

  std::vector<std::string> variants = {"full", "a1_no_env", "a2_no_self", "a3_concat"};
  if (!f.variant.empty()) variants = {f.variant};

  fs::create_directories(f.out);
  std::vector<eval::AblationResult> rows;
  std::ostringstream mi_lines;
  for (const auto& v : variants) {
    std::string vdir = f.out + "/" + v;
    auto res = eval::run_ablation(base, v, transfer, vdir);
    write_eval_files(vdir, res.trained);
    write_eval_files(vdir, res.transfer);
    mi_lines << v << " " << (res.stream_mi ? g9(*res.stream_mi) : std::string("NA")) << "\n";
    rows.push_back(std::move(res));
  }
  auto table = eval::ablation_table(rows);
  write_text(f.out + "/ablation.txt", table);
  write_text(f.out + "/stream_mi.txt", mi_lines.str());
  std::cout << table;
  return 0;
}

int cmd_replay(const Flags& f) {
  if (!f.file.empty()) {
    auto log = io::load_replay(f.file);
    std::string why;
    if (!io::verify_replay(log, &why))
      throw std::runtime_error("replay mismatch for " + f.file + ": " + why);
    std::cout << "replay verified: task " << log.task << ", seed " << log.seed << ", "
              << log.actions.size() << " steps\n";
    return 0;
  }
  if (f.out.empty())
    throw std::runtime_error("replay needs a file to verify or --out to record into");
  io::Config cfg = assemble_config(f);
  std::string task = f.task.empty() ? cfg.get("run.task") : f.task;
  uint64_t seed = f.seed ? uint64_t(*f.seed) : uint64_t(cfg.get_ll("run.seed"));
  auto log = io::record_episode(task, seed, io::to_env_config(cfg), env::oracle_action);
  io::save_replay(f.out, log);
  std::cout << "recorded " << log.actions.size() << " steps to " << f.out << "\n";
  return 0;
}

// ---- plot-data ----

struct MetricRow {
  long long iter = 0;
  int stage = 0;
  std::map<std::string, double> vals;
};

std::vector<MetricRow> parse_metrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("metrics log missing: " + path);
  std::vector<MetricRow> rows;
  std::string line;
  int ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key, val;
    MetricRow row;
    bool have_iter = false;
    while (is >> key >> val) {
      if (key == "iter") {
        row.iter = std::stoll(val);
        have_iter = true;
      } else if (key == "stage") {
        row.stage = std::stoi(val);
      } else {
        row.vals[key] = std::stod(val);
      }
    }
    if (!have_iter)
      throw std::runtime_error("metrics log: malformed line " + std::to_string(ln) + " in " +
                               path);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("metrics log is empty: " + path);
  return rows;
}

struct ParsedEval {
  std::string task;
  std::vector<env::Skill> skills;
  std::vector<double> means;
  double lh = 0, time_s = 0;
};

env::Skill skill_from_name(const std::string& s) {
  for (int k = 0; k < 4; ++k)
    if (s == env::skill_name(env::Skill(k))) return env::Skill(k);
  throw std::runtime_error("unknown skill name: " + s);
}

ParsedEval parse_eval_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("eval report missing: " + path);
  ParsedEval pe;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream is(line);
    std::string tok;
    is >> tok;
    if (tok == "task") {
      is >> pe.task;
    } else if (tok == "segment") {
      int idx;
      std::string kind, mean_kw;
      double mean;
      is >> idx >> kind >> mean_kw >> mean;
      pe.skills.push_back(skill_from_name(kind));
      pe.means.push_back(mean);
    } else if (tok == "lh") {
      std::string kw;
      is >> kw >> pe.lh;
    } else if (tok == "time_s") {
      std::string kw;
      is >> kw >> pe.time_s;
    }
  }
  if (pe.task.empty()) throw std::runtime_error("eval report has no task line: " + path);
  return pe;
}

int cmd_plot_data(const Flags& f) {
  if (f.out.empty()) throw std::runtime_error("plot-data needs --out pointing at a run directory");
  std::string cfg_path = f.out + "/config.txt";
  if (!fs::exists(cfg_path)) throw std::runtime_error("config missing: " + cfg_path);
  io::Config cfg = io::Config::load(cfg_path);
  auto rows = parse_metrics(f.out + "/metrics.log");
  int eval_every = cfg.get_i("train.eval_every");

  std::string plots = f.out + "/plots";
  fs::create_directories(plots);

  // success-vs-iteration at every evaluation point of the policy stages
  std::ostringstream curves;
  curves << "iter stage follow carry climb sit lh\n";
  int curve_rows = 0;
  for (const auto& r : rows) {
    if (r.stage < 2) continue;
    if (eval_every <= 0 || r.iter % eval_every != 0) continue;
    curves << r.iter << " " << r.stage;
    for (const char* k : {"follow", "carry", "climb", "sit", "lh"}) {
      auto it = r.vals.find(k);
      if (it == r.vals.end())
        throw std::runtime_error("metrics log: missing column " + std::string(k));
      curves << " " << g9(it->second);
    }
    curves << "\n";
    ++curve_rows;
  }
  write_text(plots + "/curves.txt", curves.str());

  // final per-skill bars from the last record
  const auto& last = rows.back();
  std::ostringstream bars;
  bars << "skill success\n";
  for (const char* k : {"follow", "carry", "climb", "sit", "lh"}) {
    auto it = last.vals.find(k);
    bars << k << " " << (it == last.vals.end() ? std::string("NA") : g9(it->second)) << "\n";
  }
  write_text(plots + "/skill_bars.txt", bars.str());

  // generalization summary over whatever eval reports the run has
  std::vector<ParsedEval> evals;
  for (const auto& entry : fs::directory_iterator(f.out)) {
    auto name = entry.path().filename().string();
    if (name.rfind("eval_", 0) == 0 && name.size() > 9 &&
        name.compare(name.size() - 4, 4, ".txt") == 0)
      evals.push_back(parse_eval_report(entry.path().string()));
  }
  std::sort(evals.begin(), evals.end(),
            [](const ParsedEval& a, const ParsedEval& b) { return a.task < b.task; });
  std::string base_task = cfg.get("run.task");
  const ParsedEval* base = nullptr;
  for (const auto& pe : evals)
    if (pe.task == base_task) base = &pe;

  std::ostringstream gen;
  gen << "task egr sgr lh time_s\n";
  for (const auto& pe : evals) {
    std::optional<double> e =
        base ? eval::egr(pe.lh, base->lh) : std::optional<double>(std::nullopt);
    eval::EvalReport tmp;
    tmp.skills = pe.skills;
    for (double m : pe.means) tmp.per_instance.push_back({m, 0});
    auto s = eval::sgr_from_report(tmp);
    gen << pe.task << " " << (e ? g9(*e) : std::string("NA")) << " "
        << (s ? g9(*s) : std::string("NA")) << " " << g9(pe.lh) << " " << g9(pe.time_s) << "\n";
  }
  write_text(plots + "/generalization.txt", gen.str());

  std::cout << "wrote " << plots << "/curves.txt (" << curve_rows << " rows), skill_bars.txt, "
            << "generalization.txt (" << evals.size() << " tasks)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dual-stream long-horizon control workbench"};
  app.require_subcommand(1);

  Flags f;
  auto add_common = [&](CLI::App* sub, bool with_variant) {
    sub->add_option("--config", f.config, "config file (defaults used when omitted)");
    sub->add_option("--seed", f.seed, "master seed override");
    sub->add_option("--task", f.task, "task name override");
    if (with_variant) sub->add_option("--variant", f.variant, "architecture variant");
    sub->add_option("--out", f.out, "output directory");
  };

  auto* pre = app.add_subcommand("pretrain", "run representation pretraining only");
  add_common(pre, true);
  auto* trn = app.add_subcommand("train", "run the full three-stage protocol");
  add_common(trn, true);
  trn->add_flag("--resume", f.resume, "resume from the latest stage checkpoint");
  auto* evl = app.add_subcommand("eval", "evaluate a trained run directory");
  add_common(evl, false);
  auto* abl = app.add_subcommand("ablate", "train and compare architecture variants");
  add_common(abl, true);
  auto* rpl = app.add_subcommand("replay", "verify a recorded trial, or record one with --out");
  add_common(rpl, false);
  rpl->add_option("file", f.file, "replay file to verify");
  auto* plt = app.add_subcommand("plot-data", "emit plot-ready tables from a run directory");
  plt->add_option("--out", f.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (pre->parsed()) return cmd_pretrain(f);
    if (trn->parsed()) return cmd_train(f);
    if (evl->parsed()) return cmd_eval(f);
    if (abl->parsed()) return cmd_ablate(f);
    if (rpl->parsed()) return cmd_replay(f);
    if (plt->parsed()) return cmd_plot_data(f);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
