#pragma once
#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "alas/env.hpp"

// Replay files capture everything a trial needs to be re-simulated exactly:
// the task, the seed, the simulator constants, and the action sequence, plus
// the terminal state hash the rerun must land on.

namespace alas::io {

struct ReplayLog {
  std::string task;
  uint64_t seed = 0;
  env::EnvConfig cfg;
  std::vector<std::array<double, 4>> actions;
  uint64_t final_hash = 0;
};

using PolicyFn = std::function<std::array<double, 4>(const env::Env&)>;

ReplayLog record_episode(const std::string& task, uint64_t seed, const env::EnvConfig& cfg,
                         const PolicyFn& policy);

void save_replay(const std::string& path, const ReplayLog& log);
ReplayLog load_replay(const std::string& path);

// re-simulates and compares the terminal hash; on failure `why` explains
bool verify_replay(const ReplayLog& log, std::string* why = nullptr);

}  // namespace alas::io
