#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "alas/checkpoint.hpp"
#include "alas/config.hpp"
#include "alas/replay.hpp"

using namespace alas;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string tmp_path(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "alas_io_tests";
  std::filesystem::create_directories(dir);
  return (dir / name).string();
}

ad::ParamStore<float> small_store() {
  ad::ParamStore<float> ps;
  ps.add("env.conv.w", ad::Tensor<float>::from({0.5f, -1.25f, 3.0f, 0.0f, 2.5f, -0.75f}, {2, 3}));
  ps.add("env.conv.b", ad::Tensor<float>::from({0.1f, -0.2f, 0.3f}, {3}));
  ps.add("fusion.gate", ad::Tensor<float>::from({1e-30f}, {}));
  ps.add("self.gru.wz", ad::Tensor<float>::from({-4.0f, 7.5f}, {2}));
  return ps;
}

}  // namespace

TEST_CASE("config defaults round-trip through text unchanged") {
  auto c = io::Config::defaults();
  auto text = c.serialize();
  auto c2 = io::Config::parse(text);
  CHECK(c2.serialize() == text);
  CHECK(c2.hash() == c.hash());
}

TEST_CASE("config parsing handles comments, blanks, and overrides") {
  auto c = io::Config::parse(
      "# a comment line\n"
      "\n"
      "run.task = lh3   # trailing comment\n"
      "  train.lr=0.001\n"
      "env.dt = 0.05\n");
  CHECK(c.get("run.task") == "lh3");
  CHECK(c.get_d("train.lr") == doctest::Approx(0.001));
  CHECK(c.get_d("env.dt") == doctest::Approx(0.05));
  CHECK(c.get("run.variant") == "full");  // untouched default
}

TEST_CASE("config rejects unknown keys and malformed lines by name") {
  CHECK_THROWS_WITH_AS(io::Config::parse("run.tassk = lh1\n"),
                       doctest::Contains("unknown key 'run.tassk'"), std::runtime_error);
  CHECK_THROWS_WITH_AS(io::Config::parse("just some words\n"), doctest::Contains("key = value"),
                       std::runtime_error);
  CHECK_THROWS_WITH_AS(io::Config::parse("= 3\n"), doctest::Contains("empty key"),
                       std::runtime_error);
  auto c = io::Config::defaults();
  CHECK_THROWS_AS(c.set("no.such.key", "1"), std::runtime_error);
  CHECK_THROWS_AS(c.get("no.such.key"), std::runtime_error);
}

TEST_CASE("config typed getters validate their input") {
  auto c = io::Config::defaults();
  c.set("run.task", "not-a-number");
  CHECK_THROWS_WITH_AS(c.get_d("run.task"), doctest::Contains("not a number"),
                       std::runtime_error);
  CHECK_THROWS_AS(c.get_i("run.task"), std::runtime_error);
  CHECK_THROWS_AS(c.get_b("run.task"), std::runtime_error);
  c.set("run.task", "true");
  CHECK(c.get_b("run.task"));
  c.set("run.task", "0");
  CHECK_FALSE(c.get_b("run.task"));
  c.set("model.kernels", "1, 3 ,5");
  auto ks = c.get_ints("model.kernels");
  CHECK(ks == std::vector<int>{1, 3, 5});
  c.set("model.kernels", ",");
  CHECK_THROWS_WITH_AS(c.get_ints("model.kernels"), doctest::Contains("empty list"),
                       std::runtime_error);
}

TEST_CASE("config hash ignores the output directory but nothing else") {
  auto a = io::Config::defaults();
  auto b = io::Config::defaults();
  CHECK(a.hash() == b.hash());
  b.set("run.out", "somewhere/else");
  CHECK(a.hash() == b.hash());
  b.set("run.seed", "1");
  CHECK(a.hash() != b.hash());
  b.set("run.seed", "0");
  b.set_d("train.lr", 3.0000001e-4);
  CHECK(a.hash() != b.hash());
}

TEST_CASE("config file save and load preserve every byte") {
  auto c = io::Config::defaults();
  c.set("run.task", "lh2");
  c.set_d("env.dz_noise", 0.17);
  c.set_i("run.seed", 1234567);
  auto p1 = tmp_path("cfg_a.txt");
  auto p2 = tmp_path("cfg_b.txt");
  c.save(p1);
  auto c2 = io::Config::load(p1);
  c2.save(p2);
  CHECK(slurp(p1) == slurp(p2));
  CHECK(c2.get("run.task") == "lh2");
  CHECK(c2.get_d("env.dz_noise") == 0.17);
  CHECK(c2.hash() == c.hash());
}

TEST_CASE("config bridges fill the simulator and model structs") {
  auto c = io::Config::defaults();
  c.set_d("env.dt", 0.2);
  c.set_i("env.sit_settle_steps", 5);
  c.set_b("env.follow_violation_terminates", true);
  auto e = io::to_env_config(c);
  CHECK(e.dt == 0.2);
  CHECK(e.sit_settle_steps == 5);
  CHECK(e.follow_violation_terminates);
  CHECK(e.v_max == env::EnvConfig{}.v_max);

  c.set("model.kernels", "3,5");
  c.set_i("model.conv_channels", 8);
  c.set("run.variant", "a3_concat");
  auto m = io::to_model_config(c);
  CHECK(m.kernels == std::vector<int>{3, 5});
  CHECK(m.conv_channels == 8);
  CHECK(m.variant == "a3_concat");

  c.set("run.variant", "bogus");
  CHECK_THROWS_AS(io::to_model_config(c), std::runtime_error);
}

TEST_CASE("checkpoint save, load, save is byte-identical") {
  auto ps = small_store();
  ps.set_frozen_prefix("env.", true);
  io::CheckpointMeta meta{0xdeadbeef01234567ull, 2, 150};
  std::map<std::string, io::Snapshot> snaps;
  snaps["stage1"] = {{"env.conv.w", {1.f, 2.f, 3.f, 4.f, 5.f, 6.f}}, {"self.gru.wz", {9.f, -9.f}}};

  auto p1 = tmp_path("ckpt_a.bin");
  auto p2 = tmp_path("ckpt_b.bin");
  io::save_checkpoint(p1, meta, ps, snaps);

  auto fresh = small_store();
  for (auto& name : fresh.names()) fresh.get(name).values().assign(fresh.get(name).numel(), 0.f);
  std::map<std::string, io::Snapshot> snaps2;
  auto meta2 = io::load_checkpoint(p1, meta.config_hash, fresh, snaps2);
  io::save_checkpoint(p2, meta2, fresh, snaps2);

  CHECK(slurp(p1) == slurp(p2));
  CHECK(meta2.config_hash == meta.config_hash);
  CHECK(meta2.stage == 2);
  CHECK(meta2.iteration == 150);
}

TEST_CASE("checkpoint restores values bit-exactly, including frozen flags") {
  auto ps = small_store();
  ps.set_frozen_prefix("self.", true);
  io::CheckpointMeta meta{42, 3, 7};
  std::map<std::string, io::Snapshot> snaps;
  snaps["stage1"] = {{"env.conv.b", {0.25f, -0.5f, 0.125f}}};
  auto p = tmp_path("ckpt_exact.bin");
  io::save_checkpoint(p, meta, ps, snaps);

  auto fresh = small_store();
  fresh.set_frozen_prefix("env.", true);  // wrong flags on purpose
  for (auto& name : fresh.names()) fresh.get(name).values().assign(fresh.get(name).numel(), -7.f);
  std::map<std::string, io::Snapshot> got;
  io::load_checkpoint(p, 42, fresh, got);

  for (auto& name : ps.names()) {
    const auto& a = ps.get(name).values();
    const auto& b = fresh.get(name).values();
    REQUIRE(a.size() == b.size());
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(float)) == 0);
    CHECK(fresh.frozen(name) == ps.frozen(name));
  }
  REQUIRE(got.count("stage1") == 1);
  CHECK(got["stage1"] == snaps["stage1"]);
}

TEST_CASE("checkpoint config-hash mismatch is a hard error unless overridden") {
  auto ps = small_store();
  auto p = tmp_path("ckpt_hash.bin");
  io::save_checkpoint(p, {111, 1, 0}, ps, {});
  auto fresh = small_store();
  std::map<std::string, io::Snapshot> snaps;
  CHECK_THROWS_WITH_AS(io::load_checkpoint(p, 222, fresh, snaps),
                       doctest::Contains("config hash mismatch"), std::runtime_error);
  auto meta = io::load_checkpoint(p, 222, fresh, snaps, true);
  CHECK(meta.config_hash == 111);
}

TEST_CASE("checkpoint refuses architecture mismatches") {
  auto ps = small_store();
  auto p = tmp_path("ckpt_arch.bin");
  io::save_checkpoint(p, {5, 1, 0}, ps, {});
  std::map<std::string, io::Snapshot> snaps;

  {
    ad::ParamStore<float> other;  // missing parameters
    other.add("env.conv.w", ad::Tensor<float>::from(std::vector<float>(6, 0.f), {2, 3}));
    CHECK_THROWS_WITH_AS(io::load_checkpoint(p, 5, other, snaps),
                         doctest::Contains("parameter count mismatch"), std::runtime_error);
  }
  {
    auto other = small_store();  // same counts, one renamed
    ad::ParamStore<float> renamed;
    for (auto& name : other.names()) {
      auto n = name == "fusion.gate" ? std::string("fusion.blend") : name;
      renamed.add(n, ad::Tensor<float>::from(other.get(name).values(), other.get(name).shape()));
    }
    CHECK_THROWS_WITH_AS(io::load_checkpoint(p, 5, renamed, snaps),
                         doctest::Contains("not in this model"), std::runtime_error);
  }
  {
    ad::ParamStore<float> other;  // same names, one reshaped
    other.add("env.conv.w", ad::Tensor<float>::from(std::vector<float>(6, 0.f), {3, 2}));
    other.add("env.conv.b", ad::Tensor<float>::from(std::vector<float>(3, 0.f), {3}));
    other.add("fusion.gate", ad::Tensor<float>::from(std::vector<float>(1, 0.f), {}));
    other.add("self.gru.wz", ad::Tensor<float>::from(std::vector<float>(2, 0.f), {2}));
    CHECK_THROWS_WITH_AS(io::load_checkpoint(p, 5, other, snaps),
                         doctest::Contains("shape mismatch for 'env.conv.w'"), std::runtime_error);
  }
}

TEST_CASE("checkpoint detects corruption") {
  auto ps = small_store();
  auto p = tmp_path("ckpt_corrupt.bin");
  io::save_checkpoint(p, {5, 1, 0}, ps, {});
  std::map<std::string, io::Snapshot> snaps;

  auto bytes = slurp(p);
  {
    auto truncated = tmp_path("ckpt_trunc.bin");
    std::ofstream(truncated, std::ios::binary) << bytes.substr(0, bytes.size() - 3);
    auto fresh = small_store();
    CHECK_THROWS_WITH_AS(io::load_checkpoint(truncated, 5, fresh, snaps),
                         doctest::Contains("truncated payload"), std::runtime_error);
  }
  {
    auto padded = tmp_path("ckpt_padded.bin");
    std::ofstream(padded, std::ios::binary) << bytes << "x";
    auto fresh = small_store();
    CHECK_THROWS_WITH_AS(io::load_checkpoint(padded, 5, fresh, snaps),
                         doctest::Contains("trailing bytes"), std::runtime_error);
  }
  {
    auto wrong = tmp_path("ckpt_magic.bin");
    std::ofstream(wrong, std::ios::binary) << "NOTACKPT v9\n" << bytes;
    auto fresh = small_store();
    CHECK_THROWS_WITH_AS(io::load_checkpoint(wrong, 5, fresh, snaps),
                         doctest::Contains("bad magic"), std::runtime_error);
  }
  {
    auto fresh = small_store();
    CHECK_THROWS_AS(io::load_checkpoint(tmp_path("does_not_exist.bin"), 5, fresh, snaps),
                    std::runtime_error);
  }
}

TEST_CASE("hex16 round-trips and rejects junk") {
  for (uint64_t v : {0ull, 1ull, 0xdeadbeefcafef00dull, ~0ull}) {
    auto s = io::hex16(v);
    CHECK(s.size() == 16);
    CHECK(io::parse_hex16(s) == v);
  }
  CHECK_THROWS_AS(io::parse_hex16("abc"), std::exception);
  CHECK_THROWS_AS(io::parse_hex16("zzzzzzzzzzzzzzzz"), std::exception);
}

TEST_CASE("recorded oracle episode verifies against its terminal hash") {
  env::EnvConfig cfg;
  auto log = io::record_episode("lh1", 7, cfg, env::oracle_action);
  CHECK(log.actions.size() > 10);
  std::string why;
  CHECK(io::verify_replay(log, &why));
  CHECK(why.empty());

  auto again = io::record_episode("lh1", 7, cfg, env::oracle_action);
  CHECK(again.final_hash == log.final_hash);
  CHECK(again.actions == log.actions);
}

TEST_CASE("replay file round-trips exactly, including awkward doubles") {
  env::EnvConfig cfg;
  cfg.dz_noise = 1.0 / 3.0;
  cfg.sit_settle_steps = 4;
  cfg.follow_violation_terminates = true;
  io::ReplayLog log;
  log.task = "lh2";
  log.seed = 0xfeedface12345678ull;
  log.cfg = cfg;
  log.actions = {{1.0 / 3.0, -0.1, 5e-324, 0.0},
                 {-1e300, 1e-300, 0.7000000000000001, -0.6999999999999999}};
  log.final_hash = 0x0123456789abcdefull;

  auto p1 = tmp_path("replay_a.txt");
  auto p2 = tmp_path("replay_b.txt");
  io::save_replay(p1, log);
  auto got = io::load_replay(p1);
  io::save_replay(p2, got);

  CHECK(slurp(p1) == slurp(p2));
  CHECK(got.task == log.task);
  CHECK(got.seed == log.seed);
  CHECK(got.final_hash == log.final_hash);
  CHECK(got.cfg.dz_noise == cfg.dz_noise);
  CHECK(got.cfg.sit_settle_steps == 4);
  CHECK(got.cfg.follow_violation_terminates);
  REQUIRE(got.actions.size() == log.actions.size());
  for (size_t i = 0; i < log.actions.size(); ++i)
    CHECK(std::memcmp(got.actions[i].data(), log.actions[i].data(), 4 * sizeof(double)) == 0);
}

TEST_CASE("replay verification catches tampering") {
  env::EnvConfig cfg;
  auto log = io::record_episode("carry", 3, cfg, env::oracle_action);
  REQUIRE(io::verify_replay(log));

  std::string why;
  auto tampered = log;
  tampered.actions[tampered.actions.size() / 2][0] *= -1.0;
  CHECK_FALSE(io::verify_replay(tampered, &why));
  CHECK(why.find("terminal hash") != std::string::npos);

  auto wrong_seed = log;
  wrong_seed.seed += 1;
  CHECK_FALSE(io::verify_replay(wrong_seed, &why));

  auto overlong = log;
  overlong.actions.insert(overlong.actions.end(), 5, {0.0, 0.0, 0.0, 0.0});
  CHECK_FALSE(io::verify_replay(overlong, &why));
  CHECK(why.find("episode ended") != std::string::npos);
}

TEST_CASE("replay loader rejects malformed files") {
  env::EnvConfig cfg;
  auto log = io::record_episode("follow", 1, cfg, env::oracle_action);
  auto p = tmp_path("replay_good.txt");
  io::save_replay(p, log);
  auto text = slurp(p);

  auto write = [&](const char* name, const std::string& body) {
    auto path = tmp_path(name);
    std::ofstream(path) << body;
    return path;
  };

  CHECK_THROWS_WITH_AS(io::load_replay(write("r_magic.txt", "WRONG\n" + text)),
                       doctest::Contains("bad magic"), std::runtime_error);

  auto no_task = text;
  no_task.erase(no_task.find("task "), std::string("task follow\n").size());
  CHECK_THROWS_WITH_AS(io::load_replay(write("r_no_task.txt", no_task)),
                       doctest::Contains("missing header field 'task'"), std::runtime_error);

  auto extra_key = text;
  extra_key.insert(extra_key.find("\nsteps ") + 1, "env.gravity 9.8\n");
  CHECK_THROWS_WITH_AS(io::load_replay(write("r_extra.txt", extra_key)),
                       doctest::Contains("unknown header field"), std::runtime_error);

  auto short_actions = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
  CHECK_THROWS_WITH_AS(io::load_replay(write("r_short.txt", short_actions)),
                       doctest::Contains("action lines"), std::runtime_error);

  auto trailing = text + "0 0 0 0\n";
  CHECK_THROWS_WITH_AS(io::load_replay(write("r_trail.txt", trailing)),
                       doctest::Contains("trailing content"), std::runtime_error);

  CHECK_THROWS_AS(io::load_replay(tmp_path("missing_replay.txt")), std::runtime_error);
}

TEST_CASE("replay honors non-default simulator constants") {
  env::EnvConfig cfg;
  cfg.leak_lo = 0.9;
  cfg.leak_hi = 1.1;
  cfg.dz_noise = 0.0;
  auto log = io::record_episode("climb", 11, cfg, env::oracle_action);
  auto p = tmp_path("replay_cfg.txt");
  io::save_replay(p, log);
  auto got = io::load_replay(p);
  CHECK(io::verify_replay(got));

  // same actions under default constants land somewhere else
  auto wrong_cfg = got;
  wrong_cfg.cfg = env::EnvConfig{};
  std::string why;
  CHECK_FALSE(io::verify_replay(wrong_cfg, &why));
}
