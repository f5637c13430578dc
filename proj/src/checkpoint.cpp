#include "alas/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little, "payload is little-endian float32");
static_assert(sizeof(float) == 4);

namespace alas::io {

namespace {

constexpr const char* kMagic = "ALASCKPT v1";

std::string shape_csv(const std::vector<int>& shape) {
  if (shape.empty()) return "-";
  std::string out;
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out;
}

std::vector<int> parse_shape(const std::string& csv) {
  if (csv == "-") return {};
  std::vector<int> out;
  std::istringstream in(csv);
  std::string tok;
  while (std::getline(in, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw std::runtime_error("checkpoint " + path + ": " + what);
}

std::string next_line(std::istream& in, const std::string& path) {
  std::string line;
  if (!std::getline(in, line)) bad(path, "truncated header");
  return line;
}

}  // namespace

std::string hex16(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

uint64_t parse_hex16(const std::string& s) {
  if (s.size() != 16) throw std::runtime_error("expected 16 hex digits, got '" + s + "'");
  size_t pos = 0;
  uint64_t v = std::stoull(s, &pos, 16);
  if (pos != 16) throw std::runtime_error("expected 16 hex digits, got '" + s + "'");
  return v;
}

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ad::ParamStore<float>& params,
                     const std::map<std::string, Snapshot>& snapshots) {
  std::ofstream out(path, std::ios::binary);
  if (!out) bad(path, "cannot open for writing");

  std::ostringstream head;
  head << kMagic << "\n";
  head << "config_hash " << hex16(meta.config_hash) << "\n";
  head << "stage " << meta.stage << "\n";
  head << "iteration " << meta.iteration << "\n";

  size_t offset = 0;  // float index into the payload
  auto names = params.names();
  head << "params " << names.size() << "\n";
  for (const auto& name : names) {
    const auto& t = params.get(name);
    head << name << " " << shape_csv(t.shape()) << " " << offset << " "
         << (params.frozen(name) ? 1 : 0) << "\n";
    offset += t.values().size();
  }

  head << "snapshots " << snapshots.size() << "\n";
  for (const auto& [sname, snap] : snapshots) {
    head << "snapshot " << sname << " " << snap.size() << "\n";
    for (const auto& [pname, vals] : snap) {
      head << pname << " " << vals.size() << " " << offset << "\n";
      offset += vals.size();
    }
  }
  head << "payload " << offset << "\n";

  const std::string h = head.str();
  out.write(h.data(), std::streamsize(h.size()));
  for (const auto& name : names) {
    const auto& v = params.get(name).values();
    out.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size() * 4));
  }
  for (const auto& [sname, snap] : snapshots)
    for (const auto& [pname, vals] : snap)
      out.write(reinterpret_cast<const char*>(vals.data()), std::streamsize(vals.size() * 4));
  if (!out) bad(path, "write failed");
}

CheckpointMeta load_checkpoint(const std::string& path, uint64_t expected_config_hash,
                               ad::ParamStore<float>& params,
                               std::map<std::string, Snapshot>& snapshots,
                               bool allow_hash_mismatch) {
  std::ifstream in(path, std::ios::binary);
  if (!in) bad(path, "cannot open");

  if (next_line(in, path) != kMagic) bad(path, "bad magic (not a checkpoint, or a newer format)");

  CheckpointMeta meta;
  {
    std::istringstream ls(next_line(in, path));
    std::string key, hex;
    ls >> key >> hex;
    if (key != "config_hash") bad(path, "expected config_hash");
    meta.config_hash = parse_hex16(hex);
  }
  if (meta.config_hash != expected_config_hash && !allow_hash_mismatch)
    bad(path, "config hash mismatch: file " + hex16(meta.config_hash) + ", run " +
                  hex16(expected_config_hash) + " (pass the override to load anyway)");

  auto read_kv = [&](const char* want) -> long long {
    std::istringstream ls(next_line(in, path));
    std::string key;
    long long v = 0;
    ls >> key >> v;
    if (key != want || ls.fail()) bad(path, std::string("expected ") + want);
    return v;
  };
  meta.stage = static_cast<int>(read_kv("stage"));
  meta.iteration = read_kv("iteration");

  struct Block {
    std::string name;
    size_t count = 0;
    size_t offset = 0;
  };
  std::vector<Block> order;  // payload layout, params first then snapshots
  size_t expect_offset = 0;

  long long n_params = read_kv("params");
  if (n_params < 0 || static_cast<size_t>(n_params) != params.size())
    bad(path, "parameter count mismatch: file has " + std::to_string(n_params) + ", model has " +
                  std::to_string(params.size()));
  std::vector<std::pair<std::string, bool>> frozen_flags;
  for (long long i = 0; i < n_params; ++i) {
    std::istringstream ls(next_line(in, path));
    std::string name, csv;
    size_t offset = 0;
    int frozen = 0;
    ls >> name >> csv >> offset >> frozen;
    if (ls.fail()) bad(path, "malformed manifest line for parameter " + std::to_string(i));
    if (!params.has(name)) bad(path, "parameter '" + name + "' not in this model");
    const auto& t = params.get(name);
    if (t.shape() != parse_shape(csv))
      bad(path, "shape mismatch for '" + name + "': file " + csv + ", model " +
                    shape_csv(t.shape()));
    if (offset != expect_offset) bad(path, "offset mismatch for '" + name + "'");
    frozen_flags.emplace_back(name, frozen != 0);
    order.push_back({name, t.values().size(), offset});
    expect_offset += t.values().size();
  }

  long long n_snaps = read_kv("snapshots");
  snapshots.clear();
  std::vector<std::pair<std::string, std::string>> snap_keys;  // (snapshot, param)
  for (long long s = 0; s < n_snaps; ++s) {
    std::istringstream ls(next_line(in, path));
    std::string key, sname;
    long long k = 0;
    ls >> key >> sname >> k;
    if (key != "snapshot" || ls.fail()) bad(path, "expected snapshot header");
    auto& snap = snapshots[sname];
    for (long long i = 0; i < k; ++i) {
      std::istringstream ps(next_line(in, path));
      std::string pname;
      size_t count = 0, offset = 0;
      ps >> pname >> count >> offset;
      if (ps.fail()) bad(path, "malformed snapshot line in '" + sname + "'");
      if (offset != expect_offset) bad(path, "offset mismatch in snapshot '" + sname + "'");
      snap[pname].resize(count);
      order.push_back({sname + "/" + pname, count, offset});
      snap_keys.emplace_back(sname, pname);
      expect_offset += count;
    }
  }

  long long total = read_kv("payload");
  if (static_cast<size_t>(total) != expect_offset) bad(path, "payload size disagrees with manifest");

  // header consumed up to its trailing newline; the payload starts here
  for (size_t i = 0, snap_i = 0; i < order.size(); ++i) {
    float* dst = nullptr;
    if (i < static_cast<size_t>(n_params)) {
      dst = params.get(order[i].name).values().data();
    } else {
      const auto& [sname, pname] = snap_keys[snap_i++];
      dst = snapshots[sname][pname].data();
    }
    in.read(reinterpret_cast<char*>(dst), std::streamsize(order[i].count * 4));
    if (in.gcount() != std::streamsize(order[i].count * 4)) bad(path, "truncated payload");
  }
  char extra = 0;
  if (in.read(&extra, 1)) bad(path, "trailing bytes after payload");

  for (const auto& [name, frozen] : frozen_flags) params.set_frozen(name, frozen);
  return meta;
}

}  // namespace alas::io
