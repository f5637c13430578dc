#pragma once
#include <cmath>
#include <string>
#include <vector>

#include "alas/tensor.hpp"

// Policy network: two observation encoders (temporal conv + attention for the
// environment stream, bidirectional gated recurrence for the self stream),
// three fusion strategies blended by a learned softmax combiner, a small
// transformer trunk, and Gaussian policy / value heads.
//
// Everything is a pure graph builder over ad::Tensor so the float path and
// the float64 gradient-check path share code. Parameter names are a stable
// contract used by checkpoints and by stage freezing (prefixes "env.",
// "self.", "uni.").

namespace alas::model {

using ad::ParamStore;
using ad::Tensor;

struct ModelConfig {
  int d_env = 22;
  int d_self = 8;
  int window = 8;
  std::vector<int> kernels = {1, 3, 5};
  int conv_channels = 16;  // per kernel size
  int gru_hidden = 32;
  int d_model = 64;
  int attn_heads = 4;
  int trunk_layers = 2;
  int trunk_heads = 4;
  int action_dim = 4;
  double logstd_init = -0.5;
  std::string variant = "full";  // full | a1_no_env | a2_no_self | a3_concat | unified

  int conv_total() const { return conv_channels * int(kernels.size()); }
  bool has_env() const { return variant != "a1_no_env" && variant != "unified"; }
  bool has_self() const { return variant != "a2_no_self" && variant != "unified"; }
  bool blended_fusion() const { return variant != "a3_concat"; }

  void validate() const {
    static const char* variants[] = {"full", "a1_no_env", "a2_no_self", "a3_concat", "unified"};
    bool known = false;
    for (auto* v : variants) known = known || variant == v;
    if (!known) throw std::runtime_error("unknown variant: " + variant);
    if (d_env <= 0 || d_self <= 0 || window <= 0 || conv_channels <= 0 || gru_hidden <= 0 ||
        d_model <= 0 || action_dim <= 0)
      throw std::runtime_error("model config: dimensions must be positive");
    for (int k : kernels)
      if (k <= 0 || k % 2 == 0) throw std::runtime_error("model config: kernel sizes must be odd");
    if (conv_total() % attn_heads != 0)
      throw std::runtime_error("model config: conv channels not divisible by attention heads");
    if (d_model % attn_heads != 0 || d_model % trunk_heads != 0)
      throw std::runtime_error("model config: d_model not divisible by head count");
    if (variant == "unified" && conv_total() % 2 != 0)
      throw std::runtime_error("model config: unified variant needs an even channel total");
  }
};

namespace detail {

template <class S>
void add_xavier(ParamStore<S>& ps, const std::string& name, std::vector<int> shape, int fan_in,
                int fan_out, uint64_t seed) {
  ps.add(name, ad::xavier_init<S>(shape, fan_in, fan_out, seed, name));
}

template <class S>
void add_const_param(ParamStore<S>& ps, const std::string& name, std::vector<int> shape, S value) {
  ps.add(name, Tensor<S>::full(std::move(shape), value));
}

template <class S>
void init_conv_attn_encoder(ParamStore<S>& ps, const ModelConfig& cfg, const std::string& pre,
                            int d_in, int d_recon, uint64_t seed) {
  int c = cfg.conv_total();
  for (int k : cfg.kernels) {
    std::string base = pre + "conv.k" + std::to_string(k) + ".";
    add_xavier(ps, base + "weight", {k, d_in, cfg.conv_channels}, k * d_in, cfg.conv_channels,
               seed);
    add_const_param<S>(ps, base + "bias", {cfg.conv_channels}, 0);
  }
  for (const char* w : {"wq", "wk", "wv", "wo"})
    add_xavier(ps, pre + "attn." + w, {c, c}, c, c, seed);
  add_const_param<S>(ps, pre + "ln.gain", {c}, 1);
  add_const_param<S>(ps, pre + "ln.bias", {c}, 0);
  add_xavier(ps, pre + "dec.w1", {c, c}, c, c, seed);
  add_const_param<S>(ps, pre + "dec.b1", {c}, 0);
  add_xavier(ps, pre + "dec.w2", {c, d_recon}, c, d_recon, seed);
  add_const_param<S>(ps, pre + "dec.b2", {d_recon}, 0);
}

}  // namespace detail

template <class S>
void init_params(ParamStore<S>& ps, const ModelConfig& cfg, uint64_t seed) {
  using detail::add_const_param;
  using detail::add_xavier;
  cfg.validate();
  int d = cfg.d_model;
  int H = cfg.gru_hidden;
  int c = cfg.conv_total();

  if (cfg.variant == "unified") {
    int d_raw = cfg.d_env + cfg.d_self;
    detail::init_conv_attn_encoder(ps, cfg, "uni.", d_raw, d_raw, seed);
    add_xavier(ps, "uni.proj_env.weight", {c / 2, d}, c / 2, d, seed);
    add_const_param<S>(ps, "uni.proj_env.bias", {d}, 0);
    add_xavier(ps, "uni.proj_self.weight", {c / 2, d}, c / 2, d, seed);
    add_const_param<S>(ps, "uni.proj_self.bias", {d}, 0);
  }
  if (cfg.has_env()) {
    detail::init_conv_attn_encoder(ps, cfg, "env.", cfg.d_env, cfg.d_env, seed);
    add_xavier(ps, "env.proj.weight", {c, d}, c, d, seed);
    add_const_param<S>(ps, "env.proj.bias", {d}, 0);
  } else if (cfg.variant == "a1_no_env") {
    add_const_param<S>(ps, "fusion.const_env", {d}, 0);
  }
  if (cfg.has_self()) {
    for (const char* dir : {"fwd", "bwd"}) {
      std::string base = "self.gru." + std::string(dir) + ".";
      for (const char* g : {"z", "r", "n"}) {
        add_xavier(ps, base + "w_x" + g, {cfg.d_self, H}, cfg.d_self, H, seed);
        add_xavier(ps, base + "w_h" + g, {H, H}, H, H, seed);
        add_const_param<S>(ps, base + "b_" + g, {H}, 0);
      }
    }
    add_xavier(ps, "self.gate.weight", {2 * H, 2 * H}, 2 * H, 2 * H, seed);
    add_const_param<S>(ps, "self.gate.bias", {2 * H}, 0);
    add_xavier(ps, "self.proj.weight", {2 * H, d}, 2 * H, d, seed);
    add_const_param<S>(ps, "self.proj.bias", {d}, 0);
    add_xavier(ps, "self.pred.w1", {2 * H, 2 * H}, 2 * H, 2 * H, seed);
    add_const_param<S>(ps, "self.pred.b1", {2 * H}, 0);
    add_xavier(ps, "self.pred.w2", {2 * H, 2 * H}, 2 * H, 2 * H, seed);
    add_const_param<S>(ps, "self.pred.b2", {2 * H}, 0);
  } else if (cfg.variant == "a2_no_self") {
    add_const_param<S>(ps, "fusion.const_self", {d}, 0);
  }

  if (cfg.blended_fusion()) {
    for (const char* w : {"wq", "wk", "wv", "wo"})
      add_xavier(ps, std::string("fusion.cross.") + w, {d, d}, d, d, seed);
    add_xavier(ps, "fusion.gate.weight", {2 * d, d}, 2 * d, d, seed);
    add_const_param<S>(ps, "fusion.gate.bias", {d}, 0);
    for (int i = 1; i <= 4; ++i) {
      std::string base = "fusion.moe.e" + std::to_string(i) + ".";
      add_xavier(ps, base + "w1", {2 * d, 2 * d}, 2 * d, 2 * d, seed);
      add_const_param<S>(ps, base + "b1", {2 * d}, 0);
      add_xavier(ps, base + "w2", {2 * d, d}, 2 * d, d, seed);
      add_const_param<S>(ps, base + "b2", {d}, 0);
    }
    add_xavier(ps, "fusion.moe.router.weight", {2 * d, 4}, 2 * d, 4, seed);
    add_const_param<S>(ps, "fusion.moe.router.bias", {4}, 0);
    add_const_param<S>(ps, "fusion.combine.raw", {3}, 0);  // softmax -> uniform
  } else {
    add_xavier(ps, "fusion.concat.weight", {2 * d, d}, 2 * d, d, seed);
    add_const_param<S>(ps, "fusion.concat.bias", {d}, 0);
  }

  for (int l = 0; l < cfg.trunk_layers; ++l) {
    std::string base = "trunk.l" + std::to_string(l) + ".";
    add_const_param<S>(ps, base + "ln1.gain", {d}, 1);
    add_const_param<S>(ps, base + "ln1.bias", {d}, 0);
    for (const char* w : {"wq", "wk", "wv", "wo"})
      add_xavier(ps, base + "attn." + w, {d, d}, d, d, seed);
    add_const_param<S>(ps, base + "ln2.gain", {d}, 1);
    add_const_param<S>(ps, base + "ln2.bias", {d}, 0);
    add_xavier(ps, base + "ff.w1", {d, 4 * d}, d, 4 * d, seed);
    add_const_param<S>(ps, base + "ff.b1", {4 * d}, 0);
    add_xavier(ps, base + "ff.w2", {4 * d, d}, 4 * d, d, seed);
    add_const_param<S>(ps, base + "ff.b2", {d}, 0);
  }

  add_const_param<S>(ps, "head.policy.weight", {d, cfg.action_dim}, 0);
  add_const_param<S>(ps, "head.policy.bias", {cfg.action_dim}, 0);
  add_const_param<S>(ps, "head.logstd", {cfg.action_dim}, S(cfg.logstd_init));
  add_xavier(ps, "head.value.weight", {d, 1}, d, 1, seed);
  add_const_param<S>(ps, "head.value.bias", {1}, 0);
}

// ---- building blocks ----

// multi-head self-attention over a [B,T,C] sequence
template <class S>
Tensor<S> mha_seq(ParamStore<S>& ps, const std::string& pre, const Tensor<S>& x, int heads) {
  using namespace ad;
  int C = x.dim(2);
  if (C % heads != 0) throw std::runtime_error("attention: dim not divisible by heads");
  int dh = C / heads;
  Tensor<S> q = matmul3(x, ps.get(pre + "wq"));
  Tensor<S> k = matmul3(x, ps.get(pre + "wk"));
  Tensor<S> v = matmul3(x, ps.get(pre + "wv"));
  Tensor<S> cat;
  for (int h = 0; h < heads; ++h) {
    Tensor<S> qh = slice_lastdim(q, h * dh, dh);
    Tensor<S> kh = slice_lastdim(k, h * dh, dh);
    Tensor<S> vh = slice_lastdim(v, h * dh, dh);
    Tensor<S> scores = scale(bmm(qh, transpose12(kh)), S(1.0 / std::sqrt(double(dh))));
    Tensor<S> oh = bmm(softmax_lastdim(scores), vh);
    cat = h == 0 ? oh : concat_lastdim(cat, oh);
  }
  return matmul3(cat, ps.get(pre + "wo"));
}

// helper: view a [B] vector as a [B,1] matrix
template <class S>
Tensor<S> stack_cols(const Tensor<S>& v) {
  using namespace ad;
  if (v.rank() != 1) throw std::runtime_error("stack_cols: rank != 1");
  auto n = ad::detail::make_node<S>({v.dim(0), 1}, {v.ptr()}, "as_col");
  n->v = v.values();
  if (n->requires_grad)
    n->backfn = [](ad::Node<S>& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < self.g.size(); ++i) p->g[i] += self.g[i];
    };
  return Tensor<S>(n);
}

// single-vector cross attention, query from one stream, keys/values from the
// other; with one key the softmax is degenerate but kept for fidelity
template <class S>
Tensor<S> mha_vec(ParamStore<S>& ps, const std::string& pre, const Tensor<S>& query,
                  const Tensor<S>& kv, int heads) {
  using namespace ad;
  int C = query.dim(1);
  if (C % heads != 0) throw std::runtime_error("attention: dim not divisible by heads");
  int dh = C / heads;
  Tensor<S> q = matmul(query, ps.get(pre + "wq"));
  Tensor<S> k = matmul(kv, ps.get(pre + "wk"));
  Tensor<S> v = matmul(kv, ps.get(pre + "wv"));
  Tensor<S> cat;
  for (int h = 0; h < heads; ++h) {
    Tensor<S> qh = slice_lastdim(q, h * dh, dh);
    Tensor<S> kh = slice_lastdim(k, h * dh, dh);
    Tensor<S> vh = slice_lastdim(v, h * dh, dh);
    Tensor<S> score = scale(sum_lastdim(mul(qh, kh)), S(1.0 / std::sqrt(double(dh))));  // [B]
    Tensor<S> w = softmax_lastdim(stack_cols(score));  // [B,1], all ones with one key
    Tensor<S> oh = mul_rows(vh, sum_lastdim(w));
    cat = h == 0 ? oh : concat_lastdim(cat, oh);
  }
  return matmul(cat, ps.get(pre + "wo"));
}

template <class S>
Tensor<S> linear(ParamStore<S>& ps, const std::string& w, const std::string& b,
                 const Tensor<S>& x) {
  using namespace ad;
  if (x.rank() == 3) return add_rowvec(matmul3(x, ps.get(w)), ps.get(b));
  return add_rowvec(matmul(x, ps.get(w)), ps.get(b));
}

// channel-concatenated multi-scale convolution stage
template <class S>
Tensor<S> conv_bank(ParamStore<S>& ps, const ModelConfig& cfg, const std::string& pre,
                    const Tensor<S>& x) {
  using namespace ad;
  Tensor<S> s;
  for (int k : cfg.kernels) {
    std::string base = pre + "conv.k" + std::to_string(k) + ".";
    Tensor<S> ck = conv1d_same(x, ps.get(base + "weight"), ps.get(base + "bias"));
    s = s.defined() ? concat_lastdim(s, ck) : ck;
  }
  return s;
}

// conv bank + residual self-attention + layer norm; pre is "env." or "uni."
template <class S>
Tensor<S> conv_attn_encode(ParamStore<S>& ps, const ModelConfig& cfg, const std::string& pre,
                           const Tensor<S>& x) {
  using namespace ad;
  Tensor<S> s = conv_bank(ps, cfg, pre, x);
  Tensor<S> att = mha_seq(ps, pre + "attn.", s, cfg.attn_heads);
  Tensor<S> ln = layer_norm_lastdim(add(att, s), S(1e-5));
  return add_rowvec(mul_rowvec(ln, ps.get(pre + "ln.gain")), ps.get(pre + "ln.bias"));
}

// environment stream: multi-scale temporal conv + attention, per-step output
template <class S>
Tensor<S> env_encode(ParamStore<S>& ps, const ModelConfig& cfg, const Tensor<S>& obs_env) {
  return conv_attn_encode(ps, cfg, "env.", obs_env);
}

// per-step reconstruction back to observation space
template <class S>
Tensor<S> env_decode(ParamStore<S>& ps, const ModelConfig& cfg, const Tensor<S>& z,
                     const std::string& pre = "env.") {
  using namespace ad;
  (void)cfg;
  Tensor<S> h = relu(linear(ps, pre + "dec.w1", pre + "dec.b1", z));
  return linear(ps, pre + "dec.w2", pre + "dec.b2", h);
}

template <class S>
Tensor<S> gru_cell(ParamStore<S>& ps, const std::string& pre, const Tensor<S>& x,
                   const Tensor<S>& h) {
  using namespace ad;
  Tensor<S> z = sigmoid(add_rowvec(
      add(matmul(x, ps.get(pre + "w_xz")), matmul(h, ps.get(pre + "w_hz"))), ps.get(pre + "b_z")));
  Tensor<S> r = sigmoid(add_rowvec(
      add(matmul(x, ps.get(pre + "w_xr")), matmul(h, ps.get(pre + "w_hr"))), ps.get(pre + "b_r")));
  Tensor<S> n = tanh_(add_rowvec(
      add(matmul(x, ps.get(pre + "w_xn")), matmul(mul(r, h), ps.get(pre + "w_hn"))),
      ps.get(pre + "b_n")));
  // h' = (1-z) o n + z o h
  return add(mul(add_const(neg(z), S(1)), n), mul(z, h));
}

template <class S>
Tensor<S> gru_direction(ParamStore<S>& ps, const std::string& pre, const Tensor<S>& x) {
  using namespace ad;
  int B = x.dim(0), T = x.dim(1), H = ps.get(pre + "w_hz").dim(0);
  Tensor<S> h = Tensor<S>::zeros({B, H});
  std::vector<Tensor<S>> steps;
  steps.reserve(size_t(T));
  for (int t = 0; t < T; ++t) {
    h = gru_cell(ps, pre, select_axis1(x, t), h);
    steps.push_back(h);
  }
  return stack_axis1(steps);
}

// self stream: bidirectional recurrence, sigmoid feature gate on [h_f; h_b]
template <class S>
Tensor<S> self_encode(ParamStore<S>& ps, const ModelConfig& cfg, const Tensor<S>& obs_self) {
  using namespace ad;
  (void)cfg;
  Tensor<S> hf = gru_direction(ps, "self.gru.fwd.", obs_self);
  Tensor<S> hb = reverse_axis1(gru_direction(ps, "self.gru.bwd.", reverse_axis1(obs_self)));
  Tensor<S> hbi = concat_lastdim(hf, hb);
  Tensor<S> gate = sigmoid(linear(ps, "self.gate.weight", "self.gate.bias", hbi));
  return mul(hbi, gate);
}

// next-step latent prediction head used by the stage-1 self loss
template <class S>
Tensor<S> self_predict(ParamStore<S>& ps, const Tensor<S>& z_self) {
  using namespace ad;
  Tensor<S> h = relu(linear(ps, "self.pred.w1", "self.pred.b1", z_self));
  return linear(ps, "self.pred.w2", "self.pred.b2", h);
}

// temporal mean pool + linear projection into the shared fusion space
template <class S>
Tensor<S> project_stream(ParamStore<S>& ps, const std::string& w, const std::string& b,
                         const Tensor<S>& z) {
  return linear(ps, w, b, ad::mean_axis1(z));
}

// ---- fusion strategies ----

template <class S>
Tensor<S> fuse_cross(ParamStore<S>& ps, const ModelConfig& cfg, const Tensor<S>& f_env,
                     const Tensor<S>& f_self) {
  return mha_vec(ps, "fusion.cross.", f_self, f_env, cfg.attn_heads);
}

template <class S>
Tensor<S> fuse_gate(ParamStore<S>& ps, const Tensor<S>& f_env, const Tensor<S>& f_self) {
  using namespace ad;
  Tensor<S> g = sigmoid(
      linear(ps, "fusion.gate.weight", "fusion.gate.bias", concat_lastdim(f_env, f_self)));
  return add(mul(g, f_env), mul(add_const(neg(g), S(1)), f_self));
}

template <class S>
Tensor<S> fuse_moe(ParamStore<S>& ps, const Tensor<S>& f_env, const Tensor<S>& f_self) {
  using namespace ad;
  Tensor<S> u = concat_lastdim(f_env, f_self);
  Tensor<S> w = softmax_lastdim(
      linear(ps, "fusion.moe.router.weight", "fusion.moe.router.bias", u));  // [B,4]
  Tensor<S> out;
  for (int i = 1; i <= 4; ++i) {
    std::string base = "fusion.moe.e" + std::to_string(i) + ".";
    Tensor<S> h = relu(linear(ps, base + "w1", base + "b1", u));
    Tensor<S> e = linear(ps, base + "w2", base + "b2", h);
    Tensor<S> wi = sum_lastdim(slice_lastdim(w, i - 1, 1));  // [B]
    Tensor<S> term = mul_rows(e, wi);
    out = out.defined() ? add(out, term) : term;
  }
  return out;
}

struct FusionOut {
  template <class S>
  struct Of {
    Tensor<S> f_cross, f_gate, f_moe, fused, weights;
  };
};

template <class S>
typename FusionOut::Of<S> fuse_combine(ParamStore<S>& ps, const ModelConfig& cfg,
                                       const Tensor<S>& f_env, const Tensor<S>& f_self) {
  using namespace ad;
  typename FusionOut::Of<S> out;
  if (!cfg.blended_fusion()) {
    out.fused = linear(ps, "fusion.concat.weight", "fusion.concat.bias",
                       concat_lastdim(f_env, f_self));
    return out;
  }
  out.f_cross = fuse_cross(ps, cfg, f_env, f_self);
  out.f_gate = fuse_gate(ps, f_env, f_self);
  out.f_moe = fuse_moe(ps, f_env, f_self);
  out.weights = softmax_lastdim(ps.get("fusion.combine.raw"));  // [3] on the simplex
  Tensor<S> a = slice_lastdim(out.weights, 0, 1);
  Tensor<S> b = slice_lastdim(out.weights, 1, 1);
  Tensor<S> c = slice_lastdim(out.weights, 2, 1);
  out.fused = add(add(mul_bscalar(out.f_cross, a), mul_bscalar(out.f_gate, b)),
                  mul_bscalar(out.f_moe, c));
  return out;
}

// ---- trunk and heads ----

template <class S>
Tensor<S> trunk(ParamStore<S>& ps, const ModelConfig& cfg, const Tensor<S>& x0) {
  using namespace ad;
  Tensor<S> x = x0;
  for (int l = 0; l < cfg.trunk_layers; ++l) {
    std::string base = "trunk.l" + std::to_string(l) + ".";
    Tensor<S> a = add_rowvec(
        mul_rowvec(layer_norm_lastdim(x, S(1e-5)), ps.get(base + "ln1.gain")),
        ps.get(base + "ln1.bias"));
    x = add(x, mha_vec(ps, base + "attn.", a, a, cfg.trunk_heads));
    Tensor<S> b = add_rowvec(
        mul_rowvec(layer_norm_lastdim(x, S(1e-5)), ps.get(base + "ln2.gain")),
        ps.get(base + "ln2.bias"));
    Tensor<S> ff = linear(ps, base + "ff.w2", base + "ff.b2",
                          relu(linear(ps, base + "ff.w1", base + "ff.b1", b)));
    x = add(x, ff);
  }
  return x;
}

template <class S>
struct PolicyOutput {
  Tensor<S> z_env, z_self;          // per-step stream encodings [B,T,*]
  Tensor<S> f_env, f_self;          // projected stream features [B,d]
  Tensor<S> f_cross, f_gate, f_moe; // fusion strategy outputs (blended variants)
  Tensor<S> fusion_weights;         // combiner simplex [3]
  Tensor<S> f_fused, h;
  Tensor<S> mean, log_std, value;   // [B,A], [A], [B]
};

template <class S>
Tensor<S> broadcast_param_rows(ParamStore<S>& ps, const std::string& name, int B) {
  Tensor<S>& p = ps.get(name);
  return ad::add_rowvec(Tensor<S>::zeros({B, p.dim(0)}), p);
}

template <class S>
PolicyOutput<S> policy_forward(ParamStore<S>& ps, const ModelConfig& cfg,
                               const Tensor<S>& obs_env, const Tensor<S>& obs_self) {
  using namespace ad;
  PolicyOutput<S> out;
  int B = obs_env.dim(0);

  if (cfg.variant == "unified") {
    Tensor<S> z = conv_attn_encode(ps, cfg, "uni.", concat_lastdim(obs_env, obs_self));
    int half = cfg.conv_total() / 2;
    out.z_env = slice_lastdim(z, 0, half);
    out.z_self = slice_lastdim(z, half, half);
    out.f_env = project_stream(ps, "uni.proj_env.weight", "uni.proj_env.bias", out.z_env);
    out.f_self = project_stream(ps, "uni.proj_self.weight", "uni.proj_self.bias", out.z_self);
  } else {
    if (cfg.has_env()) {
      out.z_env = env_encode(ps, cfg, obs_env);
      out.f_env = project_stream(ps, "env.proj.weight", "env.proj.bias", out.z_env);
    } else {
      out.f_env = broadcast_param_rows(ps, "fusion.const_env", B);
    }
    if (cfg.has_self()) {
      out.z_self = self_encode(ps, cfg, obs_self);
      out.f_self = project_stream(ps, "self.proj.weight", "self.proj.bias", out.z_self);
    } else {
      out.f_self = broadcast_param_rows(ps, "fusion.const_self", B);
    }
  }

  auto fo = fuse_combine(ps, cfg, out.f_env, out.f_self);
  out.f_cross = fo.f_cross;
  out.f_gate = fo.f_gate;
  out.f_moe = fo.f_moe;
  out.fusion_weights = fo.weights;
  out.f_fused = fo.fused;
  out.h = trunk(ps, cfg, out.f_fused);
  out.mean = linear(ps, "head.policy.weight", "head.policy.bias", out.h);
  out.log_std = clamp(ps.get("head.logstd"), S(-5), S(2));
  out.value = sum_lastdim(linear(ps, "head.value.weight", "head.value.bias", out.h));  // [B]
  return out;
}

// diagonal Gaussian log density of actions[B,A] under (mean, log_std)
template <class S>
Tensor<S> gaussian_log_prob(const Tensor<S>& mean, const Tensor<S>& log_std,
                            const Tensor<S>& actions) {
  using namespace ad;
  Tensor<S> d = sub(actions, mean);
  Tensor<S> inv_var = exp_(scale(log_std, S(-2)));
  Tensor<S> quad = scale(mul_rowvec(square(d), inv_var), S(-0.5));
  Tensor<S> per_dim = add_const(add_rowvec(quad, neg(log_std)), S(-0.9189385332046727));
  return sum_lastdim(per_dim);  // [B]
}

// entropy of the diagonal Gaussian; depends only on log_std
template <class S>
Tensor<S> gaussian_entropy(const Tensor<S>& log_std) {
  using namespace ad;
  return add_const(sum_all(log_std), S(1.4189385332046727 * log_std.numel()));
}

}  // namespace alas::model
