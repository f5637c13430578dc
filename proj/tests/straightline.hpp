#pragma once
// Independent plain-loop float64 references for the encoder and fusion maps.
// Everything here works on std::vector rows and a flat name -> values map
// (a ParamStore snapshot), sharing no computation code with the library.

#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ref {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // list of rows
using Params = std::map<std::string, Vec>;

inline const Vec& P(const Params& p, const std::string& k) {
  auto it = p.find(k);
  if (it == p.end()) throw std::runtime_error("ref: missing param " + k);
  return it->second;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = x * W + b, with W stored row-major as [in][out]
inline Vec affine(const Vec& x, const Vec& w, const Vec& b, int in, int out) {
  Vec y(size_t(out), 0.0);
  for (int i = 0; i < in; ++i)
    for (int j = 0; j < out; ++j) y[size_t(j)] += x[size_t(i)] * w[size_t(i) * out + j];
  if (!b.empty())
    for (int j = 0; j < out; ++j) y[size_t(j)] += b[size_t(j)];
  return y;
}

inline Mat affine_rows(const Mat& x, const Vec& w, const Vec& b, int in, int out) {
  Mat y;
  y.reserve(x.size());
  for (const Vec& r : x) y.push_back(affine(r, w, b, in, out));
  return y;
}

inline Vec softmax(const Vec& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  Vec y(z.size());
  double sum = 0;
  for (size_t i = 0; i < z.size(); ++i) {
    y[i] = std::exp(z[i] - mx);
    sum += y[i];
  }
  for (double& v : y) v /= sum;
  return y;
}

// same-length 1-D convolution over time with zero padding; w is [k][ci][co]
inline Mat conv1d_same(const Mat& x, const Vec& w, const Vec& b, int k, int ci, int co) {
  int T = int(x.size());
  Mat y(size_t(T), Vec(size_t(co), 0.0));
  int half = k / 2;
  for (int t = 0; t < T; ++t)
    for (int tk = 0; tk < k; ++tk) {
      int src = t + tk - half;
      if (src < 0 || src >= T) continue;
      for (int c = 0; c < ci; ++c) {
        double xv = x[size_t(src)][size_t(c)];
        for (int o = 0; o < co; ++o)
          y[size_t(t)][size_t(o)] += xv * w[(size_t(tk) * ci + c) * co + o];
      }
    }
  for (int t = 0; t < T; ++t)
    for (int o = 0; o < co; ++o) y[size_t(t)][size_t(o)] += b[size_t(o)];
  return y;
}

// multi-head self-attention over a length-T sequence; per-head matrices are
// column slices of the full [C][C] projections
inline Mat mha_seq(const Mat& s, const Vec& wq, const Vec& wk, const Vec& wv, const Vec& wo,
                   int heads) {
  int T = int(s.size());
  int C = int(s[0].size());
  int dh = C / heads;
  Mat q = affine_rows(s, wq, {}, C, C);
  Mat k = affine_rows(s, wk, {}, C, C);
  Mat v = affine_rows(s, wv, {}, C, C);
  Mat cat(size_t(T), Vec(size_t(C), 0.0));
  for (int h = 0; h < heads; ++h) {
    int off = h * dh;
    for (int t = 0; t < T; ++t) {
      Vec scores(size_t(T), 0.0);
      for (int u = 0; u < T; ++u) {
        double dot = 0;
        for (int j = 0; j < dh; ++j) dot += q[size_t(t)][size_t(off + j)] * k[size_t(u)][size_t(off + j)];
        scores[size_t(u)] = dot / std::sqrt(double(dh));
      }
      Vec a = softmax(scores);
      for (int u = 0; u < T; ++u)
        for (int j = 0; j < dh; ++j)
          cat[size_t(t)][size_t(off + j)] += a[size_t(u)] * v[size_t(u)][size_t(off + j)];
    }
  }
  return affine_rows(cat, wo, {}, C, C);
}

inline Mat layer_norm_affine(const Mat& x, const Vec& gain, const Vec& bias, double eps) {
  int C = int(x[0].size());
  Mat y(x.size(), Vec(size_t(C), 0.0));
  for (size_t t = 0; t < x.size(); ++t) {
    double mean = 0;
    for (double v : x[t]) mean += v;
    mean /= C;
    double var = 0;
    for (double v : x[t]) var += (v - mean) * (v - mean);
    var /= C;
    double istd = 1.0 / std::sqrt(var + eps);
    for (int c = 0; c < C; ++c)
      y[t][size_t(c)] = (x[t][size_t(c)] - mean) * istd * gain[size_t(c)] + bias[size_t(c)];
  }
  return y;
}

// conv bank over all kernel sizes, channel-concatenated
inline Mat conv_bank(const Mat& x, const Params& p, const std::string& pre,
                     const std::vector<int>& kernels, int ch) {
  int T = int(x.size());
  int d_in = int(x[0].size());
  Mat s(static_cast<size_t>(T));
  for (int k : kernels) {
    std::string base = pre + "conv.k" + std::to_string(k) + ".";
    Mat y = conv1d_same(x, P(p, base + "weight"), P(p, base + "bias"), k, d_in, ch);
    for (int t = 0; t < T; ++t) s[size_t(t)].insert(s[size_t(t)].end(), y[size_t(t)].begin(), y[size_t(t)].end());
  }
  return s;
}

// conv bank -> residual self-attention -> layer norm
inline Mat env_encode(const Mat& obs, const Params& p, const std::string& pre,
                      const std::vector<int>& kernels, int ch, int heads) {
  Mat s = conv_bank(obs, p, pre, kernels, ch);
  Mat att = mha_seq(s, P(p, pre + "attn.wq"), P(p, pre + "attn.wk"), P(p, pre + "attn.wv"),
                    P(p, pre + "attn.wo"), heads);
  for (size_t t = 0; t < s.size(); ++t)
    for (size_t c = 0; c < s[t].size(); ++c) att[t][c] += s[t][c];
  return layer_norm_affine(att, P(p, pre + "ln.gain"), P(p, pre + "ln.bias"), 1e-5);
}

inline Mat env_decode(const Mat& z, const Params& p, const std::string& pre) {
  int c = int(z[0].size());
  int d = int(P(p, pre + "dec.b2").size());
  Mat h = affine_rows(z, P(p, pre + "dec.w1"), P(p, pre + "dec.b1"), c, c);
  for (auto& row : h)
    for (double& v : row) v = std::max(v, 0.0);
  return affine_rows(h, P(p, pre + "dec.w2"), P(p, pre + "dec.b2"), c, d);
}

// single gated-recurrence direction; returns hidden state per step
inline Mat gru_scan(const Mat& x, const Params& p, const std::string& pre, int H) {
  int din = int(x[0].size());
  const Vec& wxz = P(p, pre + "w_xz");
  const Vec& whz = P(p, pre + "w_hz");
  const Vec& bz = P(p, pre + "b_z");
  const Vec& wxr = P(p, pre + "w_xr");
  const Vec& whr = P(p, pre + "w_hr");
  const Vec& br = P(p, pre + "b_r");
  const Vec& wxn = P(p, pre + "w_xn");
  const Vec& whn = P(p, pre + "w_hn");
  const Vec& bn = P(p, pre + "b_n");
  Vec h(size_t(H), 0.0);
  Mat out;
  out.reserve(x.size());
  for (const Vec& xt : x) {
    Vec z = affine(xt, wxz, bz, din, H);
    Vec zh = affine(h, whz, {}, H, H);
    Vec r = affine(xt, wxr, br, din, H);
    Vec rh = affine(h, whr, {}, H, H);
    for (int j = 0; j < H; ++j) {
      z[size_t(j)] = sigmoid(z[size_t(j)] + zh[size_t(j)]);
      r[size_t(j)] = sigmoid(r[size_t(j)] + rh[size_t(j)]);
    }
    Vec rh_state(static_cast<size_t>(H));
    for (int j = 0; j < H; ++j) rh_state[size_t(j)] = r[size_t(j)] * h[size_t(j)];
    Vec n = affine(xt, wxn, bn, din, H);
    Vec nh = affine(rh_state, whn, {}, H, H);
    for (int j = 0; j < H; ++j) n[size_t(j)] = std::tanh(n[size_t(j)] + nh[size_t(j)]);
    for (int j = 0; j < H; ++j) h[size_t(j)] = (1.0 - z[size_t(j)]) * n[size_t(j)] + z[size_t(j)] * h[size_t(j)];
    out.push_back(h);
  }
  return out;
}

struct SelfOut {
  Mat z;    // gated output per step
  Mat hbi;  // pre-gate bidirectional state
};

inline SelfOut self_encode(const Mat& obs, const Params& p, int H) {
  int T = int(obs.size());
  Mat hf = gru_scan(obs, p, "self.gru.fwd.", H);
  Mat rev(obs.rbegin(), obs.rend());
  Mat hb_rev = gru_scan(rev, p, "self.gru.bwd.", H);
  SelfOut out;
  out.hbi.assign(size_t(T), Vec());
  for (int t = 0; t < T; ++t) {
    out.hbi[size_t(t)] = hf[size_t(t)];
    const Vec& hb = hb_rev[size_t(T - 1 - t)];
    out.hbi[size_t(t)].insert(out.hbi[size_t(t)].end(), hb.begin(), hb.end());
  }
  const Vec& wg = P(p, "self.gate.weight");
  const Vec& bg = P(p, "self.gate.bias");
  out.z.assign(size_t(T), Vec(size_t(2 * H), 0.0));
  for (int t = 0; t < T; ++t) {
    Vec g = affine(out.hbi[size_t(t)], wg, bg, 2 * H, 2 * H);
    for (int j = 0; j < 2 * H; ++j)
      out.z[size_t(t)][size_t(j)] = out.hbi[size_t(t)][size_t(j)] * sigmoid(g[size_t(j)]);
  }
  return out;
}

inline Vec mean_rows(const Mat& x) {
  Vec m(x[0].size(), 0.0);
  for (const Vec& r : x)
    for (size_t i = 0; i < r.size(); ++i) m[i] += r[i];
  for (double& v : m) v /= double(x.size());
  return m;
}

// cross attention with a single query and a single key/value vector; the
// per-head softmax over one key is computed literally
inline Vec fuse_cross(const Vec& f_self, const Vec& f_env, const Params& p, int heads) {
  int d = int(f_self.size());
  int dh = d / heads;
  Vec q = affine(f_self, P(p, "fusion.cross.wq"), {}, d, d);
  Vec k = affine(f_env, P(p, "fusion.cross.wk"), {}, d, d);
  Vec v = affine(f_env, P(p, "fusion.cross.wv"), {}, d, d);
  Vec cat(size_t(d), 0.0);
  for (int h = 0; h < heads; ++h) {
    int off = h * dh;
    double dot = 0;
    for (int j = 0; j < dh; ++j) dot += q[size_t(off + j)] * k[size_t(off + j)];
    Vec a = softmax({dot / std::sqrt(double(dh))});
    for (int j = 0; j < dh; ++j) cat[size_t(off + j)] = a[0] * v[size_t(off + j)];
  }
  return affine(cat, P(p, "fusion.cross.wo"), {}, d, d);
}

inline Vec fuse_gate(const Vec& f_env, const Vec& f_self, const Params& p) {
  int d = int(f_env.size());
  Vec u(f_env);
  u.insert(u.end(), f_self.begin(), f_self.end());
  Vec g = affine(u, P(p, "fusion.gate.weight"), P(p, "fusion.gate.bias"), 2 * d, d);
  Vec y(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) {
    double gj = sigmoid(g[size_t(j)]);
    y[size_t(j)] = gj * f_env[size_t(j)] + (1.0 - gj) * f_self[size_t(j)];
  }
  return y;
}

inline Vec fuse_moe(const Vec& f_env, const Vec& f_self, const Params& p) {
  int d = int(f_env.size());
  Vec u(f_env);
  u.insert(u.end(), f_self.begin(), f_self.end());
  Vec w = softmax(affine(u, P(p, "fusion.moe.router.weight"), P(p, "fusion.moe.router.bias"),
                         2 * d, 4));
  Vec y(size_t(d), 0.0);
  for (int i = 1; i <= 4; ++i) {
    std::string base = "fusion.moe.e" + std::to_string(i) + ".";
    Vec h = affine(u, P(p, base + "w1"), P(p, base + "b1"), 2 * d, 2 * d);
    for (double& v : h) v = std::max(v, 0.0);
    Vec e = affine(h, P(p, base + "w2"), P(p, base + "b2"), 2 * d, d);
    for (int j = 0; j < d; ++j) y[size_t(j)] += w[size_t(i - 1)] * e[size_t(j)];
  }
  return y;
}

inline Vec combine(const Vec& fc, const Vec& fg, const Vec& fm, const Params& p) {
  Vec w = softmax(P(p, "fusion.combine.raw"));
  Vec y(fc.size());
  for (size_t j = 0; j < fc.size(); ++j) y[j] = w[0] * fc[j] + w[1] * fg[j] + w[2] * fm[j];
  return y;
}

}  // namespace ref
