#pragma once
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "alas/tensor.hpp"

// Observation-channel splitting and the correlation-based mutual information
// estimate used both as a training regularizer and as a reported metric.

namespace alas::dsp {

// Channel partition of a raw observation vector into environment-facing and
// self-state groups. Every channel must appear in exactly one group.
struct SplitLayout {
  int d_raw = 0;
  std::vector<int> env_idx;
  std::vector<int> self_idx;

  void validate() const {
    std::vector<int> seen(size_t(d_raw), 0);
    auto mark = [&](const std::vector<int>& idx) {
      for (int i : idx) {
        if (i < 0 || i >= d_raw) throw std::runtime_error("split layout: channel index out of range");
        if (seen[size_t(i)]++) throw std::runtime_error("split layout: overlapping channel assignment");
      }
    };
    mark(env_idx);
    mark(self_idx);
    for (int i = 0; i < d_raw; ++i)
      if (!seen[size_t(i)]) throw std::runtime_error("split layout: unassigned channel");
  }

  int d_env() const { return int(env_idx.size()); }
  int d_self() const { return int(self_idx.size()); }
};

// rows: n_rows x d_raw, row-major
template <class S>
std::pair<std::vector<S>, std::vector<S>> split_rows(const std::vector<S>& rows, int n_rows,
                                                     const SplitLayout& layout) {
  if (rows.size() != size_t(n_rows) * size_t(layout.d_raw))
    throw std::runtime_error("split: row buffer does not match layout width");
  std::vector<S> env(size_t(n_rows) * layout.env_idx.size());
  std::vector<S> self(size_t(n_rows) * layout.self_idx.size());
  for (int r = 0; r < n_rows; ++r) {
    const S* src = rows.data() + size_t(r) * layout.d_raw;
    for (size_t c = 0; c < layout.env_idx.size(); ++c)
      env[size_t(r) * layout.env_idx.size() + c] = src[layout.env_idx[c]];
    for (size_t c = 0; c < layout.self_idx.size(); ++c)
      self[size_t(r) * layout.self_idx.size() + c] = src[layout.self_idx[c]];
  }
  return {std::move(env), std::move(self)};
}

template <class S>
std::vector<S> merge_rows(const std::vector<S>& env, const std::vector<S>& self, int n_rows,
                          const SplitLayout& layout) {
  std::vector<S> rows(size_t(n_rows) * size_t(layout.d_raw));
  for (int r = 0; r < n_rows; ++r) {
    S* dst = rows.data() + size_t(r) * layout.d_raw;
    for (size_t c = 0; c < layout.env_idx.size(); ++c)
      dst[layout.env_idx[c]] = env[size_t(r) * layout.env_idx.size() + c];
    for (size_t c = 0; c < layout.self_idx.size(); ++c)
      dst[layout.self_idx[c]] = self[size_t(r) * layout.self_idx.size() + c];
  }
  return rows;
}

// columns of x[N,C] centered and scaled to unit variance; near-constant
// columns come out as all-zero instead of blowing up
template <class S>
ad::Tensor<S> normalize_columns(const ad::Tensor<S>& x, S tiny = S(1e-8)) {
  using namespace ad;
  Tensor<S> mean = mean_axis0(x);
  Tensor<S> centered = add_rowvec(x, neg(mean));
  Tensor<S> var = mean_axis0(square(centered));
  Tensor<S> inv_std = exp_(scale(log_(add_const(var, tiny)), S(-0.5)));
  return mul_rowvec(centered, inv_std);
}

// Pearson correlation matrix between columns of a[N,p] and b[N,q]
template <class S>
ad::Tensor<S> corr_matrix(const ad::Tensor<S>& a, const ad::Tensor<S>& b) {
  using namespace ad;
  if (a.rank() != 2 || b.rank() != 2 || a.dim(0) != b.dim(0))
    throw std::runtime_error("corr_matrix: inputs must share the sample axis");
  if (a.dim(0) < 2) throw std::runtime_error("corr_matrix: need at least 2 samples");
  Tensor<S> an = normalize_columns(a);
  Tensor<S> bn = normalize_columns(b);
  return scale(matmul(transpose2(an), bn), S(1) / S(a.dim(0)));
}

// per-pair Gaussian MI lower-bound surrogate: -1/2 log(1 - rho^2), with rho^2
// capped just under 1 so the estimate stays finite and differentiable
template <class S>
ad::Tensor<S> mi_pairwise(const ad::Tensor<S>& a, const ad::Tensor<S>& b) {
  using namespace ad;
  Tensor<S> r2 = clamp(square(corr_matrix(a, b)), S(0), S(1.0 - 1e-6));
  return scale(log_(add_const(neg(r2), S(1))), S(-0.5));
}

// aggregate estimate: mean over all column pairs; differentiable in a and b
template <class S>
ad::Tensor<S> mi_estimate(const ad::Tensor<S>& a, const ad::Tensor<S>& b) {
  return ad::mean_all(mi_pairwise(a, b));
}

struct MIReport {
  int p = 0, q = 0;
  std::vector<double> per_pair;  // row-major p x q
  double aggregate = 0.0;
};

template <class S>
MIReport mi_report(const ad::Tensor<S>& a, const ad::Tensor<S>& b) {
  auto pw = mi_pairwise(a, b);
  MIReport rep;
  rep.p = pw.dim(0);
  rep.q = pw.dim(1);
  rep.per_pair.assign(pw.values().begin(), pw.values().end());
  double acc = 0;
  for (double v : rep.per_pair) acc += v;
  rep.aggregate = rep.per_pair.empty() ? 0.0 : acc / double(rep.per_pair.size());
  return rep;
}

// discounted interaction measure over an episode slice:
// sum_t gamma^t * mi(env_t, self_t), t starting at 0
template <class S>
double discounted_interaction(const std::vector<std::pair<ad::Tensor<S>, ad::Tensor<S>>>& steps,
                              double gamma) {
  double acc = 0.0;
  double w = 1.0;
  for (const auto& [env_t, self_t] : steps) {
    acc += w * double(mi_estimate(env_t, self_t).item());
    w *= gamma;
  }
  return acc;
}

}  // namespace alas::dsp
