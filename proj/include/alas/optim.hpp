#pragma once
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "alas/tensor.hpp"

namespace alas::optim {

// Adam over a ParamStore. Frozen parameters are skipped entirely; their
// moment state is not advanced while frozen. Global gradient-norm clipping
// runs over trainable parameters before the update.
template <class S>
class Adam {
 public:
  struct Config {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double grad_clip = 0.5;  // max global L2 norm; <= 0 disables
  };

  explicit Adam(Config cfg = {}) : cfg_(cfg) {}

  const Config& config() const { return cfg_; }
  void set_lr(double lr) { cfg_.lr = lr; }
  int64_t steps() const { return t_; }

  // returns the pre-clip global gradient norm
  double step(ad::ParamStore<S>& ps) {
    double sq = 0.0;
    ps.for_each([&](const std::string&, ad::Tensor<S>& t, bool frozen) {
      if (frozen || t.grad().size() != t.numel()) return;
      for (S g : t.grad()) sq += double(g) * double(g);
    });
    double norm = std::sqrt(sq);
    double scale = 1.0;
    if (cfg_.grad_clip > 0.0 && norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;

    ++t_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(t_));
    ps.for_each([&](const std::string& name, ad::Tensor<S>& t, bool frozen) {
      if (frozen) return;
      State& st = state_[name];
      if (st.m.size() != t.numel()) {
        st.m.assign(t.numel(), 0.0);
        st.v.assign(t.numel(), 0.0);
      }
      auto& vals = t.values();
      auto& grads = t.grad();
      const S* gp = grads.size() == vals.size() ? grads.data() : nullptr;
      for (size_t i = 0; i < vals.size(); ++i) {
        double g = gp ? double(gp[i]) * scale : 0.0;
        st.m[i] = cfg_.beta1 * st.m[i] + (1.0 - cfg_.beta1) * g;
        st.v[i] = cfg_.beta2 * st.v[i] + (1.0 - cfg_.beta2) * g * g;
        double mhat = st.m[i] / bc1;
        double vhat = st.v[i] / bc2;
        vals[i] = S(double(vals[i]) - cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps));
      }
    });
    return norm;
  }

  void reset() {
    state_.clear();
    t_ = 0;
  }

 private:
  struct State {
    std::vector<double> m, v;
  };
  Config cfg_;
  std::map<std::string, State> state_;
  int64_t t_ = 0;
};

}  // namespace alas::optim
