#pragma once

// Named parameter storage and the Adam optimizer.

#include <map>
#include <string>

#include "udep/autodiff.hpp"
#include "udep/errors.hpp"

namespace udep {

// Ordered by name so every iteration over parameters is deterministic.
using ParamStore = std::map<std::string, ad::Tensor>;
using GradMap = std::map<std::string, ad::Tensor>;

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  long step_count = 0;
  std::map<std::string, ad::Tensor> m;  // first moments
  std::map<std::string, ad::Tensor> v;  // second moments
};

inline AdamState make_adam_state(const ParamStore& params, AdamConfig cfg = {}) {
  AdamState st;
  st.cfg = cfg;
  for (const auto& [name, t] : params) {
    st.m.emplace(name, ad::Tensor::zeros(t.rows, t.cols));
    st.v.emplace(name, ad::Tensor::zeros(t.rows, t.cols));
  }
  return st;
}

// One bias-corrected Adam update. Increments step_count exactly once.
inline void adam_step(ParamStore& params, const GradMap& grads, AdamState& state) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
    if (!it->second.same_shape(g))
      throw ContractError("adam_step: shape mismatch for '" + name + "': param " +
                          it->second.shape_str() + " vs grad " + g.shape_str());
  }
  state.step_count += 1;
  double t = static_cast<double>(state.step_count);
  double bc1 = 1.0 - std::pow(state.cfg.beta1, t);
  double bc2 = 1.0 - std::pow(state.cfg.beta2, t);
  for (const auto& [name, g] : grads) {
    ad::Tensor& p = params.at(name);
    ad::Tensor& m = state.m.at(name);
    ad::Tensor& v = state.v.at(name);
    for (long i = 0; i < p.numel(); ++i) {
      m.v[i] = state.cfg.beta1 * m.v[i] + (1.0 - state.cfg.beta1) * g.v[i];
      v.v[i] = state.cfg.beta2 * v.v[i] + (1.0 - state.cfg.beta2) * g.v[i] * g.v[i];
      double mhat = m.v[i] / bc1;
      double vhat = v.v[i] / bc2;
      p.v[i] -= state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.epsilon);
    }
  }
}

}  // namespace udep
