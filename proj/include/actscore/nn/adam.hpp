#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "actscore/error.hpp"
#include "actscore/nn/model.hpp"

namespace actscore::nn {

struct AdamState {
  Parameters first_moment;
  Parameters second_moment;
  std::size_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double learning_rate = 1e-3;

  static AdamState for_params(const Parameters& params, double learning_rate = 1e-3) {
    AdamState s;
    s.first_moment = zeros_like(params);
    s.second_moment = zeros_like(params);
    s.learning_rate = learning_rate;
    return s;
  }
};

namespace detail {

inline void require_same_layout(const Parameters& a, const Parameters& b, const char* what) {
  bool ok = a.size() == b.size();
  for (std::size_t l = 0; ok && l < a.size(); ++l) {
    ok = a[l].size() == b[l].size();
    for (std::size_t p = 0; ok && p < a[l].size(); ++p) ok = a[l][p].shape() == b[l][p].shape();
  }
  if (!ok) throw ShapeError(std::string("adam_step: ") + what + " layout does not match parameters");
}

}  // namespace detail

/// One bias-corrected Adam update of `params` in place.
inline void adam_step(AdamState& state, Parameters& params, const Parameters& grads) {
  detail::require_same_layout(params, grads, "gradient");
  detail::require_same_layout(params, state.first_moment, "first moment");
  detail::require_same_layout(params, state.second_moment, "second moment");
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t l = 0; l < params.size(); ++l)
    for (std::size_t p = 0; p < params[l].size(); ++p) {
      double* w = params[l][p].data();
      double* m = state.first_moment[l][p].data();
      double* v = state.second_moment[l][p].data();
      const double* g = grads[l][p].data();
      for (std::size_t i = 0; i < params[l][p].size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
      }
    }
}

}  // namespace actscore::nn
