#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "actscore/nn/layers.hpp"
#include "actscore/rng.hpp"

namespace actscore::nn {

/// Worst relative error of one layer's backward pass. The layer is reduced
/// to the scalar L = sum_i r_i * y_i with fixed random weights r; analytic
/// input and parameter gradients of L are compared with central differences.
/// Dropout runs in train mode with the same mask for every evaluation.
inline double layer_grad_check(const LayerSpec& layer, std::vector<Tensor> params, Tensor input, double h,
                               std::uint64_t seed) {
  const bool train = layer.kind == LayerKind::dropout;
  auto eval = [&](const std::vector<Tensor>& p, const Tensor& x, const Tensor& r) {
    Rng rng(seed);
    const Tensor y = layer_forward(layer, p, x, train, &rng);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };
  Rng mask_rng(seed);
  const auto cache = layer_forward_cached(layer, params, input, train, &mask_rng);
  Tensor r(cache.output.shape());
  Rng weights(derive_seed(seed, {0x77}));
  for (auto& v : r.values()) v = weights.uniform() * 2.0 - 1.0;

  std::vector<Tensor> pgrads;
  for (const auto& p : params) pgrads.push_back(Tensor::zeros(p.shape()));
  const Tensor gin = layer_backward(layer, params, cache, r, pgrads);

  double worst = 0.0;
  auto compare = [&](double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  for (std::size_t i = 0; i < input.size(); ++i) {
    const double saved = input[i];
    input[i] = saved + h;
    const double up = eval(params, input, r);
    input[i] = saved - h;
    const double down = eval(params, input, r);
    input[i] = saved;
    compare(gin[i], (up - down) / (2.0 * h));
  }
  for (std::size_t p = 0; p < params.size(); ++p)
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      const double saved = params[p][i];
      params[p][i] = saved + h;
      const double up = eval(params, input, r);
      params[p][i] = saved - h;
      const double down = eval(params, input, r);
      params[p][i] = saved;
      compare(pgrads[p][i], (up - down) / (2.0 * h));
    }
  return worst;
}

}  // namespace actscore::nn
