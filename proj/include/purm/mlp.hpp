#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "purm/rng.hpp"

namespace purm {

using FeatureVector = std::vector<double>;

// Single-hidden-layer tanh network: output = W2 * tanh(W1 * x + b1) + b2.
// Small enough that parameters live in flat row-major vectors and gradients
// reuse the same shape.
struct MlpParams {
  int d = 0;    // input dimension
  int h = 0;    // hidden width
  int out = 1;  // output heads
  std::vector<double> w1;  // h x d
  std::vector<double> b1;  // h
  std::vector<double> w2;  // out x h
  std::vector<double> b2;  // out

  static MlpParams zeros(int d, int h, int out) {
    if (d < 1 || h < 1 || out < 1) {
      throw std::invalid_argument("MlpParams: dimensions must be >= 1");
    }
    MlpParams p;
    p.d = d;
    p.h = h;
    p.out = out;
    p.w1.assign(static_cast<std::size_t>(h) * d, 0.0);
    p.b1.assign(h, 0.0);
    p.w2.assign(static_cast<std::size_t>(out) * h, 0.0);
    p.b2.assign(out, 0.0);
    return p;
  }

  std::size_t n_params() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
  }

  // Flat view in block order w1, b1, w2, b2; used by the optimizer and the
  // finite-difference harness.
  std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(n_params());
    flat.insert(flat.end(), w1.begin(), w1.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    flat.insert(flat.end(), w2.begin(), w2.end());
    flat.insert(flat.end(), b2.begin(), b2.end());
    return flat;
  }

  void assign_flat(const std::vector<double>& flat) {
    if (flat.size() != n_params()) {
      throw std::invalid_argument("assign_flat: size mismatch");
    }
    std::size_t k = 0;
    for (double& v : w1) v = flat[k++];
    for (double& v : b1) v = flat[k++];
    for (double& v : w2) v = flat[k++];
    for (double& v : b2) v = flat[k++];
  }

  void add_scaled(const MlpParams& g, double a) {
    for (std::size_t i = 0; i < w1.size(); ++i) w1[i] += a * g.w1[i];
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += a * g.b1[i];
    for (std::size_t i = 0; i < w2.size(); ++i) w2[i] += a * g.w2[i];
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += a * g.b2[i];
  }

  void scale(double a) {
    for (double& v : w1) v *= a;
    for (double& v : b1) v *= a;
    for (double& v : w2) v *= a;
    for (double& v : b2) v *= a;
  }
};

// Weights uniform in (-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero. The zero
// output-head biases put the initial log-sigma head at 0, i.e. a sigma=1
// prior.
inline MlpParams init_mlp(int d, int h, int out, Rng& rng) {
  MlpParams p = MlpParams::zeros(d, h, out);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : p.w1) v = rng.uniform(-s1, s1);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (double& v : p.w2) v = rng.uniform(-s2, s2);
  return p;
}

struct MlpActivation {
  std::vector<double> hidden;  // tanh(W1 x + b1)
  std::vector<double> output;  // W2 hidden + b2
};

inline MlpActivation mlp_forward(const MlpParams& p, const FeatureVector& x) {
  if (static_cast<int>(x.size()) != p.d) {
    throw std::invalid_argument("mlp_forward: input dimension mismatch");
  }
  MlpActivation act;
  act.hidden.resize(p.h);
  for (int i = 0; i < p.h; ++i) {
    double z = p.b1[i];
    const double* row = p.w1.data() + static_cast<std::size_t>(i) * p.d;
    for (int j = 0; j < p.d; ++j) z += row[j] * x[j];
    act.hidden[i] = std::tanh(z);
  }
  act.output.resize(p.out);
  for (int o = 0; o < p.out; ++o) {
    double z = p.b2[o];
    const double* row = p.w2.data() + static_cast<std::size_t>(o) * p.h;
    for (int i = 0; i < p.h; ++i) z += row[i] * act.hidden[i];
    act.output[o] = z;
  }
  return act;
}

// Reverse-mode pass. out_grad is dLoss/d output; gradients accumulate into
// grad (same shapes as p), so one container serves a whole minibatch.
inline void mlp_backward(const MlpParams& p, const FeatureVector& x,
                         const MlpActivation& act,
                         const std::vector<double>& out_grad, MlpParams& grad) {
  if (static_cast<int>(out_grad.size()) != p.out) {
    throw std::invalid_argument("mlp_backward: out_grad dimension mismatch");
  }
  std::vector<double> dh(p.h, 0.0);
  for (int o = 0; o < p.out; ++o) {
    const double g = out_grad[o];
    if (g == 0.0) continue;
    grad.b2[o] += g;
    const double* w2row = p.w2.data() + static_cast<std::size_t>(o) * p.h;
    double* g2row = grad.w2.data() + static_cast<std::size_t>(o) * p.h;
    for (int i = 0; i < p.h; ++i) {
      g2row[i] += g * act.hidden[i];
      dh[i] += g * w2row[i];
    }
  }
  for (int i = 0; i < p.h; ++i) {
    const double a = act.hidden[i];
    const double du = dh[i] * (1.0 - a * a);  // tanh'
    if (du == 0.0) continue;
    grad.b1[i] += du;
    double* g1row = grad.w1.data() + static_cast<std::size_t>(i) * p.d;
    for (int j = 0; j < p.d; ++j) g1row[j] += du * x[j];
  }
}

}  // namespace purm
