// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "rlddu/rng.hpp"
#include "rlddu/types.hpp"

namespace rlddu::nets {

/// Convolution over a small (h x w) grid, stride 1, zero padding that
/// preserves the spatial shape. Returns pre-activation maps and accumulates
/// weight gradients on the backward pass.
struct Conv2d {
  int in_c = 0, out_c = 0, k = 3;
  std::vector<std::vector<rmat>> w;   ///< [out][in], k x k
  std::vector<std::vector<rmat>> gw;  ///< gradient accumulators
  rvec b, gb;
  std::vector<rmat> x_cache;

  void init(int in_channels, int out_channels, int kernel, Rng& rng);
  std::vector<rmat> forward(const std::vector<rmat>& x);
  std::vector<rmat> backward(const std::vector<rmat>& dy);
};

struct Dense {
  rmat w, gw;
  rvec b, gb;
  rvec x_cache;

  void init(int in, int out, double w_std, Rng& rng);
  rvec forward(const rvec& x);
  rvec backward(const rvec& dy);
};

struct NetShape {
  int in_c = 0, h = 0, w = 0;  ///< context tensor shape
  int conv_c = 8;
  int kernel = 3;
  int fc = 128;
  int out = 0;
};

/// conv(3x3, 8ch) + relu, conv + relu, flatten, fc(128) + relu, fc(128) +
/// relu, linear head. All computation double precision, deterministic.
struct Mlp {
  NetShape shape;
  Conv2d c1, c2;
  Dense f1, f2, head;
  std::vector<rmat> z1, z2;  ///< conv pre-activations
  rvec z3, z4;               ///< fc pre-activations

  void init(const NetShape& s, Rng& rng);
  [[nodiscard]] rvec forward(const std::vector<rmat>& x);
  /// Accumulates parameter gradients for the last forward pass.
  void backward(const rvec& dout);
  void zero_grad();

  [[nodiscard]] std::size_t n_params() const;
  void params_to(double* dst) const;
  void params_from(const double* src);
  void grads_to(double* dst) const;
};

}  // namespace rlddu::nets
