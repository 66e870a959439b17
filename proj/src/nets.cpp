// SPDX-License-Identifier: Apache-2.0
#include "rlddu/nets.hpp"

#include <cmath>
#include <stdexcept>

namespace rlddu::nets {

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw std::invalid_argument(msg);
}

rmat gauss_mat(int r, int c, double std, Rng& rng) {
  rmat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = std * rng.gauss();
  return m;
}

}  // namespace

void Conv2d::init(int in_channels, int out_channels, int kernel, Rng& rng) {
  require(kernel % 2 == 1, "Conv2d: odd kernel required");
  in_c = in_channels;
  out_c = out_channels;
  k = kernel;
  const double std = std::sqrt(2.0 / (double(in_c) * k * k));
  w.assign(size_t(out_c), {});
  gw.assign(size_t(out_c), {});
  for (int o = 0; o < out_c; ++o)
    for (int i = 0; i < in_c; ++i) {
      w[size_t(o)].push_back(gauss_mat(k, k, std, rng));
      gw[size_t(o)].push_back(rmat::Zero(k, k));
    }
  b = rvec::Zero(out_c);
  gb = rvec::Zero(out_c);
}

std::vector<rmat> Conv2d::forward(const std::vector<rmat>& x) {
  require(int(x.size()) == in_c, "Conv2d: channel count mismatch");
  x_cache = x;
  const int h = int(x[0].rows()), wd = int(x[0].cols());
  const int p = (k - 1) / 2;
  std::vector<rmat> y(size_t(out_c), rmat::Constant(h, wd, 0.0));
  for (int o = 0; o < out_c; ++o) {
    y[size_t(o)].array() += b(o);
    for (int i = 0; i < in_c; ++i)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < wd; ++xx) {
          double acc = 0.0;
          for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) {
              const int sy = yy + u - p, sx = xx + v - p;
              if (sy >= 0 && sy < h && sx >= 0 && sx < wd)
                acc += w[size_t(o)][size_t(i)](u, v) * x[size_t(i)](sy, sx);
            }
          y[size_t(o)](yy, xx) += acc;
        }
  }
  return y;
}

std::vector<rmat> Conv2d::backward(const std::vector<rmat>& dy) {
  const int h = int(x_cache[0].rows()), wd = int(x_cache[0].cols());
  const int p = (k - 1) / 2;
  std::vector<rmat> dx(size_t(in_c), rmat::Zero(h, wd));
  for (int o = 0; o < out_c; ++o) {
    gb(o) += dy[size_t(o)].sum();
    for (int i = 0; i < in_c; ++i)
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < wd; ++xx) {
          const double g = dy[size_t(o)](yy, xx);
          if (g == 0.0) continue;
          for (int u = 0; u < k; ++u)
            for (int v = 0; v < k; ++v) {
              const int sy = yy + u - p, sx = xx + v - p;
              if (sy >= 0 && sy < h && sx >= 0 && sx < wd) {
                gw[size_t(o)][size_t(i)](u, v) += g * x_cache[size_t(i)](sy, sx);
                dx[size_t(i)](sy, sx) += g * w[size_t(o)][size_t(i)](u, v);
              }
            }
        }
  }
  return dx;
}

void Dense::init(int in, int out, double w_std, Rng& rng) {
  w = gauss_mat(out, in, w_std, rng);
  gw = rmat::Zero(out, in);
  b = rvec::Zero(out);
  gb = rvec::Zero(out);
}

rvec Dense::forward(const rvec& x) {
  require(x.size() == w.cols(), "Dense: input size mismatch");
  x_cache = x;
  return w * x + b;
}

rvec Dense::backward(const rvec& dy) {
  gw += dy * x_cache.transpose();
  gb += dy;
  return w.transpose() * dy;
}

void Mlp::init(const NetShape& s, Rng& rng) {
  require(s.in_c > 0 && s.h > 0 && s.w > 0 && s.out > 0, "Mlp: bad shape");
  shape = s;
  c1.init(s.in_c, s.conv_c, s.kernel, rng);
  c2.init(s.conv_c, s.conv_c, s.kernel, rng);
  const int flat = s.conv_c * s.h * s.w;
  f1.init(flat, s.fc, std::sqrt(2.0 / double(flat)), rng);
  f2.init(s.fc, s.fc, std::sqrt(2.0 / double(s.fc)), rng);
  head.init(s.fc, s.out, 0.01 / std::sqrt(double(s.fc)), rng);
}

rvec Mlp::forward(const std::vector<rmat>& x) {
  z1 = c1.forward(x);
  std::vector<rmat> a1 = z1;
  for (auto& m : a1) m = m.cwiseMax(0.0);
  z2 = c2.forward(a1);
  std::vector<rmat> a2 = z2;
  for (auto& m : a2) m = m.cwiseMax(0.0);
  rvec flat(shape.conv_c * shape.h * shape.w);
  int idx = 0;
  for (int c = 0; c < shape.conv_c; ++c)
    for (int y = 0; y < shape.h; ++y)
      for (int xx = 0; xx < shape.w; ++xx) flat(idx++) = a2[size_t(c)](y, xx);
  z3 = f1.forward(flat);
  z4 = f2.forward(z3.cwiseMax(0.0));
  return head.forward(z4.cwiseMax(0.0));
}

void Mlp::backward(const rvec& dout) {
  rvec d4 = head.backward(dout);
  for (int i = 0; i < d4.size(); ++i)
    if (z4(i) <= 0.0) d4(i) = 0.0;
  rvec d3 = f2.backward(d4);
  for (int i = 0; i < d3.size(); ++i)
    if (z3(i) <= 0.0) d3(i) = 0.0;
  const rvec dflat = f1.backward(d3);
  std::vector<rmat> d2(size_t(shape.conv_c), rmat::Zero(shape.h, shape.w));
  int idx = 0;
  for (int c = 0; c < shape.conv_c; ++c)
    for (int y = 0; y < shape.h; ++y)
      for (int xx = 0; xx < shape.w; ++xx) {
        d2[size_t(c)](y, xx) = z2[size_t(c)](y, xx) > 0.0 ? dflat(idx) : 0.0;
        ++idx;
      }
  std::vector<rmat> d1 = c2.backward(d2);
  for (int c = 0; c < shape.conv_c; ++c)
    for (int y = 0; y < shape.h; ++y)
      for (int xx = 0; xx < shape.w; ++xx)
        if (z1[size_t(c)](y, xx) <= 0.0) d1[size_t(c)](y, xx) = 0.0;
  c1.backward(d1);
}

void Mlp::zero_grad() {
  for (auto& row : c1.gw)
    for (auto& m : row) m.setZero();
  c1.gb.setZero();
  for (auto& row : c2.gw)
    for (auto& m : row) m.setZero();
  c2.gb.setZero();
  f1.gw.setZero();
  f1.gb.setZero();
  f2.gw.setZero();
  f2.gb.setZero();
  head.gw.setZero();
  head.gb.setZero();
}

namespace {

template <typename FnConv, typename FnDense>
void walk(const Mlp& n, FnConv fc, FnDense fd) {
  fc(n.c1);
  fc(n.c2);
  fd(n.f1);
  fd(n.f2);
  fd(n.head);
}

}  // namespace

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  walk(
      *this,
      [&](const Conv2d& c) {
        n += std::size_t(c.out_c) * std::size_t(c.in_c) * std::size_t(c.k) * std::size_t(c.k) +
             std::size_t(c.b.size());
      },
      [&](const Dense& d) { n += std::size_t(d.w.size()) + std::size_t(d.b.size()); });
  return n;
}

namespace {

double* copy_conv(const Conv2d& c, bool grads, double* dst) {
  const auto& src = grads ? c.gw : c.w;
  for (const auto& row : src)
    for (const auto& m : row)
      for (int u = 0; u < m.rows(); ++u)
        for (int v = 0; v < m.cols(); ++v) *dst++ = m(u, v);
  const rvec& bb = grads ? c.gb : c.b;
  for (int i = 0; i < bb.size(); ++i) *dst++ = bb(i);
  return dst;
}

double* copy_dense(const Dense& d, bool grads, double* dst) {
  const rmat& m = grads ? d.gw : d.w;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) *dst++ = m(i, j);
  const rvec& bb = grads ? d.gb : d.b;
  for (int i = 0; i < bb.size(); ++i) *dst++ = bb(i);
  return dst;
}

const double* load_conv(Conv2d& c, const double* src) {
  for (auto& row : c.w)
    for (auto& m : row)
      for (int u = 0; u < m.rows(); ++u)
        for (int v = 0; v < m.cols(); ++v) m(u, v) = *src++;
  for (int i = 0; i < c.b.size(); ++i) c.b(i) = *src++;
  return src;
}

const double* load_dense(Dense& d, const double* src) {
  for (int i = 0; i < d.w.rows(); ++i)
    for (int j = 0; j < d.w.cols(); ++j) d.w(i, j) = *src++;
  for (int i = 0; i < d.b.size(); ++i) d.b(i) = *src++;
  return src;
}

}  // namespace

void Mlp::params_to(double* dst) const {
  dst = copy_conv(c1, false, dst);
  dst = copy_conv(c2, false, dst);
  dst = copy_dense(f1, false, dst);
  dst = copy_dense(f2, false, dst);
  copy_dense(head, false, dst);
}

void Mlp::params_from(const double* src) {
  src = load_conv(c1, src);
  src = load_conv(c2, src);
  src = load_dense(f1, src);
  src = load_dense(f2, src);
  load_dense(head, src);
}

void Mlp::grads_to(double* dst) const {
  dst = copy_conv(c1, true, dst);
  dst = copy_conv(c2, true, dst);
  dst = copy_dense(f1, true, dst);
  dst = copy_dense(f2, true, dst);
  copy_dense(head, true, dst);
}

}  // namespace rlddu::nets
