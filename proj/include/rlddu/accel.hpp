// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rlddu/channel.hpp"
#include "rlddu/types.hpp"

namespace rlddu::accel {

/// Multiply-accumulate counter. Kernels report their actual loop trip counts;
/// a disabled counter stays at zero. Counters are task-local and merged
/// explicitly, never shared.
struct FlopCounter {
  bool enabled = false;
  std::map<std::string, std::uint64_t> by_op;

  void add(std::string_view op, std::uint64_t n) {
    if (enabled && n > 0) by_op[std::string(op)] += n;
  }
  [[nodiscard]] std::uint64_t total() const {
    std::uint64_t s = 0;
    for (const auto& [_, v] : by_op) s += v;
    return s;
  }
  void merge(const FlopCounter& other) {
    for (const auto& [k, v] : other.by_op) by_op[k] += v;
  }
};

/// Per-user dominant beam columns and the energy fraction they retain.
struct BeamSupport {
  std::vector<std::vector<int>> cols;  ///< strictly increasing per user
  std::vector<double> retained;        ///< in (0, 1]
};

/// M = Diag(diag) + embedded dense Hermitian block on block_idx; the block
/// overrides the diagonal on its own support.
struct StructuredMatrix {
  rvec diag;
  std::vector<int> block_idx;  ///< strictly increasing
  cmat block;                  ///< |block_idx| x |block_idx|, Hermitian
};

struct StructuredSolve {
  cmat x;
  double residual = 0.0;  ///< ||M_ref x - rhs|| / ||rhs|| against the reference matrix
};

/// Smallest per-user column set retaining `energy_keep` of the combined
/// mean+variance energy (summed over subcarriers), capped at `b_cap`.
/// Deterministic tie-break toward lower indices.
BeamSupport prune_support(const channel::ChannelStats& stats, double energy_keep, int b_cap);

/// Hermitian solve of M x = rhs for structured M: dense block solve on
/// block_idx, scalar division elsewhere. Exact for truly structured M.
/// Counts multiply-accumulates into `fc` under "accel.structured_inverse".
StructuredSolve structured_inverse(const StructuredMatrix& m, const cmat& rhs,
                                   FlopCounter* fc = nullptr);

/// Dense Hermitian PD counted solve (same Cholesky kernel as the block path),
/// counted under "accel.dense_solve".
cmat dense_solve_counted(const cmat& a, const cmat& rhs, FlopCounter* fc = nullptr);

/// Projects a dense Hermitian matrix onto Diag(diag) + block(idx).
StructuredMatrix project_structured(const cmat& dense, const std::vector<int>& idx);

/// Projects + solves + reports the residual against the original dense matrix.
StructuredSolve structured_solve_projected(const cmat& dense, const std::vector<int>& idx,
                                           const cmat& rhs, FlopCounter* fc = nullptr);

/// Applies the structured operator to a dense right operand.
cmat structured_apply(const StructuredMatrix& m, const cmat& x);

/// Indices whose off-diagonal energy is at least `threshold` times the
/// largest per-index off-diagonal energy, capped at q_cap; sorted ascending.
std::vector<int> select_q_support(const cmat& dense, int q_cap, double threshold);
std::vector<int> select_q_support(const StructuredMatrix& m, int q_cap, double threshold);

/// Second-order Lagrange interpolation through (f0,m0), (f1,m1), (f2,m2).
template <typename Mat>
Mat lagrange_interp3(double f0, const Mat& m0, double f1, const Mat& m1, double f2, const Mat& m2,
                     double f) {
  if (f0 == f1 || f1 == f2 || f0 == f2)
    throw std::invalid_argument("lagrange_interp3: duplicate nodes");
  const double l0 = (f - f1) * (f - f2) / ((f0 - f1) * (f0 - f2));
  const double l1 = (f - f0) * (f - f2) / ((f1 - f0) * (f1 - f2));
  const double l2 = (f - f0) * (f - f1) / ((f2 - f0) * (f2 - f1));
  return l0 * m0 + l1 * m1 + l2 * m2;
}

/// `count` uniformly spaced subcarrier indices including both endpoints.
std::vector<int> uniform_nodes(int n_sub, int count);

/// Start position of the 3-node sliding window nearest to target f.
int node_window(const std::vector<int>& nodes, int f);

struct FlopConstants {
  int b = 10;        ///< retained beam columns
  int q = 30;        ///< structured-inverse block size
  int f_tilde = 8;   ///< sampled subcarriers
  int iters = 5;     ///< iterations / layers
  int d = 128;       ///< policy net fully connected width
  int c = 8;         ///< policy net conv channels
  int h = 3;         ///< policy net conv kernel size
};

struct FlopModel {
  std::string algo;
  std::vector<std::pair<std::string, double>> terms;
  double total = 0.0;
};

/// Literal per-iteration-count complexity formulas (unit leading constants)
/// for algo in {swmmse, po_wmmse, rlddu}.
FlopModel flop_estimate(const SystemDims& dims, std::string_view algo, const FlopConstants& c);

}  // namespace rlddu::accel
