// SPDX-License-Identifier: Apache-2.0
// Python bindings for the core operations: scenario synthesis, the stochastic
// WMMSE solver, the unfolded approximate network, EWSR evaluation, and the
// complexity formulas. Matrices cross the boundary as numpy arrays (copies).

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>

#include "rlddu/accel.hpp"
#include "rlddu/channel.hpp"
#include "rlddu/du_core.hpp"
#include "rlddu/rng.hpp"
#include "rlddu/swmmse.hpp"
#include "rlddu/types.hpp"

namespace py = pybind11;
using namespace rlddu;

namespace {

channel::ChannelStats checked(channel::ChannelStats s) {
  s.check_shapes();
  return s;
}

PrecoderSet make_precoders(const std::vector<cmat>& mats, const std::string& domain) {
  if (domain != "antenna" && domain != "beam") throw std::invalid_argument("domain must be 'antenna' or 'beam'");
  return PrecoderSet::make(domain == "beam" ? Domain::Beam : Domain::Antenna, mats);
}

PrecoderSet run_unfolded(const channel::ChannelStats& stats, const SystemDims& dims, int layers,
                         int f_tilde, bool dense_inverse) {
  if (layers < 1) throw std::invalid_argument("layers >= 1");
  const auto sampled = accel::uniform_nodes(dims.n_sub, f_tilde);
  du::DuOptions opts;
  opts.dense_inverse = dense_inverse;
  const PrecoderSet x0 = channel::precoders_to_beam(swmmse::initial_precoders(stats, dims));
  const auto comps = du::zero_compensation(layers, dims.k_users, int(sampled.size()), dims.m_r);
  return channel::precoders_to_antenna(du::run_du_network(stats, dims, x0, comps, sampled, opts));
}

py::dict flop_dict(const SystemDims& dims, const std::string& algo, int b, int q, int f_tilde,
                   int iters, int d, int c, int h) {
  accel::FlopConstants fc;
  fc.b = b;
  fc.q = q;
  fc.f_tilde = f_tilde;
  fc.iters = iters;
  fc.d = d;
  fc.c = c;
  fc.h = h;
  const auto model = accel::flop_estimate(dims, algo, fc);
  py::dict terms;
  for (const auto& [name, val] : model.terms) terms[py::str(name)] = val;
  py::dict out;
  out["algo"] = model.algo;
  out["terms"] = terms;
  out["total"] = model.total;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Robust wideband precoding core: scenario statistics, stochastic WMMSE, "
            "unfolded approximation, EWSR evaluation, complexity formulas.";

  py::class_<SystemDims>(m, "SystemDims")
      .def(py::init(&SystemDims::make), py::arg("m_t"), py::arg("m_r"), py::arg("k_users"),
           py::arg("n_sub"), py::arg("n_blocks"), py::arg("p_max"), py::arg("noise_var"))
      .def_readonly("m_t", &SystemDims::m_t)
      .def_readonly("m_r", &SystemDims::m_r)
      .def_readonly("k_users", &SystemDims::k_users)
      .def_readonly("n_sub", &SystemDims::n_sub)
      .def_readonly("n_blocks", &SystemDims::n_blocks)
      .def_readonly("p_max", &SystemDims::p_max)
      .def_readonly("noise_vars", &SystemDims::noise_vars)
      .def_readonly("weights", &SystemDims::weights)
      .def("__repr__", [](const SystemDims& d) {
        return "SystemDims(m_t=" + std::to_string(d.m_t) + ", m_r=" + std::to_string(d.m_r) +
               ", k_users=" + std::to_string(d.k_users) + ", n_sub=" + std::to_string(d.n_sub) +
               ", n_blocks=" + std::to_string(d.n_blocks) + ")";
      });

  py::class_<channel::ChannelStats>(m, "ChannelStats")
      .def_readonly("m_t", &channel::ChannelStats::m_t)
      .def_readonly("m_r", &channel::ChannelStats::m_r)
      .def_readonly("k_users", &channel::ChannelStats::k_users)
      .def_readonly("n_sub", &channel::ChannelStats::n_sub)
      .def_readonly("block", &channel::ChannelStats::block)
      .def_property_readonly("n_blocks", &channel::ChannelStats::n_blocks)
      .def("mean", [](const channel::ChannelStats& s, int k, int f) { return s.mean.at(k).at(f); },
           py::arg("k"), py::arg("f"))
      .def("var", [](const channel::ChannelStats& s, int k, int f) { return s.var.at(k).at(f); },
           py::arg("k"), py::arg("f"))
      .def("omega", [](const channel::ChannelStats& s, int k, int f) { return s.omega.at(k).at(f); },
           py::arg("k"), py::arg("f"))
      .def("aging", [](const channel::ChannelStats& s, int block) { return s.aging.at(block - 1); },
           py::arg("block"), "Aging factor grid (k_users x n_sub) for block index 1..n_blocks.");

  py::class_<PrecoderSet>(m, "PrecoderSet")
      .def(py::init([](const std::vector<cmat>& mats, const std::string& domain) {
             return make_precoders(mats, domain);
           }),
           py::arg("mats"), py::arg("domain") = "antenna")
      .def_property_readonly("mats", [](const PrecoderSet& p) { return p.mats; })
      .def_readonly("power", &PrecoderSet::power)
      .def_property_readonly("domain", [](const PrecoderSet& p) {
        return p.domain == Domain::Beam ? "beam" : "antenna";
      })
      .def("__len__", [](const PrecoderSet& p) { return p.mats.size(); });

  py::class_<swmmse::SolveResult>(m, "SolveResult")
      .def_readonly("v", &swmmse::SolveResult::v)
      .def_readonly("objective", &swmmse::SolveResult::objective)
      .def_readonly("iters", &swmmse::SolveResult::iters);

  m.def("make_scenario", [](const SystemDims& d, int b, std::uint64_t seed, int taps, double v0) {
          return checked(channel::make_scenario(d, b, seed, taps, v0));
        },
        py::arg("dims"), py::arg("sparsity_b"), py::arg("seed"), py::arg("taps") = 3,
        py::arg("var0_scale") = 0.0,
        "Block-0 posterior statistics with sparse beam support, deterministic in seed.");

  m.def("evolve_stats", &channel::evolve_stats, py::arg("stats"), py::arg("block"),
        "Gauss-Markov aged statistics for block 1..n_blocks from block-0 statistics.");

  m.def("solve", [](const channel::ChannelStats& stats, const SystemDims& dims, int iters,
                    int saa_batch, bool point_estimate, bool resample, std::uint64_t seed) {
          swmmse::SolveOptions so;
          so.iters = iters;
          so.saa_batch = saa_batch;
          so.point_estimate = point_estimate;
          so.resample = resample;
          so.trace_objective = true;
          return swmmse::swmmse_solve(stats, dims, so, Rng(seed));
        },
        py::arg("stats"), py::arg("dims"), py::arg("iters") = 5, py::arg("saa_batch") = 4,
        py::arg("point_estimate") = false, py::arg("resample") = true, py::arg("seed") = 0,
        "Stochastic WMMSE precoders (antenna domain, power = p_max) with the surrogate "
        "objective traced after every half-step. point_estimate=True solves on the mean; "
        "resample=False keeps one SAA batch, making the trace monotone.");

  m.def("run_unfolded", &run_unfolded, py::arg("stats"), py::arg("dims"), py::arg("layers") = 5,
        py::arg("f_tilde") = 8, py::arg("dense_inverse") = false,
        "Unfolded approximate solver (zero compensation) from the matched-filter start.");

  m.def("ewsr", [](const channel::ChannelStats& stats, const PrecoderSet& v, const SystemDims& dims,
                   int n_mc, std::uint64_t seed) {
          return swmmse::ewsr_eval(stats, v, n_mc, Rng(seed), dims);
        },
        py::arg("stats"), py::arg("v"), py::arg("dims"), py::arg("n_mc") = 256, py::arg("seed") = 0,
        "Monte Carlo expected weighted sum rate (bits). Draws are keyed by sample index, so "
        "two precoder sets evaluated with one seed see identical channels.");

  m.def("initial_precoders", &swmmse::initial_precoders, py::arg("stats"), py::arg("dims"),
        "Matched-filter start, per-user power p_max / K (antenna domain).");

  m.def("dft_matrix", &channel::dft_matrix, py::arg("m"), "Unitary DFT array response.");

  m.def("uniform_nodes", &accel::uniform_nodes, py::arg("n_sub"), py::arg("count"),
        "Uniformly spaced subcarrier indices including both endpoints.");

  m.def("flop_estimate", &flop_dict, py::arg("dims"), py::arg("algo"), py::arg("b") = 10,
        py::arg("q") = 30, py::arg("f_tilde") = 8, py::arg("iters") = 5, py::arg("d") = 128,
        py::arg("c") = 8, py::arg("h") = 3,
        "Per-term complexity formulas for algo in {swmmse, po_wmmse, rlddu}.");
}
