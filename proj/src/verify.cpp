#include <cmath>
#include <ostream>
#include <random>
#include <string>

#include "platedg/cli_io.hpp"

namespace platedg {

namespace {

struct Report {
  std::ostream& out;
  bool all = true;

  void check(const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "PASS " : "FAIL ") << name << "  " << detail << '\n';
    all = all && ok;
  }
};

std::string fmt(const char* label, double v) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s=%.3e", label, v);
  return buf;
}

Field random_field(const DgSpace& s, std::mt19937& rng, BoundaryData data) {
  std::normal_distribution<double> n(0.0, 1.0);
  Field f(s, std::move(data));
  for (long i = 0; i < f.coeffs.size(); ++i) f.coeffs(i) = n(rng);
  return f;
}

// sum_e int_e [grad v] : {D^2 w mu} and sum_e int_e [v] . {grad Lap w . mu}.
std::pair<double, double> edge_pairings(const Field& v, const Field& w) {
  double g = 0.0, val = 0.0;
  const int qp = v.space->quad_points();
  for (const EdgeInfo* e : v.space->mesh().skeleton()) {
    const EdgeJumps jv = edge_jump_average(v, *e, qp);
    const EdgeJumps jw = edge_jump_average(w, *e, qp);
    for (std::size_t q = 0; q < jv.weights.size(); ++q) {
      g += jv.weights[q] * jv.grad_jump[q].cwiseProduct(jw.avg_dmu_grad[q]).sum();
      val += jv.weights[q] * jv.jump[q].dot(jw.avg_dmu_lap[q]);
    }
  }
  return {g, val};
}

}  // namespace

bool run_verify(unsigned seed, std::ostream& out) {
  Report r{out};
  std::mt19937 rng(seed);

  {
    const Mesh m = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 2, 2, {Side::left});
    double area = 0.0;
    for (std::size_t c = 0; c < m.num_cells(); ++c) area += m.cell_area(c);
    r.check("mesh", m.num_cells() == 4 && m.interior_edges.size() == 4 && std::abs(area - 1.0) < 1e-12,
            "cells=4 interior_edges=" + std::to_string(m.interior_edges.size()) + " " + fmt("area", area));
  }

  const Mesh mesh = build_rect_mesh({0.0, 1.0, 0.0, 1.0}, 3, 3, {Side::left, Side::bottom});
  const DgSpace space(mesh);
  const Penalty pen{5000.0, 1100.0};

  {
    const SparseMatrix s = assemble_ah_matrix(space, pen, Execution::serial);
    const SparseMatrix p = assemble_ah_matrix(space, pen, Execution::parallel);
    const double sym = s.symmetry_defect() / s.max_abs();
    const double diff = s.add(p, -1.0).max_abs() / s.max_abs();
    r.check("a_h symmetry", sym <= 1e-12, fmt("rel", sym));
    r.check("serial/parallel assembly", diff <= 1e-12, fmt("rel", diff));
  }

  const AssembledForms forms = assemble_forms(space, pen, BoundaryData::clamped_flat(), Vec3(0.0, 0.0, 0.1));
  {
    double worst = INFINITY;
    std::normal_distribution<double> n(0.0, 1.0);
    for (int t = 0; t < 50; ++t) {
      Vector v(static_cast<long>(space.size()));
      for (long i = 0; i < v.size(); ++i) v(i) = n(rng);
      worst = std::min(worst, forms.A0.quadratic_form(v) / forms.G.quadratic_form(v));
    }
    r.check("coercivity witness", worst > 0.0, fmt("min Rayleigh", worst));
  }

  {
    FlowConfig cfg;
    cfg.tau = mesh.max_diameter();
    cfg.penalty = pen;
    const FlowProblem prob{&space, BoundaryData::clamped_flat(), Vec3::Zero()};
    const Field flat = flat_state(space, prob.data);
    const FlowOperators ops = build_flow_operators(space, prob.data, prob.force, cfg);
    const double rhs = flow_rhs(flat, ops.forms, cfg).norm();
    const FlowTrace t = run_flow(flat, cfg, prob);
    r.check("flat plate fixed point", rhs <= 1e-10 && t.iterations(cfg.stop_tol * cfg.tau) == 0,
            fmt("rhs", rhs) + " " + fmt("E_h", t.initial_energy));
  }

  {
    const HessianBasis hb(space);
    double worst = 0.0, min_j = INFINITY, adj = 0.0;
    const AssembledForms f5 = assemble_forms(space, {5000.0, 5000.0}, BoundaryData::clamped_flat(), Vec3(0.1, 0.2, 0.3));
    for (int t = 0; t < 10; ++t) {
      const Field y = random_field(space, rng, BoundaryData::clamped_flat());
      const EnergyHessianGap g = energy_hessian_gap(hb, y, f5);
      worst = std::max(worst, std::abs(g.residual()) / (1.0 + std::abs(g.energy)));
      min_j = std::min(min_j, g.jump_functional);
      const Field w = random_field(space, rng, {});
      const auto [eg, ev] = edge_pairings(y, w);
      const double lg = pair_with_hessian(hb, lift_gradient_jumps(hb, y), w);
      const double lv = pair_with_hessian(hb, lift_value_jumps(hb, y), w);
      adj = std::max({adj, std::abs(lg - eg) / std::max(1.0, std::abs(eg)), std::abs(lv - ev) / std::max(1.0, std::abs(ev))});
    }
    r.check("energy/Hessian identity", worst <= 1e-10, fmt("rel residual", worst));
    r.check("jump functional sign", min_j >= -1e-12, fmt("min J_h", min_j));
    r.check("lifting adjoint identities", adj <= 1e-10, fmt("rel", adj));
  }

  {
    const Mesh m4 = build_rect_mesh({0.0, 4.0, 0.0, 4.0}, 4, 4, {Side::left, Side::bottom});
    const DgSpace s4(m4);
    FlowConfig cfg;
    cfg.tau = m4.max_diameter();
    cfg.max_steps = 8;
    const FlowProblem prob{&s4, BoundaryData::clamped_flat(), Vec3(0.0, 0.0, 0.025)};
    const FlowTrace t = run_flow(flat_state(s4, prob.data), cfg, prob);
    bool mono = t.failure.empty();
    double prev = t.initial_energy;
    for (const auto& st : t.steps) {
      mono = mono && st.energy <= prev + 1e-10 * (1.0 + std::abs(prev));
      prev = st.energy;
    }
    const double bound = t.initial_defect + t.sum_grad_step_sq() + 1e-8;
    const double dfin = t.steps.empty() ? t.initial_defect : t.steps.back().defect;
    r.check("energy decay", mono, std::to_string(t.steps.size()) + " steps " + fmt("E_h", prev));
    r.check("defect telescoping", dfin <= bound, fmt("D_h", dfin) + " " + fmt("bound", bound));
  }

  out << (r.all ? "all checks passed" : "some checks failed") << '\n';
  return r.all;
}

}  // namespace platedg
