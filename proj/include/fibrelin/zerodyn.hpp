#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fibrelin/connection.hpp"
#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"
#include "fibrelin/normal_form.hpp"
#include "fibrelin/sim.hpp"
#include "fibrelin/system.hpp"

namespace fibrelin {

// f~H(x, u) = Hor_x(A Phi(x) + b Psi(x, u))
inline Vec lifted_dynamics(const SystemDef& sys, const NormalForm& nf, const Point& p, double u) {
    (void)sys;
    ConnectionPoint cp = connection_at(nf, p);
    Vec z = nf.eval_phi(p);
    double v = nf.psi(p, u);
    return horizontal_lift(cp, quotient_rhs(nf.quotient, z, v));
}

// f^Z(x, u) = F(x, u) - f~H(x, u); vertical by construction.
inline Vec zero_dynamics_at(const SystemDef& sys, const NormalForm& nf, const Point& p, double u) {
    Vec lifted = lifted_dynamics(sys, nf, p, u);
    Vec total(sys.f.size());
    for (std::size_t i = 0; i < sys.f.size(); ++i)
        total[i] = eval(sys.f[i], p) + eval(sys.g[i], p) * u;
    return vec_sub(total, lifted);
}

inline auto zero_field(const SystemDef& sys, const NormalForm& nf) {
    return [&sys, &nf](const Vec& x, double u, double) {
        return zero_dynamics_at(sys, nf, sys.bind_states(x), u);
    };
}

// ---------------------------------------------------------------------------
// symbolic forms (adjugate route, capped at n <= 4 to bound expression swell)
// ---------------------------------------------------------------------------

namespace zddetail {

inline ExprPtr det_expr(const ExprMat& m) {
    const std::size_t n = m.size();
    if (n == 1) return m[0][0];
    ExprVec terms;
    for (std::size_t j = 0; j < n; ++j) {
        ExprMat minor(n - 1);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t c = 0; c < n; ++c)
                if (c != j) minor[i - 1].push_back(m[i][c]);
        ExprPtr t = make_mul({m[0][j], det_expr(minor)});
        terms.push_back(j % 2 == 0 ? t : make_neg(t));
    }
    return simplify(make_add(std::move(terms)));
}

// adj(A)_{ij} = (-1)^{i+j} det(A with row j and column i removed)
inline ExprPtr adjugate_entry(const ExprMat& m, std::size_t i, std::size_t j) {
    const std::size_t n = m.size();
    ExprMat minor(n - 1);
    std::size_t rr = 0;
    for (std::size_t row = 0; row < n; ++row) {
        if (row == j) continue;
        for (std::size_t col = 0; col < n; ++col)
            if (col != i) minor[rr].push_back(m[row][col]);
        ++rr;
    }
    ExprPtr d = det_expr(minor);
    return ((i + j) % 2 == 0) ? d : simplify(make_neg(d));
}

}  // namespace zddetail

// Closed-form lift map: n expressions in the states and the r symbols named in
// y_names, the unique solution of J_lambda X = [Y; 0]. Absent when n exceeds
// the adjugate cap.
inline std::optional<ExprVec> symbolic_horizontal_lift(const NormalForm& nf,
                                                       const std::vector<std::string>& y_names,
                                                       int max_n = 4) {
    if (nf.n > max_n) return std::nullopt;
    ExprPtr det = zddetail::det_expr(nf.J_lambda);
    ExprVec out;
    out.reserve(nf.n);
    for (int i = 0; i < nf.n; ++i) {
        ExprVec terms;
        for (int j = 0; j < nf.r; ++j)
            terms.push_back(make_mul({zddetail::adjugate_entry(nf.J_lambda, i, j),
                                      make_var(y_names[j])}));
        out.push_back(simplify(make_div(make_add(std::move(terms)), det)));
    }
    return out;
}

// f~H as expressions in (states, u): the lift composed with Y = (phi_2, ...,
// phi_r, Psi).
inline std::optional<ExprVec> lifted_dynamics_symbolic(const SystemDef& sys, const NormalForm& nf,
                                                       int max_n = 4) {
    (void)sys;
    if (nf.n > max_n) return std::nullopt;
    ExprPtr det = zddetail::det_expr(nf.J_lambda);
    ExprVec rhs;  // A Phi + b Psi
    for (int i = 1; i < nf.r; ++i) rhs.push_back(nf.phi[i]);
    rhs.push_back(nf.psi_expr());
    ExprVec out;
    for (int i = 0; i < nf.n; ++i) {
        ExprVec terms;
        for (int j = 0; j < nf.r; ++j)
            terms.push_back(make_mul({zddetail::adjugate_entry(nf.J_lambda, i, j), rhs[j]}));
        out.push_back(simplify(make_div(make_add(std::move(terms)), det)));
    }
    return out;
}

struct SymbolicZdOptions {
    int max_n = 4;
    int check_trials = 100;
    double check_tol = 1e-9;
    std::uint64_t seed = 7;
};

// Closed-form f^Z. The numerator of F - f~H is expanded over the common
// denominator det(J) so syntactic cancellation can fire, then common factors
// are pulled back out per component. Verified against the numeric route at
// seeded sample points before being returned.
inline std::optional<ExprVec> zero_dynamics_symbolic(const SystemDef& sys, const NormalForm& nf,
                                                     SymbolicZdOptions opt = {}) {
    if (nf.n > opt.max_n) return std::nullopt;
    ExprPtr det = zddetail::det_expr(nf.J_lambda);
    ExprVec F = total_dynamics(sys);
    ExprVec rhs;
    for (int i = 1; i < nf.r; ++i) rhs.push_back(nf.phi[i]);
    rhs.push_back(nf.psi_expr());

    ExprVec fz;
    for (int i = 0; i < nf.n; ++i) {
        ExprVec terms;
        for (int j = 0; j < nf.r; ++j)
            terms.push_back(make_mul({zddetail::adjugate_entry(nf.J_lambda, i, j), rhs[j]}));
        ExprPtr numerator = make_sub(make_mul({F[i], det}), make_add(std::move(terms)));
        fz.push_back(factor_common_terms(expand(make_div(numerator, det))));
    }

    // agreement with the numeric route
    Rng rng(opt.seed);
    int checked = 0, attempts = 0;
    while (checked < opt.check_trials && attempts < opt.check_trials * 10) {
        ++attempts;
        Vec x(nf.n);
        for (int i = 0; i < nf.n; ++i) x[i] = rng.uniform(-2.0, 2.0);
        double u = rng.uniform(-1.0, 1.0);
        Point p = sys.bind_full(x, u);
        try {
            Vec numeric = zero_dynamics_at(sys, nf, p, u);
            for (int i = 0; i < nf.n; ++i) {
                double sym = eval(fz[i], p);
                if (std::fabs(sym - numeric[i]) > opt.check_tol)
                    throw NumericalError(
                        "symbolic zero dynamics disagree with the numeric route by " +
                        format_double(std::fabs(sym - numeric[i])) + " at a sample point");
            }
        } catch (const SingularJacobianError&) {
            continue;
        } catch (const EvalDomainError&) {
            continue;
        }
        ++checked;
    }
    return fz;
}

// d/dt lambda_j along f^Z with the constraint Phi = 0 substituted. Only
// coordinate constraints are solved: every Phi component must be a bare state
// symbol, otherwise the restriction is not explicit.
inline ExprVec restrict_to_zero_fibre(const SystemDef& sys, const NormalForm& nf,
                                      const ExprVec& fz_symbolic) {
    std::map<std::string, ExprPtr> constraints;
    for (const auto& comp : nf.phi) {
        if (comp->kind != ExprKind::Var)
            throw ConstraintNotExplicitError(
                "fibre restriction: Phi component '" + to_string(comp) +
                "' is not a coordinate, cannot solve Phi = 0 by substitution");
        constraints[comp->name] = make_int(0);
    }
    ExprVec reduced;
    reduced.reserve(nf.complement.size());
    for (const auto& lam : nf.complement) {
        ExprPtr rate = lie_derivative(fz_symbolic, lam, sys.states);
        reduced.push_back(substitute(rate, constraints));
    }
    return reduced;
}

struct ZeroDynamics {
    std::optional<ExprVec> symbolic;
    std::optional<ExprVec> fibre_restricted;
    bool depends_on_input = false;
};

inline ZeroDynamics build_zero_dynamics(const SystemDef& sys, const NormalForm& nf) {
    ZeroDynamics zd;
    zd.symbolic = zero_dynamics_symbolic(sys, nf);
    if (zd.symbolic) {
        for (const auto& e : *zd.symbolic)
            if (contains_var(e, sys.input)) zd.depends_on_input = true;
        try {
            zd.fibre_restricted = restrict_to_zero_fibre(sys, nf, *zd.symbolic);
        } catch (const ConstraintNotExplicitError&) {
            zd.fibre_restricted = std::nullopt;
        }
    }
    return zd;
}

// ---------------------------------------------------------------------------
// comparison with the output-zeroing (constrained) definition
// ---------------------------------------------------------------------------

struct ConstrainedComparison {
    double max_discrepancy = 0.0;  // between the two trajectories
    double max_phi_drift = 0.0;    // worst |Phi(x(t))| along either one
    bool drift_warning = false;
    Trajectory closed_loop;   // full system under u = -alpha/beta
    Trajectory vertical_flow; // f^Z under the same input
};

// From x0 on the zero fibre, runs (a) the full system under the output-zeroing
// input u = -alpha/beta and (b) the flow of f^Z under the same input, and
// reports the worst state discrepancy over [0, t_end].
inline ConstrainedComparison compare_with_constrained_definition(const SystemDef& sys,
                                                                 const NormalForm& nf,
                                                                 const Vec& x0, double t_end,
                                                                 double dt) {
    {
        Point p0 = sys.bind_states(x0);
        if (norm_inf(nf.eval_phi(p0)) > 1e-9)
            throw PreconditionError("compare_with_constrained_definition: Phi(x0) != 0");
    }
    auto zeroing_input = [&](const Point& p) { return -eval(nf.alpha, p) / eval(nf.beta, p); };

    auto closed_loop = [&](const Vec& x, double, double) {
        Point p = sys.bind_states(x);
        double u = zeroing_input(p);
        Vec dx(sys.f.size());
        for (std::size_t i = 0; i < sys.f.size(); ++i)
            dx[i] = eval(sys.f[i], p) + eval(sys.g[i], p) * u;
        return dx;
    };
    auto vertical = [&](const Vec& x, double, double) {
        Point p = sys.bind_states(x);
        return zero_dynamics_at(sys, nf, p, zeroing_input(p));
    };

    ConstrainedComparison rep;
    rep.closed_loop = integrate(closed_loop, x0, constant_signal(0.0), t_end, dt);
    rep.vertical_flow = integrate(vertical, x0, constant_signal(0.0), t_end, dt);
    for (std::size_t k = 0; k < rep.closed_loop.size(); ++k) {
        rep.max_discrepancy = std::max(
            rep.max_discrepancy,
            norm_inf(vec_sub(rep.closed_loop.states[k], rep.vertical_flow.states[k])));
        Point pa = sys.bind_states(rep.closed_loop.states[k]);
        Point pb = sys.bind_states(rep.vertical_flow.states[k]);
        rep.max_phi_drift = std::max({rep.max_phi_drift, norm_inf(nf.eval_phi(pa)),
                                      norm_inf(nf.eval_phi(pb))});
        rep.closed_loop.inputs[k] = zeroing_input(pa);
        rep.vertical_flow.inputs[k] = zeroing_input(pb);
    }
    rep.drift_warning = rep.max_phi_drift > 1e-6;
    return rep;
}

}  // namespace fibrelin
