#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"
#include "fibrelin/lie.hpp"
#include "fibrelin/linalg.hpp"
#include "fibrelin/system.hpp"

namespace fibrelin {

// Brunovsky pair: superdiagonal shift A and last unit vector b.
struct LinearQuotient {
    Mat A;
    Vec b;
};

inline LinearQuotient quotient_linear(int r) {
    LinearQuotient q;
    q.A = Mat(r, r);
    for (int i = 0; i + 1 < r; ++i) q.A(i, i + 1) = 1.0;
    q.b = Vec(r, 0.0);
    q.b[r - 1] = 1.0;
    return q;
}

// Phi = [h, L_f h, ..., L_f^{r-1} h]
inline ExprVec build_phi(const SystemDef& sys, const RelativeDegreeResult& rd) {
    ExprVec phi;
    phi.reserve(rd.r);
    ExprPtr e = simplify(sys.h);
    phi.push_back(e);
    for (int i = 1; i < rd.r; ++i) {
        e = lie_derivative(sys.f, e, sys.states);
        phi.push_back(e);
    }
    return phi;
}

// Psi(x, u) = alpha(x) + beta(x) u with alpha = L_f^r h, beta = L_g L_f^{r-1} h;
// the unique choice that turns the quotient into the Brunovsky chain.
inline std::pair<ExprPtr, ExprPtr> build_feedback(const RelativeDegreeResult& rd) {
    return {rd.alpha, rd.beta};
}

inline ExprPtr feedback_expr(const RelativeDegreeResult& rd, const std::string& input) {
    return simplify(make_add({rd.alpha, make_mul({rd.beta, make_var(input)})}));
}

// u = (v - alpha) / beta
inline ExprPtr feedback_inverse_expr(const RelativeDegreeResult& rd, const std::string& v_name) {
    return simplify(make_div(make_sub(make_var(v_name), rd.alpha), rd.beta));
}

namespace nfdetail {

inline Mat eval_jacobian_rows(const ExprMat& jac, const Point& p) {
    Mat m(static_cast<int>(jac.size()), jac.empty() ? 0 : static_cast<int>(jac[0].size()));
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) m(i, j) = eval(jac[i][j], p);
    return m;
}

}  // namespace nfdetail

// Find n - r functions completing phi to a local diffeomorphism at the point.
// A supplied complement is validated; otherwise coordinate functions are added
// greedily, each step maximising the smallest singular value of the stacked
// Jacobian (ties broken by lowest index). Falls back to exhausting coordinate
// subsets before reporting failure.
inline ExprVec complete_coordinates(const SystemDef& sys, const ExprVec& phi, const Point& at) {
    const int n = sys.n();
    const int r = static_cast<int>(phi.size());
    ExprMat jac_phi = jacobian(phi, sys.states);
    Mat Jphi = nfdetail::eval_jacobian_rows(jac_phi, at);
    if (smallest_singular_value(Jphi) <= 1e-9)
        throw RankDeficientError("Jacobian of phi has rank below " + std::to_string(r) +
                                 " at the operating point");
    if (r == n) return {};

    auto stacked_det = [&](const ExprVec& comp) {
        ExprVec lambda = phi;
        lambda.insert(lambda.end(), comp.begin(), comp.end());
        Mat J = nfdetail::eval_jacobian_rows(jacobian(lambda, sys.states), at);
        return lu_factor(J).det();
    };

    if (sys.complement) {
        if (static_cast<int>(sys.complement->size()) != n - r)
            throw DimensionError("complement has " + std::to_string(sys.complement->size()) +
                                 " entries; expected " + std::to_string(n - r));
        double d = stacked_det(*sys.complement);
        if (std::fabs(d) <= 1e-9)
            throw CompletionFailedError("supplied complement leaves the full Jacobian singular "
                                        "(|det| = " + format_double(std::fabs(d)) + ")");
        return *sys.complement;
    }

    // greedy on smallest singular value
    std::vector<int> chosen;
    Mat stacked = Jphi;
    for (int step = 0; step < n - r; ++step) {
        int best = -1;
        double best_sv = -1.0;
        for (int cand = 0; cand < n; ++cand) {
            if (std::find(chosen.begin(), chosen.end(), cand) != chosen.end()) continue;
            Mat trial(stacked.rows + 1, n);
            for (int i = 0; i < stacked.rows; ++i)
                for (int j = 0; j < n; ++j) trial(i, j) = stacked(i, j);
            trial(stacked.rows, cand) = 1.0;
            double sv = smallest_singular_value(trial);
            if (sv > best_sv + 1e-15) {
                best_sv = sv;
                best = cand;
            }
        }
        chosen.push_back(best);
        Mat next(stacked.rows + 1, n);
        for (int i = 0; i < stacked.rows; ++i)
            for (int j = 0; j < n; ++j) next(i, j) = stacked(i, j);
        next(stacked.rows, chosen.back()) = 1.0;
        stacked = next;
    }

    auto to_exprs = [&](const std::vector<int>& idx) {
        ExprVec comp;
        for (int i : idx) comp.push_back(make_var(sys.states[i]));
        return comp;
    };

    ExprVec comp = to_exprs(chosen);
    if (std::fabs(stacked_det(comp)) > 1e-9) return comp;

    // exhaustive fallback over coordinate subsets (n is small)
    std::vector<int> idx(n - r);
    std::function<bool(int, int)> search = [&](int start, int depth) {
        if (depth == n - r) {
            ExprVec c = to_exprs(idx);
            if (std::fabs(stacked_det(c)) > 1e-9) {
                comp = c;
                return true;
            }
            return false;
        }
        for (int i = start; i < n; ++i) {
            idx[depth] = i;
            if (search(i + 1, depth + 1)) return true;
        }
        return false;
    };
    if (search(0, 0)) return comp;
    throw CompletionFailedError("no coordinate subset completes phi to |det| > 1e-9 at the point");
}

struct DiffeoReport {
    double min_abs_det = 0.0;
    Point argmin;
    int flagged = 0;     // sample points with |det| <= 1e-9
    int failures = 0;    // sample points with evaluation errors
    int samples = 0;
};

inline DiffeoReport check_diffeomorphism(const ExprVec& lambda,
                                         const std::vector<std::string>& vars,
                                         const SampleBox& box = {}, int samples = 200,
                                         std::uint64_t seed = 1) {
    ExprMat jac = jacobian(lambda, vars);
    Rng rng(seed);
    DiffeoReport rep;
    rep.samples = samples;
    rep.min_abs_det = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Point p;
        for (const auto& v : vars) {
            auto [lo, hi] = box.range(v);
            p[v] = rng.uniform(lo, hi);
        }
        double d;
        try {
            d = lu_factor(nfdetail::eval_jacobian_rows(jac, p)).det();
        } catch (const NumericalError&) {
            ++rep.failures;
            continue;
        }
        if (std::fabs(d) <= 1e-9) ++rep.flagged;
        if (std::fabs(d) < rep.min_abs_det) {
            rep.min_abs_det = std::fabs(d);
            rep.argmin = p;
        }
    }
    return rep;
}

struct NormalForm {
    int n = 0, r = 0;
    std::vector<std::string> states;
    std::string input;
    RelativeDegreeResult rd;
    ExprVec phi;             // r coordinates
    ExprPtr alpha, beta;     // feedback Psi = alpha + beta u
    ExprVec complement;      // n - r extra coordinates
    ExprVec lambda;          // phi ++ complement
    ExprMat J_lambda;        // symbolic n x n Jacobian
    double min_abs_det = 0;  // |det J_lambda| at the operating point
    double det_at_point = 0; // signed value there
    Point operating_point;
    LinearQuotient quotient;

    ExprPtr psi_expr() const {
        return simplify(make_add({alpha, make_mul({beta, make_var(input)})}));
    }

    Vec eval_phi(const Point& p) const {
        Vec z;
        z.reserve(phi.size());
        for (const auto& e : phi) z.push_back(eval(e, p));
        return z;
    }

    Mat eval_jacobian(const Point& p) const { return nfdetail::eval_jacobian_rows(J_lambda, p); }

    double psi(const Point& p, double u) const { return eval(alpha, p) + eval(beta, p) * u; }

    double input_from_v(const Point& p, double v) const {
        double b = eval(beta, p);
        if (b == 0.0) throw NumericalError("feedback inverse: beta vanishes at the point");
        return (v - eval(alpha, p)) / b;
    }
};

inline NormalForm build_normal_form(const SystemDef& sys, RelativeDegreeOptions opt = {}) {
    NormalForm nf;
    nf.n = sys.n();
    nf.states = sys.states;
    nf.input = sys.input;
    nf.operating_point = sys.operating_point;
    nf.rd = relative_degree(sys, sys.operating_point, opt);
    nf.r = nf.rd.r;
    nf.phi = build_phi(sys, nf.rd);
    std::tie(nf.alpha, nf.beta) = build_feedback(nf.rd);
    nf.complement = complete_coordinates(sys, nf.phi, sys.operating_point);
    nf.lambda = nf.phi;
    nf.lambda.insert(nf.lambda.end(), nf.complement.begin(), nf.complement.end());
    nf.J_lambda = jacobian(nf.lambda, sys.states);
    nf.det_at_point = lu_factor(nf.eval_jacobian(sys.operating_point)).det();
    nf.min_abs_det = std::fabs(nf.det_at_point);
    if (nf.min_abs_det < 1e-9)
        throw CompletionFailedError("lambda is singular at the operating point (|det| = " +
                                    format_double(nf.min_abs_det) + ")");
    nf.quotient = quotient_linear(nf.r);
    return nf;
}

}  // namespace fibrelin
