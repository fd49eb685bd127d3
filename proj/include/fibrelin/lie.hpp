#pragma once

#include <string>
#include <vector>

#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"
#include "fibrelin/system.hpp"

namespace fibrelin {

// L_X h = sum_i (dh/dx_i) X_i
inline ExprPtr lie_derivative(const ExprVec& X, const ExprPtr& h,
                              const std::vector<std::string>& states) {
    ExprVec parts;
    parts.reserve(states.size());
    for (std::size_t i = 0; i < states.size(); ++i)
        parts.push_back(make_mul({diff(h, states[i]), X[i]}));
    return simplify(make_add(std::move(parts)));
}

inline ExprPtr iterated_lie(const ExprVec& X, const ExprPtr& h, int k,
                            const std::vector<std::string>& states) {
    ExprPtr e = simplify(h);
    for (int i = 0; i < k; ++i) e = lie_derivative(X, e, states);
    return e;
}

struct RelativeDegreeResult {
    int r = 0;
    ExprPtr alpha;  // L_f^r h
    ExprPtr beta;   // L_g L_f^{r-1} h
    std::vector<ZeroVerdict> certificates;  // L_g L_f^k h == 0 for k = 0..r-2
    double beta_at_point = 0.0;
};

struct RelativeDegreeOptions {
    double tol = 1e-9;
    int samples = 20;
    SampleBox box;
};

// Smallest r such that L_g L_f^{r-1} h is nonzero at the point while every
// lower-order L_g L_f^k h vanishes identically (symbolically or on samples).
inline RelativeDegreeResult relative_degree(const SystemDef& sys, const Point& at,
                                            RelativeDegreeOptions opt = {}) {
    const int n = sys.n();
    RelativeDegreeResult res;
    ExprPtr lfk = simplify(sys.h);  // L_f^k h
    std::vector<ZeroVerdict> trail;

    for (int k = 0; k < n; ++k) {
        ExprPtr w = lie_derivative(sys.g, lfk, sys.states);
        ZeroVerdict verdict = is_zero(w, opt.box, opt.samples, opt.tol);
        if (verdict.zero()) {
            trail.push_back(verdict);
            lfk = lie_derivative(sys.f, lfk, sys.states);
            continue;
        }
        double beta_here = eval(w, at);
        if (std::fabs(beta_here) <= opt.tol)
            throw DegenerateRelativeDegreeError(
                "L_g L_f^" + std::to_string(k) + " h is nonzero elsewhere (|value| = " +
                format_double(verdict.witness_value) + ") but vanishes at the operating point");
        res.r = k + 1;
        res.beta = w;
        res.alpha = lie_derivative(sys.f, lfk, sys.states);
        res.certificates = std::move(trail);
        res.beta_at_point = beta_here;
        return res;
    }
    throw NoRelativeDegreeError("no relative degree: L_g L_f^k h vanishes for every k < " +
                                std::to_string(n));
}

}  // namespace fibrelin
