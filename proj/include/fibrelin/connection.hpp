#pragma once

#include <cmath>
#include <utility>

#include "fibrelin/errors.hpp"
#include "fibrelin/linalg.hpp"
#include "fibrelin/normal_form.hpp"

namespace fibrelin {

// The connection data of Lambda at one state point. Columns of the bases are
// solutions of J x = e_i: the first r unit vectors give the horizontal basis
// (annihilated by the complement differentials), the remaining n - r give the
// vertical basis (kernel of TPhi). [H | V] is nonsingular by construction.
struct ConnectionPoint {
    Vec x;
    int n = 0, r = 0;
    Mat J;        // numeric Jacobian of Lambda
    LuFactor lu;
    double det = 0.0;
    Mat V_basis;  // n x (n - r)
    Mat H_basis;  // n x r
};

namespace conndetail {

// unit norm, first entry above noise made positive
inline void normalize_column(Vec& c) {
    double nrm = norm2(c);
    if (nrm == 0.0) return;
    for (double& v : c) v /= nrm;
    for (double v : c) {
        if (std::fabs(v) > 1e-12) {
            if (v < 0.0)
                for (double& w : c) w = -w;
            break;
        }
    }
}

}  // namespace conndetail

inline ConnectionPoint connection_at(const NormalForm& nf, const Point& p) {
    ConnectionPoint cp;
    cp.n = nf.n;
    cp.r = nf.r;
    cp.x.reserve(nf.states.size());
    for (const auto& s : nf.states) cp.x.push_back(p.at(s));
    cp.J = nf.eval_jacobian(p);
    cp.lu = lu_factor(cp.J);
    cp.det = cp.lu.det();
    double scale = std::max(1.0, cp.J.max_row_norm());
    if (cp.lu.singular || std::fabs(cp.det) <= 1e-9 * scale)
        throw SingularJacobianError("Jacobian of lambda is singular (det = " +
                                        format_double(cp.det) + ") at the requested point",
                                    cp.det, cp.x);

    cp.H_basis = Mat(cp.n, cp.r);
    cp.V_basis = Mat(cp.n, cp.n - cp.r);
    Vec e(cp.n, 0.0);
    for (int i = 0; i < cp.n; ++i) {
        e.assign(cp.n, 0.0);
        e[i] = 1.0;
        Vec col = cp.lu.solve(e);
        conndetail::normalize_column(col);
        if (i < cp.r)
            cp.H_basis.set_col(i, col);
        else
            cp.V_basis.set_col(i - cp.r, col);
    }
    return cp;
}

// The unique X with TPhi . X = Y and dlambda_j . X = 0 for j > r,
// i.e. J X = [Y; 0].
inline Vec horizontal_lift(const ConnectionPoint& cp, const Vec& Y) {
    Vec rhs(cp.n, 0.0);
    for (int i = 0; i < cp.r; ++i) rhs[i] = Y[i];
    return cp.lu.solve(rhs);
}

// first r rows of J applied to X
inline Vec tphi_apply(const ConnectionPoint& cp, const Vec& X) {
    Vec out(cp.r, 0.0);
    for (int i = 0; i < cp.r; ++i) {
        double s = 0.0;
        for (int j = 0; j < cp.n; ++j) s += cp.J(i, j) * X[j];
        out[i] = s;
    }
    return out;
}

// last n - r rows of J applied to X (the complement differentials)
inline Vec complement_apply(const ConnectionPoint& cp, const Vec& X) {
    Vec out(cp.n - cp.r, 0.0);
    for (int i = cp.r; i < cp.n; ++i) {
        double s = 0.0;
        for (int j = 0; j < cp.n; ++j) s += cp.J(i, j) * X[j];
        out[i - cp.r] = s;
    }
    return out;
}

// X = X_h + X_v with X_h horizontal and X_v vertical.
inline std::pair<Vec, Vec> decompose(const ConnectionPoint& cp, const Vec& X) {
    Vec Xh = horizontal_lift(cp, tphi_apply(cp, X));
    Vec Xv = vec_sub(X, Xh);
    return {Xh, Xv};
}

}  // namespace fibrelin
