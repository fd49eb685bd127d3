#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fibrelin/errors.hpp"

namespace fibrelin {

using Vec = std::vector<double>;

inline double norm_inf(const Vec& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
}

inline double norm2(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline Vec vec_sub(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline Vec vec_add(const Vec& a, const Vec& b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

inline Vec vec_scale(double s, const Vec& a) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
    return r;
}

// Dense row-major matrix. Everything here is meant for small n (system
// dimension), so no blocking or pivot scaling heroics.
struct Mat {
    int rows = 0, cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }

    static Mat identity(int n) {
        Mat m(n, n);
        for (int i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    Vec row(int i) const {
        Vec r(cols);
        for (int j = 0; j < cols; ++j) r[j] = (*this)(i, j);
        return r;
    }

    Vec col(int j) const {
        Vec c(rows);
        for (int i = 0; i < rows; ++i) c[i] = (*this)(i, j);
        return c;
    }

    void set_col(int j, const Vec& c) {
        for (int i = 0; i < rows; ++i) (*this)(i, j) = c[i];
    }

    double max_row_norm() const {
        double m = 0.0;
        for (int i = 0; i < rows; ++i) {
            double s = 0.0;
            for (int j = 0; j < cols; ++j) s += (*this)(i, j) * (*this)(i, j);
            m = std::max(m, std::sqrt(s));
        }
        return m;
    }
};

inline Vec mat_vec(const Mat& m, const Vec& v) {
    Vec r(m.rows, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        double s = 0.0;
        for (int j = 0; j < m.cols; ++j) s += m(i, j) * v[j];
        r[i] = s;
    }
    return r;
}

inline Mat mat_mul(const Mat& a, const Mat& b) {
    Mat r(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int k = 0; k < a.cols; ++k) {
            double aik = a(i, k);
            for (int j = 0; j < b.cols; ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

inline Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

// Concatenate columns: [a | b].
inline Mat hcat(const Mat& a, const Mat& b) {
    Mat r(a.rows, a.cols + b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int j = 0; j < a.cols; ++j) r(i, j) = a(i, j);
        for (int j = 0; j < b.cols; ++j) r(i, a.cols + j) = b(i, j);
    }
    return r;
}

// LU factorization with partial pivoting, PA = LU packed in place.
struct LuFactor {
    Mat lu;                 // L below diagonal (unit), U on and above
    std::vector<int> perm;  // row permutation applied to the input
    double parity = 1.0;    // sign of the permutation
    bool singular = false;

    int n() const { return lu.rows; }

    double det() const {
        double d = parity;
        for (int i = 0; i < lu.rows; ++i) d *= lu(i, i);
        return d;
    }

    Vec solve(const Vec& b) const {
        if (singular) throw NumericalError("solve on a singular LU factorization");
        const int m = lu.rows;
        Vec y(m);
        for (int i = 0; i < m; ++i) {
            double s = b[perm[i]];
            for (int j = 0; j < i; ++j) s -= lu(i, j) * y[j];
            y[i] = s;
        }
        for (int i = m - 1; i >= 0; --i) {
            double s = y[i];
            for (int j = i + 1; j < m; ++j) s -= lu(i, j) * y[j];
            y[i] = s / lu(i, i);
        }
        return y;
    }
};

inline LuFactor lu_factor(Mat A) {
    const int n = A.rows;
    LuFactor f;
    f.perm.resize(n);
    for (int i = 0; i < n; ++i) f.perm[i] = i;

    double scale = 0.0;
    for (double x : A.a) scale = std::max(scale, std::fabs(x));
    const double tiny = (scale > 0.0 ? scale : 1.0) * 1e-300;

    for (int k = 0; k < n; ++k) {
        int piv = k;
        double best = std::fabs(A(k, k));
        for (int i = k + 1; i < n; ++i) {
            double v = std::fabs(A(i, k));
            if (v > best) {
                best = v;
                piv = i;
            }
        }
        if (piv != k) {
            for (int j = 0; j < n; ++j) std::swap(A(k, j), A(piv, j));
            std::swap(f.perm[k], f.perm[piv]);
            f.parity = -f.parity;
        }
        if (best <= tiny) {
            f.singular = true;
            continue;
        }
        for (int i = k + 1; i < n; ++i) {
            A(i, k) /= A(k, k);
            double lik = A(i, k);
            if (lik != 0.0)
                for (int j = k + 1; j < n; ++j) A(i, j) -= lik * A(k, j);
        }
    }
    f.lu = std::move(A);
    return f;
}

inline double det(const Mat& m) { return lu_factor(m).det(); }

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline Vec sym_eigenvalues(Mat s, int max_sweeps = 64) {
    const int n = s.rows;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (off <= 1e-30) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                double apq = s(p, q);
                if (std::fabs(apq) <= 1e-300) continue;
                double theta = (s(q, q) - s(p, p)) / (2.0 * apq);
                double t = (theta >= 0 ? 1.0 : -1.0) /
                           (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                double c = 1.0 / std::sqrt(t * t + 1.0);
                double sn = t * c;
                for (int k = 0; k < n; ++k) {
                    double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (int k = 0; k < n; ++k) {
                    double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
    }
    Vec ev(n);
    for (int i = 0; i < n; ++i) ev[i] = s(i, i);
    std::sort(ev.begin(), ev.end());
    return ev;
}

// Smallest singular value of a k-by-n matrix with k <= n.
inline double smallest_singular_value(const Mat& m) {
    Mat b(m.rows, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.rows; ++j) {
            double s = 0.0;
            for (int k = 0; k < m.cols; ++k) s += m(i, k) * m(j, k);
            b(i, j) = s;
        }
    Vec ev = sym_eigenvalues(std::move(b));
    return std::sqrt(std::max(0.0, ev.front()));
}

}  // namespace fibrelin
