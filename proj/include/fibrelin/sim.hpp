#pragma once

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "fibrelin/connection.hpp"
#include "fibrelin/errors.hpp"
#include "fibrelin/normal_form.hpp"
#include "fibrelin/parser.hpp"
#include "fibrelin/system.hpp"

namespace fibrelin {

// scalar input signal: an expression in t (constants included)
struct InputSignal {
    ExprPtr expr;

    double operator()(double t) const {
        Point p;
        p["t"] = t;
        return eval(expr, p);
    }
};

inline InputSignal parse_input_signal(const std::string& text) {
    SymbolTable syms = SymbolTable::of({"t"});
    return InputSignal{simplify(parse_expr(text, syms))};
}

inline InputSignal constant_signal(double v) {
    return InputSignal{v < 0 ? make_neg(make_real(-v)) : make_real(v)};
}

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<double> inputs;

    std::size_t size() const { return times.size(); }
    const Vec& back_state() const { return states.back(); }
};

// Classical fixed-step RK4; the input is sampled per stage. The step count is
// rounded so the grid lands on t_end exactly.
template <class Field>
Trajectory integrate(Field&& field, const Vec& x0, const InputSignal& u_sig, double t_end,
                     double dt) {
    if (!(dt > 0.0) || t_end < dt)
        throw PreconditionError("integrate: require dt > 0 and t_end >= dt");
    const long long steps = std::llround(t_end / dt);
    const double h = t_end / static_cast<double>(steps);

    Trajectory traj;
    traj.times.reserve(steps + 1);
    traj.states.reserve(steps + 1);
    traj.inputs.reserve(steps + 1);

    Vec x = x0;
    for (long long k = 0; k <= steps; ++k) {
        double t = h * static_cast<double>(k);
        traj.times.push_back(t);
        traj.states.push_back(x);
        traj.inputs.push_back(u_sig(t));
        if (k == steps) break;

        double um = u_sig(t + 0.5 * h);
        double ue = u_sig(t + h);
        Vec k1 = field(x, traj.inputs.back(), t);
        Vec x2(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + 0.5 * h * k1[i];
        Vec k2 = field(x2, um, t + 0.5 * h);
        for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + 0.5 * h * k2[i];
        Vec k3 = field(x2, um, t + 0.5 * h);
        for (std::size_t i = 0; i < x.size(); ++i) x2[i] = x[i] + h * k3[i];
        Vec k4 = field(x2, ue, t + h);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        for (double v : x)
            if (!std::isfinite(v))
                throw NonFiniteError("state became non-finite at t = " + format_double(t + h),
                                     t + h);
    }
    return traj;
}

// common fields
inline auto full_field(const SystemDef& sys) {
    return [&sys](const Vec& x, double u, double) {
        Point p = sys.bind_states(x);
        Vec dx(sys.f.size());
        for (std::size_t i = 0; i < sys.f.size(); ++i)
            dx[i] = eval(sys.f[i], p) + eval(sys.g[i], p) * u;
        return dx;
    };
}

inline Vec quotient_rhs(const LinearQuotient& q, const Vec& z, double v) {
    Vec dz = mat_vec(q.A, z);
    for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += q.b[i] * v;
    return dz;
}

inline auto linear_field(const LinearQuotient& q) {
    return [&q](const Vec& z, double v, double) { return quotient_rhs(q, z, v); };
}

// horizontally lifted quotient dynamics: xdot = Hor_x(A Phi(x) + b v)
inline auto lifted_field(const NormalForm& nf) {
    return [&nf](const Vec& x, double v, double) {
        Point p;
        for (std::size_t i = 0; i < nf.states.size(); ++i) p[nf.states[i]] = x[i];
        ConnectionPoint cp = connection_at(nf, p);
        Vec Y = quotient_rhs(nf.quotient, nf.eval_phi(p), v);
        return horizontal_lift(cp, Y);
    };
}

enum class ProjectionMode { Lifted, FullSystem };

struct ProjectionReport {
    double max_deviation = 0.0;  // max_t |Phi(x(t)) - z(t)|_inf
    Trajectory upstairs;         // in state space; inputs hold the recovered u
    Trajectory quotient;         // in z space; inputs hold v
};

// Integrates the lifted system (or the closed-loop full system) driven through
// v, integrates the linear quotient from Phi(x0) on the same grid, and reports
// how far Phi of the upstairs trajectory strays from the quotient trajectory.
inline ProjectionReport verify_projection(const SystemDef& sys, const NormalForm& nf,
                                          const Vec& x0, const InputSignal& v_sig, double t_end,
                                          double dt, ProjectionMode mode = ProjectionMode::Lifted) {
    ProjectionReport rep;
    if (mode == ProjectionMode::Lifted) {
        rep.upstairs = integrate(lifted_field(nf), x0, v_sig, t_end, dt);
    } else {
        auto closed_loop = [&](const Vec& x, double v, double) {
            Point p = sys.bind_states(x);
            double u = nf.input_from_v(p, v);
            Vec dx(sys.f.size());
            for (std::size_t i = 0; i < sys.f.size(); ++i)
                dx[i] = eval(sys.f[i], p) + eval(sys.g[i], p) * u;
            return dx;
        };
        rep.upstairs = integrate(closed_loop, x0, v_sig, t_end, dt);
    }
    Point p0 = sys.bind_states(x0);
    rep.quotient = integrate(linear_field(nf.quotient), nf.eval_phi(p0), v_sig, t_end, dt);

    for (std::size_t k = 0; k < rep.upstairs.size(); ++k) {
        Point p = sys.bind_states(rep.upstairs.states[k]);
        Vec z = nf.eval_phi(p);
        rep.max_deviation =
            std::max(rep.max_deviation, norm_inf(vec_sub(z, rep.quotient.states[k])));
        rep.upstairs.inputs[k] = nf.input_from_v(p, rep.upstairs.inputs[k]);
    }
    return rep;
}

// Horizontal lift of a sampled base curve: integrates Hor of the curve's
// velocity (central differences inside, second-order one-sided at the ends).
inline Trajectory lift_curve(const NormalForm& nf, const Trajectory& base, const Vec& x0) {
    const std::size_t m = base.size();
    if (m < 3) throw PreconditionError("lift_curve: need at least 3 samples");
    const double h = base.times[1] - base.times[0];
    for (std::size_t k = 1; k < m; ++k)
        if (std::fabs(base.times[k] - base.times[k - 1] - h) > 1e-9 * std::max(1.0, std::fabs(h)))
            throw PreconditionError("lift_curve: base curve must be uniformly sampled");

    Point p0;
    for (std::size_t i = 0; i < nf.states.size(); ++i) p0[nf.states[i]] = x0[i];
    Vec z0 = nf.eval_phi(p0);
    if (norm_inf(vec_sub(z0, base.states[0])) > 1e-6)
        throw PreconditionError("lift_curve: Phi(x0) does not match the start of the base curve");

    const std::size_t r = base.states[0].size();
    std::vector<Vec> vel(m, Vec(r, 0.0));
    for (std::size_t i = 0; i < r; ++i) {
        vel[0][i] = (-3.0 * base.states[0][i] + 4.0 * base.states[1][i] - base.states[2][i]) /
                    (2.0 * h);
        for (std::size_t k = 1; k + 1 < m; ++k)
            vel[k][i] = (base.states[k + 1][i] - base.states[k - 1][i]) / (2.0 * h);
        vel[m - 1][i] = (3.0 * base.states[m - 1][i] - 4.0 * base.states[m - 2][i] +
                         base.states[m - 3][i]) /
                        (2.0 * h);
    }
    auto velocity_at = [&](double t) {
        double s = (t - base.times.front()) / h;
        if (s <= 0.0) return vel.front();
        if (s >= static_cast<double>(m - 1)) return vel.back();
        std::size_t k = static_cast<std::size_t>(s);
        double w = s - static_cast<double>(k);
        Vec out(r);
        for (std::size_t i = 0; i < r; ++i) out[i] = (1.0 - w) * vel[k][i] + w * vel[k + 1][i];
        return out;
    };

    auto field = [&](const Vec& x, double, double t) {
        Point p;
        for (std::size_t i = 0; i < nf.states.size(); ++i) p[nf.states[i]] = x[i];
        ConnectionPoint cp = connection_at(nf, p);
        return horizontal_lift(cp, velocity_at(t));
    };
    double t_end = base.times.back() - base.times.front();
    Trajectory lifted = integrate(field, x0, constant_signal(0.0), t_end, h);
    for (std::size_t k = 0; k < lifted.size(); ++k) lifted.times[k] += base.times.front();
    return lifted;
}

// ---------------------------------------------------------------------------
// CSV: header "t,x1,...,xn,u", full double precision
// ---------------------------------------------------------------------------

inline void write_csv(std::ostream& out, const Trajectory& traj,
                      const std::vector<std::string>& state_names,
                      const std::string& input_name = "u") {
    out << "t";
    for (const auto& s : state_names) out << ',' << s;
    out << ',' << input_name << '\n';
    char buf[40];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf;
    };
    for (std::size_t k = 0; k < traj.size(); ++k) {
        put(traj.times[k]);
        for (double v : traj.states[k]) {
            out << ',';
            put(v);
        }
        out << ',';
        put(traj.inputs[k]);
        out << '\n';
    }
}

// Returns the state column names alongside the data. A final column named
// "u" or "v" is treated as the input trace.
inline std::pair<std::vector<std::string>, Trajectory> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw InputError("csv: empty input");
    std::vector<std::string> cols;
    {
        std::stringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    if (cols.size() < 2 || cols[0] != "t")
        throw InputError("csv: expected header starting with 't'");
    bool has_input = cols.back() == "u" || cols.back() == "v";
    std::vector<std::string> names(cols.begin() + 1, cols.end() - (has_input ? 1 : 0));
    if (names.empty()) throw InputError("csv: no state columns");

    Trajectory traj;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (sysdetail::trim(line).empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw InputError("csv: bad number '" + cell + "' on line " + std::to_string(line_no));
            }
        }
        if (row.size() != cols.size())
            throw InputError("csv: wrong column count on line " + std::to_string(line_no));
        traj.times.push_back(row[0]);
        traj.states.push_back(Vec(row.begin() + 1, row.begin() + 1 + names.size()));
        traj.inputs.push_back(has_input ? row.back() : 0.0);
    }
    if (traj.size() == 0) throw InputError("csv: no data rows");
    return {names, traj};
}

}  // namespace fibrelin
