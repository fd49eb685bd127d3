#pragma once

#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fibrelin/errors.hpp"
#include "fibrelin/expr.hpp"
#include "fibrelin/linalg.hpp"
#include "fibrelin/parser.hpp"
#include "fibrelin/rng.hpp"

namespace fibrelin {

// SISO affine control system  xdot = f(x) + g(x) u,  y = h(x).
struct SystemDef {
    std::string name;
    std::vector<std::string> states;  // n >= 2
    std::string input;
    ExprVec f, g;
    ExprPtr h;
    std::optional<ExprVec> complement;  // candidate extra coordinates
    Point operating_point;              // binds every state; origin by default

    int n() const { return static_cast<int>(states.size()); }

    SymbolTable state_symbols() const { return SymbolTable::of(states); }

    SymbolTable full_symbols() const {
        SymbolTable t = SymbolTable::of(states);
        t.declare(input);
        return t;
    }

    Vec operating_vec() const {
        Vec v;
        v.reserve(states.size());
        for (const auto& s : states) v.push_back(operating_point.at(s));
        return v;
    }

    Point bind_states(const Vec& x) const {
        Point p;
        for (std::size_t i = 0; i < states.size(); ++i) p[states[i]] = x[i];
        return p;
    }

    Point bind_full(const Vec& x, double u) const {
        Point p = bind_states(x);
        p[input] = u;
        return p;
    }
};

// ---------------------------------------------------------------------------
// system file format (line oriented, '#' starts a comment):
//   system "<name>"
//   states x1 x2 ... xn
//   input u
//   f = [e1, ..., en]
//   g = [e1, ..., en]
//   h = e
//   complement = [e1, ..., ek]      (optional)
//   point = [v1, ..., vn]           (optional, defaults to the origin)
// ---------------------------------------------------------------------------

namespace sysdetail {

inline std::string strip_comment(const std::string& line) {
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        if (line[i] == '"') quoted = !quoted;
        if (line[i] == '#' && !quoted) return line.substr(0, i);
    }
    return line;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

// split a "[a, b, c]" body on top-level commas
inline std::vector<std::string> split_list(const std::string& body, int line_no) {
    std::string inner = trim(body);
    if (inner.size() < 2 || inner.front() != '[' || inner.back() != ']')
        throw ParseError("expected a bracketed list [ ... ]", line_no, 1);
    inner = inner.substr(1, inner.size() - 2);
    std::vector<std::string> parts;
    int depth = 0;
    std::string cur;
    for (char c : inner) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == ',' && depth == 0) {
            parts.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!trim(cur).empty() || parts.empty()) parts.push_back(trim(cur));
    return parts;
}

inline ExprPtr parse_entry(const std::string& text, const SymbolTable& syms, int line_no) {
    try {
        return simplify(parse_expr(text, syms));
    } catch (ParseError& e) {
        throw ParseError(std::string(e.what()), line_no, e.col);
    }
}

}  // namespace sysdetail

inline SystemDef parse_system(const std::string& text) {
    using namespace sysdetail;
    SystemDef sys;
    bool have_name = false, have_states = false, have_input = false;
    bool have_f = false, have_g = false, have_h = false;
    std::vector<std::pair<int, std::string>> point_raw_line;
    std::optional<std::vector<double>> point_values;

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = trim(strip_comment(raw));
        if (line.empty()) continue;

        auto need_symbols = [&]() -> SymbolTable {
            if (!have_states || !have_input)
                throw ParseError("states and input must be declared before expressions", line_no, 1);
            return sys.full_symbols();
        };

        std::istringstream ls(line);
        std::string word;
        ls >> word;

        if (word == "system") {
            std::size_t q1 = line.find('"');
            std::size_t q2 = line.rfind('"');
            if (q1 == std::string::npos || q2 <= q1)
                throw ParseError("expected: system \"<name>\"", line_no, 1);
            sys.name = line.substr(q1 + 1, q2 - q1 - 1);
            have_name = true;
            continue;
        }
        if (word == "states") {
            std::string s;
            while (ls >> s) {
                for (char c : s)
                    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_')
                        throw ParseError("invalid state name '" + s + "'", line_no, 1);
                sys.states.push_back(s);
            }
            if (sys.states.size() < 2)
                throw DimensionError("at least 2 states are required (line " +
                                     std::to_string(line_no) + ")");
            have_states = true;
            continue;
        }
        if (word == "input") {
            if (!(ls >> sys.input)) throw ParseError("expected: input <symbol>", line_no, 1);
            for (const auto& s : sys.states)
                if (s == sys.input)
                    throw ParseError("input symbol '" + sys.input + "' collides with a state",
                                     line_no, 1);
            have_input = true;
            continue;
        }

        std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("unrecognised directive '" + word + "'", line_no, 1);
        std::string key = trim(line.substr(0, eq));
        std::string body = trim(line.substr(eq + 1));

        if (key == "f" || key == "g") {
            SymbolTable syms = need_symbols();
            ExprVec v;
            for (const auto& part : split_list(body, line_no)) v.push_back(parse_entry(part, syms, line_no));
            (key == "f" ? sys.f : sys.g) = std::move(v);
            (key == "f" ? have_f : have_g) = true;
        } else if (key == "h") {
            sys.h = parse_entry(body, need_symbols(), line_no);
            have_h = true;
        } else if (key == "complement") {
            SymbolTable syms = need_symbols();
            ExprVec v;
            for (const auto& part : split_list(body, line_no)) v.push_back(parse_entry(part, syms, line_no));
            sys.complement = std::move(v);
        } else if (key == "point") {
            if (!have_states) throw ParseError("point must follow the states declaration", line_no, 1);
            std::vector<double> vals;
            for (const auto& part : split_list(body, line_no)) {
                try {
                    std::size_t used = 0;
                    vals.push_back(std::stod(part, &used));
                    if (used != part.size()) throw std::invalid_argument(part);
                } catch (const std::exception&) {
                    throw ParseError("invalid number '" + part + "' in point", line_no, 1);
                }
            }
            point_values = std::move(vals);
        } else {
            throw ParseError("unrecognised directive '" + key + "'", line_no, 1);
        }
    }

    if (!have_name) throw ParseError("missing system \"<name>\" declaration");
    if (!have_states) throw ParseError("missing states declaration");
    if (!have_input) throw ParseError("missing input declaration");
    if (!have_f) throw ParseError("missing f = [...]");
    if (!have_g) throw ParseError("missing g = [...]");
    if (!have_h) throw ParseError("missing h = ...");

    const std::size_t n = sys.states.size();
    if (sys.f.size() != n)
        throw DimensionError("f has " + std::to_string(sys.f.size()) + " entries but there are " +
                             std::to_string(n) + " states");
    if (sys.g.size() != n)
        throw DimensionError("g has " + std::to_string(sys.g.size()) + " entries but there are " +
                             std::to_string(n) + " states");

    auto reject_input = [&](const ExprPtr& e, const std::string& where) {
        if (contains_var(e, sys.input))
            throw ParseError("input symbol '" + sys.input + "' may not appear in " + where);
    };
    for (const auto& e : sys.f) reject_input(e, "f");
    for (const auto& e : sys.g) reject_input(e, "g");
    reject_input(sys.h, "h");
    if (sys.complement)
        for (const auto& e : *sys.complement) reject_input(e, "complement");

    if (point_values) {
        if (point_values->size() != n)
            throw DimensionError("point has " + std::to_string(point_values->size()) +
                                 " entries but there are " + std::to_string(n) + " states");
        for (std::size_t i = 0; i < n; ++i) sys.operating_point[sys.states[i]] = (*point_values)[i];
    } else {
        for (const auto& s : sys.states) sys.operating_point[s] = 0.0;
    }
    return sys;
}

inline std::string serialize(const SystemDef& sys) {
    std::ostringstream out;
    out << "system \"" << sys.name << "\"\n";
    out << "states";
    for (const auto& s : sys.states) out << ' ' << s;
    out << "\ninput " << sys.input << "\n";
    out << "f = " << to_string(sys.f) << "\n";
    out << "g = " << to_string(sys.g) << "\n";
    out << "h = " << to_string(sys.h) << "\n";
    if (sys.complement) out << "complement = " << to_string(*sys.complement) << "\n";
    out << "point = [";
    for (std::size_t i = 0; i < sys.states.size(); ++i) {
        if (i) out << ", ";
        out << format_double(sys.operating_point.at(sys.states[i]));
    }
    out << "]\n";
    return out.str();
}

// F(x, u) = f(x) + g(x) u, componentwise.
inline ExprVec total_dynamics(const SystemDef& sys) {
    ExprVec F;
    F.reserve(sys.f.size());
    ExprPtr u = make_var(sys.input);
    for (std::size_t i = 0; i < sys.f.size(); ++i)
        F.push_back(simplify(make_add({sys.f[i], make_mul({sys.g[i], u})})));
    return F;
}

// ---------------------------------------------------------------------------
// projectability: TPhi . X must be constant on fibres of the projection
// ---------------------------------------------------------------------------

struct ProjectabilityOptions {
    int targets = 5;           // distinct fibres to sample
    int starts_per_target = 6; // Newton starts per fibre
    int max_iterations = 80;
    double pair_tol = 1e-9;       // |pi(a) - pi(b)| for an accepted pair
    double agree_tol = 1e-7;      // |TPhi.X(a) - TPhi.X(b)| allowed
    double min_separation = 1e-2; // points closer than this are the same solution
    std::uint64_t seed = 42;
    SampleBox box;
    std::optional<ExprVec> fibre_map;  // defaults to phi
};

struct ProjectabilityReport {
    bool projectable = true;
    int pairs_checked = 0;
    double worst_mismatch = 0.0;
    Point witness_a, witness_b;
};

// X: n state components over (states [+ extras]); phi: r expressions over the
// states. Pairs of points on a common fibre of the fibre map are found with a
// damped Gauss-Newton iteration on |pi(x) - c|^2; on each pair the pushforward
// TPhi.X must agree.
inline ProjectabilityReport is_projectable(const ExprVec& X, const ExprVec& phi,
                                           const std::vector<std::string>& states,
                                           const std::vector<std::string>& extras = {},
                                           ProjectabilityOptions opt = {}) {
    std::vector<std::string> space = states;
    space.insert(space.end(), extras.begin(), extras.end());
    const int m = static_cast<int>(space.size());

    const ExprVec& pi = opt.fibre_map ? *opt.fibre_map : phi;
    const int k = static_cast<int>(pi.size());
    ExprMat jac_pi = jacobian(pi, space);
    ExprMat jac_phi = jacobian(phi, states);

    auto bind = [&](const Vec& v) {
        Point p;
        for (int i = 0; i < m; ++i) p[space[i]] = v[i];
        return p;
    };
    auto eval_vec = [&](const ExprVec& es, const Point& p) {
        Vec r;
        r.reserve(es.size());
        for (const auto& e : es) r.push_back(eval(e, p));
        return r;
    };
    auto pushforward = [&](const Point& p) {
        Vec xval = eval_vec(X, p);
        Vec out(phi.size(), 0.0);
        for (std::size_t i = 0; i < phi.size(); ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < states.size(); ++j) s += eval(jac_phi[i][j], p) * xval[j];
            out[i] = s;
        }
        return out;
    };

    Rng rng(opt.seed);
    std::vector<std::pair<double, double>> ranges;
    for (const auto& v : space) ranges.push_back(opt.box.range(v));

    ProjectabilityReport report;
    for (int target = 0; target < opt.targets; ++target) {
        Vec base = rng.uniform_vec(ranges);
        Vec c;
        try {
            c = eval_vec(pi, bind(base));
        } catch (const NumericalError&) {
            continue;
        }

        std::vector<Vec> on_fibre;
        for (int start = 0; start < opt.starts_per_target; ++start) {
            Vec x = rng.uniform_vec(ranges);
            double mu = 1e-3;
            bool ok = false;
            for (int it = 0; it < opt.max_iterations; ++it) {
                Vec r;
                Mat J(k, m);
                try {
                    Point p = bind(x);
                    r = vec_sub(eval_vec(pi, p), c);
                    for (int i = 0; i < k; ++i)
                        for (int j = 0; j < m; ++j) J(i, j) = eval(jac_pi[i][j], p);
                } catch (const NumericalError&) {
                    break;
                }
                double rn = norm2(r);
                if (rn <= 1e-12) {
                    ok = true;
                    break;
                }
                Mat JtJ(m, m);
                Vec Jtr(m, 0.0);
                for (int a = 0; a < m; ++a) {
                    for (int b = 0; b < m; ++b) {
                        double s = 0.0;
                        for (int i = 0; i < k; ++i) s += J(i, a) * J(i, b);
                        JtJ(a, b) = s;
                    }
                    double s = 0.0;
                    for (int i = 0; i < k; ++i) s += J(i, a) * r[i];
                    Jtr[a] = s;
                }
                for (int a = 0; a < m; ++a) JtJ(a, a) += mu;
                LuFactor lu = lu_factor(JtJ);
                if (lu.singular) {
                    mu *= 10.0;
                    continue;
                }
                Vec step = lu.solve(Jtr);
                Vec xn(m);
                for (int a = 0; a < m; ++a) xn[a] = x[a] - step[a];
                double rn_new;
                try {
                    rn_new = norm2(vec_sub(eval_vec(pi, bind(xn)), c));
                } catch (const NumericalError&) {
                    mu *= 10.0;
                    continue;
                }
                if (rn_new < rn) {
                    x = xn;
                    mu = std::max(mu * 0.3, 1e-12);
                } else {
                    mu *= 10.0;
                    if (mu > 1e12) break;
                }
            }
            if (!ok) continue;
            bool duplicate = false;
            for (const auto& other : on_fibre)
                if (norm_inf(vec_sub(other, x)) < opt.min_separation) duplicate = true;
            if (!duplicate) on_fibre.push_back(x);
        }

        for (std::size_t a = 0; a < on_fibre.size(); ++a) {
            for (std::size_t b = a + 1; b < on_fibre.size(); ++b) {
                Point pa = bind(on_fibre[a]), pb = bind(on_fibre[b]);
                double fibre_gap;
                Vec qa, qb;
                try {
                    fibre_gap = norm_inf(vec_sub(eval_vec(pi, pa), eval_vec(pi, pb)));
                    if (fibre_gap > opt.pair_tol) continue;
                    qa = pushforward(pa);
                    qb = pushforward(pb);
                } catch (const NumericalError&) {
                    continue;
                }
                ++report.pairs_checked;
                double mismatch = norm_inf(vec_sub(qa, qb));
                if (mismatch > report.worst_mismatch) {
                    report.worst_mismatch = mismatch;
                    report.witness_a = pa;
                    report.witness_b = pb;
                }
            }
        }
    }

    if (report.pairs_checked == 0)
        throw FibreSamplingError("projectability check: no point pairs found on a common fibre");
    report.projectable = report.worst_mismatch <= opt.agree_tol;
    return report;
}

}  // namespace fibrelin
