#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fibrelin/errors.hpp"
#include "fibrelin/rng.hpp"

namespace fibrelin {

// ---------------------------------------------------------------------------
// numbers: exact rationals while the source stays integral, doubles otherwise
// ---------------------------------------------------------------------------

struct Number {
    bool exact = true;
    long long num = 0;
    long long den = 1;  // > 0, gcd(num, den) == 1
    double approx = 0.0;

    double value() const { return exact ? static_cast<double>(num) / static_cast<double>(den) : approx; }
    bool is_zero() const { return exact ? num == 0 : approx == 0.0; }
    bool is_one() const { return exact ? (num == 1 && den == 1) : approx == 1.0; }
    bool is_minus_one() const { return exact ? (num == -1 && den == 1) : approx == -1.0; }
    bool negative() const { return exact ? num < 0 : approx < 0.0; }
    bool is_integer() const { return exact && den == 1; }

    static Number integer(long long n) {
        Number r;
        r.num = n;
        return r;
    }
    static Number ratio(long long n, long long d) {
        Number r;
        if (d < 0) {
            n = -n;
            d = -d;
        }
        long long g = std::gcd(n < 0 ? -n : n, d);
        if (g > 1) {
            n /= g;
            d /= g;
        }
        r.num = n;
        r.den = d;
        return r;
    }
    static Number real(double v) {
        Number r;
        r.exact = false;
        r.approx = v;
        return r;
    }
};

namespace numdetail {
inline bool mul_ok(long long a, long long b, long long* out) { return !__builtin_mul_overflow(a, b, out); }
inline bool add_ok(long long a, long long b, long long* out) { return !__builtin_add_overflow(a, b, out); }
}  // namespace numdetail

inline Number num_neg(const Number& a) {
    if (a.exact) return Number::ratio(-a.num, a.den);
    return Number::real(-a.approx);
}

inline Number num_add(const Number& a, const Number& b) {
    if (a.exact && b.exact) {
        long long n1, n2, n, d;
        if (numdetail::mul_ok(a.num, b.den, &n1) && numdetail::mul_ok(b.num, a.den, &n2) &&
            numdetail::add_ok(n1, n2, &n) && numdetail::mul_ok(a.den, b.den, &d))
            return Number::ratio(n, d);
    }
    return Number::real(a.value() + b.value());
}

inline Number num_mul(const Number& a, const Number& b) {
    if (a.exact && b.exact) {
        long long n, d;
        if (numdetail::mul_ok(a.num, b.num, &n) && numdetail::mul_ok(a.den, b.den, &d))
            return Number::ratio(n, d);
    }
    return Number::real(a.value() * b.value());
}

inline Number num_div(const Number& a, const Number& b) {
    if (a.exact && b.exact && b.num != 0) {
        long long n, d;
        if (numdetail::mul_ok(a.num, b.den, &n) && numdetail::mul_ok(a.den, b.num, &d))
            return Number::ratio(n, d);
    }
    return Number::real(a.value() / b.value());
}

inline Number num_pow(const Number& a, long long k) {
    if (k == 0) return Number::integer(1);
    bool invert = k < 0;
    unsigned long long e = invert ? static_cast<unsigned long long>(-(k + 1)) + 1ULL
                                  : static_cast<unsigned long long>(k);
    if (a.exact) {
        long long n = 1, d = 1, bn = a.num, bd = a.den;
        bool ok = true;
        unsigned long long ee = e;
        while (ee != 0 && ok) {
            if (ee & 1ULL) ok = numdetail::mul_ok(n, bn, &n) && numdetail::mul_ok(d, bd, &d);
            ee >>= 1;
            if (ee != 0 && ok) ok = numdetail::mul_ok(bn, bn, &bn) && numdetail::mul_ok(bd, bd, &bd);
        }
        if (ok) {
            if (!invert) return Number::ratio(n, d);
            if (n != 0) return Number::ratio(d, n);
        }
    }
    return Number::real(std::pow(a.value(), static_cast<double>(k)));
}

inline int num_cmp(const Number& a, const Number& b) {
    double va = a.value(), vb = b.value();
    if (va < vb) return -1;
    if (va > vb) return 1;
    if (a.exact != b.exact) return a.exact ? -1 : 1;
    return 0;
}

// shortest round-trip decimal representation
inline std::string format_double(double v) {
    if (v == 0.0) return "0";
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// expression trees
// ---------------------------------------------------------------------------

enum class ExprKind { Const, Var, Neg, Add, Mul, Div, Pow, Func };
enum class FuncId { Exp, Ln, Sin, Cos, Tan, Sqrt };

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;
using ExprVec = std::vector<ExprPtr>;
using ExprMat = std::vector<ExprVec>;

struct Expr {
    ExprKind kind;
    Number value{};            // Const
    std::string name;          // Var
    FuncId func{};             // Func
    long long exponent = 0;    // Pow
    ExprVec kids;              // Neg/Func/Pow: 1, Div: 2, Add/Mul: >= 2
};

inline const char* func_name(FuncId f) {
    switch (f) {
        case FuncId::Exp: return "exp";
        case FuncId::Ln: return "ln";
        case FuncId::Sin: return "sin";
        case FuncId::Cos: return "cos";
        case FuncId::Tan: return "tan";
        case FuncId::Sqrt: return "sqrt";
    }
    return "?";
}

inline std::optional<FuncId> func_from_name(std::string_view s) {
    if (s == "exp") return FuncId::Exp;
    if (s == "ln") return FuncId::Ln;
    if (s == "sin") return FuncId::Sin;
    if (s == "cos") return FuncId::Cos;
    if (s == "tan") return FuncId::Tan;
    if (s == "sqrt") return FuncId::Sqrt;
    return std::nullopt;
}

inline ExprPtr make_const(Number v) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Const;
    e->value = v;
    return e;
}
inline ExprPtr make_int(long long n) { return make_const(Number::integer(n)); }
inline ExprPtr make_real(double v) { return make_const(Number::real(v)); }

inline ExprPtr make_var(std::string name) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Var;
    e->name = std::move(name);
    return e;
}

inline ExprPtr make_neg(ExprPtr a) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Neg;
    e->kids = {std::move(a)};
    return e;
}

inline ExprPtr make_add(ExprVec kids) {
    if (kids.empty()) return make_int(0);
    if (kids.size() == 1) return kids[0];
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Add;
    e->kids = std::move(kids);
    return e;
}

inline ExprPtr make_mul(ExprVec kids) {
    if (kids.empty()) return make_int(1);
    if (kids.size() == 1) return kids[0];
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Mul;
    e->kids = std::move(kids);
    return e;
}

inline ExprPtr make_div(ExprPtr num, ExprPtr den) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Div;
    e->kids = {std::move(num), std::move(den)};
    return e;
}

inline ExprPtr make_pow(ExprPtr base, long long k) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Pow;
    e->exponent = k;
    e->kids = {std::move(base)};
    return e;
}

inline ExprPtr make_func(FuncId f, ExprPtr arg) {
    auto e = std::make_shared<Expr>();
    e->kind = ExprKind::Func;
    e->func = f;
    e->kids = {std::move(arg)};
    return e;
}

inline ExprPtr make_sub(ExprPtr a, ExprPtr b) { return make_add({std::move(a), make_neg(std::move(b))}); }

// ---------------------------------------------------------------------------
// structural order (sign-transparent, total) and equality
// ---------------------------------------------------------------------------

inline int compare(const ExprPtr& a, const ExprPtr& b);

namespace exprdetail {

inline int rank(ExprKind k) {
    switch (k) {
        case ExprKind::Const: return 0;
        case ExprKind::Var: return 1;
        case ExprKind::Func: return 2;
        case ExprKind::Pow: return 3;
        case ExprKind::Div: return 4;
        case ExprKind::Mul: return 5;
        case ExprKind::Add: return 6;
        case ExprKind::Neg: return 7;  // unreachable after stripping
    }
    return 8;
}

inline const ExprPtr& strip_neg(const ExprPtr& e, int& sign) {
    const ExprPtr* p = &e;
    while ((*p)->kind == ExprKind::Neg) {
        sign = -sign;
        p = &(*p)->kids[0];
    }
    return *p;
}

inline int cmp_stripped(const ExprPtr& a, const ExprPtr& b) {
    int ra = rank(a->kind), rb = rank(b->kind);
    if (ra != rb) return ra < rb ? -1 : 1;
    switch (a->kind) {
        case ExprKind::Const:
            return num_cmp(a->value, b->value);
        case ExprKind::Var:
            return a->name.compare(b->name) < 0 ? -1 : (a->name == b->name ? 0 : 1);
        case ExprKind::Func:
            if (a->func != b->func) return a->func < b->func ? -1 : 1;
            return compare(a->kids[0], b->kids[0]);
        case ExprKind::Pow: {
            int c = compare(a->kids[0], b->kids[0]);
            if (c != 0) return c;
            if (a->exponent != b->exponent) return a->exponent < b->exponent ? -1 : 1;
            return 0;
        }
        case ExprKind::Div: {
            int c = compare(a->kids[0], b->kids[0]);
            if (c != 0) return c;
            return compare(a->kids[1], b->kids[1]);
        }
        case ExprKind::Mul:
        case ExprKind::Add: {
            std::size_t m = std::min(a->kids.size(), b->kids.size());
            for (std::size_t i = 0; i < m; ++i) {
                int c = compare(a->kids[i], b->kids[i]);
                if (c != 0) return c;
            }
            if (a->kids.size() != b->kids.size()) return a->kids.size() < b->kids.size() ? -1 : 1;
            return 0;
        }
        default:
            return 0;
    }
}

}  // namespace exprdetail

inline int compare(const ExprPtr& a, const ExprPtr& b) {
    int sa = 1, sb = 1;
    const ExprPtr& ca = exprdetail::strip_neg(a, sa);
    const ExprPtr& cb = exprdetail::strip_neg(b, sb);
    int c = exprdetail::cmp_stripped(ca, cb);
    if (c != 0) return c;
    if (sa == sb) return 0;
    return sa > 0 ? -1 : 1;
}

inline bool equal(const ExprPtr& a, const ExprPtr& b) { return compare(a, b) == 0; }

// ---------------------------------------------------------------------------
// simplification
// ---------------------------------------------------------------------------
//
// One bottom-up pass producing a stable (idempotent) form:
//   * constants folded, exact rationals preserved;
//   * Add/Mul flattened and sorted, like terms / like factors combined;
//   * negative coefficients expressed as an outer Neg, constants inside
//     Add/Mul are non-negative;
//   * Div carries its coefficient in the numerator, Mul never contains Div;
//   * Pow distributed over Mul/Div/Neg, folded on constants.
// This is deliberately not a canonical form: no distribution of products
// over sums and no function identities beyond exact special values.

inline ExprPtr simplify(const ExprPtr& e);

namespace exprdetail {

struct Term {
    Number coeff = Number::integer(1);
    ExprPtr core;  // nullptr for a pure constant
};

struct Factor {
    ExprPtr base;
    long long exp = 1;
};

// negative numbers become Neg(positive constant)
inline ExprPtr const_node(const Number& v) {
    if (v.negative()) return make_neg(make_const(num_neg(v)));
    if (v.is_zero()) return make_const(Number::integer(v.exact ? 0 : 0));
    return make_const(v);
}

inline bool division_by_syntactic_zero(const ExprPtr& e) {
    return e->kind == ExprKind::Div && e->kids[1]->kind == ExprKind::Const &&
           e->kids[1]->value.is_zero();
}

inline Term term_split(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
            return {e->value, nullptr};
        case ExprKind::Neg: {
            Term t = term_split(e->kids[0]);
            t.coeff = num_neg(t.coeff);
            return t;
        }
        case ExprKind::Mul:
            if (e->kids[0]->kind == ExprKind::Const) {
                Term t;
                t.coeff = e->kids[0]->value;
                if (e->kids.size() == 2) {
                    t.core = e->kids[1];
                } else {
                    ExprVec rest(e->kids.begin() + 1, e->kids.end());
                    t.core = make_mul(std::move(rest));
                }
                return t;
            }
            return {Number::integer(1), e};
        case ExprKind::Div: {
            // quotients keep a unit-coefficient numerator in their core so the
            // (coefficient, core) pairing is canonical; opaque zero-denominator
            // nodes stay whole
            if (division_by_syntactic_zero(e)) return {Number::integer(1), e};
            Term tn = term_split(e->kids[0]);
            if (tn.coeff.is_one()) return {Number::integer(1), e};
            ExprPtr unit_num = tn.core ? tn.core : make_const(Number::integer(1));
            return {tn.coeff, make_div(unit_num, e->kids[1])};
        }
        default:
            return {Number::integer(1), e};
    }
}

inline ExprPtr simplify_neg_node(const ExprPtr& a);
inline ExprPtr simplify_div_node(const ExprPtr& num, const ExprPtr& den);

// Quotient chains headed by a literal zero only arise around divisions by a
// syntactic zero; they have no value, and a sign on them cannot survive a
// print/parse cycle, so signs are dropped on them.
inline bool leading_zero_head(const ExprPtr& e) {
    const Expr* p = e.get();
    while (p->kind == ExprKind::Div || p->kind == ExprKind::Mul) p = p->kids[0].get();
    return p->kind == ExprKind::Const && p->value.is_zero();
}

inline ExprPtr neg_wrap(const ExprPtr& node) {
    return leading_zero_head(node) ? node : make_neg(node);
}

inline ExprPtr term_rebuild(const Number& coeff, const ExprPtr& core) {
    if (!core) return const_node(coeff);
    {
        // merge a sign or constant already sitting on the core
        Term t = term_split(core);
        if (t.core != core) return term_rebuild(num_mul(coeff, t.coeff), t.core);
    }
    if (coeff.is_zero()) return make_const(Number::integer(0));
    if (coeff.is_one()) return core;
    if (coeff.is_minus_one()) {
        if (core->kind == ExprKind::Add) return simplify_neg_node(core);
        return neg_wrap(core);
    }
    // coefficients on quotients live in the numerator
    if (core->kind == ExprKind::Div && !division_by_syntactic_zero(core))
        return simplify_div_node(term_rebuild(coeff, core->kids[0]), core->kids[1]);
    Number mag = coeff.negative() ? num_neg(coeff) : coeff;
    ExprVec kids;
    kids.push_back(make_const(mag));
    if (core->kind == ExprKind::Mul)
        kids.insert(kids.end(), core->kids.begin(), core->kids.end());
    else
        kids.push_back(core);
    ExprPtr node = make_mul(std::move(kids));
    return coeff.negative() ? make_neg(node) : node;
}

inline std::vector<Factor> factor_split(const ExprPtr& core) {
    std::vector<Factor> fs;
    if (!core) return fs;
    auto push = [&fs](const ExprPtr& f) {
        if (f->kind == ExprKind::Pow)
            fs.push_back({f->kids[0], f->exponent});
        else
            fs.push_back({f, 1});
    };
    if (core->kind == ExprKind::Mul)
        for (const auto& k : core->kids) push(k);
    else
        push(core);
    return fs;
}

inline ExprPtr simplify_pow_node(const ExprPtr& base, long long k);

// Sums in multiplicative positions are sign-normalized: leading term positive,
// the sign carried by the surrounding coefficient. Keeps the form confluent.
inline bool add_leading_negative(const ExprPtr& a) {
    return a->kind == ExprKind::Add && term_split(a->kids[0]).coeff.negative();
}

inline ExprPtr factors_rebuild(const Number& coeff, std::vector<Factor> fs) {
    std::sort(fs.begin(), fs.end(),
              [](const Factor& a, const Factor& b) { return compare(a.base, b.base) < 0; });
    ExprVec kids;
    if (!(coeff.is_one() || coeff.is_minus_one())) {
        Number mag = coeff.negative() ? num_neg(coeff) : coeff;
        kids.push_back(make_const(mag));
    }
    for (auto& f : fs) {
        if (f.exp == 0) continue;
        kids.push_back(f.exp == 1 ? f.base : simplify_pow_node(f.base, f.exp));
    }
    ExprPtr node;
    if (kids.empty())
        node = make_const(Number::integer(1));
    else if (kids.size() == 1)
        node = kids[0];
    else
        node = make_mul(std::move(kids));
    if (!coeff.negative()) return node;
    return node->kind == ExprKind::Add ? simplify_neg_node(node) : neg_wrap(node);
}

// children must already be simplified
inline ExprPtr simplify_add_node(const ExprVec& kids_in) {
    std::vector<Term> terms;
    Number acc = Number::integer(0);
    bool acc_used = false;

    auto absorb = [&](const ExprPtr& child, auto&& self) -> void {
        if (child->kind == ExprKind::Add) {
            for (const auto& k : child->kids) self(k, self);
            return;
        }
        Term t = term_split(child);
        if (!t.core) {
            acc = num_add(acc, t.coeff);
            acc_used = true;
            return;
        }
        for (auto& existing : terms) {
            if (equal(existing.core, t.core)) {
                existing.coeff = num_add(existing.coeff, t.coeff);
                return;
            }
        }
        terms.push_back(std::move(t));
    };
    for (const auto& k : kids_in) absorb(k, absorb);

    std::vector<Term> kept;
    for (auto& t : terms)
        if (!t.coeff.is_zero()) kept.push_back(std::move(t));
    std::sort(kept.begin(), kept.end(), [](const Term& a, const Term& b) {
        int c = compare(a.core, b.core);
        if (c != 0) return c < 0;
        return num_cmp(a.coeff, b.coeff) < 0;
    });

    ExprVec out;
    if (acc_used && !acc.is_zero()) out.push_back(const_node(acc));
    for (const auto& t : kept) out.push_back(term_rebuild(t.coeff, t.core));
    if (out.empty()) return make_const(Number::integer(0));
    if (out.size() == 1) return out[0];
    return make_add(std::move(out));
}


// children must already be simplified
inline ExprPtr simplify_mul_node(const ExprVec& kids_in) {
    Number coeff = Number::integer(1);
    std::vector<Factor> factors;
    ExprVec dens;

    auto absorb = [&](const ExprPtr& child, auto&& self) -> void {
        switch (child->kind) {
            case ExprKind::Const:
                coeff = num_mul(coeff, child->value);
                return;
            case ExprKind::Neg:
                coeff = num_neg(coeff);
                self(child->kids[0], self);
                return;
            case ExprKind::Mul:
                for (const auto& k : child->kids) self(k, self);
                return;
            case ExprKind::Div:
                if (division_by_syntactic_zero(child)) {
                    factors.push_back({child, 1});
                    return;
                }
                self(child->kids[0], self);
                dens.push_back(child->kids[1]);
                return;
            case ExprKind::Pow:
                factors.push_back({child->kids[0], child->exponent});
                return;
            default:
                if (add_leading_negative(child)) {
                    coeff = num_neg(coeff);
                    factors.push_back({simplify_neg_node(child), 1});
                } else {
                    factors.push_back({child, 1});
                }
                return;
        }
    };
    for (const auto& k : kids_in) absorb(k, absorb);

    if (!dens.empty()) {
        ExprPtr den = dens.size() == 1 ? dens[0] : simplify_mul_node(dens);
        // rebuild the numerator through the denominator-free path so that like
        // factors still merge
        ExprVec num_nodes;
        num_nodes.push_back(make_const(coeff));
        for (const auto& f : factors)
            num_nodes.push_back(f.exp == 1 ? f.base : make_pow(f.base, f.exp));
        return simplify_div_node(simplify_mul_node(num_nodes), den);
    }

    if (coeff.is_zero()) return make_const(Number::integer(0));

    // combine like bases
    std::vector<Factor> combined;
    for (auto& f : factors) {
        if (f.base->kind == ExprKind::Const) {  // stray constant base (raw Pow input)
            Number folded = num_pow(f.base->value, f.exp);
            if (!(f.base->value.is_zero() && f.exp < 0) && std::isfinite(folded.value())) {
                coeff = num_mul(coeff, folded);
                continue;
            }
        }
        bool merged = false;
        for (auto& g : combined) {
            if (equal(g.base, f.base)) {
                g.exp += f.exp;
                merged = true;
                break;
            }
        }
        if (!merged) combined.push_back(f);
    }
    std::vector<Factor> kept;
    for (auto& f : combined)
        if (f.exp != 0) kept.push_back(f);
    return factors_rebuild(coeff, std::move(kept));
}

// children must already be simplified
inline ExprPtr simplify_div_node(const ExprPtr& num_in, const ExprPtr& den_in) {
    ExprPtr num = num_in, den = den_in;
    // A syntactic zero denominator has no value anywhere; keep the node opaque
    // apart from normalizing the numerator's sign.
    if (den->kind == ExprKind::Const && den->value.is_zero()) {
        Term t = term_split(num);
        if (t.core && add_leading_negative(t.core)) {
            t.coeff = num_neg(t.coeff);
            t.core = simplify_neg_node(t.core);
        }
        if (t.coeff.negative())
            return neg_wrap(make_div(term_rebuild(num_neg(t.coeff), t.core), den));
        return make_div(term_rebuild(t.coeff, t.core), den);
    }

    // flatten nested fractions
    Term tn = term_split(num), td = term_split(den);
    ExprPtr ncore = tn.core, dcore = td.core;
    Number c = tn.coeff, dc = td.coeff;
    if (ncore && ncore->kind == ExprKind::Div && !division_by_syntactic_zero(ncore)) {
        dcore = dcore ? simplify_mul_node({dcore, ncore->kids[1]}) : ncore->kids[1];
        ncore = ncore->kids[0];
        Term t2 = term_split(ncore);
        c = num_mul(c, t2.coeff);
        ncore = t2.core;
        Term t3 = term_split(dcore);
        dc = num_mul(dc, t3.coeff);
        dcore = t3.core;
    }
    if (dcore && dcore->kind == ExprKind::Div && !division_by_syntactic_zero(dcore)) {
        ncore = ncore ? simplify_mul_node({ncore, dcore->kids[1]}) : dcore->kids[1];
        ExprPtr new_den = dcore->kids[0];
        Term t2 = term_split(ncore);
        c = num_mul(c, t2.coeff);
        ncore = t2.core;
        Term t3 = term_split(new_den);
        dc = num_mul(dc, t3.coeff);
        dcore = t3.core;
    }

    if (ncore && add_leading_negative(ncore)) {
        c = num_neg(c);
        ncore = simplify_neg_node(ncore);
    }
    if (dcore && add_leading_negative(dcore)) {
        dc = num_neg(dc);
        dcore = simplify_neg_node(dcore);
    }

    if (!dcore) {  // constant denominator
        if (dc.is_zero()) return make_div(num, den);  // undefined; leave for eval to report
        return term_rebuild(num_div(c, dc), ncore);
    }
    if (c.is_zero()) return make_const(Number::integer(0));
    Number q = num_div(c, dc);
    if (ncore && equal(ncore, dcore)) return const_node(q);
    ExprPtr body = make_div(term_rebuild(q.negative() ? num_neg(q) : q, ncore), dcore);
    return q.negative() ? neg_wrap(body) : body;
}

inline ExprPtr simplify_pow_node(const ExprPtr& base, long long k) {
    if (k == 0) return make_const(Number::integer(1));
    if (k == 1) return base;
    switch (base->kind) {
        case ExprKind::Const: {
            if (base->value.is_zero() && k < 0) break;  // 0^negative: leave for eval
            Number folded = num_pow(base->value, k);
            if (!std::isfinite(folded.value())) break;  // keep overflow symbolic
            return const_node(folded);
        }
        case ExprKind::Neg: {
            ExprPtr inner = simplify_pow_node(base->kids[0], k);
            return (k % 2 == 0) ? inner : simplify_neg_node(inner);
        }
        case ExprKind::Pow: {
            long long m;
            if (numdetail::mul_ok(base->exponent, k, &m)) return simplify_pow_node(base->kids[0], m);
            break;
        }
        case ExprKind::Mul: {
            ExprVec parts;
            for (const auto& f : base->kids) parts.push_back(simplify_pow_node(f, k));
            return simplify_mul_node(parts);
        }
        case ExprKind::Div: {
            if (division_by_syntactic_zero(base)) break;  // opaque
            if (k > 0)
                return simplify_div_node(simplify_pow_node(base->kids[0], k),
                                         simplify_pow_node(base->kids[1], k));
            return simplify_div_node(simplify_pow_node(base->kids[1], -k),
                                     simplify_pow_node(base->kids[0], -k));
        }
        case ExprKind::Add:
            if (add_leading_negative(base)) {
                ExprPtr inner = simplify_pow_node(simplify_neg_node(base), k);
                return (k % 2 == 0) ? inner : simplify_neg_node(inner);
            }
            break;
        default:
            break;
    }
    return make_pow(base, k);
}

inline ExprPtr simplify_neg_node(const ExprPtr& a) {
    if (a->kind == ExprKind::Add) {
        ExprVec kids;
        kids.reserve(a->kids.size());
        for (const auto& k : a->kids) {
            Term t = term_split(k);
            kids.push_back(term_rebuild(num_neg(t.coeff), t.core));
        }
        return make_add(std::move(kids));
    }
    Term t = term_split(a);
    return term_rebuild(num_neg(t.coeff), t.core);
}

inline ExprPtr simplify_func_node(FuncId f, const ExprPtr& arg) {
    if (arg->kind == ExprKind::Const && arg->value.exact) {
        const Number& v = arg->value;
        if (v.is_zero()) {
            switch (f) {
                case FuncId::Exp:
                case FuncId::Cos: return make_const(Number::integer(1));
                case FuncId::Sin:
                case FuncId::Tan:
                case FuncId::Sqrt: return make_const(Number::integer(0));
                case FuncId::Ln: break;  // domain edge; leave it
            }
        }
        if (v.is_one()) {
            if (f == FuncId::Ln) return make_const(Number::integer(0));
            if (f == FuncId::Sqrt) return make_const(Number::integer(1));
        }
    }
    return make_func(f, arg);
}

}  // namespace exprdetail

inline ExprPtr simplify(const ExprPtr& e) {
    using namespace exprdetail;
    switch (e->kind) {
        case ExprKind::Const:
            return const_node(e->value);
        case ExprKind::Var:
            return e;
        case ExprKind::Neg:
            return simplify_neg_node(simplify(e->kids[0]));
        case ExprKind::Add: {
            ExprVec kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) kids.push_back(simplify(k));
            return simplify_add_node(kids);
        }
        case ExprKind::Mul: {
            ExprVec kids;
            kids.reserve(e->kids.size());
            for (const auto& k : e->kids) kids.push_back(simplify(k));
            return simplify_mul_node(kids);
        }
        case ExprKind::Div:
            return simplify_div_node(simplify(e->kids[0]), simplify(e->kids[1]));
        case ExprKind::Pow:
            return simplify_pow_node(simplify(e->kids[0]), e->exponent);
        case ExprKind::Func:
            return simplify_func_node(e->func, simplify(e->kids[0]));
    }
    return e;
}

// ---------------------------------------------------------------------------
// expansion and common-factor extraction
// ---------------------------------------------------------------------------

namespace exprdetail {

inline ExprPtr expand_raw(const ExprPtr& e);

inline ExprVec term_list(const ExprPtr& e) {
    if (e->kind == ExprKind::Add) return e->kids;
    return {e};
}

inline ExprPtr expand_mul(const ExprVec& kids) {
    std::vector<ExprVec> lists;
    bool any_sum = false;
    for (const auto& k : kids) {
        lists.push_back(term_list(k));
        if (lists.back().size() > 1) any_sum = true;
    }
    if (!any_sum) return make_mul(kids);
    ExprVec combos{make_int(1)};
    for (const auto& lst : lists) {
        ExprVec next;
        next.reserve(combos.size() * lst.size());
        for (const auto& c : combos)
            for (const auto& t : lst) next.push_back(make_mul({c, t}));
        combos = std::move(next);
    }
    return make_add(std::move(combos));
}

inline ExprPtr expand_raw(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const:
        case ExprKind::Var:
            return e;
        case ExprKind::Neg:
            return make_neg(expand_raw(e->kids[0]));
        case ExprKind::Add: {
            ExprVec kids;
            for (const auto& k : e->kids) kids.push_back(expand_raw(k));
            return make_add(std::move(kids));
        }
        case ExprKind::Mul: {
            ExprVec kids;
            for (const auto& k : e->kids) kids.push_back(expand_raw(k));
            return expand_mul(kids);
        }
        case ExprKind::Div:
            return make_div(expand_raw(e->kids[0]), expand_raw(e->kids[1]));
        case ExprKind::Pow: {
            ExprPtr base = expand_raw(e->kids[0]);
            if (base->kind == ExprKind::Add && e->exponent >= 2 && e->exponent <= 6) {
                ExprVec reps(static_cast<std::size_t>(e->exponent), base);
                return expand_mul(reps);
            }
            return make_pow(base, e->exponent);
        }
        case ExprKind::Func:
            return make_func(e->func, expand_raw(e->kids[0]));
    }
    return e;
}

}  // namespace exprdetail

// Distribute products over sums (and small positive powers of sums), then
// simplify. Used where syntactic cancellation needs the flattened form.
inline ExprPtr expand(const ExprPtr& e) {
    return simplify(exprdetail::expand_raw(simplify(e)));
}

// Pull factors (and a shared sign) common to every additive term:
//   -x1 - x1*x2*exp(x2)  ->  -x1*(1 + x2*exp(x2))
// Returns the input unchanged when there is no common factor.
inline ExprPtr factor_common_terms(const ExprPtr& e_in) {
    using namespace exprdetail;
    ExprPtr e = simplify(e_in);
    if (e->kind != ExprKind::Add) return e;

    struct SplitTerm {
        Number coeff;
        std::vector<Factor> factors;
    };
    std::vector<SplitTerm> split;
    for (const auto& k : e->kids) {
        Term t = term_split(k);
        split.push_back({t.coeff, factor_split(t.core)});
        if (split.back().factors.empty()) return e;  // constant term: nothing common
    }

    std::vector<Factor> common = split[0].factors;
    for (std::size_t i = 1; i < split.size() && !common.empty(); ++i) {
        std::vector<Factor> next;
        for (const auto& c : common) {
            for (const auto& f : split[i].factors) {
                if (equal(c.base, f.base)) {
                    long long m = std::min(c.exp, f.exp);
                    if (m >= 1) next.push_back({c.base, m});
                    break;
                }
            }
        }
        common = std::move(next);
    }
    if (common.empty()) return e;

    bool all_negative = true;
    for (const auto& s : split)
        if (!s.coeff.negative()) all_negative = false;

    ExprVec quotients;
    for (const auto& s : split) {
        std::vector<Factor> rest;
        for (const auto& f : s.factors) {
            long long sub = 0;
            for (const auto& c : common)
                if (equal(c.base, f.base)) sub = c.exp;
            if (f.exp - sub != 0) rest.push_back({f.base, f.exp - sub});
        }
        Number coeff = all_negative ? num_neg(s.coeff) : s.coeff;
        ExprPtr core = rest.empty() ? nullptr : factors_rebuild(Number::integer(1), rest);
        quotients.push_back(term_rebuild(coeff, core));
    }
    ExprPtr inner = simplify(make_add(std::move(quotients)));
    ExprVec mul_kids;
    for (const auto& c : common)
        mul_kids.push_back(c.exp == 1 ? c.base : make_pow(c.base, c.exp));
    mul_kids.push_back(inner);
    ExprPtr out = simplify(make_mul(std::move(mul_kids)));
    return all_negative ? simplify(make_neg(out)) : out;
}

// ---------------------------------------------------------------------------
// calculus, substitution, evaluation
// ---------------------------------------------------------------------------

namespace exprdetail {

inline ExprPtr diff_raw(const ExprPtr& e, const std::string& var) {
    switch (e->kind) {
        case ExprKind::Const:
            return make_int(0);
        case ExprKind::Var:
            return make_int(e->name == var ? 1 : 0);
        case ExprKind::Neg:
            return make_neg(diff_raw(e->kids[0], var));
        case ExprKind::Add: {
            ExprVec kids;
            for (const auto& k : e->kids) kids.push_back(diff_raw(k, var));
            return make_add(std::move(kids));
        }
        case ExprKind::Mul: {
            ExprVec sum;
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                ExprVec prod;
                for (std::size_t j = 0; j < e->kids.size(); ++j)
                    prod.push_back(i == j ? diff_raw(e->kids[j], var) : e->kids[j]);
                sum.push_back(make_mul(std::move(prod)));
            }
            return make_add(std::move(sum));
        }
        case ExprKind::Div: {
            const ExprPtr& a = e->kids[0];
            const ExprPtr& b = e->kids[1];
            return make_div(make_sub(make_mul({diff_raw(a, var), b}), make_mul({a, diff_raw(b, var)})),
                            make_pow(b, 2));
        }
        case ExprKind::Pow: {
            ExprPtr db = diff_raw(e->kids[0], var);
            return make_mul({make_int(e->exponent), make_pow(e->kids[0], e->exponent - 1), db});
        }
        case ExprKind::Func: {
            const ExprPtr& a = e->kids[0];
            ExprPtr da = diff_raw(a, var);
            switch (e->func) {
                case FuncId::Exp: return make_mul({make_func(FuncId::Exp, a), da});
                case FuncId::Ln: return make_div(da, a);
                case FuncId::Sin: return make_mul({make_func(FuncId::Cos, a), da});
                case FuncId::Cos: return make_neg(make_mul({make_func(FuncId::Sin, a), da}));
                case FuncId::Tan: return make_div(da, make_pow(make_func(FuncId::Cos, a), 2));
                case FuncId::Sqrt:
                    return make_div(da, make_mul({make_int(2), make_func(FuncId::Sqrt, a)}));
            }
            return make_int(0);
        }
    }
    return make_int(0);
}

inline ExprPtr subst_raw(const ExprPtr& e, const std::map<std::string, ExprPtr>& bindings) {
    switch (e->kind) {
        case ExprKind::Const:
            return e;
        case ExprKind::Var: {
            auto it = bindings.find(e->name);
            return it == bindings.end() ? e : it->second;
        }
        default: {
            auto copy = std::make_shared<Expr>(*e);
            for (auto& k : copy->kids) k = subst_raw(k, bindings);
            return copy;
        }
    }
}

}  // namespace exprdetail

inline ExprPtr diff(const ExprPtr& e, const std::string& var) {
    return simplify(exprdetail::diff_raw(e, var));
}

inline ExprPtr substitute(const ExprPtr& e, const std::map<std::string, ExprPtr>& bindings) {
    return simplify(exprdetail::subst_raw(e, bindings));
}

using Point = std::map<std::string, double>;

inline std::string to_string(const ExprPtr& e);

inline double eval(const ExprPtr& e, const Point& p) {
    double r = 0.0;
    switch (e->kind) {
        case ExprKind::Const:
            r = e->value.value();
            break;
        case ExprKind::Var: {
            auto it = p.find(e->name);
            if (it == p.end()) throw UnboundSymbolError(e->name);
            r = it->second;
            break;
        }
        case ExprKind::Neg:
            r = -eval(e->kids[0], p);
            break;
        case ExprKind::Add:
            for (const auto& k : e->kids) r += eval(k, p);
            break;
        case ExprKind::Mul:
            r = 1.0;
            for (const auto& k : e->kids) r *= eval(k, p);
            break;
        case ExprKind::Div: {
            double den = eval(e->kids[1], p);
            if (den == 0.0) throw EvalDomainError("division by zero", to_string(e));
            r = eval(e->kids[0], p) / den;
            break;
        }
        case ExprKind::Pow: {
            double b = eval(e->kids[0], p);
            if (b == 0.0 && e->exponent < 0)
                throw EvalDomainError("zero raised to a negative power", to_string(e));
            r = std::pow(b, static_cast<double>(e->exponent));
            break;
        }
        case ExprKind::Func: {
            double a = eval(e->kids[0], p);
            switch (e->func) {
                case FuncId::Exp: r = std::exp(a); break;
                case FuncId::Ln:
                    if (a <= 0.0) throw EvalDomainError("ln of a non-positive value", to_string(e));
                    r = std::log(a);
                    break;
                case FuncId::Sin: r = std::sin(a); break;
                case FuncId::Cos: r = std::cos(a); break;
                case FuncId::Tan: r = std::tan(a); break;
                case FuncId::Sqrt:
                    if (a < 0.0) throw EvalDomainError("sqrt of a negative value", to_string(e));
                    r = std::sqrt(a);
                    break;
            }
            break;
        }
    }
    if (!std::isfinite(r)) throw EvalDomainError("non-finite value", to_string(e));
    return r;
}

inline void collect_free_vars(const ExprPtr& e, std::set<std::string>& out) {
    if (e->kind == ExprKind::Var) {
        out.insert(e->name);
        return;
    }
    for (const auto& k : e->kids) collect_free_vars(k, out);
}

inline std::set<std::string> free_vars(const ExprPtr& e) {
    std::set<std::string> s;
    collect_free_vars(e, s);
    return s;
}

inline bool contains_var(const ExprPtr& e, const std::string& name) {
    if (e->kind == ExprKind::Var) return e->name == name;
    for (const auto& k : e->kids)
        if (contains_var(k, name)) return true;
    return false;
}

inline ExprMat jacobian(const ExprVec& v, const std::vector<std::string>& vars) {
    ExprMat m(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        m[i].reserve(vars.size());
        for (const auto& x : vars) m[i].push_back(diff(v[i], x));
    }
    return m;
}

// ---------------------------------------------------------------------------
// printing (re-parseable with the module grammar)
// ---------------------------------------------------------------------------

namespace exprdetail {

inline int print_prec(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Add: return 1;
        case ExprKind::Mul:
        case ExprKind::Div:
        case ExprKind::Neg: return 2;
        case ExprKind::Pow: return 3;
        case ExprKind::Func:
        case ExprKind::Var: return 4;
        case ExprKind::Const:
            if (e->value.negative()) return 2;
            if (e->value.exact && e->value.den != 1) return 2;
            return 4;
    }
    return 4;
}

inline std::string print(const ExprPtr& e, int min_prec);

inline std::string print_raw(const ExprPtr& e) {
    switch (e->kind) {
        case ExprKind::Const: {
            const Number& v = e->value;
            if (!v.exact) return format_double(v.approx);
            if (v.den == 1) return std::to_string(v.num);
            return std::to_string(v.num) + "/" + std::to_string(v.den);
        }
        case ExprKind::Var:
            return e->name;
        case ExprKind::Neg: {
            const ExprPtr& k = e->kids[0];
            if (k->kind == ExprKind::Neg) return "-(" + print(k, 0) + ")";
            return "-" + print(k, 2);
        }
        case ExprKind::Add: {
            std::string s;
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                const ExprPtr& k = e->kids[i];
                bool neg = k->kind == ExprKind::Neg;
                bool negconst = k->kind == ExprKind::Const && k->value.negative();
                std::string body;
                if (neg)
                    body = print(k->kids[0], 2);
                else if (negconst)
                    body = print(make_const(num_neg(k->value)), 2);
                else
                    body = print(k, 2);
                if (i == 0)
                    s = (neg || negconst) ? "-" + body : body;
                else
                    s += (neg || negconst) ? " - " + body : " + " + body;
            }
            return s;
        }
        case ExprKind::Mul: {
            std::string s;
            for (std::size_t i = 0; i < e->kids.size(); ++i) {
                if (i) s += "*";
                s += print(e->kids[i], i == 0 ? 2 : 3);
            }
            return s;
        }
        case ExprKind::Div:
            return print(e->kids[0], 2) + "/" + print(e->kids[1], 3);
        case ExprKind::Pow:
            return print(e->kids[0], 4) + "^" + std::to_string(e->exponent);
        case ExprKind::Func:
            return std::string(func_name(e->func)) + "(" + print(e->kids[0], 0) + ")";
    }
    return "?";
}

inline std::string print(const ExprPtr& e, int min_prec) {
    std::string s = print_raw(e);
    if (print_prec(e) < min_prec) return "(" + s + ")";
    return s;
}

}  // namespace exprdetail

inline std::string to_string(const ExprPtr& e) { return exprdetail::print(e, 0); }

inline std::string to_string(const ExprVec& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += to_string(v[i]);
    }
    return s + "]";
}

// ---------------------------------------------------------------------------
// zero testing
// ---------------------------------------------------------------------------

struct SampleBox {
    std::map<std::string, std::pair<double, double>> ranges;
    double lo = -2.0;
    double hi = 2.0;

    std::pair<double, double> range(const std::string& name) const {
        auto it = ranges.find(name);
        return it == ranges.end() ? std::make_pair(lo, hi) : it->second;
    }
    void set(const std::string& name, double l, double h) { ranges[name] = {l, h}; }
};

enum class ZeroKind { SymbolicZero, NumericZero, NonZero };

struct ZeroVerdict {
    ZeroKind kind = ZeroKind::NonZero;
    Point witness;
    double witness_value = 0.0;
    int samples = 0;

    bool zero() const { return kind != ZeroKind::NonZero; }
    const char* name() const {
        switch (kind) {
            case ZeroKind::SymbolicZero: return "symbolic_zero";
            case ZeroKind::NumericZero: return "numeric_zero";
            case ZeroKind::NonZero: return "nonzero";
        }
        return "?";
    }
};

inline ZeroVerdict is_zero(const ExprPtr& e, const SampleBox& box = {}, int samples = 20,
                           double tol = 1e-9) {
    ExprPtr s = simplify(e);
    {
        const ExprPtr* c = &s;
        if ((*c)->kind == ExprKind::Neg) c = &(*c)->kids[0];
        if ((*c)->kind == ExprKind::Const) {
            if ((*c)->value.is_zero()) return {ZeroKind::SymbolicZero, {}, 0.0, 0};
            return {ZeroKind::NonZero, {}, (s->kind == ExprKind::Neg ? -1 : 1) * (*c)->value.value(), 0};
        }
    }
    const std::set<std::string> fv = free_vars(s);
    const std::vector<std::string> vars(fv.begin(), fv.end());
    WeylSequence seq(static_cast<int>(vars.size()));
    int success = 0, attempts = 0;
    const int cap = samples * 10;
    double worst = 0.0;
    Point worst_point;
    while (success < samples && attempts < cap) {
        ++attempts;
        const auto& u = seq.next();
        Point p;
        for (std::size_t i = 0; i < vars.size(); ++i) {
            auto [lo, hi] = box.range(vars[i]);
            p[vars[i]] = lo + u[i] * (hi - lo);
        }
        double v;
        try {
            v = eval(s, p);
        } catch (const NumericalError&) {
            continue;  // resample around domain holes
        }
        ++success;
        if (std::fabs(v) > worst) {
            worst = std::fabs(v);
            worst_point = p;
        }
    }
    if (success < samples)
        throw ZeroTestError("zero test: more than 90% of sample points hit evaluation errors for '" +
                            to_string(s) + "'");
    ZeroVerdict v;
    v.samples = samples;
    if (worst <= tol) {
        v.kind = ZeroKind::NumericZero;
        v.witness_value = worst;
    } else {
        v.kind = ZeroKind::NonZero;
        v.witness = worst_point;
        v.witness_value = worst;
    }
    return v;
}

}  // namespace fibrelin
