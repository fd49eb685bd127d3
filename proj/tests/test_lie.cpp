#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace fibrelin;
using testsupport::fixture_path;
using testsupport::read_file;

namespace {
SystemDef example() { return parse_system(read_file(fixture_path("isidori.fl"))); }

ExprPtr sp(const std::string& s, const SystemDef& sys) {
    return simplify(parse_expr(s, sys.state_symbols()));
}
}  // namespace

TEST_CASE("lie_derivative basics") {
    SystemDef sys = example();
    CHECK(equal(lie_derivative(sys.f, sys.h, sys.states), make_var("x2")));
    CHECK(equal(lie_derivative(sys.f, make_int(5), sys.states), make_int(0)));
    CHECK(equal(lie_derivative(sys.g, sys.h, sys.states), make_int(0)));
}

TEST_CASE("iterated_lie") {
    SystemDef sys = example();
    CHECK(equal(iterated_lie(sys.f, sys.h, 0, sys.states), simplify(sys.h)));
    CHECK(equal(iterated_lie(sys.f, sys.h, 2, sys.states), sp("x1*x2", sys)));
    // it keeps going past the relative degree; L_f^3 h = x1^2 x2 - x1 x2
    ExprPtr lf3 = iterated_lie(sys.f, sys.h, 3, sys.states);
    CHECK(equal(lf3, sp("x1^2*x2 - x1*x2", sys)));
    // cross-check one level against the finite-difference oracle for
    // directional derivatives: L_f w (x) ~ (w(x + s f(x)) - w(x - s f(x))) / 2s
    ExprPtr lf2 = iterated_lie(sys.f, sys.h, 2, sys.states);
    Rng rng(21);
    for (int k = 0; k < 20; ++k) {
        Vec x = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Point p = sys.bind_states(x);
        Vec fx(3);
        for (int i = 0; i < 3; ++i) fx[i] = eval(sys.f[i], p);
        const double s = 1e-6;
        Vec xp = vec_add(x, vec_scale(s, fx)), xm = vec_sub(x, vec_scale(s, fx));
        double fd = (eval(lf2, sys.bind_states(xp)) - eval(lf2, sys.bind_states(xm))) / (2 * s);
        CHECK(testsupport::rel_err(eval(lf3, p), fd) <= 1e-6);
    }
}

TEST_CASE("zero verdicts on the mixed derivatives") {
    SystemDef sys = example();
    // L_g h vanishes syntactically; L_g L_f h is identically 1
    CHECK(is_zero(lie_derivative(sys.g, sys.h, sys.states)).kind == ZeroKind::SymbolicZero);
    ExprPtr lfh = lie_derivative(sys.f, sys.h, sys.states);
    ZeroVerdict v = is_zero(lie_derivative(sys.g, lfh, sys.states));
    REQUIRE(v.kind == ZeroKind::NonZero);
    CHECK(std::fabs(v.witness_value) == Catch::Approx(1.0));
}

TEST_CASE("relative degree of the example") {
    SystemDef sys = example();
    RelativeDegreeResult rd = relative_degree(sys, sys.operating_point);
    CHECK(rd.r == 2);
    CHECK(equal(rd.beta, make_int(1)));
    CHECK(equal(rd.alpha, sp("x1*x2", sys)));
    REQUIRE(rd.certificates.size() == 1);
    CHECK(rd.certificates[0].kind == ZeroKind::SymbolicZero);
    CHECK(rd.beta_at_point == 1.0);
}

TEST_CASE("relative degree corner cases") {
    // chain of integrators: r = n
    SystemDef di = parse_system(read_file(fixture_path("double_integrator.fl")));
    RelativeDegreeResult rd = relative_degree(di, di.operating_point);
    CHECK(rd.r == 2);
    CHECK(equal(rd.beta, make_int(1)));

    // direct feedthrough of the first state: r = 1
    SystemDef r1 = parse_system("system \"r1\"\nstates x1 x2\ninput u\n"
                                "f = [x2, x1*x1]\ng = [1, 0]\nh = x1\n");
    CHECK(relative_degree(r1, r1.operating_point).r == 1);
    CHECK(relative_degree(r1, r1.operating_point).certificates.empty());

    // the output never sees the input
    SystemDef none = parse_system("system \"none\"\nstates x1 x2\ninput u\n"
                                  "f = [0, 0]\ng = [0, 1]\nh = x1\n");
    CHECK_THROWS_AS(relative_degree(none, none.operating_point), NoRelativeDegreeError);

    // nonzero away from the point but zero at it
    SystemDef degen = parse_system("system \"degen\"\nstates x1 x2\ninput u\n"
                                   "f = [x2, 0]\ng = [x1, 0]\nh = x1\n");
    CHECK_THROWS_AS(relative_degree(degen, degen.operating_point),
                    DegenerateRelativeDegreeError);
}

TEST_CASE("lie_derivative is linear and satisfies the Leibniz rule") {
    SystemDef sys = example();
    ExprPtr h1 = sp("x1*exp(x2) + x3", sys);
    ExprPtr h2 = sp("x2^2 - x3*x1", sys);
    ExprPtr sum = simplify(make_add({make_mul({make_real(1.7), h1}), h2}));
    ExprPtr lsum = lie_derivative(sys.f, sum, sys.states);
    ExprPtr l1 = lie_derivative(sys.f, h1, sys.states);
    ExprPtr l2 = lie_derivative(sys.f, h2, sys.states);
    ExprPtr prod = simplify(make_mul({h1, h2}));
    ExprPtr lprod = lie_derivative(sys.f, prod, sys.states);

    Rng rng(31);
    for (int k = 0; k < 25; ++k) {
        Point p = sys.bind_states({rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)});
        double lin = eval(lsum, p) - (1.7 * eval(l1, p) + eval(l2, p));
        CHECK(std::fabs(lin) <= 1e-12 * std::max(1.0, std::fabs(eval(lsum, p))));
        double leib = eval(lprod, p) - (eval(h1, p) * eval(l2, p) + eval(h2, p) * eval(l1, p));
        CHECK(testsupport::rel_err(eval(lprod, p), eval(lprod, p) - leib) <= 1e-9);
    }
}

TEST_CASE("certified zero levels stay small near the operating point") {
    SystemDef sys = example();
    RelativeDegreeResult rd = relative_degree(sys, sys.operating_point);
    // for k <= r-2 the mixed derivatives vanish at sampled points
    ExprPtr w = lie_derivative(sys.g, simplify(sys.h), sys.states);
    Rng rng(41);
    for (int k = 0; k < 20; ++k) {
        Point p = sys.bind_states(
            {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)});
        CHECK(std::fabs(eval(w, p)) <= 1e-9);
    }
    CHECK(rd.r == 2);
}
