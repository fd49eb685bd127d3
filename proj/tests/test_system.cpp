#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace fibrelin;
using testsupport::fixture_path;
using testsupport::read_file;

TEST_CASE("parse_system reads the bundled example") {
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    CHECK(sys.name == "isidori");
    CHECK(sys.n() == 3);
    CHECK(sys.states == std::vector<std::string>{"x1", "x2", "x3"});
    CHECK(sys.input == "u");
    REQUIRE(sys.complement.has_value());
    CHECK(sys.complement->size() == 1);
    CHECK(to_string((*sys.complement)[0]) == "1 + x1 - exp(x2)");
    CHECK(sys.operating_point.at("x1") == 0.0);
    CHECK(equal(sys.f[0], simplify(make_neg(make_var("x1")))));
    CHECK(to_string(sys.h) == "x3");
}

TEST_CASE("parse_system rejects malformed files") {
    // wrong f dimension
    CHECK_THROWS_AS(parse_system("system \"s\"\nstates x1 x2 x3\ninput u\n"
                                 "f = [x1, x2]\ng = [0, 0, 1]\nh = x1\n"),
                    DimensionError);
    // input symbol used inside f
    CHECK_THROWS_AS(parse_system("system \"s\"\nstates x1 x2\ninput u\n"
                                 "f = [x2, u]\ng = [0, 1]\nh = x1\n"),
                    ParseError);
    // undeclared symbol, with the line number
    try {
        parse_system("system \"s\"\nstates x1 x2\ninput u\nf = [x2, y]\ng = [0, 1]\nh = x1\n");
        FAIL("expected undeclared symbol");
    } catch (const ParseError& e) {
        CHECK(e.line == 4);
        CHECK(std::string(e.what()).find("y") != std::string::npos);
    }
    // missing pieces
    CHECK_THROWS_AS(parse_system("system \"s\"\nstates x1 x2\ninput u\nf = [x2, 0]\nh = x1\n"),
                    ParseError);
    // expressions before declarations
    CHECK_THROWS_AS(parse_system("system \"s\"\nf = [x2, 0]\nstates x1 x2\ninput u\n"),
                    ParseError);
    // fewer than two states
    CHECK_THROWS_AS(parse_system("system \"s\"\nstates x1\ninput u\nf = [0]\ng = [1]\nh = x1\n"),
                    DimensionError);
    // bad point
    CHECK_THROWS_AS(parse_system("system \"s\"\nstates x1 x2\ninput u\nf = [x2, 0]\ng = [0, 1]\n"
                                 "h = x1\npoint = [1, oops]\n"),
                    ParseError);
}

TEST_CASE("omitting complement leaves it unset") {
    SystemDef sys = parse_system("system \"s\"\nstates x1 x2\ninput u\n"
                                 "f = [x2, 0]\ng = [0, 1]\nh = x1\n");
    CHECK_FALSE(sys.complement.has_value());
}

TEST_CASE("serialize then reparse is structurally identical") {
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    SystemDef again = parse_system(serialize(sys));
    CHECK(again.name == sys.name);
    CHECK(again.states == sys.states);
    for (int i = 0; i < sys.n(); ++i) {
        CHECK(equal(again.f[i], sys.f[i]));
        CHECK(equal(again.g[i], sys.g[i]));
    }
    CHECK(equal(again.h, sys.h));
    REQUIRE(again.complement.has_value());
    CHECK(equal((*again.complement)[0], (*sys.complement)[0]));
    CHECK(again.operating_point == sys.operating_point);
}

TEST_CASE("total_dynamics") {
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    ExprVec F = total_dynamics(sys);
    CHECK(to_string(F[1]) == "u + x1*x2");
    CHECK(equal(F[2], make_var("x2")));  // g3 = 0

    SystemDef nog = parse_system("system \"s\"\nstates x1 x2\ninput u\n"
                                 "f = [x2, x1]\ng = [0, 0]\nh = x1\n");
    ExprVec F2 = total_dynamics(nog);
    CHECK(equal(F2[0], nog.f[0]));
    CHECK(equal(F2[1], nog.f[1]));
}

TEST_CASE("total_dynamics is affine in the input") {
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    ExprVec F = total_dynamics(sys);
    Rng rng(11);
    for (int k = 0; k < 30; ++k) {
        Vec x = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        double u = rng.uniform(-1, 1), du = 0.5;
        for (const auto& Fi : F) {
            double lo = eval(Fi, sys.bind_full(x, u - du));
            double mid = eval(Fi, sys.bind_full(x, u));
            double hi = eval(Fi, sys.bind_full(x, u + du));
            CHECK(std::fabs(hi - 2.0 * mid + lo) <= 1e-12);
        }
    }
}

TEST_CASE("is_projectable accepts the lifted field at fixed v") {
    // closed-form lifted field with v frozen at 0.7: (exp(x2) v, v, x2)
    SymbolTable syms = SymbolTable::of({"x1", "x2", "x3"});
    ExprVec X = {simplify(parse_expr("0.7*exp(x2)", syms)), simplify(parse_expr("0.7", syms)),
                 simplify(parse_expr("x2", syms))};
    ExprVec phi = {make_var("x3"), make_var("x2")};
    ProjectabilityReport rep = is_projectable(X, phi, {"x1", "x2", "x3"});
    CHECK(rep.projectable);
    CHECK(rep.pairs_checked > 0);
    CHECK(rep.worst_mismatch <= 1e-7);
}

TEST_CASE("is_projectable sees the zero-dynamics field as vertical") {
    SymbolTable syms = SymbolTable::of({"x1", "x2", "x3"});
    ExprVec X = {simplify(parse_expr("-x1*(1 + x2*exp(x2))", syms)), make_int(0), make_int(0)};
    ExprVec phi = {make_var("x3"), make_var("x2")};
    ProjectabilityReport rep = is_projectable(X, phi, {"x1", "x2", "x3"});
    CHECK(rep.projectable);
    // the projection is identically zero
    ExprMat tphi = jacobian(phi, {"x1", "x2", "x3"});
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        Point p{{"x1", rng.uniform(-2, 2)}, {"x2", rng.uniform(-2, 2)}, {"x3", rng.uniform(-2, 2)}};
        for (std::size_t i = 0; i < phi.size(); ++i) {
            double s = 0.0;
            for (int j = 0; j < 3; ++j) s += eval(tphi[i][j], p) * eval(X[j], p);
            CHECK(std::fabs(s) <= 1e-12);
        }
    }
}

TEST_CASE("is_projectable handles the control system over the extended base") {
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    ExprVec F = total_dynamics(sys);
    ExprVec phi = {make_var("x3"), make_var("x2")};
    // fibres of (Phi, Psi) in (x, u) space: TPhi.F is a function of (z, v) only
    SymbolTable syms = sys.full_symbols();
    ExprVec fibre_map = phi;
    fibre_map.push_back(simplify(parse_expr("x1*x2 + u", syms)));
    ProjectabilityOptions opt;
    opt.fibre_map = fibre_map;
    ProjectabilityReport rep = is_projectable(F, phi, sys.states, {sys.input}, opt);
    CHECK(rep.projectable);
    CHECK(rep.pairs_checked > 0);
}

TEST_CASE("is_projectable flags a non-projectable field") {
    // the raw drift is not projectable through (x3, x2): TPhi.f = (x2, x1 x2)
    // varies with x1 along a fibre
    SystemDef sys = parse_system(read_file(fixture_path("isidori.fl")));
    ExprVec phi = {make_var("x3"), make_var("x2")};
    ProjectabilityReport rep = is_projectable(sys.f, phi, sys.states);
    CHECK_FALSE(rep.projectable);
    CHECK(rep.worst_mismatch > 1e-7);
    CHECK_FALSE(rep.witness_a.empty());
}

TEST_CASE("is_projectable reports when fibres cannot be sampled") {
    // a full-rank square map has point fibres: no distinct pairs exist
    ExprVec X = {make_int(1), make_int(1)};
    ExprVec phi = {make_var("x1"), make_var("x2")};
    CHECK_THROWS_AS(is_projectable(X, phi, {"x1", "x2"}), FibreSamplingError);
}
