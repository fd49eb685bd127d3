#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "test_support.hpp"

using namespace fibrelin;
using testsupport::fixture_path;
using testsupport::read_file;

namespace {
SystemDef example() { return parse_system(read_file(fixture_path("isidori.fl"))); }

auto decay_field() {
    return [](const Vec& x, double, double) { return Vec{-x[0]}; };
}
}  // namespace

TEST_CASE("rk4 integrates a scalar decay accurately") {
    Trajectory t = integrate(decay_field(), {1.0}, constant_signal(0.0), 1.0, 1e-3);
    CHECK(t.back_state()[0] == Catch::Approx(std::exp(-1.0)).margin(1e-9));
    CHECK(t.size() == 1001);
    CHECK(t.times.back() == Catch::Approx(1.0));

    auto still = [](const Vec& x, double, double) { return Vec(x.size(), 0.0); };
    Trajectory c = integrate(still, {0.4, -0.2}, constant_signal(0.0), 1.0, 0.01);
    for (const auto& x : c.states) {
        CHECK(x[0] == 0.4);
        CHECK(x[1] == -0.2);
    }
}

TEST_CASE("halving the step shrinks the error by about 16") {
    auto err_at = [&](double dt) {
        Trajectory t = integrate(decay_field(), {1.0}, constant_signal(0.0), 1.0, dt);
        return std::fabs(t.back_state()[0] - std::exp(-1.0));
    };
    double ratio = err_at(0.02) / err_at(0.01);
    CHECK(ratio >= 14.0);
    CHECK(ratio <= 18.0);
}

TEST_CASE("integration preconditions and blow-ups") {
    CHECK_THROWS_AS(integrate(decay_field(), {1.0}, constant_signal(0.0), 1.0, 0.0),
                    PreconditionError);
    CHECK_THROWS_AS(integrate(decay_field(), {1.0}, constant_signal(0.0), 0.5, 1.0),
                    PreconditionError);

    auto explosive = [](const Vec& x, double, double) { return Vec{x[0] * x[0]}; };
    try {
        integrate(explosive, {2.0}, constant_signal(0.0), 1.0, 1e-3);
        FAIL("expected blow-up");
    } catch (const NonFiniteError& e) {
        CHECK(e.time > 0.0);
        CHECK(e.time < 1.0);
    }
}

TEST_CASE("input signals") {
    InputSignal s = parse_input_signal("sin(t)");
    CHECK(s(0.0) == 0.0);
    CHECK(s(1.0) == Catch::Approx(std::sin(1.0)));
    CHECK(parse_input_signal("0.5")(42.0) == 0.5);
    CHECK(constant_signal(-1.25)(3.0) == -1.25);
    CHECK_THROWS_AS(parse_input_signal("sin(x)"), ParseError);
}

TEST_CASE("projection commutes along lifted trajectories") {
    SystemDef sys = example();
    NormalForm nf = build_normal_form(sys);

    ProjectionReport rep =
        verify_projection(sys, nf, {0.5, 0.2, -0.1}, parse_input_signal("sin(t)"), 1.0, 1e-3);
    CHECK(rep.max_deviation <= 1e-6);

    // the recovered input solves Psi(x, u) = v
    for (std::size_t k = 0; k < rep.upstairs.size(); k += 100) {
        Point p = sys.bind_states(rep.upstairs.states[k]);
        double v = std::sin(rep.upstairs.times[k]);
        CHECK(nf.psi(p, rep.upstairs.inputs[k]) == Catch::Approx(v).margin(1e-12));
    }

    // v = 0 from a point on the zero fibre: everything stays at zero
    ProjectionReport zero =
        verify_projection(sys, nf, {0.7, 0.0, 0.0}, constant_signal(0.0), 1.0, 1e-3);
    CHECK(zero.max_deviation <= 1e-9);
    for (const auto& z : zero.quotient.states) CHECK(norm_inf(z) <= 1e-12);
    for (const auto& x : zero.upstairs.states)
        CHECK(norm_inf(nf.eval_phi(sys.bind_states(x))) <= 1e-9);

    // the original closed-loop system satisfies the same commutation
    ProjectionReport full = verify_projection(sys, nf, {0.5, 0.2, -0.1},
                                              parse_input_signal("sin(t)"), 1.0, 1e-3,
                                              ProjectionMode::FullSystem);
    CHECK(full.max_deviation <= 1e-6);
}

TEST_CASE("lift_curve") {
    SystemDef sys = example();
    NormalForm nf = build_normal_form(sys);

    // constant base curve lifts to a constant curve
    Trajectory flat;
    for (int k = 0; k <= 100; ++k) {
        flat.times.push_back(0.01 * k);
        flat.states.push_back({-0.1, 0.2});
        flat.inputs.push_back(0.0);
    }
    Vec x0 = {0.3, 0.2, -0.1};  // Phi(x0) = (x3, x2) = (-0.1, 0.2)
    Trajectory lifted = lift_curve(nf, flat, x0);
    for (const auto& x : lifted.states) CHECK(norm_inf(vec_sub(x, x0)) <= 1e-9);

    // lifting the quotient trajectory reproduces the lifted-field trajectory
    ProjectionReport rep =
        verify_projection(sys, nf, {0.5, 0.2, -0.1}, parse_input_signal("sin(t)"), 1.0, 1e-3);
    Trajectory relift = lift_curve(nf, rep.quotient, {0.5, 0.2, -0.1});
    double worst = 0.0;
    for (std::size_t k = 0; k < relift.size(); ++k)
        worst = std::max(worst, norm_inf(vec_sub(relift.states[k], rep.upstairs.states[k])));
    CHECK(worst <= 1e-5);

    // and its projection reproduces the base curve
    double proj_worst = 0.0;
    for (std::size_t k = 0; k < relift.size(); ++k) {
        Vec z = nf.eval_phi(sys.bind_states(relift.states[k]));
        proj_worst = std::max(proj_worst, norm_inf(vec_sub(z, rep.quotient.states[k])));
    }
    CHECK(proj_worst <= 1e-6);

    // mismatched start point is rejected
    CHECK_THROWS_AS(lift_curve(nf, rep.quotient, {0.5, 0.9, -0.1}), PreconditionError);
}

TEST_CASE("integrating the vertical field leaves Phi constant") {
    SystemDef sys = example();
    NormalForm nf = build_normal_form(sys);
    Rng rng(55);
    for (int k = 0; k < 10; ++k) {
        Vec x0 = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
        Trajectory t = integrate(zero_field(sys, nf), x0, constant_signal(0.0), 1.0, 1e-3);
        Vec z0 = nf.eval_phi(sys.bind_states(x0));
        double worst = 0.0;
        for (const auto& x : t.states)
            worst = std::max(worst, norm_inf(vec_sub(nf.eval_phi(sys.bind_states(x)), z0)));
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("rk4 time reversal on a linear field") {
    LinearQuotient q = quotient_linear(3);
    auto fwd = [&](const Vec& z, double v, double) { return quotient_rhs(q, z, v); };
    auto bwd = [&](const Vec& z, double v, double) {
        Vec d = quotient_rhs(q, z, v);
        for (double& c : d) c = -c;
        return d;
    };
    Rng rng(66);
    for (int k = 0; k < 5; ++k) {
        Vec z0 = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        Trajectory f = integrate(fwd, z0, constant_signal(0.3), 1.0, 1e-3);
        Trajectory b = integrate(bwd, f.back_state(), constant_signal(0.3), 1.0, 1e-3);
        CHECK(norm_inf(vec_sub(b.back_state(), z0)) <= 1e-8);
    }

    // and on a field with a full spectrum, where the composed maps only cancel
    // to truncation order
    auto decay_fwd = [](const Vec& x, double, double) { return Vec{-x[0], -2.0 * x[1]}; };
    auto decay_bwd = [](const Vec& x, double, double) { return Vec{x[0], 2.0 * x[1]}; };
    Vec x0 = {1.3, -0.4};
    Trajectory f2 = integrate(decay_fwd, x0, constant_signal(0.0), 1.0, 1e-3);
    Trajectory b2 = integrate(decay_bwd, f2.back_state(), constant_signal(0.0), 1.0, 1e-3);
    CHECK(norm_inf(vec_sub(b2.back_state(), x0)) <= 1e-8);
}

TEST_CASE("csv round trip at full precision") {
    Trajectory t;
    Rng rng(77);
    for (int k = 0; k <= 10; ++k) {
        t.times.push_back(k * 0.1);
        t.states.push_back({rng.uniform(-1, 1) / 3.0, rng.uniform(-1, 1) * 1e-7});
        t.inputs.push_back(rng.uniform(-1, 1));
    }
    std::ostringstream out;
    write_csv(out, t, {"x1", "x2"}, "u");
    std::string text = out.str();
    CHECK(text.substr(0, text.find('\n')) == "t,x1,x2,u");

    std::istringstream in(text);
    auto [names, back] = read_csv(in);
    CHECK(names == std::vector<std::string>{"x1", "x2"});
    REQUIRE(back.size() == t.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(back.times[k] == t.times[k]);
        CHECK(back.states[k][0] == t.states[k][0]);
        CHECK(back.states[k][1] == t.states[k][1]);
        CHECK(back.inputs[k] == t.inputs[k]);
    }

    std::istringstream bad("a,b\n1,2\n");
    CHECK_THROWS_AS(read_csv(bad), InputError);
    std::istringstream short_row("t,x1,u\n1,2\n");
    CHECK_THROWS_AS(read_csv(short_row), InputError);
}
