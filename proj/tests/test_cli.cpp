#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "test_support.hpp"

using namespace fibrelin;
using testsupport::fixture_path;
using testsupport::run_command;

namespace {

std::string cli() { return std::string(FIBRELIN_CLI_BIN); }

std::string write_temp(const std::string& name, const std::string& content) {
    std::string path = "/tmp/fibrelin_cli_" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("analyze reports the golden pipeline results") {
    auto res = run_command(cli() + " analyze " + fixture_path("isidori.fl") + " --json");
    REQUIRE(res.exit_code == 0);
    json j = json::parse(res.out);
    CHECK(j["kind"] == "analysis");
    CHECK(j["r"] == 2);
    CHECK(j["psi"] == "u + x1*x2");
    CHECK(j["phi"] == json::array({"x3", "x2"}));
    CHECK(j["zero_dynamics"]["symbolic"] ==
          json::array({"-x1*(1 + x2*exp(x2))", "0", "0"}));
    CHECK(j["zero_dynamics"]["fibre_restricted"] == json::array({"-x1"}));
    CHECK(j["zero_dynamics"]["depends_on_input"] == false);
    CHECK(j["all_passed"] == true);

    std::string why;
    CHECK(testsupport::validate_report(j, why));
    INFO(why);

    // the human-readable variant mentions the same feedback law
    auto text = run_command(cli() + " analyze " + fixture_path("isidori.fl"));
    CHECK(text.exit_code == 0);
    CHECK(text.out.find("u + x1*x2") != std::string::npos);
}

TEST_CASE("analyze honours --point and reports the determinant there") {
    auto res =
        run_command(cli() + " analyze " + fixture_path("isidori.fl") + " --point 0,0,0 --json");
    REQUIRE(res.exit_code == 0);
    json j = json::parse(res.out);
    CHECK(j["r"] == 2);
    CHECK(j["det_at_point"].get<double>() == Catch::Approx(-1.0));
}

TEST_CASE("malformed input exits 2 with a structured error") {
    std::string bad = write_temp("bad.fl",
                                 "system \"broken\"\nstates x1 x2 x3\ninput u\n"
                                 "f = [x1, x2]\ng = [0, 0, 1]\nh = x3\n");
    auto res = run_command(cli() + " analyze " + bad);
    CHECK(res.exit_code == 2);
    json j = json::parse(res.out);
    CHECK(j["kind"] == "error");
    CHECK(j["exit_code"] == 2);
    std::string why;
    CHECK(testsupport::validate_report(j, why));

    // a parse error carries the line number
    std::string badline = write_temp("badline.fl",
                                     "system \"broken\"\nstates x1 x2\ninput u\n"
                                     "f = [x2, 0]\ng = [0, 1]\nh = x1 +\n");
    auto res2 = run_command(cli() + " analyze " + badline);
    CHECK(res2.exit_code == 2);
    json j2 = json::parse(res2.out);
    CHECK(j2["error"]["line"] == 6);

    std::remove(bad.c_str());
    std::remove(badline.c_str());
}

TEST_CASE("numerical failures exit 3") {
    // L_g h = x1 vanishes at the origin but not identically: degenerate
    std::string degen = write_temp("degen.fl",
                                   "system \"degen\"\nstates x1 x2\ninput u\n"
                                   "f = [x2, 0]\ng = [x1, 0]\nh = x1\n");
    auto res = run_command(cli() + " analyze " + degen);
    CHECK(res.exit_code == 3);
    json j = json::parse(res.out);
    CHECK(j["kind"] == "error");
    std::remove(degen.c_str());
}

TEST_CASE("verify runs the suites and is byte-stable") {
    std::string cmd = cli() + " verify " + fixture_path("isidori.fl") +
                      " --trials 60 --seed 42 --json";
    auto a = run_command(cmd);
    REQUIRE(a.exit_code == 0);
    auto b = run_command(cmd);
    CHECK(a.out == b.out);

    json j = json::parse(a.out);
    CHECK(j["kind"] == "verify");
    CHECK(j["seed"] == 42);
    CHECK(j["all_passed"] == true);
    REQUIRE(j["suites"].is_array());
    CHECK(j["suites"].size() >= 10);
    for (const auto& s : j["suites"]) {
        CHECK(s["status"] != "fail");
        if (s["status"] == "pass") CHECK(s.contains("worst_residual"));
    }
    std::string why;
    CHECK(testsupport::validate_report(j, why));
    INFO(why);
}

TEST_CASE("verify with zero trials emits an empty report and exits 0") {
    auto res = run_command(cli() + " verify " + fixture_path("isidori.fl") + " --trials 0 --json");
    CHECK(res.exit_code == 0);
    json j = json::parse(res.out);
    CHECK(j["suites"].empty());
    CHECK(j["all_passed"] == true);
}

TEST_CASE("verify diagnoses trivial fibres when r equals n") {
    auto res = run_command(cli() + " verify " + fixture_path("double_integrator.fl") +
                           " --trials 40 --json");
    CHECK(res.exit_code == 0);
    json j = json::parse(res.out);
    bool saw_skip_note = false;
    for (const auto& s : j["suites"])
        if (s["status"] == "skipped" && s.contains("note") &&
            s["note"].get<std::string>().find("fibres are points") != std::string::npos)
            saw_skip_note = true;
    CHECK(saw_skip_note);
}

TEST_CASE("FIBRELIN_TOL overrides the default tolerance") {
    auto res = run_command("FIBRELIN_TOL=1e-6 " + cli() + " verify " +
                           fixture_path("isidori.fl") + " --trials 10 --json");
    REQUIRE(res.exit_code == 0);
    json j = json::parse(res.out);
    CHECK(j["tolerance"].get<double>() == Catch::Approx(1e-6));
}

TEST_CASE("simulate writes trajectories") {
    // vertical flow from (1, 0, 0): x1 decays to 1/e
    auto res = run_command(cli() + " simulate " + fixture_path("isidori.fl") +
                           " --mode zero --x0 1,0,0 --t-end 1");
    REQUIRE(res.exit_code == 0);
    std::istringstream in(res.out);
    auto [names, traj] = read_csv(in);
    CHECK(names == std::vector<std::string>{"x1", "x2", "x3"});
    CHECK(traj.back_state()[0] == Catch::Approx(0.367879).margin(1e-5));
    CHECK(res.err.find("final state") != std::string::npos);

    // linear mode from the origin with zero input stays at zero
    auto lin = run_command(cli() + " simulate " + fixture_path("isidori.fl") +
                           " --mode linear --x0 0,0 --input 0");
    REQUIRE(lin.exit_code == 0);
    std::istringstream lin_in(lin.out);
    auto [znames, ztraj] = read_csv(lin_in);
    CHECK(znames == std::vector<std::string>{"z1", "z2"});
    for (const auto& z : ztraj.states) CHECK(norm_inf(z) == 0.0);
}

TEST_CASE("lifted simulation projects onto the linear one") {
    std::string lin_csv = "/tmp/fibrelin_cli_lin.csv";
    auto lin = run_command(cli() + " simulate " + fixture_path("isidori.fl") +
                           " --mode linear --x0 0.3,-0.7 --input 'sin(t)' --out " + lin_csv);
    REQUIRE(lin.exit_code == 0);
    // Phi = (x3, x2), so x0 = (x1, -0.7, 0.3) sits over (0.3, -0.7)
    auto lifted = run_command(cli() + " simulate " + fixture_path("isidori.fl") +
                              " --mode lifted --x0 0.1,-0.7,0.3 --input 'sin(t)'");
    REQUIRE(lifted.exit_code == 0);

    std::ifstream lin_file(lin_csv);
    auto [zn, zt] = read_csv(lin_file);
    std::istringstream lifted_in(lifted.out);
    auto [xn, xt] = read_csv(lifted_in);
    REQUIRE(zt.size() == xt.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < zt.size(); ++k) {
        worst = std::max(worst, std::fabs(xt.states[k][2] - zt.states[k][0]));  // x3 vs z1
        worst = std::max(worst, std::fabs(xt.states[k][1] - zt.states[k][1]));  // x2 vs z2
    }
    CHECK(worst <= 1e-6);
    std::remove(lin_csv.c_str());
}

TEST_CASE("lift reconstructs an upstairs trajectory from a base curve") {
    std::string base_csv = "/tmp/fibrelin_cli_base.csv";
    auto lin = run_command(cli() + " simulate " + fixture_path("isidori.fl") +
                           " --mode linear --x0 0.2,0.5 --input 'sin(t)' --out " + base_csv);
    REQUIRE(lin.exit_code == 0);
    auto lift = run_command(cli() + " lift " + fixture_path("isidori.fl") + " --base " + base_csv +
                            " --x0 1,0.5,0.2");
    REQUIRE(lift.exit_code == 0);
    std::istringstream in(lift.out);
    auto [names, traj] = read_csv(in);
    CHECK(names == std::vector<std::string>{"x1", "x2", "x3"});
    // the lifted curve projects back onto the base curve
    std::ifstream base_in(base_csv);
    auto [bn, bt] = read_csv(base_in);
    REQUIRE(bt.size() == traj.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.size(); ++k) {
        worst = std::max(worst, std::fabs(traj.states[k][2] - bt.states[k][0]));
        worst = std::max(worst, std::fabs(traj.states[k][1] - bt.states[k][1]));
    }
    CHECK(worst <= 1e-6);
    std::remove(base_csv.c_str());
}

TEST_CASE("unknown flags are an input error") {
    auto res = run_command(cli() + " analyze --no-such-flag");
    CHECK(res.exit_code == 2);
}
