// Command-line front end: analyze, simulate, verify, lift.
// Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fibrelin/fibrelin.hpp"

namespace {

using namespace fibrelin;

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Vec parse_number_list(const std::string& text) {
    Vec out;
    std::stringstream ss(text);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(cell, &used));
            if (used != cell.size()) throw std::invalid_argument(cell);
        } catch (const std::exception&) {
            throw InputError("bad number '" + cell + "' in list '" + text + "'");
        }
    }
    if (out.empty()) throw InputError("empty number list");
    return out;
}

InputSignal parse_signal(const std::string& text) {
    try {
        return parse_input_signal(text);
    } catch (ParseError& e) {
        throw InputError("bad input signal '" + text + "': " + e.what());
    }
}

void emit_error(const Error& e, int code, bool json_mode) {
    if (json_mode)
        std::cout << error_json(e, code).dump(2) << "\n";
    else
        std::cout << error_json(e, code).dump(2) << "\n";
    std::cerr << "error: " << e.what() << "\n";
}

void write_or_print(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path);
    if (!out) throw InputError("cannot write '" + out_path + "'");
    out << text;
}

int cmd_analyze(const std::string& file, const std::string& point_csv, bool json_mode,
                const std::string& out_path, std::uint64_t seed, int trials) {
    AnalyzeOptions opt;
    opt.seed = seed;
    opt.trials = trials;
    opt.tol = default_tolerance();
    if (!point_csv.empty()) opt.point = parse_number_list(point_csv);
    AnalysisReport rep = analyze(parse_system(read_file(file)), opt);
    json j = to_json(rep);
    if (!out_path.empty()) write_or_print(j.dump(2) + "\n", out_path);
    std::cout << (json_mode ? j.dump(2) + "\n" : to_text(rep));
    return rep.all_passed() ? 0 : 1;
}

int cmd_simulate(const std::string& file, const std::string& mode, const std::string& x0_csv,
                 const std::string& input_text, double t_end, double dt,
                 const std::string& out_path) {
    SystemDef sys = parse_system(read_file(file));
    NormalForm nf = build_normal_form(sys);
    InputSignal sig = parse_signal(input_text);

    Trajectory traj;
    std::vector<std::string> names = sys.states;
    std::string input_name = sys.input;

    if (mode == "linear") {
        Vec z0 = x0_csv.empty() ? nf.eval_phi(sys.operating_point) : parse_number_list(x0_csv);
        if (static_cast<int>(z0.size()) != nf.r)
            throw DimensionError("--x0 for mode linear needs " + std::to_string(nf.r) + " values");
        traj = integrate(linear_field(nf.quotient), z0, sig, t_end, dt);
        names.clear();
        for (int i = 1; i <= nf.r; ++i) names.push_back("z" + std::to_string(i));
        input_name = "v";
    } else {
        Vec x0 = x0_csv.empty() ? sys.operating_vec() : parse_number_list(x0_csv);
        if (static_cast<int>(x0.size()) != sys.n())
            throw DimensionError("--x0 needs " + std::to_string(sys.n()) + " values");
        if (mode == "full") {
            traj = integrate(full_field(sys), x0, sig, t_end, dt);
        } else if (mode == "zero") {
            traj = integrate(zero_field(sys, nf), x0, sig, t_end, dt);
        } else if (mode == "lifted") {
            traj = integrate(lifted_field(nf), x0, sig, t_end, dt);
            for (std::size_t k = 0; k < traj.size(); ++k) {
                Point p = sys.bind_states(traj.states[k]);
                traj.inputs[k] = nf.input_from_v(p, traj.inputs[k]);
            }
        } else {
            throw InputError("unknown mode '" + mode + "'");
        }
    }

    std::ostringstream csv;
    write_csv(csv, traj, names, input_name);
    std::ostream& summary = out_path.empty() ? std::cerr : std::cout;
    write_or_print(csv.str(), out_path);
    summary << "mode " << mode << ": " << traj.size() << " rows, final state [";
    const Vec& xe = traj.back_state();
    for (std::size_t i = 0; i < xe.size(); ++i)
        summary << (i ? ", " : "") << format_double(xe[i]);
    summary << "] at t = " << format_double(traj.times.back()) << "\n";
    return 0;
}

int cmd_verify(const std::string& file, int trials, std::uint64_t seed, double tol,
               bool json_mode, const std::string& out_path) {
    SystemDef sys = parse_system(read_file(file));
    NormalForm nf = build_normal_form(sys);
    VerifyOptions opt;
    opt.trials = trials;
    opt.seed = seed;
    opt.tol = tol;
    VerifyReport rep = run_verification(sys, nf, opt);
    json j = to_json(rep);
    if (!out_path.empty()) write_or_print(j.dump(2) + "\n", out_path);
    std::cout << (json_mode ? j.dump(2) + "\n" : to_text(rep));
    return rep.all_passed() ? 0 : 1;
}

int cmd_lift(const std::string& file, const std::string& base_path, const std::string& x0_csv,
             const std::string& out_path) {
    SystemDef sys = parse_system(read_file(file));
    NormalForm nf = build_normal_form(sys);
    std::ifstream in(base_path);
    if (!in) throw InputError("cannot open '" + base_path + "'");
    auto [base_names, base] = read_csv(in);
    if (static_cast<int>(base_names.size()) != nf.r)
        throw DimensionError("base curve has " + std::to_string(base_names.size()) +
                             " state columns; expected r = " + std::to_string(nf.r));
    Vec x0 = parse_number_list(x0_csv);
    if (static_cast<int>(x0.size()) != sys.n())
        throw DimensionError("--x0 needs " + std::to_string(sys.n()) + " values");
    Trajectory lifted = lift_curve(nf, base, x0);
    std::ostringstream csv;
    write_csv(csv, lifted, sys.states, sys.input);
    write_or_print(csv.str(), out_path);
    if (!out_path.empty())
        std::cout << "lifted " << lifted.size() << " samples to '" << out_path << "'\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"feedback linearisation, induced connection and zero dynamics toolkit"};
    app.require_subcommand(1);

    std::string file, point_csv, x0_csv, out_path, base_path;
    std::string mode = "full", input_text = "0";
    bool json_mode = false;
    int trials = 100;
    std::uint64_t seed = 42;
    double t_end = 1.0, dt = 1e-3;
    double tol = fibrelin::default_tolerance();

    auto* analyze_cmd = app.add_subcommand("analyze", "normal form, connection and zero dynamics");
    analyze_cmd->add_option("file", file, "system definition file")->required();
    analyze_cmd->add_option("--point", point_csv, "operating point override, comma separated");
    analyze_cmd->add_flag("--json", json_mode, "print the JSON report instead of text");
    analyze_cmd->add_option("--out", out_path, "also write the JSON report to this path");
    analyze_cmd->add_option("--seed", seed, "seed for the sampled checks");
    analyze_cmd->add_option("--trials", trials, "sample count for the quick checks");

    auto* sim_cmd = app.add_subcommand("simulate", "integrate one of the derived systems");
    sim_cmd->add_option("file", file, "system definition file")->required();
    sim_cmd->add_option("--mode", mode, "full | lifted | zero | linear")
        ->check(CLI::IsMember({"full", "lifted", "zero", "linear"}));
    sim_cmd->add_option("--x0", x0_csv, "initial state, comma separated");
    sim_cmd->add_option("--input", input_text,
                        "input signal: an expression in t (u for full/zero, v for lifted/linear)");
    sim_cmd->add_option("--t-end", t_end, "final time");
    sim_cmd->add_option("--dt", dt, "step size");
    sim_cmd->add_option("--out", out_path, "CSV output path (stdout when omitted)");

    auto* verify_cmd = app.add_subcommand("verify", "run the seeded property suites");
    verify_cmd->add_option("file", file, "system definition file")->required();
    verify_cmd->add_option("--trials", trials, "trials per suite");
    verify_cmd->add_option("--seed", seed, "master seed");
    verify_cmd->add_option("--tol", tol, "base tolerance")->envname("FIBRELIN_TOL");
    verify_cmd->add_flag("--json", json_mode, "print the JSON report instead of text");
    verify_cmd->add_option("--out", out_path, "also write the JSON report to this path");

    auto* lift_cmd = app.add_subcommand("lift", "horizontally lift a sampled base curve");
    lift_cmd->add_option("file", file, "system definition file")->required();
    lift_cmd->add_option("--base", base_path, "CSV with the base curve (t, z1..zr[, v])")->required();
    lift_cmd->add_option("--x0", x0_csv, "start point upstairs, comma separated")->required();
    lift_cmd->add_option("--out", out_path, "CSV output path (stdout when omitted)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (app.got_subcommand(analyze_cmd))
            return cmd_analyze(file, point_csv, json_mode, out_path, seed, trials);
        if (app.got_subcommand(sim_cmd))
            return cmd_simulate(file, mode, x0_csv, input_text, t_end, dt, out_path);
        if (app.got_subcommand(verify_cmd))
            return cmd_verify(file, trials, seed, tol, json_mode, out_path);
        if (app.got_subcommand(lift_cmd)) return cmd_lift(file, base_path, x0_csv, out_path);
    } catch (const fibrelin::InputError& e) {
        emit_error(e, 2, json_mode);
        return 2;
    } catch (const fibrelin::NumericalError& e) {
        emit_error(e, 3, json_mode);
        return 3;
    } catch (const fibrelin::Error& e) {
        emit_error(e, 2, json_mode);
        return 2;
    }
    return 0;
}
