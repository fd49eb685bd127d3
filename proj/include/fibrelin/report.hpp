#pragma once

#include <cstdlib>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "fibrelin/verify.hpp"
#include "fibrelin/zerodyn.hpp"

namespace fibrelin {

using nlohmann::json;

// default numeric tolerance, overridable through FIBRELIN_TOL
inline double default_tolerance() {
    if (const char* env = std::getenv("FIBRELIN_TOL")) {
        char* end = nullptr;
        double v = std::strtod(env, &end);
        if (end != env && v > 0.0) return v;
    }
    return 1e-9;
}

struct AnalyzeOptions {
    std::optional<Vec> point;  // overrides the file's operating point
    std::uint64_t seed = 42;
    double tol = 1e-9;
    int trials = 100;
};

// Everything cmd_analyze reports. Numeric claims carry their tolerance; the
// pass/fail of each check is derived at render time from the observed value.
struct AnalysisReport {
    std::string system;
    int n = 0, r = 0;
    std::uint64_t seed = 0;
    double tol = 1e-9;

    std::vector<std::string> certificates;  // verdicts for L_g L_f^k h, k < r-1
    double beta_at_point = 0.0;

    std::vector<std::string> phi;  // printed expressions
    std::string psi;
    std::string alpha, beta;
    std::vector<std::string> complement;
    std::vector<std::string> lambda;
    bool complement_supplied = false;

    double det_at_point = 0.0;
    double min_abs_det = 0.0;       // over the diffeomorphism scan
    int diffeo_samples = 0;
    int diffeo_flagged = 0;

    std::optional<std::vector<std::string>> zero_dynamics_symbolic;
    std::optional<std::vector<std::string>> fibre_restricted;
    bool zero_dynamics_depends_on_input = false;

    std::vector<SuiteResult> checks;  // verticality, projection, fibre invariance

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed()) return false;
        return true;
    }
};

inline AnalysisReport analyze(SystemDef sys, AnalyzeOptions opt = {}) {
    if (opt.point) {
        if (static_cast<int>(opt.point->size()) != sys.n())
            throw DimensionError("--point needs " + std::to_string(sys.n()) + " values");
        sys.operating_point = sys.bind_states(*opt.point);
    }
    AnalysisReport rep;
    rep.system = sys.name;
    rep.n = sys.n();
    rep.seed = opt.seed;
    rep.tol = opt.tol;

    NormalForm nf = build_normal_form(sys);
    rep.r = nf.r;
    for (const auto& c : nf.rd.certificates) rep.certificates.push_back(c.name());
    rep.beta_at_point = nf.rd.beta_at_point;
    for (const auto& e : nf.phi) rep.phi.push_back(to_string(e));
    rep.psi = to_string(nf.psi_expr());
    rep.alpha = to_string(nf.alpha);
    rep.beta = to_string(nf.beta);
    for (const auto& e : nf.complement) rep.complement.push_back(to_string(e));
    for (const auto& e : nf.lambda) rep.lambda.push_back(to_string(e));
    rep.complement_supplied = sys.complement.has_value();
    rep.det_at_point = nf.det_at_point;

    DiffeoReport diffeo = check_diffeomorphism(nf.lambda, sys.states, {}, 200, opt.seed);
    rep.min_abs_det = diffeo.min_abs_det;
    rep.diffeo_samples = diffeo.samples;
    rep.diffeo_flagged = diffeo.flagged;

    ZeroDynamics zd = build_zero_dynamics(sys, nf);
    if (zd.symbolic) {
        rep.zero_dynamics_symbolic = std::vector<std::string>{};
        for (const auto& e : *zd.symbolic) rep.zero_dynamics_symbolic->push_back(to_string(e));
    }
    if (zd.fibre_restricted) {
        rep.fibre_restricted = std::vector<std::string>{};
        for (const auto& e : *zd.fibre_restricted) rep.fibre_restricted->push_back(to_string(e));
    }
    rep.zero_dynamics_depends_on_input = zd.depends_on_input;

    // quick verification summaries
    const bool trivial_fibres = nf.r == nf.n;
    {
        SuiteResult vert = SuiteResult::make("verticality", 0, opt.tol);
        if (trivial_fibres) {
            vert.skipped = true;
            vert.note = "zero-dynamics pipeline skipped (fibres are points)";
        } else {
            Rng rng(opt.seed + 5);
            ExprMat jac_phi = jacobian(nf.phi, sys.states);
            for (int k = 0; k < opt.trials; ++k) {
                Vec x(nf.n);
                for (int i = 0; i < nf.n; ++i) x[i] = rng.uniform(-2.0, 2.0);
                double u = rng.uniform(-1.0, 1.0);
                Point p = sys.bind_full(x, u);
                try {
                    ConnectionPoint cp = connection_at(nf, p);
                    Vec fz = zero_dynamics_at(sys, nf, p, u);
                    vert.worst_residual =
                        std::max(vert.worst_residual, norm_inf(tphi_apply(cp, fz)));
                    ++vert.trials;
                } catch (const NumericalError&) {
                    continue;
                }
            }
        }
        rep.checks.push_back(vert);
    }
    {
        SuiteResult proj = SuiteResult::make("projection_commutation", 1, 1e-6);
        Vec x0 = sys.operating_vec();
        Rng rng(opt.seed + 6);
        for (double& c : x0) c += rng.uniform(-0.5, 0.5);
        try {
            ProjectionReport r = verify_projection(sys, nf, x0, parse_input_signal("sin(t)"), 1.0, 1e-3);
            proj.worst_residual = r.max_deviation;
        } catch (const NumericalError& e) {
            proj.skipped = true;
            proj.note = e.what();
        }
        rep.checks.push_back(proj);
    }
    {
        SuiteResult fib = SuiteResult::make("fibre_invariance", 0, 1e-6);
        if (trivial_fibres) {
            fib.skipped = true;
            fib.note = "zero-dynamics pipeline skipped (fibres are points)";
        } else {
            Rng rng(opt.seed + 7);
            for (int k = 0; k < 3; ++k) {
                Vec x0(nf.n);
                for (int i = 0; i < nf.n; ++i) x0[i] = rng.uniform(-2.0, 2.0);
                try {
                    Trajectory t = integrate(zero_field(sys, nf), x0, constant_signal(0.0), 1.0, 1e-3);
                    Vec z0 = nf.eval_phi(sys.bind_states(x0));
                    for (const auto& x : t.states)
                        fib.worst_residual = std::max(
                            fib.worst_residual,
                            norm_inf(vec_sub(nf.eval_phi(sys.bind_states(x)), z0)));
                    ++fib.trials;
                } catch (const NumericalError&) {
                    continue;
                }
            }
        }
        rep.checks.push_back(fib);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// JSON / text rendering
// ---------------------------------------------------------------------------

inline json to_json(const SuiteResult& s) {
    json j;
    j["name"] = s.name;
    j["status"] = s.status();
    j["trials"] = s.trials;
    if (!s.skipped) {
        j["worst_residual"] = s.worst_residual;
        j["tolerance"] = s.tolerance;
        j["comparator"] = s.comparator();
    }
    if (!s.note.empty()) j["note"] = s.note;
    return j;
}

inline json to_json(const AnalysisReport& r) {
    json j;
    j["kind"] = "analysis";
    j["system"] = r.system;
    j["n"] = r.n;
    j["r"] = r.r;
    j["seed"] = r.seed;
    j["tolerance"] = r.tol;
    j["relative_degree"] = {{"r", r.r},
                            {"beta_at_point", r.beta_at_point},
                            {"certificates", r.certificates}};
    j["phi"] = r.phi;
    j["psi"] = r.psi;
    j["alpha"] = r.alpha;
    j["beta"] = r.beta;
    j["complement"] = r.complement;
    j["complement_supplied"] = r.complement_supplied;
    j["lambda"] = r.lambda;
    j["det_at_point"] = r.det_at_point;
    j["diffeomorphism_scan"] = {{"min_abs_det", r.min_abs_det},
                                {"samples", r.diffeo_samples},
                                {"flagged", r.diffeo_flagged}};
    if (r.zero_dynamics_symbolic)
        j["zero_dynamics"]["symbolic"] = *r.zero_dynamics_symbolic;
    else
        j["zero_dynamics"]["symbolic"] = nullptr;
    if (r.fibre_restricted)
        j["zero_dynamics"]["fibre_restricted"] = *r.fibre_restricted;
    else
        j["zero_dynamics"]["fibre_restricted"] = nullptr;
    j["zero_dynamics"]["depends_on_input"] = r.zero_dynamics_depends_on_input;
    j["checks"] = json::array();
    for (const auto& c : r.checks) j["checks"].push_back(to_json(c));
    j["all_passed"] = r.all_passed();
    return j;
}

inline json to_json(const VerifyReport& r) {
    json j;
    j["kind"] = "verify";
    j["system"] = r.system;
    j["n"] = r.n;
    j["r"] = r.r;
    j["seed"] = r.seed;
    j["trials"] = r.trials;
    j["tolerance"] = r.tol;
    j["suites"] = json::array();
    for (const auto& s : r.suites) j["suites"].push_back(to_json(s));
    j["all_passed"] = r.all_passed();
    return j;
}

inline json error_json(const Error& e, int exit_code) {
    json j;
    j["kind"] = "error";
    json detail;
    detail["type"] = e.type();
    detail["message"] = e.what();
    if (const auto* pe = dynamic_cast<const ParseError*>(&e)) {
        if (pe->line >= 0) detail["line"] = pe->line;
        if (pe->col >= 0) detail["col"] = pe->col;
    }
    j["error"] = detail;
    j["exit_code"] = exit_code;
    return j;
}

namespace reportdetail {

inline std::string check_line(const SuiteResult& s) {
    std::ostringstream out;
    out << "  [" << (s.skipped ? "skip" : (s.passed() ? "pass" : "FAIL")) << "] " << s.name;
    if (!s.skipped)
        out << ": worst " << format_double(s.worst_residual) << " " << s.comparator() << " "
            << format_double(s.tolerance) << " (" << s.trials << " trials)";
    if (!s.note.empty()) out << " -- " << s.note;
    return out.str();
}

inline std::string join(const std::vector<std::string>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ", ";
        s += v[i];
    }
    return s + "]";
}

}  // namespace reportdetail

inline std::string to_text(const AnalysisReport& r) {
    std::ostringstream out;
    out << "system: " << r.system << " (n = " << r.n << ")\n";
    out << "relative degree: r = " << r.r << ", beta at point = "
        << format_double(r.beta_at_point);
    if (!r.certificates.empty()) {
        out << ", certificates:";
        for (std::size_t k = 0; k < r.certificates.size(); ++k)
            out << " L_gL_f^" << k << "h=" << r.certificates[k];
    }
    out << "\n";
    out << "Phi = " << reportdetail::join(r.phi) << "\n";
    out << "Psi = " << r.psi << "\n";
    out << "complement" << (r.complement_supplied ? " (supplied)" : " (heuristic)") << " = "
        << reportdetail::join(r.complement) << "\n";
    out << "Lambda = " << reportdetail::join(r.lambda) << "\n";
    out << "det J_Lambda at point = " << format_double(r.det_at_point) << " (scan min |det| = "
        << format_double(r.min_abs_det) << " over " << r.diffeo_samples << " samples, "
        << r.diffeo_flagged << " flagged)\n";
    if (r.zero_dynamics_symbolic)
        out << "zero dynamics = " << reportdetail::join(*r.zero_dynamics_symbolic)
            << (r.zero_dynamics_depends_on_input ? "  (depends on the input)" : "") << "\n";
    else
        out << "zero dynamics: symbolic form unavailable\n";
    if (r.fibre_restricted)
        out << "restricted to the zero fibre = " << reportdetail::join(*r.fibre_restricted) << "\n";
    out << "checks:\n";
    for (const auto& c : r.checks) out << reportdetail::check_line(c) << "\n";
    out << (r.all_passed() ? "ANALYSIS OK" : "ANALYSIS: CHECKS FAILED") << "\n";
    return out.str();
}

inline std::string to_text(const VerifyReport& r) {
    std::ostringstream out;
    out << "system: " << r.system << " (n = " << r.n << ", r = " << r.r << "), seed " << r.seed
        << ", " << r.trials << " trials\n";
    for (const auto& s : r.suites) out << reportdetail::check_line(s) << "\n";
    if (r.suites.empty()) out << "  (no suites run)\n";
    out << (r.all_passed() ? "VERIFY OK" : "VERIFY FAILED") << "\n";
    return out.str();
}

}  // namespace fibrelin
