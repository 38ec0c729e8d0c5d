#ifndef NEWTONFLOW_CLI_APP_HPP
#define NEWTONFLOW_CLI_APP_HPP

// The newtonflow command line: subcommands from divisor JSON to certificates
// and portraits. run_cli is the whole program minus process plumbing, so the
// tests drive it in-process.
//
// Exit codes: 0 success (or verdict stable), 1 degenerate, 2 undecided or a
// numerical procedure that did not converge, 3 invalid input or usage.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "CLI11.hpp"
#include "newtonflow/newtonflow.hpp"

namespace newtonflow::cli {

enum ExitCode { kOk = 0, kDegenerate = 1, kUndecided = 2, kInvalid = 3 };

inline int exit_code(Verdict v) {
    switch (v) {
    case Verdict::stable: return kOk;
    case Verdict::degenerate: return kDegenerate;
    case Verdict::undecided: return kUndecided;
    }
    return kUndecided;
}

/// Overridable numerical settings, surfaced as --tol-<name>.
struct Tolerances {
    std::map<std::string, double> values{
        {"rtol", 1e-9},                // integrator relative tolerance
        {"atol", 1e-12},               // integrator absolute tolerance
        {"capture", 1e-6},             // equilibrium capture radius / scale
        {"offset", 1e-5},              // separatrix seed offset / scale
        {"hit-radius", 1e-4},          // saddle-hit radius / scale
        {"hit-arg", 1e-5},             // saddle-hit arg f match
        {"residual", 1e-10},           // critical-point Newton residual
        {"multiplicity-radius", 1e-3}, // argument-principle circle / scale
        {"arc-cells", 50.0},           // trajectory budget in cell diameters
    };

    TrajectoryOptions trajectory() const {
        TrajectoryOptions t;
        t.rtol = values.at("rtol");
        t.atol = values.at("atol");
        t.capture_radius = values.at("capture");
        t.hit_radius = values.at("hit-radius");
        t.hit_arg_tol = values.at("hit-arg");
        t.max_arc_cells = values.at("arc-cells");
        return t;
    }
    CriticalSearchOptions search() const {
        CriticalSearchOptions s;
        s.residual_tol = values.at("residual");
        s.multiplicity_radius = values.at("multiplicity-radius");
        return s;
    }
    SeparatrixOptions separatrix() const {
        SeparatrixOptions s;
        s.offset = values.at("offset");
        s.trajectory = trajectory();
        return s;
    }
    CertifyOptions certify() const {
        CertifyOptions c;
        c.search = search();
        c.separatrix = separatrix();
        return c;
    }
    PortraitOptions portrait() const {
        PortraitOptions p;
        p.search = search();
        p.separatrix = separatrix();
        p.filler = trajectory();
        return p;
    }
    json to_json() const {
        json j = json::object();
        for (const auto& [k, v] : values) j[k] = v;
        return j;
    }
};

struct RunConfig {
    std::string command;
    std::string input;
    std::string output;
    std::uint64_t seed = 0;
    double epsilon = 1e-3;
    int density = 8;
    std::string form = "desingularized";
    std::vector<std::string> at;
    Tolerances tol;
};

namespace detail {

inline std::string read_input(const std::string& spec, std::istream& in) {
    if (spec.empty()) throw InvalidInput("--input is required");
    if (spec == "-") {
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }
    const auto first = spec.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && (spec[first] == '{' || spec[first] == '[')) return spec; // inline JSON
    std::ifstream f(spec, std::ios::binary);
    if (!f) throw InvalidInput("cannot open input file " + spec);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

/// Write via a temporary file in the same directory, then rename.
inline void write_atomic(const std::string& path, const std::string& text) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw InvalidInput("cannot write " + tmp.string());
        f << text;
        f.flush();
        if (!f) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw InvalidInput("write failed for " + path);
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw InvalidInput("cannot rename into " + path);
    }
}

inline void emit(const RunConfig& cfg, const std::string& text, std::ostream& out) {
    if (cfg.output.empty())
        out << text;
    else
        write_atomic(cfg.output, text);
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

inline cplx parse_point(const std::string& s) {
    const auto comma = s.find(',');
    if (comma == std::string::npos) throw InvalidInput("--at expects re,im but got \"" + s + "\"");
    try {
        std::size_t n1 = 0, n2 = 0;
        const std::string a = s.substr(0, comma), b = s.substr(comma + 1);
        const double re = std::stod(a, &n1), im = std::stod(b, &n2);
        if (n1 != a.size() || n2 != b.size()) throw std::invalid_argument("trailing");
        const cplx z(re, im);
        if (!is_finite(z)) throw std::invalid_argument("non-finite");
        return z;
    } catch (const std::exception&) {
        throw InvalidInput("--at expects re,im but got \"" + s + "\"");
    }
}

inline FieldForm parse_form(const std::string& s) {
    for (FieldForm f : jsonio::kForms)
        if (s == to_string(f)) return f;
    throw InvalidInput("unknown field form \"" + s + "\"");
}

inline json metadata(const RunConfig& cfg) {
    return {{"command", cfg.command}, {"tolerances", cfg.tol.to_json()}};
}

inline EllipticFunction load_function(const RunConfig& cfg, std::istream& in) {
    json j = parse_json(read_input(cfg.input, in));
    if (j.is_object()) j.erase("metadata");
    return function_from_json(j);
}

inline json classification_to_json(const Classification& c) {
    json s = json::array(), u = json::array();
    for (cplx d : c.stable_dirs) s.push_back(jsonio::cnum(d));
    for (cplx d : c.unstable_dirs) u.push_back(jsonio::cnum(d));
    return {{"type", to_string(c.type)}, {"k", c.k}, {"stable_dirs", s}, {"unstable_dirs", u}};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Commands. Each returns the exit code and writes its document.

inline int cmd_reduce(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    json j = parse_json(detail::read_input(cfg.input, in));
    // our own output carries derived keys; accepting them makes reduce idempotent
    if (j.is_object())
        for (const char* k : {"metadata", "tau", "map"}) j.erase(k);
    const Lattice L = lattice_from_json(j);
    const auto [R, M] = reduce_basis(L);
    json doc = lattice_to_json(R);
    doc["tau"] = jsonio::cnum(R.tau());
    doc["map"] = {{M.m[0][0], M.m[0][1]}, {M.m[1][0], M.m[1][1]}};
    doc["metadata"] = detail::metadata(cfg);
    detail::emit(cfg, detail::dump(doc), out);
    return kOk;
}

inline int cmd_build(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const EllipticFunction f = detail::load_function(cfg, in);
    json doc = function_to_json(f);
    doc["metadata"] = detail::metadata(cfg);
    doc["metadata"]["order"] = f.order();
    doc["metadata"]["lambda0"] = {f.divisor().lambda0[0], f.divisor().lambda0[1]};
    detail::emit(cfg, detail::dump(doc), out);
    return kOk;
}

inline int cmd_eval(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const EllipticFunction f = detail::load_function(cfg, in);
    if (cfg.at.empty()) throw InvalidInput("eval needs at least one --at re,im");
    json pts = json::array();
    for (const auto& s : cfg.at) {
        const cplx z = detail::parse_point(s);
        json p{{"z", jsonio::cnum(z)}};
        try {
            p["f"] = jsonio::cnum(f.eval(z));
            p["df"] = jsonio::cnum(f.eval_deriv(z));
        } catch (const PoleProximity&) {
            p["f"] = jsonio::cnum(cplx(std::numeric_limits<double>::infinity(), 0.0));
            p["note"] = "pole";
        }
        pts.push_back(p);
    }
    detail::emit(cfg, detail::dump({{"points", pts}, {"metadata", detail::metadata(cfg)}}), out);
    return kOk;
}

inline int cmd_field(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const FlowField F(detail::load_function(cfg, in), detail::parse_form(cfg.form));
    if (cfg.at.empty()) throw InvalidInput("field needs at least one --at re,im");
    json pts = json::array();
    for (const auto& s : cfg.at) {
        const cplx z = detail::parse_point(s);
        json p{{"z", jsonio::cnum(z)}};
        try {
            p["v"] = jsonio::cnum(F.velocity(z));
            const Matrix2 J = F.jacobian(z);
            p["jacobian"] = {J.a[0], J.a[1], J.a[2], J.a[3]};
        } catch (const PoleProximity& e) {
            p["note"] = e.what();
        }
        pts.push_back(p);
    }
    json doc{{"form", to_string(F.form())}, {"points", pts}, {"metadata", detail::metadata(cfg)}};
    detail::emit(cfg, detail::dump(doc), out);
    return kOk;
}

inline int cmd_critical_points(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const EllipticFunction f = detail::load_function(cfg, in);
    const auto cps = critical_points(f, cfg.tol.search());
    json doc{{"critical_points", equilibria_to_json(cps)}, {"metadata", detail::metadata(cfg)}};
    detail::emit(cfg, detail::dump(doc), out);
    return kOk;
}

inline int cmd_classify(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const FlowField F(detail::load_function(cfg, in));
    json eqs = json::array();
    for (const auto& e : locate_all(F, cfg.tol.search())) {
        json j = equilibrium_to_json(e);
        j["classification"] = detail::classification_to_json(classify(F, e));
        eqs.push_back(j);
    }
    detail::emit(cfg, detail::dump({{"equilibria", eqs}, {"metadata", detail::metadata(cfg)}}), out);
    return kOk;
}

inline int cmd_certify(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const EllipticFunction f = detail::load_function(cfg, in);
    StabilityCertificate c = certify(f, cfg.tol.certify());
    c.seed = cfg.seed;
    json doc = certificate_to_json(c);
    doc["metadata"] = detail::metadata(cfg);
    detail::emit(cfg, detail::dump(doc), out);
    return exit_code(c.verdict);
}

inline int cmd_perturb(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    const EllipticFunction f = detail::load_function(cfg, in);
    PerturbationConfig pc;
    pc.epsilon = cfg.epsilon;
    pc.seed = cfg.seed;
    const PerturbationResult r = perturb_to_generic(f, pc, cfg.tol.certify());
    json meta = detail::metadata(cfg);
    meta["epsilon"] = cfg.epsilon;
    meta["stage"] = r.stage;
    meta["attempts"] = r.attempts;
    json doc{{"divisor", function_to_json(r.f)}, {"certificate", certificate_to_json(r.certificate)}, {"metadata", meta}};
    detail::emit(cfg, detail::dump(doc), out);
    return exit_code(r.certificate.verdict);
}

inline int cmd_portrait(const RunConfig& cfg, std::istream& in, std::ostream& out) {
    if (cfg.output.empty()) throw InvalidInput("portrait needs --output path.svg (the JSON is written next to it)");
    const FlowField F(absorb_shift(detail::load_function(cfg, in)));
    const Portrait p = build_portrait(F, cfg.density, cfg.tol.portrait());
    std::filesystem::path json_path(cfg.output);
    json_path.replace_extension(".json");
    if (json_path == std::filesystem::path(cfg.output)) json_path += ".json";
    json doc = export_json(p);
    doc["metadata"] = detail::metadata(cfg);
    doc["metadata"]["density"] = cfg.density;
    detail::write_atomic(cfg.output, export_svg(p));
    detail::write_atomic(json_path.string(), doc.dump() + "\n"); // compact: trajectories are long
    out << "wrote " << cfg.output << " and " << json_path.string() << "\n";
    return p.undecided().empty() ? kOk : kUndecided;
}

// ---------------------------------------------------------------------------

inline int run_cli(std::vector<std::string> args, std::istream& in, std::ostream& out, std::ostream& err) {
    RunConfig cfg;
    CLI::App app{"Elliptic Newton flows: divisors, equilibria, structural stability and phase portraits",
                 "newtonflow"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "newtonflow 1.0.0");

    struct Sub {
        const char* name;
        const char* help;
        int (*run)(const RunConfig&, std::istream&, std::ostream&);
    };
    const std::vector<Sub> subs{
        {"reduce", "Reduce a lattice basis to the fundamental domain", cmd_reduce},
        {"build", "Validate a divisor and print the normalized function", cmd_build},
        {"eval", "Evaluate f and f' at points", cmd_eval},
        {"critical-points", "Locate critical points with multiplicity", cmd_critical_points},
        {"classify", "Locate and classify all equilibria", cmd_classify},
        {"certify", "Certify structural stability (exit 0/1/2)", cmd_certify},
        {"perturb", "Perturb to a structurally stable function", cmd_perturb},
        {"portrait", "Build a phase portrait, write SVG and JSON", cmd_portrait},
        {"field", "Evaluate the Newton vector field and its Jacobian", cmd_field},
    };
    std::map<std::string, double> tol_flags;
    for (const auto& s : subs) {
        CLI::App* sub = app.add_subcommand(s.name, s.help);
        sub->add_option("-i,--input", cfg.input, "Input file, inline JSON, or - for stdin")->required();
        sub->add_option("-o,--output", cfg.output, "Output file (written atomically); stdout when omitted");
        sub->add_option("--seed", cfg.seed, "Random seed");
        if (std::string(s.name) == "perturb") sub->add_option("--epsilon", cfg.epsilon, "Perturbation size");
        if (std::string(s.name) == "portrait")
            sub->add_option("--density", cfg.density, "Filler orbits per zero")->check(CLI::NonNegativeNumber);
        if (std::string(s.name) == "eval" || std::string(s.name) == "field")
            sub->add_option("--at", cfg.at, "Point re,im (repeatable)");
        if (std::string(s.name) == "field")
            sub->add_option("--form", cfg.form, "meromorphic | desingularized | pq");
        for (const auto& [name, def] : cfg.tol.values) {
            tol_flags[name] = def;
            sub->add_option("--tol-" + name, tol_flags[name], "default " + CLI::detail::to_string(def))
                ->check(CLI::PositiveNumber);
        }
    }

    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::Success& e) {
        app.exit(e, out, err);
        return kOk;
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kInvalid;
    }
    cfg.tol.values = tol_flags;

    for (const auto& s : subs) {
        if (!app.got_subcommand(s.name)) continue;
        cfg.command = s.name;
        try {
            return s.run(cfg, in, out);
        } catch (const InvalidInput& e) {
            err << "newtonflow " << s.name << ": invalid input: " << e.what() << "\n";
            return kInvalid;
        } catch (const PoleProximity& e) {
            err << "newtonflow " << s.name << ": invalid input: " << e.what() << "\n";
            return kInvalid;
        } catch (const Error& e) {
            err << "newtonflow " << s.name << ": inconclusive: " << e.what() << "\n";
            return kUndecided;
        } catch (const std::filesystem::filesystem_error& e) {
            err << "newtonflow " << s.name << ": " << e.what() << "\n";
            return kInvalid;
        }
    }
    return kInvalid;
}

} // namespace newtonflow::cli

#endif // NEWTONFLOW_CLI_APP_HPP
