#ifndef NEWTONFLOW_JSON_IO_HPP
#define NEWTONFLOW_JSON_IO_HPP

// JSON documents for lattices, functions (divisor + constants), equilibria,
// certificates and portraits. Readers are strict: unknown keys, missing
// required keys and wrong types raise InvalidInput. Finite doubles round-trip
// bit-exactly; ±inf and nan are written as the strings "inf", "-inf", "nan".

#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "newtonflow/portrait.hpp"

namespace newtonflow {

using json = nlohmann::json;

namespace jsonio {

inline void check_keys(const json& j, std::initializer_list<const char*> required,
                       std::initializer_list<const char*> optional, const std::string& what) {
    if (!j.is_object()) throw InvalidInput(what + ": expected an object");
    std::set<std::string> known;
    for (const char* k : required) {
        known.insert(k);
        if (!j.contains(k)) throw InvalidInput(what + ": missing key \"" + k + "\"");
    }
    for (const char* k : optional) known.insert(k);
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw InvalidInput(what + ": unknown key \"" + k + "\"");
}

inline json num(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return x;
}

inline double get_num(const json& j, const std::string& what) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    throw InvalidInput(what + ": expected a number");
}

inline json cnum(cplx z) { return json::array({num(z.real()), num(z.imag())}); }

inline cplx get_cnum(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 2) throw InvalidInput(what + ": expected [re, im]");
    return {get_num(j[0], what), get_num(j[1], what)};
}

inline long long get_int(const json& j, const std::string& what) {
    if (!j.is_number_integer()) throw InvalidInput(what + ": expected an integer");
    return j.get<long long>();
}

inline bool get_bool(const json& j, const std::string& what) {
    if (!j.is_boolean()) throw InvalidInput(what + ": expected true or false");
    return j.get<bool>();
}

inline std::string get_str(const json& j, const std::string& what) {
    if (!j.is_string()) throw InvalidInput(what + ": expected a string");
    return j.get<std::string>();
}

inline const json& get_array(const json& j, const std::string& what) {
    if (!j.is_array()) throw InvalidInput(what + ": expected an array");
    return j;
}

template <class E, std::size_t N>
E get_enum(const json& j, const std::array<E, N>& all, const std::string& what) {
    const std::string s = get_str(j, what);
    for (E e : all)
        if (s == to_string(e)) return e;
    throw InvalidInput(what + ": unknown value \"" + s + "\"");
}

inline constexpr std::array<EquilibriumKind, 3> kKinds{EquilibriumKind::zero, EquilibriumKind::pole,
                                                       EquilibriumKind::critical};
inline constexpr std::array<EndKind, 7> kEndKinds{EndKind::zero,     EndKind::pole,        EndKind::saddle,
                                                  EndKind::saddle_hit, EndKind::budget, EndKind::time_limit,
                                                  EndKind::step_underflow};
inline constexpr std::array<Verdict, 3> kVerdicts{Verdict::stable, Verdict::degenerate, Verdict::undecided};
inline constexpr std::array<Witness::Kind, 5> kWitnessKinds{
    Witness::Kind::multiple_zero, Witness::Kind::multiple_pole, Witness::Kind::multiple_critical,
    Witness::Kind::connection, Witness::Kind::undecided};
inline constexpr std::array<FieldForm, 3> kForms{FieldForm::meromorphic, FieldForm::desingularized, FieldForm::pq};

inline constexpr std::array<Direction, 2> kDirections{Direction::forward, Direction::backward};

} // namespace jsonio

// ---------------------------------------------------------------------------
// Lattice and function

inline json lattice_to_json(const Lattice& L) {
    return {{"omega1", jsonio::cnum(L.omega1())}, {"omega2", jsonio::cnum(L.omega2())}};
}

inline Lattice lattice_from_json(const json& j) {
    jsonio::check_keys(j, {"omega1", "omega2"}, {}, "lattice");
    return Lattice(jsonio::get_cnum(j["omega1"], "lattice.omega1"), jsonio::get_cnum(j["omega2"], "lattice.omega2"));
}

inline json divisor_points_to_json(const std::vector<DivisorPoint>& pts) {
    json a = json::array();
    for (const auto& p : pts) a.push_back({{"z", jsonio::cnum(p.z)}, {"mult", p.mult}});
    return a;
}

inline std::vector<DivisorPoint> divisor_points_from_json(const json& j, const std::string& what) {
    std::vector<DivisorPoint> out;
    for (const auto& e : jsonio::get_array(j, what)) {
        jsonio::check_keys(e, {"z"}, {"mult"}, what + " entry");
        DivisorPoint p;
        p.z = jsonio::get_cnum(e["z"], what + ".z");
        p.mult = e.contains("mult") ? int(jsonio::get_int(e["mult"], what + ".mult")) : 1;
        out.push_back(p);
    }
    return out;
}

/// {"lattice", "zeros", "poles", "C", "shift"}; C defaults to 1, shift to 0.
inline json function_to_json(const EllipticFunction& f) {
    return {{"lattice", lattice_to_json(f.lattice())},
            {"zeros", divisor_points_to_json(f.divisor().zeros)},
            {"poles", divisor_points_to_json(f.divisor().poles)},
            {"C", jsonio::cnum(f.multiplier())},
            {"shift", jsonio::cnum(f.shift())}};
}

inline EllipticFunction function_from_json(const json& j) {
    jsonio::check_keys(j, {"lattice", "zeros", "poles"}, {"C", "shift"}, "divisor");
    const Lattice L = lattice_from_json(j["lattice"]);
    const Divisor d = validate_divisor(L, divisor_points_from_json(j["zeros"], "zeros"),
                                       divisor_points_from_json(j["poles"], "poles"));
    const cplx C = j.contains("C") ? jsonio::get_cnum(j["C"], "C") : cplx(1.0);
    const cplx c = j.contains("shift") ? jsonio::get_cnum(j["shift"], "shift") : cplx(0.0);
    if (!is_finite(C) || C == cplx(0.0)) throw InvalidInput("C must be finite and nonzero");
    if (!is_finite(c)) throw InvalidInput("shift must be finite");
    const EllipticFunction f = build(L, d, C);
    return c == cplx(0.0) ? f : f.add_constant(c);
}

// ---------------------------------------------------------------------------
// Equilibria

inline json equilibrium_to_json(const Equilibrium& e) {
    return {{"kind", to_string(e.kind)},
            {"z", jsonio::cnum(e.z)},
            {"mult", e.mult},
            {"hyperbolic", e.hyperbolic},
            {"eigenvalues", json::array({jsonio::cnum(e.eigenvalues[0]), jsonio::cnum(e.eigenvalues[1])})},
            {"value", jsonio::cnum(e.value)},
            {"index", e.index}};
}

inline Equilibrium equilibrium_from_json(const json& j) {
    jsonio::check_keys(j, {"kind", "z", "mult", "hyperbolic", "eigenvalues"}, {"value", "index"}, "equilibrium");
    Equilibrium e;
    e.kind = jsonio::get_enum(j["kind"], jsonio::kKinds, "equilibrium.kind");
    e.z = jsonio::get_cnum(j["z"], "equilibrium.z");
    e.mult = int(jsonio::get_int(j["mult"], "equilibrium.mult"));
    e.hyperbolic = jsonio::get_bool(j["hyperbolic"], "equilibrium.hyperbolic");
    const json& ev = j["eigenvalues"];
    if (!ev.is_array() || ev.size() != 2) throw InvalidInput("equilibrium.eigenvalues: expected two entries");
    e.eigenvalues = {jsonio::get_cnum(ev[0], "eigenvalue"), jsonio::get_cnum(ev[1], "eigenvalue")};
    if (j.contains("value")) e.value = jsonio::get_cnum(j["value"], "equilibrium.value");
    if (j.contains("index")) e.index = int(jsonio::get_int(j["index"], "equilibrium.index"));
    return e;
}

inline json equilibria_to_json(const std::vector<Equilibrium>& eqs) {
    json a = json::array();
    for (const auto& e : eqs) a.push_back(equilibrium_to_json(e));
    return a;
}

inline std::vector<Equilibrium> equilibria_from_json(const json& j) {
    std::vector<Equilibrium> out;
    for (const auto& e : jsonio::get_array(j, "equilibria")) out.push_back(equilibrium_from_json(e));
    return out;
}

// ---------------------------------------------------------------------------
// Certificates

inline json certificate_to_json(const StabilityCertificate& c) {
    json w = json::array();
    for (const auto& x : c.witnesses) {
        json path = json::array();
        for (cplx z : x.path) path.push_back(jsonio::cnum(z));
        w.push_back({{"kind", to_string(x.kind)},
                     {"z", jsonio::cnum(x.z)},
                     {"mult", x.mult},
                     {"source", x.source},
                     {"target", x.target},
                     {"target_z", jsonio::cnum(x.target_z)},
                     {"source_arg", jsonio::num(x.source_arg)},
                     {"target_arg", jsonio::num(x.target_arg)},
                     {"reason", x.reason},
                     {"path", path}});
    }
    const auto& k = c.conditions;
    return {{"verdict", to_string(c.verdict)},
            {"conditions",
             {{"simple_nodes", k.simple_nodes},
              {"nuclear", k.nuclear},
              {"simple_critical", k.simple_critical},
              {"no_connections", k.no_connections},
              {"connections_checked", k.connections_checked},
              {"screen_passed", c.screen_passed}}},
            {"witnesses", w},
            {"seed", c.seed}};
}

/// Reads a certificate; a "metadata" object is accepted and ignored.
inline StabilityCertificate certificate_from_json(const json& j) {
    jsonio::check_keys(j, {"verdict", "conditions", "witnesses", "seed"}, {"metadata"}, "certificate");
    if (j.contains("metadata") && !j["metadata"].is_object())
        throw InvalidInput("certificate.metadata: expected an object");
    StabilityCertificate c;
    c.verdict = jsonio::get_enum(j["verdict"], jsonio::kVerdicts, "verdict");
    const json& k = j["conditions"];
    jsonio::check_keys(k, {"simple_nodes", "nuclear", "simple_critical", "no_connections", "connections_checked",
                           "screen_passed"},
                       {}, "conditions");
    c.conditions.simple_nodes = jsonio::get_bool(k["simple_nodes"], "simple_nodes");
    c.conditions.nuclear = jsonio::get_bool(k["nuclear"], "nuclear");
    c.conditions.simple_critical = jsonio::get_bool(k["simple_critical"], "simple_critical");
    c.conditions.no_connections = jsonio::get_bool(k["no_connections"], "no_connections");
    c.conditions.connections_checked = jsonio::get_bool(k["connections_checked"], "connections_checked");
    c.screen_passed = jsonio::get_bool(k["screen_passed"], "screen_passed");
    for (const auto& x : jsonio::get_array(j["witnesses"], "witnesses")) {
        jsonio::check_keys(x, {"kind", "z"},
                           {"mult", "source", "target", "target_z", "source_arg", "target_arg", "reason", "path"},
                           "witness");
        Witness w;
        w.kind = jsonio::get_enum(x["kind"], jsonio::kWitnessKinds, "witness.kind");
        w.z = jsonio::get_cnum(x["z"], "witness.z");
        if (x.contains("mult")) w.mult = int(jsonio::get_int(x["mult"], "witness.mult"));
        if (x.contains("source")) w.source = int(jsonio::get_int(x["source"], "witness.source"));
        if (x.contains("target")) w.target = int(jsonio::get_int(x["target"], "witness.target"));
        if (x.contains("target_z")) w.target_z = jsonio::get_cnum(x["target_z"], "witness.target_z");
        if (x.contains("source_arg")) w.source_arg = jsonio::get_num(x["source_arg"], "witness.source_arg");
        if (x.contains("target_arg")) w.target_arg = jsonio::get_num(x["target_arg"], "witness.target_arg");
        if (x.contains("reason")) w.reason = jsonio::get_str(x["reason"], "witness.reason");
        if (x.contains("path"))
            for (const auto& p : jsonio::get_array(x["path"], "witness.path"))
                w.path.push_back(jsonio::get_cnum(p, "witness.path"));
        c.witnesses.push_back(std::move(w));
    }
    if (!j["seed"].is_number_unsigned()) throw InvalidInput("seed: expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
    return c;
}

// ---------------------------------------------------------------------------
// Trajectories and portraits

inline json trajectory_to_json(const Trajectory& tr) {
    json t = json::array(), z = json::array(), absf = json::array(), argf = json::array(), v = json::array();
    for (const auto& s : tr.samples) {
        t.push_back(jsonio::num(s.t));
        z.push_back(jsonio::cnum(s.z));
        absf.push_back(jsonio::num(s.absf));
        argf.push_back(jsonio::num(s.argf));
        v.push_back(jsonio::cnum(s.v));
    }
    return {{"direction", to_string(tr.direction)},
            {"arg_value", jsonio::num(tr.arg_value)},
            {"arc_length", jsonio::num(tr.arc_length)},
            {"end",
             {{"kind", to_string(tr.end.kind)},
              {"target", tr.end.target},
              {"index", tr.end.index},
              {"z", jsonio::cnum(tr.end.z)}}},
            {"samples", {{"t", t}, {"z", z}, {"absf", absf}, {"argf", argf}, {"v", v}}}};
}

inline Trajectory trajectory_from_json(const json& j) {
    jsonio::check_keys(j, {"direction", "arg_value", "arc_length", "end", "samples"}, {}, "trajectory");
    Trajectory tr;
    tr.direction = jsonio::get_enum(j["direction"], jsonio::kDirections, "trajectory.direction");
    tr.arg_value = jsonio::get_num(j["arg_value"], "trajectory.arg_value");
    tr.arc_length = jsonio::get_num(j["arc_length"], "trajectory.arc_length");
    const json& e = j["end"];
    jsonio::check_keys(e, {"kind", "target", "index", "z"}, {}, "trajectory.end");
    tr.end.kind = jsonio::get_enum(e["kind"], jsonio::kEndKinds, "end.kind");
    tr.end.target = int(jsonio::get_int(e["target"], "end.target"));
    tr.end.index = int(jsonio::get_int(e["index"], "end.index"));
    tr.end.z = jsonio::get_cnum(e["z"], "end.z");
    const json& s = j["samples"];
    jsonio::check_keys(s, {"t", "z", "absf", "argf", "v"}, {}, "trajectory.samples");
    const std::size_t n = jsonio::get_array(s["t"], "samples.t").size();
    for (const char* k : {"z", "absf", "argf", "v"})
        if (jsonio::get_array(s[k], std::string("samples.") + k).size() != n)
            throw InvalidInput("trajectory.samples: columns differ in length");
    tr.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& x = tr.samples[i];
        x.t = jsonio::get_num(s["t"][i], "samples.t");
        x.z = jsonio::get_cnum(s["z"][i], "samples.z");
        x.absf = jsonio::get_num(s["absf"][i], "samples.absf");
        x.argf = jsonio::get_num(s["argf"][i], "samples.argf");
        x.v = jsonio::get_cnum(s["v"][i], "samples.v");
    }
    return tr;
}

inline constexpr const char* kPortraitSchema = "portrait/1";

inline json export_json(const Portrait& p) {
    json seps = json::array(), fills = json::array();
    for (const auto& s : p.separatrices)
        seps.push_back({{"saddle", s.saddle},
                        {"unstable", s.unstable},
                        {"direction", jsonio::cnum(s.direction)},
                        {"trajectory", trajectory_to_json(s.trajectory)}});
    for (const auto& f : p.fillers) fills.push_back({{"zero", f.zero}, {"trajectory", trajectory_to_json(f.trajectory)}});
    return {{"schema", kPortraitSchema},
            {"divisor", function_to_json(p.function)},
            {"form", to_string(p.form)},
            {"density", p.density},
            {"equilibria", equilibria_to_json(p.equilibria)},
            {"separatrices", seps},
            {"fillers", fills}};
}

/// Reads a portrait document. A "metadata" object (written by the CLI) is
/// accepted and ignored.
inline Portrait import_json(const json& j) {
    jsonio::check_keys(j, {"schema", "divisor", "form", "density", "equilibria", "separatrices", "fillers"},
                       {"metadata"}, "portrait");
    if (j.contains("metadata") && !j["metadata"].is_object())
        throw InvalidInput("portrait.metadata: expected an object");
    if (jsonio::get_str(j["schema"], "schema") != kPortraitSchema)
        throw InvalidInput("portrait: unsupported schema \"" + j["schema"].get<std::string>() + "\"");
    Portrait p{function_from_json(j["divisor"]), FieldForm::desingularized, 0, {}, {}, {}};
    p.form = jsonio::get_enum(j["form"], jsonio::kForms, "portrait.form");
    p.density = int(jsonio::get_int(j["density"], "portrait.density"));
    p.equilibria = equilibria_from_json(j["equilibria"]);
    for (const auto& s : jsonio::get_array(j["separatrices"], "separatrices")) {
        jsonio::check_keys(s, {"saddle", "unstable", "direction", "trajectory"}, {}, "separatrix");
        Separatrix x;
        x.saddle = int(jsonio::get_int(s["saddle"], "separatrix.saddle"));
        x.unstable = jsonio::get_bool(s["unstable"], "separatrix.unstable");
        x.direction = jsonio::get_cnum(s["direction"], "separatrix.direction");
        x.trajectory = trajectory_from_json(s["trajectory"]);
        p.separatrices.push_back(std::move(x));
    }
    for (const auto& f : jsonio::get_array(j["fillers"], "fillers")) {
        jsonio::check_keys(f, {"zero", "trajectory"}, {}, "filler");
        p.fillers.push_back({int(jsonio::get_int(f["zero"], "filler.zero")), trajectory_from_json(f["trajectory"])});
    }
    return p;
}

/// Parse a document, mapping syntax errors to InvalidInput.
inline json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InvalidInput(std::string("malformed JSON: ") + e.what());
    }
}

} // namespace newtonflow

#endif // NEWTONFLOW_JSON_IO_HPP
