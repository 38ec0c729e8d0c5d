#ifndef NEWTONFLOW_STABILITY_HPP
#define NEWTONFLOW_STABILITY_HPP

// Structural stability: every zero, pole and critical point simple and no
// trajectory joining two saddles. Connections are ruled out cheaply by the
// critical-value screen when possible and otherwise by tracing separatrices.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "newtonflow/efun.hpp"
#include "newtonflow/equilibria.hpp"
#include "newtonflow/error.hpp"
#include "newtonflow/flow.hpp"
#include "newtonflow/parallel.hpp"

namespace newtonflow {

enum class Verdict { stable, degenerate, undecided };

inline const char* to_string(Verdict v) {
    switch (v) {
    case Verdict::stable: return "stable";
    case Verdict::degenerate: return "degenerate";
    case Verdict::undecided: return "undecided";
    }
    return "?";
}

struct Conditions {
    bool simple_nodes = false;        ///< all zeros and poles simple
    bool nuclear = false;             ///< one zero and one pole, of equal order r
    bool simple_critical = false;     ///< all critical points simple
    bool no_connections = false;      ///< no saddle connection found and none undecided
    bool connections_checked = false; ///< tracing or the screen actually ran
};

struct Witness {
    enum class Kind { multiple_zero, multiple_pole, multiple_critical, connection, undecided };
    Kind kind;
    cplx z = 0.0;          ///< the equilibrium, or the source saddle of a separatrix
    int mult = 1;          ///< argument-principle multiplicity for multiple equilibria
    int source = -1;       ///< critical-point index of the source saddle
    int target = -1;       ///< critical-point index of the target saddle
    cplx target_z = 0.0;
    double source_arg = 0.0; ///< arg f at the source saddle
    double target_arg = 0.0; ///< arg f at the target saddle
    std::string reason;      ///< why a trace is undecided
    std::vector<cplx> path;  ///< separatrix samples (unwrapped)
};

inline const char* to_string(Witness::Kind k) {
    switch (k) {
    case Witness::Kind::multiple_zero: return "multiple_zero";
    case Witness::Kind::multiple_pole: return "multiple_pole";
    case Witness::Kind::multiple_critical: return "multiple_critical";
    case Witness::Kind::connection: return "connection";
    case Witness::Kind::undecided: return "undecided";
    }
    return "?";
}

struct StabilityCertificate {
    Verdict verdict = Verdict::undecided;
    Conditions conditions;
    bool screen_passed = false;
    std::vector<Witness> witnesses;
    std::uint64_t seed = 0;
    std::vector<Equilibrium> equilibria; ///< zeros, poles, critical points as located
};

struct SeparatrixOptions {
    double offset = 1e-5; ///< seed distance from the saddle, relative to the lattice scale
    TrajectoryOptions trajectory;
};

struct CertifyOptions {
    CriticalSearchOptions search;
    SeparatrixOptions separatrix;
    bool use_screen = true;
};

// ---------------------------------------------------------------------------
// Screen

/// True when no line through two critical values passes through 0. Saddles
/// joined by a trajectory share arg f, so their values are collinear with 0:
/// true certifies "no connections", false is inconclusive.
inline bool critical_value_screen(const std::vector<cplx>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
        for (std::size_t j = i + 1; j < values.size(); ++j) {
            const cplx a = values[i], b = values[j];
            const double m = std::max(std::abs(a), std::abs(b));
            const cplx d = b - a;
            if (std::abs(d) <= 1e-9 * m) return false;
            const double dist = std::abs((std::conj(a) * d).imag()) / std::abs(d);
            if (!(dist > 1e-9 * m)) return false;
        }
    return true;
}

inline bool critical_value_screen(const EllipticFunction& f, const std::vector<Equilibrium>& cps) {
    std::vector<cplx> v;
    for (const auto& e : cps)
        if (e.kind == EquilibriumKind::critical) v.push_back(f.quotient_jet(e.z).value());
    return critical_value_screen(v);
}

// ---------------------------------------------------------------------------
// Separatrices

struct Separatrix {
    int saddle = -1; ///< critical-point index
    bool unstable = true;
    cplx direction = 0.0;
    Trajectory trajectory;
    bool operator==(const Separatrix&) const = default;
};

/// Trace the separatrices of every saddle among `eqs`: unstable ones forward
/// and (optionally) stable ones backward, seeded at `offset` along the local
/// separatrix directions. Each trace stops at a saddle hit as well as at
/// captures. Output order: saddles by index, unstable before stable.
inline std::vector<Separatrix> trace_separatrices(const FlowField& F, const std::vector<Equilibrium>& eqs,
                                                  bool include_stable, const SeparatrixOptions& opt = {}) {
    const std::vector<Target> targets = make_targets(F, eqs);
    struct Job {
        std::size_t eq;
        cplx dir;
        bool unstable;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < eqs.size(); ++i) {
        if (eqs[i].kind != EquilibriumKind::critical) continue;
        const Classification c = classify(F, eqs[i]);
        for (cplx u : c.unstable_dirs) jobs.push_back({i, u, true});
        if (include_stable)
            for (cplx s : c.stable_dirs) jobs.push_back({i, s, false});
    }
    std::vector<Separatrix> out(jobs.size());
    const double offset = opt.offset * F.lattice().scale();
    parallel_for(jobs.size(), [&](std::size_t k) {
        const Job& j = jobs[k];
        TrajectoryOptions to = opt.trajectory;
        to.direction = j.unstable ? Direction::forward : Direction::backward;
        to.targets = targets;
        to.saddle_hit = true;
        to.exclude_target = int(j.eq);
        Separatrix s;
        s.saddle = eqs[j.eq].index;
        s.unstable = j.unstable;
        s.direction = j.dir;
        s.trajectory = integrate(F, eqs[j.eq].z + offset * j.dir, to);
        out[k] = std::move(s);
    });
    return out;
}

struct ConnectionReport {
    std::vector<Witness> connections;
    std::vector<Witness> undecided;
    std::vector<Separatrix> separatrices;
};

/// Trace both unstable separatrices of every (simple) saddle forward. A trace
/// that reaches another saddle is a connection; one that exhausts its budget
/// is undecided. Two traces arriving at the same simple zero with the same
/// arg f would be one trajectory, which is only possible through a saddle:
/// if tracing missed that, the pair is reported undecided.
inline ConnectionReport detect_saddle_connections(const FlowField& F, const std::vector<Equilibrium>& eqs,
                                                  const SeparatrixOptions& opt = {}) {
    for (const auto& e : eqs)
        if (e.kind == EquilibriumKind::critical && e.mult != 1)
            throw InvalidInput("connection tracing needs simple saddles");
    ConnectionReport rep;
    rep.separatrices = trace_separatrices(F, eqs, false, opt);
    auto crit = [&](int idx) -> const Equilibrium& {
        for (const auto& e : eqs)
            if (e.kind == EquilibriumKind::critical && e.index == idx) return e;
        throw InvalidInput("unknown critical index");
    };
    for (const auto& s : rep.separatrices) {
        const Trajectory& tr = s.trajectory;
        const Equilibrium& src = crit(s.saddle);
        Witness w;
        w.z = src.z;
        w.source = s.saddle;
        w.source_arg = std::arg(src.value);
        for (const auto& smp : tr.samples) w.path.push_back(smp.z);
        if (tr.end.at_saddle()) {
            const Equilibrium& dst = crit(tr.end.index);
            w.kind = Witness::Kind::connection;
            w.target = tr.end.index;
            w.target_z = dst.z;
            w.target_arg = std::arg(dst.value);
            rep.connections.push_back(std::move(w));
        } else if (tr.end.kind != EndKind::zero) {
            w.kind = Witness::Kind::undecided;
            w.reason = std::string("separatrix ended with ") + to_string(tr.end.kind);
            rep.undecided.push_back(std::move(w));
        }
    }
    // coincidence check: a k-fold zero admits k incoming trajectories per arg
    // value, separated by 2π/k in approach angle, so two separatrices with
    // equal arg and equal approach angle cannot both be resolved
    const Lattice& L = F.lattice();
    auto zero_mult = [&](int idx) {
        for (const auto& e : eqs)
            if (e.kind == EquilibriumKind::zero && e.index == idx) return e.mult;
        return 1;
    };
    auto approach = [&](const Trajectory& t) { return std::arg(L.nearest_residual(t.samples.back().z - t.end.z)); };
    for (std::size_t i = 0; i < rep.separatrices.size(); ++i)
        for (std::size_t j = i + 1; j < rep.separatrices.size(); ++j) {
            const Trajectory& a = rep.separatrices[i].trajectory;
            const Trajectory& b = rep.separatrices[j].trajectory;
            if (a.end.kind != EndKind::zero || b.end.kind != EndKind::zero || a.end.index != b.end.index) continue;
            if (std::abs(std::remainder(a.samples.back().argf - b.samples.back().argf, 2 * kPi)) > 1e-7) continue;
            const int k = zero_mult(a.end.index);
            if (k > 1 && std::abs(std::remainder(approach(a) - approach(b), 2 * kPi)) > kPi / (4.0 * k)) continue;
            Witness w;
            w.kind = Witness::Kind::undecided;
            w.z = crit(rep.separatrices[i].saddle).z;
            w.source = rep.separatrices[i].saddle;
            w.target = rep.separatrices[j].saddle;
            w.reason = "two separatrices reach the same zero with equal arg f";
            rep.undecided.push_back(std::move(w));
        }
    return rep;
}

// ---------------------------------------------------------------------------
// Certificate

inline StabilityCertificate certify(const EllipticFunction& f, const CertifyOptions& opt = {}) {
    StabilityCertificate cert;
    const FlowField F(f);
    const Lattice& L = f.lattice();
    cert.equilibria = locate_all(F, opt.search);

    // zeros and poles: multiplicity re-measured by the argument principle
    int n_zero = 0, n_pole = 0;
    for (const auto& e : cert.equilibria) {
        n_zero += e.kind == EquilibriumKind::zero;
        n_pole += e.kind == EquilibriumKind::pole;
    }
    // an r-fold nucleus is admitted: every such flow is conjugate to the r = 1 one
    cert.conditions.nuclear = n_zero == 1 && n_pole == 1;
    cert.conditions.simple_nodes = true;
    for (const auto& e : cert.equilibria) {
        if (e.kind == EquilibriumKind::critical || e.mult == 1) continue;
        cert.conditions.simple_nodes = false;
        if (cert.conditions.nuclear) continue;
        double sep = 0.25 * L.scale();
        for (const auto& o : cert.equilibria)
            if (&o != &e) sep = std::min(sep, L.torus_distance(o.z, e.z));
        const ArgumentCount c = count_by_argument_principle(f, Evaluable::f, Region::disk(e.z, 0.4 * sep));
        Witness w;
        w.kind = e.kind == EquilibriumKind::zero ? Witness::Kind::multiple_zero : Witness::Kind::multiple_pole;
        w.z = e.z;
        w.mult = std::abs(c.count);
        cert.witnesses.push_back(w);
    }
    std::vector<Equilibrium> cps;
    for (const auto& e : cert.equilibria)
        if (e.kind == EquilibriumKind::critical) cps.push_back(e);
    cert.conditions.simple_critical = true;
    for (const auto& e : cps)
        if (e.mult != 1) {
            cert.conditions.simple_critical = false;
            Witness w;
            w.kind = Witness::Kind::multiple_critical;
            w.z = e.z;
            w.mult = e.mult;
            w.source = e.index;
            cert.witnesses.push_back(w);
        }

    bool undecided = false;
    if (cert.conditions.simple_critical) {
        cert.screen_passed = critical_value_screen(f, cps);
        cert.conditions.connections_checked = true;
        if (opt.use_screen && cert.screen_passed) {
            cert.conditions.no_connections = true;
        } else {
            ConnectionReport rep = detect_saddle_connections(F, cert.equilibria, opt.separatrix);
            cert.conditions.no_connections = rep.connections.empty() && rep.undecided.empty();
            undecided = rep.connections.empty() && !rep.undecided.empty();
            for (auto& w : rep.connections) cert.witnesses.push_back(std::move(w));
            for (auto& w : rep.undecided) cert.witnesses.push_back(std::move(w));
        }
    }

    const auto& c = cert.conditions;
    const bool nodes_ok = c.simple_nodes || c.nuclear;
    if (nodes_ok && c.simple_critical && c.no_connections)
        cert.verdict = Verdict::stable;
    else if (!nodes_ok || !c.simple_critical || !undecided)
        cert.verdict = Verdict::degenerate;
    else
        cert.verdict = Verdict::undecided;
    return cert;
}

// ---------------------------------------------------------------------------
// Sensitivity of w′ under the closure parametrization

/// Which free divisor point is varied: zero i, or pole j < B − 1 (the last
/// pole b_B follows from the sum constraint).
struct DivisorIndex {
    bool zero = true;
    int i = 0;
};

namespace detail {

inline void check_sensitivity_args(const EllipticFunction& f, cplx z, DivisorIndex idx) {
    const Divisor& d = f.divisor();
    if (idx.zero ? (idx.i < 0 || idx.i >= int(d.zeros.size())) : (idx.i < 0 || idx.i + 1 >= int(d.poles.size())))
        throw InvalidInput("sensitivity: index out of range (the last pole is not a free parameter)");
    if (!is_finite(z) || f.divisor_distance(z) < kEvalPoleTol * f.lattice().scale())
        throw InvalidInput("sensitivity: z must avoid the divisor");
}

} // namespace detail

/// ∂w′/∂aᵢ = −nᵢ(℘(z − aᵢ) − ℘(z − b_B)) or ∂w′/∂bⱼ = mⱼ(℘(z − bⱼ) − ℘(z − b_B)).
inline cplx sensitivity(const EllipticFunction& f, cplx z, DivisorIndex idx) {
    detail::check_sensitivity_args(f, z, idx);
    const Divisor& d = f.divisor();
    const Weierstrass& W = f.weierstrass();
    const cplx bB = d.poles.back().z;
    if (idx.zero) {
        const auto& a = d.zeros[idx.i];
        return -double(a.mult) * (W.wp(z - a.z) - W.wp(z - bB));
    }
    const auto& b = d.poles[idx.i];
    return double(b.mult) * (W.wp(z - b.z) - W.wp(z - bB));
}

/// The same partial through the addition theorem
/// ℘(u) − ℘(v) = −σ(u + v)σ(u − v) / (σ²(u)σ²(v)).
inline cplx sensitivity_sigma_form(const EllipticFunction& f, cplx z, DivisorIndex idx) {
    detail::check_sensitivity_args(f, z, idx);
    const Divisor& d = f.divisor();
    const Weierstrass& W = f.weierstrass();
    const cplx bB = d.poles.back().z;
    const cplx p = idx.zero ? d.zeros[idx.i].z : d.poles[idx.i].z;
    const double n = idx.zero ? -double(d.zeros[idx.i].mult) : double(d.poles[idx.i].mult);
    // ℘(z − p) − ℘(z − b_B) = −σ(2z − p − b_B)σ(b_B − p) / (σ²(z − p)σ²(z − b_B))
    const SigmaJet s1 = W.sigma_jet(2.0 * z - p - bB);
    if (s1.value == cplx(0.0)) return 0.0;
    const cplx lg = W.log_sigma(2.0 * z - p - bB) + W.log_sigma(bB - p) - 2.0 * W.log_sigma(z - p) -
                    2.0 * W.log_sigma(z - bB);
    return -n * std::exp(lg);
}

/// All K − 1 free partials at z: zeros first, then poles j < B − 1.
inline std::vector<cplx> sensitivities(const EllipticFunction& f, cplx z) {
    std::vector<cplx> out;
    for (int i = 0; i < int(f.divisor().zeros.size()); ++i) out.push_back(sensitivity(f, z, {true, i}));
    for (int j = 0; j + 1 < int(f.divisor().poles.size()); ++j) out.push_back(sensitivity(f, z, {false, j}));
    return out;
}

// ---------------------------------------------------------------------------
// Perturbation to genericity

struct PerturbationConfig {
    double epsilon = 1e-3;
    std::uint64_t seed = 0;
    int max_retries = 10;
};

struct PerturbationResult {
    EllipticFunction f;
    StabilityCertificate certificate;
    bool success = false;
    int stage = 0;    ///< 0 unchanged, 1 split/redraw, 3 additive constant
    int attempts = 0; ///< redraws used in stages 1–2 plus constants tried in stage 3
};

namespace detail {

/// Uniform double in [0, 1) with an explicit conversion, identical on every platform.
inline double unit_uniform(std::mt19937_64& rng) { return double(rng() >> 11) * 0x1.0p-53; }

inline double min_divisor_separation(const EllipticFunction& f) {
    const Lattice& L = f.lattice();
    std::vector<cplx> pts = divisor_points(f);
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pts.size(); ++i)
        for (std::size_t j = i + 1; j < pts.size(); ++j) m = std::min(m, L.torus_distance(pts[i], pts[j]));
    return m;
}

/// Stage 1 draw. Multiple points split into simple clusters of radius
/// at most 0.9ε; with `jitter`, every point also moves by up to ε.
/// The weighted displacement sum is zero, so the closure pole stays put and
/// λ⁰ is unchanged.
inline EllipticFunction stage1_draw(const EllipticFunction& f, double eps, bool jitter, std::mt19937_64& rng) {
    const Divisor& d = f.divisor();
    struct Item {
        cplx z;
        int mult;
        bool zero;
        cplx shift = 0.0;
    };
    std::vector<Item> items;
    for (const auto& a : d.zeros) items.push_back({a.z, a.mult, true});
    for (const auto& b : d.poles) items.push_back({b.z, b.mult, false});
    if (jitter) {
        cplx wsum = 0.0;
        double wabs = 0.0;
        for (auto& it : items) {
            const double r = 0.5 * eps * std::sqrt(unit_uniform(rng));
            it.shift = std::polar(r, 2.0 * kPi * unit_uniform(rng));
            const double w = it.zero ? it.mult : -it.mult;
            wsum += w * it.shift;
            wabs += std::abs(w);
        }
        for (auto& it : items) it.shift -= (it.zero ? 1.0 : -1.0) * wsum / wabs;
    }
    std::vector<DivisorPoint> zeros, poles;
    for (const auto& it : items) {
        auto& dst = it.zero ? zeros : poles;
        const cplx c = it.z + it.shift;
        if (it.mult == 1) {
            dst.push_back({c, 1});
            continue;
        }
        // A regular polygon of m ≥ 3 points is locally z^m − c, whose m − 1
        // critical points nearly coincide; jittered radii and angles keep them
        // apart, and re-centring keeps the weighted sum.
        const double th = 2.0 * kPi * unit_uniform(rng);
        std::vector<cplx> off(it.mult);
        cplx mean = 0.0;
        for (int k = 0; k < it.mult; ++k) {
            const double rho = eps * (0.3 + 0.15 * unit_uniform(rng));
            const double jit = it.mult > 2 ? (unit_uniform(rng) - 0.5) * kPi / it.mult : 0.0;
            off[k] = std::polar(rho, th + 2.0 * kPi * k / it.mult + jit);
            mean += off[k] / double(it.mult);
        }
        for (cplx o : off) dst.push_back({c + o - mean, 1});
    }
    return EllipticFunction::build_with_closure(f.lattice(), zeros, poles, d.lambda0, f.multiplier());
}

} // namespace detail

/// Perturb f to a structurally stable function. Stage 1 splits multiple
/// zeros and poles (and redraws with jitter while stage 2 still finds a
/// multiple critical point); stage 3 adds a small constant to break saddle
/// connections and absorbs it back into a σ-product.
inline PerturbationResult perturb_to_generic(const EllipticFunction& f, const PerturbationConfig& cfg,
                                             const CertifyOptions& opt = {}) {
    if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon))
        throw InvalidInput("perturbation: epsilon must be positive");
    if (!(cfg.epsilon < 0.5 * detail::min_divisor_separation(f)))
        throw InvalidInput("perturbation: epsilon must be below half the minimal divisor separation");
    if (cfg.max_retries < 1) throw InvalidInput("perturbation: max_retries must be at least 1");
    const EllipticFunction f0 = absorb_shift(f);

    PerturbationResult res{f0, certify(f0, opt)};
    res.certificate.seed = cfg.seed;
    if (res.certificate.verdict == Verdict::stable) {
        res.success = true;
        return res;
    }
    std::mt19937_64 rng(cfg.seed);

    EllipticFunction g = f0;
    StabilityCertificate cert = res.certificate;
    const auto& c0 = cert.conditions;
    if (!c0.simple_nodes || !c0.simple_critical) {
        res.stage = 1;
        bool ok = false;
        // a first draw only splits; later draws also jitter every point
        bool jitter = c0.simple_nodes;
        for (int attempt = 0; attempt < cfg.max_retries && !ok; ++attempt) {
            ++res.attempts;
            g = detail::stage1_draw(f0, cfg.epsilon, jitter, rng);
            jitter = true;
            try {
                cert = certify(g, opt);
            } catch (const ConvergenceFailure&) {
                continue;
            }
            ok = cert.conditions.simple_nodes && cert.conditions.simple_critical;
        }
        if (!ok) {
            res.f = g;
            res.certificate = cert;
            res.certificate.seed = cfg.seed;
            return res;
        }
    }

    if (cert.verdict != Verdict::stable) {
        res.stage = 3;
        double vmin = std::numeric_limits<double>::infinity();
        for (const auto& e : cert.equilibria)
            if (e.kind == EquilibriumKind::critical) vmin = std::min(vmin, std::abs(e.value));
        const EllipticFunction base = g;
        for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
            ++res.attempts;
            const double mag = cfg.epsilon * vmin * (0.5 + 0.5 * detail::unit_uniform(rng));
            const cplx c = std::polar(mag, 2.0 * kPi * detail::unit_uniform(rng));
            try {
                g = absorb_shift(base.add_constant(c));
                cert = certify(g, opt);
            } catch (const ConvergenceFailure&) {
                continue;
            }
            if (cert.verdict == Verdict::stable) break;
        }
    }
    res.f = g;
    res.certificate = cert;
    res.certificate.seed = cfg.seed;
    res.success = cert.verdict == Verdict::stable;
    return res;
}

} // namespace newtonflow

#endif // NEWTONFLOW_STABILITY_HPP
