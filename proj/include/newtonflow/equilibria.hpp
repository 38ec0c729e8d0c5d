#ifndef NEWTONFLOW_EQUILIBRIA_HPP
#define NEWTONFLOW_EQUILIBRIA_HPP

// Equilibria of the desingularized flow: zeros, poles and critical points of
// f. Critical points are the zeros of w′ = −f′/f, located by grid-seeded
// Newton iteration and certified complete by the argument principle.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include "newtonflow/contour.hpp"
#include "newtonflow/efun.hpp"
#include "newtonflow/error.hpp"
#include "newtonflow/flow.hpp"
#include "newtonflow/lattice.hpp"
#include "newtonflow/parallel.hpp"

namespace newtonflow {

struct Equilibrium {
    cplx z = 0.0; ///< cell representative
    EquilibriumKind kind = EquilibriumKind::critical;
    int mult = 1;
    bool hyperbolic = true;
    std::array<cplx, 2> eigenvalues{};
    cplx value = 0.0; ///< f(z) for critical points
    int index = -1;   ///< position in the divisor list (zeros/poles) or the critical list

    TorusPoint location(const Lattice& L) const { return normalize(L, z); }
    bool operator==(const Equilibrium&) const = default;
};

enum class LocalType { attractor, repellor, saddle };

inline const char* to_string(LocalType t) {
    switch (t) {
    case LocalType::attractor: return "attractor";
    case LocalType::repellor: return "repellor";
    case LocalType::saddle: return "saddle";
    }
    return "?";
}

struct Classification {
    LocalType type = LocalType::saddle;
    int k = 1;
    bool hyperbolic = true;
    std::array<cplx, 2> eigenvalues{};
    /// Unit separatrix directions of a saddle (k + 1 each), empty for nodes.
    std::vector<cplx> stable_dirs;
    std::vector<cplx> unstable_dirs;
};

struct CriticalSearchOptions {
    int grid = 64;
    int max_grid = 512;
    int newton_iters = 80;
    double residual_tol = 1e-10;     ///< on |w′|·scale
    double multiplicity_radius = 1e-3; ///< relative to the lattice scale
};

enum class Evaluable { f, w_prime };

/// A contour: a circle or a parallelogram z0 + [0,1]·e1 + [0,1]·e2.
struct Region {
    bool circle = true;
    cplx center = 0.0;
    double rho = 0.0;
    cplx z0 = 0.0, e1 = 0.0, e2 = 0.0;

    static Region disk(cplx c, double r) { return Region{true, c, r, 0.0, 0.0, 0.0}; }
    static Region parallelogram(cplx z0, cplx e1, cplx e2) { return Region{false, 0.0, 0.0, z0, e1, e2}; }
    /// Reduced period cell shifted along its diagonal away from `avoid`.
    static Region cell(const Lattice& L, const std::vector<cplx>& avoid) {
        const Lattice R(L.reduced_omega1(), L.reduced_omega2());
        return parallelogram(shifted_cell_origin(R, avoid), R.omega1(), R.omega2());
    }
};

/// (1/2πi)∮ g′/g rounded: zeros minus poles of g inside the region. For
/// g = f the additive constant is included; w′ is that of the unshifted
/// function, whose zeros (the critical points) do not depend on the constant.
inline ArgumentCount count_by_argument_principle(const EllipticFunction& f, Evaluable g, const Region& r) {
    const EllipticFunction base = f.base();
    auto h = [&](cplx z) {
        if (g == Evaluable::f) {
            const QuotientJet j = f.quotient_jet(z);
            return j.p[1] / j.p[0] - j.q[1] / j.q[0];
        }
        const LogJet j = base.log_jet(z);
        return j.w2 / j.w1;
    };
    if (r.circle) return count_in_circle(h, r.center, r.rho);
    return count_in_parallelogram(h, r.z0, r.e1, r.e2);
}

namespace detail {

inline std::vector<cplx> divisor_points(const EllipticFunction& f) {
    std::vector<cplx> pts;
    for (const auto& a : f.divisor().zeros) pts.push_back(a.z);
    for (const auto& b : f.divisor().poles) pts.push_back(b.z);
    return pts;
}

/// Newton on w′ from a seed. Returns the converged point (unnormalized).
inline std::optional<cplx> newton_on_w1(const EllipticFunction& g, cplx z, const CriticalSearchOptions& opt) {
    const Lattice& L = g.lattice();
    const double s = L.scale();
    try {
        double last = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opt.newton_iters; ++it) {
            const LogJet j = g.log_jet(z);
            if (j.w2 == cplx(0.0)) return std::nullopt;
            cplx step = j.w1 / j.w2;
            const double a = std::abs(step);
            if (!std::isfinite(a)) return std::nullopt;
            if (a > 0.25 * s) step *= 0.25 * s / a;
            z -= step;
            last = a;
            if (a < 1e-15 * s) break;
        }
        // multiple roots converge only linearly: a vanishing step also
        // qualifies, the argument principle confirms the root afterwards
        const LogJet j = g.log_jet(z);
        if (std::abs(j.w1) * s < opt.residual_tol || last < 1e-9 * s) return normalize(L, z).rep;
    } catch (const PoleProximity&) {
    }
    return std::nullopt;
}

struct LocatedRoot {
    cplx z;
    int mult;
    double rho;     ///< radius of the last consistent count
    double capture; ///< seeds converging within this distance are the same root
};

/// Multiplicity and centroid of the zero cluster of w′ around z. The radius
/// shrinks ×10 while the count is ambiguous (it changes on shrinking).
inline LocatedRoot resolve_root(const EllipticFunction& g, cplx z, const CriticalSearchOptions& opt) {
    const Lattice& L = g.lattice();
    double rho = opt.multiplicity_radius * L.scale();
    rho = std::min(rho, 0.5 * g.divisor_distance(z));
    const cplx newton_point = z;
    auto h = [&](cplx w) {
        const LogJet j = g.log_jet(w);
        return j.w2 / j.w1;
    };
    int k = count_in_circle(h, z, rho).count;
    for (int shrink = 0; shrink < 3 && k >= 2; ++shrink) {
        // centroid of the enclosed roots: (1/2πi)∮ w·w″/w′ dw / k
        const int n = 256;
        cplx m = 0.0;
        for (int i = 0; i < n; ++i) {
            const cplx d = std::polar(rho, 2.0 * kPi * (i + 0.5) / n);
            m += (z + d) * h(z + d) * d;
        }
        const cplx centroid = m / double(n) / double(k);
        rho *= 0.1;
        const int k2 = count_in_circle(h, centroid, rho).count;
        if (k2 == k) {
            z = centroid;
            continue;
        }
        // distinct roots: Newton converged to one of them, count around it
        z = newton_point;
        k = count_in_circle(h, z, rho).count;
    }
    // a neighbouring root may lie just outside the final circle
    return {normalize(L, z).rep, k, rho, rho};
}

} // namespace detail

/// All critical points of f with multiplicity, certified by the argument
/// principle: the multiplicities sum to K = A + B and the full-cell count of
/// w′ (zeros minus its K simple poles) is 0. Each value field holds f(z*).
inline std::vector<Equilibrium> critical_points(const EllipticFunction& f, const CriticalSearchOptions& opt = {}) {
    const EllipticFunction g = f.base();
    const Lattice& L = f.lattice();
    const int K = f.critical_count();
    const cplx r1 = L.reduced_omega1(), r2 = L.reduced_omega2();
    std::vector<detail::LocatedRoot> roots;

    auto absorb = [&](cplx z) {
        for (const auto& r : roots)
            if (L.torus_distance(r.z, z) < r.capture) return;
        if (g.divisor_distance(z) < 1e-6 * L.scale()) return;
        const auto r = detail::resolve_root(g, z, opt);
        if (r.mult >= 1) roots.push_back(r);
    };
    auto total = [&] {
        int t = 0;
        for (const auto& r : roots) t += r.mult;
        return t;
    };

    // close divisor clusters hide critical points whose Newton basin is
    // smaller than the grid spacing: seed around each such pair directly
    {
        const std::vector<cplx> pts = detail::divisor_points(g);
        const double near = 4.0 * L.scale() / opt.grid;
        std::vector<cplx> seeds;
        for (std::size_t i = 0; i < pts.size(); ++i)
            for (std::size_t j = i + 1; j < pts.size(); ++j) {
                const cplx d = normalize(L, pts[j] - pts[i]).rep;
                cplx dd = d;
                for (cplx w : {d - r1, d + r1, d - r2, d + r2, d - r1 - r2, d + r1 + r2, d - r1 + r2, d + r1 - r2})
                    if (std::abs(w) < std::abs(dd)) dd = w;
                const double sep = std::abs(dd);
                if (sep == 0.0 || sep > near) continue;
                const cplx mid = pts[i] + 0.5 * dd;
                seeds.push_back(mid);
                for (int k = 0; k < 8; ++k) seeds.push_back(mid + std::polar(sep, 2.0 * kPi * k / 8));
            }
        std::vector<std::optional<cplx>> hits(seeds.size());
        parallel_for(seeds.size(), [&](std::size_t i) { hits[i] = detail::newton_on_w1(g, seeds[i], opt); });
        for (const auto& h : hits)
            if (h) absorb(*h);
    }

    int rounds = 0;
    for (int n = opt.grid; n <= opt.max_grid; n *= 2, ++rounds) {
        std::vector<std::optional<cplx>> hits(std::size_t(n) * n);
        parallel_for(hits.size(), [&](std::size_t idx) {
            const int i = int(idx / n), j = int(idx % n);
            const cplx seed = ((i + 0.5) / n) * r1 + ((j + 0.5) / n) * r2;
            hits[idx] = detail::newton_on_w1(g, seed, opt);
        });
        for (const auto& h : hits)
            if (h) absorb(*h);
        if (total() == K) break;
    }
    if (total() != K)
        throw ConvergenceFailure("critical point census failed: located " + std::to_string(total()) + " of " +
                                 std::to_string(K) + " after " + std::to_string(rounds) + " refinement rounds");

    // completeness cross-check over the full shifted cell
    std::vector<cplx> avoid = detail::divisor_points(f);
    for (const auto& r : roots) avoid.push_back(r.z);
    const ArgumentCount cell = count_by_argument_principle(f, Evaluable::w_prime, Region::cell(L, avoid));
    if (cell.count != 0) throw ConvergenceFailure("argument principle on the cell disagrees with the census");

    std::sort(roots.begin(), roots.end(), [&](const auto& a, const auto& b) {
        const auto ta = L.barycentric(a.z), tb = L.barycentric(b.z);
        return std::tie(ta[0], ta[1]) < std::tie(tb[0], tb[1]);
    });
    std::vector<Equilibrium> out;
    for (std::size_t i = 0; i < roots.size(); ++i) {
        Equilibrium e;
        e.z = roots[i].z;
        e.kind = EquilibriumKind::critical;
        e.mult = roots[i].mult;
        e.hyperbolic = e.mult == 1;
        e.value = f.quotient_jet(e.z).value();
        e.index = int(i);
        out.push_back(e);
    }
    return out;
}

/// Local phase portrait of an equilibrium.
inline Classification classify(const FlowField& F, const Equilibrium& e) {
    const EllipticFunction& f = F.function();
    Classification c;
    c.k = e.mult;
    c.eigenvalues = F.jacobian(e.z).eigenvalues();
    if (e.kind == EquilibriumKind::zero) {
        c.type = LocalType::attractor;
        c.hyperbolic = e.mult == 1;
        return c;
    }
    if (e.kind == EquilibriumKind::pole) {
        c.type = LocalType::repellor;
        c.hyperbolic = e.mult == 1;
        return c;
    }
    c.type = LocalType::saddle;
    c.hyperbolic = e.mult == 1;
    // f − f(z*) ≈ β·d^{k+1}; arg f stays at arg f(z*) along d^{k+1} ∥ f(z*)/β,
    // with |f| growing away from z* on the stable directions
    const int k = e.mult;
    const QuotientJet j = f.quotient_jet(e.z);
    const cplx v = j.value();
    cplx beta;
    if (k == 1) {
        beta = 0.5 * j.second();
    } else {
        double rho = 0.05 * f.lattice().scale();
        rho = std::min(rho, 0.25 * f.pole_distance(e.z));
        if (!f.zeros_stale()) rho = std::min(rho, 0.25 * f.zero_distance(e.z));
        beta = detail::circle_mean(
            [&](cplx z, int) { return (f.quotient_jet(z).value() - v) / detail::ipow(z - e.z, k + 1); }, e.z, rho, 128);
    }
    const double base = std::arg(v) - std::arg(beta);
    for (int i = 0; i <= k; ++i) {
        c.stable_dirs.push_back(std::polar(1.0, (base + 2.0 * kPi * i) / (k + 1)));
        c.unstable_dirs.push_back(std::polar(1.0, (base + kPi + 2.0 * kPi * i) / (k + 1)));
    }
    return c;
}

/// Zeros (recovered for a shifted function), poles and critical points, with
/// Jacobian eigenvalues filled in.
inline std::vector<Equilibrium> locate_all(const FlowField& F, const CriticalSearchOptions& opt = {}) {
    const EllipticFunction& f = F.function();
    const Lattice& L = f.lattice();
    std::vector<Equilibrium> out;
    const auto zeros = f.zeros_stale() ? recover_zeros(f) : f.divisor().zeros;
    for (std::size_t i = 0; i < zeros.size(); ++i) {
        Equilibrium e;
        e.z = normalize(L, zeros[i].z).rep;
        e.kind = EquilibriumKind::zero;
        e.mult = zeros[i].mult;
        e.hyperbolic = e.mult == 1;
        e.index = int(i);
        out.push_back(e);
    }
    const auto& poles = f.divisor().poles;
    for (std::size_t i = 0; i < poles.size(); ++i) {
        Equilibrium e;
        e.z = normalize(L, poles[i].z).rep;
        e.kind = EquilibriumKind::pole;
        e.mult = poles[i].mult;
        e.hyperbolic = e.mult == 1;
        e.value = std::numeric_limits<double>::infinity();
        e.index = int(i);
        out.push_back(e);
    }
    for (auto& e : critical_points(f, opt)) out.push_back(e);
    for (auto& e : out) e.eigenvalues = F.jacobian(e.z).eigenvalues();
    return out;
}

/// Integration targets for a list of equilibria; simple saddles carry their
/// unstable direction and critical value argument.
inline std::vector<Target> make_targets(const FlowField& F, const std::vector<Equilibrium>& eqs) {
    std::vector<Target> out;
    for (const auto& e : eqs) {
        Target t{e.z, e.kind, e.index, e.mult};
        if (e.kind == EquilibriumKind::critical) {
            t.arg = std::arg(e.value);
            if (e.mult == 1) t.unstable_dir = classify(F, e).unstable_dirs[0];
        }
        out.push_back(t);
    }
    return out;
}

} // namespace newtonflow

#endif // NEWTONFLOW_EQUILIBRIA_HPP
