#ifndef NEWTONFLOW_PORTRAIT_HPP
#define NEWTONFLOW_PORTRAIT_HPP

// Phase portraits: the separatrix skeleton plus filler orbits sampling each
// basin, with SVG export on the fundamental cell.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include "newtonflow/stability.hpp"

namespace newtonflow {

struct Filler {
    int zero = -1; ///< divisor index of the zero the orbit was seeded at
    Trajectory trajectory;
    bool operator==(const Filler&) const = default;
};

struct Portrait {
    EllipticFunction function;
    FieldForm form = FieldForm::desingularized;
    int density = 0;
    std::vector<Equilibrium> equilibria;
    std::vector<Separatrix> separatrices;
    std::vector<Filler> fillers;

    const Lattice& lattice() const { return function.lattice(); }

    int count(EquilibriumKind k) const {
        int n = 0;
        for (const auto& e : equilibria) n += e.kind == k;
        return n;
    }
    /// Separatrices joining two saddles.
    std::vector<std::size_t> connections() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < separatrices.size(); ++i)
            if (separatrices[i].trajectory.end.at_saddle()) out.push_back(i);
        return out;
    }
    /// Separatrices that did not reach an equilibrium.
    std::vector<std::size_t> undecided() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < separatrices.size(); ++i)
            if (!separatrices[i].trajectory.end.at_equilibrium()) out.push_back(i);
        return out;
    }
};

struct PortraitOptions {
    SeparatrixOptions separatrix;
    CriticalSearchOptions search;
    TrajectoryOptions filler;        ///< direction and targets are overridden
    double seed_radius = 1e-3;       ///< filler seed circle, relative to the lattice scale
};

namespace detail {

/// Point on the circle |z − a| = rho where arg f = theta, found by Newton on
/// the angle starting at phi0 (arg f winds k times around a k-fold zero).
inline cplx seed_on_circle(const EllipticFunction& f, cplx a, int k, double rho, double theta, double phi) {
    for (int it = 0; it < 50; ++it) {
        const double g = std::remainder(std::arg(f.eval(a + std::polar(rho, phi))) - theta, 2 * kPi);
        phi -= g / k;
        if (std::abs(g) < 1e-14) break;
    }
    return a + std::polar(rho, phi);
}

/// `n` arg values spread over the circle, none within `gap` of a value in `avoid`.
inline std::vector<double> interleaved_args(const std::vector<double>& avoid, int n) {
    const double base = avoid.empty() ? 0.0 : avoid.front();
    const double step = 2 * kPi / n;
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        double th = base + step * (i + 0.5);
        for (double a : avoid)
            if (std::abs(std::remainder(th - a, 2 * kPi)) < 0.05 * step) th += 0.25 * step;
        out.push_back(std::remainder(th, 2 * kPi));
    }
    return out;
}

} // namespace detail

/// All four separatrices of every saddle (2(k+1) for a k-fold one) and
/// `density` backward orbits per zero, seeded on a small circle at arg f
/// values interleaved with the separatrices arriving at that zero.
inline Portrait build_portrait(const FlowField& F, int density, const PortraitOptions& opt = {}) {
    if (density < 0) throw InvalidInput("portrait density must be non-negative");
    if (F.function().zeros_stale())
        throw InvalidInput("portrait needs a sigma-product function; absorb the shift first");
    const EllipticFunction& f = F.function();
    const Lattice& L = f.lattice();
    Portrait p{f, F.form(), density, {}, {}, {}};
    p.equilibria = locate_all(F, opt.search);
    p.separatrices = trace_separatrices(F, p.equilibria, true, opt.separatrix);
    if (density == 0) return p;

    const std::vector<Target> targets = make_targets(F, p.equilibria);
    struct Job {
        int zero;
        cplx seed;
    };
    std::vector<Job> jobs;
    for (const auto& e : p.equilibria) {
        if (e.kind != EquilibriumKind::zero) continue;
        std::vector<double> arrive;
        for (const auto& s : p.separatrices) {
            const auto& end = s.trajectory.end;
            if (s.unstable && end.kind == EndKind::zero && end.index == e.index)
                arrive.push_back(std::remainder(s.trajectory.samples.back().argf, 2 * kPi));
        }
        std::sort(arrive.begin(), arrive.end());
        double near = L.scale();
        for (const auto& o : p.equilibria)
            if (&o != &e) near = std::min(near, L.torus_distance(o.z, e.z));
        const double rho = std::min(opt.seed_radius * L.scale(), 0.1 * near);
        const auto args = detail::interleaved_args(arrive, density);
        for (int i = 0; i < density; ++i) {
            const double phi0 = 2 * kPi * (i % e.mult) / e.mult;
            jobs.push_back({e.index, detail::seed_on_circle(f, e.z, e.mult, rho, args[i], phi0)});
        }
    }
    p.fillers.resize(jobs.size());
    parallel_for(jobs.size(), [&](std::size_t i) {
        TrajectoryOptions to = opt.filler;
        to.direction = Direction::backward;
        to.targets = targets;
        p.fillers[i] = {jobs[i].zero, integrate(F, jobs[i].seed, to)};
    });
    return p;
}

inline Portrait build_portrait(const EllipticFunction& f, int density, const PortraitOptions& opt = {}) {
    return build_portrait(FlowField(f), density, opt);
}

/// Every filler's arg value differs from the arg values of the separatrices
/// arriving at its zero, so no filler runs along a separatrix.
inline bool fillers_interleave(const Portrait& p, double tol = 1e-9) {
    for (const auto& fl : p.fillers)
        for (const auto& s : p.separatrices) {
            const auto& end = s.trajectory.end;
            if (!s.unstable || end.kind != EndKind::zero || end.index != fl.zero) continue;
            const double d = std::remainder(fl.trajectory.arg_value - s.trajectory.samples.back().argf, 2 * kPi);
            if (std::abs(d) <= tol) return false;
        }
    return true;
}

// ---------------------------------------------------------------------------
// Wrapping onto the fundamental cell {t₁ω₁ + t₂ω₂ : 0 ≤ t₁, t₂ ≤ 1}

/// Split an unwrapped polyline into pieces inside the cell. A piece ends on
/// the cell boundary where the path leaves, and the next one starts at the
/// congruent boundary point on the opposite edge.
inline constexpr double kWrapSlack = 1e-9; ///< in cell coordinates

inline std::vector<std::vector<cplx>> wrap_split(const Lattice& L, const std::vector<cplx>& path) {
    std::vector<std::vector<cplx>> out;
    if (path.empty()) return out;
    auto bary = [&](cplx z) {
        const auto t = L.barycentric(z);
        return std::array<double, 2>{t[0], t[1]};
    };
    std::array<double, 2> a = bary(path[0]);
    std::array<double, 2> n{std::floor(a[0] + kWrapSlack), std::floor(a[1] + kWrapSlack)};
    auto local = [&](const std::array<double, 2>& t) { return L.from_barycentric(t[0] - n[0], t[1] - n[1]); };
    std::vector<cplx> cur{local(a)};
    for (std::size_t i = 1; i < path.size(); ++i) {
        const std::array<double, 2> b = bary(path[i]);
        for (int guard = 0; guard < 64; ++guard) {
            double s = 2.0;
            int dim = -1, dir = 0;
            for (int d = 0; d < 2; ++d) {
                // paths running along an edge would flicker between opposite
                // sides on rounding noise, so leaving needs a margin
                if (b[d] > n[d] + 1.0 + kWrapSlack && b[d] != a[d]) {
                    const double sd = std::max(0.0, (n[d] + 1.0 - a[d]) / (b[d] - a[d]));
                    if (sd < s) s = sd, dim = d, dir = 1;
                } else if (b[d] < n[d] - kWrapSlack && b[d] != a[d]) {
                    const double sd = std::max(0.0, (n[d] - a[d]) / (b[d] - a[d]));
                    if (sd < s) s = sd, dim = d, dir = -1;
                }
            }
            if (dim < 0) break;
            std::array<double, 2> c{a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])};
            c[dim] = dir > 0 ? n[dim] + 1.0 : n[dim];
            const int other = 1 - dim;
            c[other] = std::clamp(c[other], n[other] - kWrapSlack, n[other] + 1.0 + kWrapSlack);
            cur.push_back(local(c));
            if (cur.size() >= 2) out.push_back(std::move(cur));
            n[dim] += dir;
            cur = {local(c)};
            a = c;
        }
        cur.push_back(local(b));
        a = b;
    }
    if (cur.size() >= 2) out.push_back(std::move(cur));
    return out;
}

inline std::vector<std::vector<cplx>> wrap_split(const Lattice& L, const Trajectory& tr) {
    std::vector<cplx> pts;
    pts.reserve(tr.samples.size());
    for (const auto& s : tr.samples) pts.push_back(s.z);
    return wrap_split(L, pts);
}

// ---------------------------------------------------------------------------
// SVG

struct SvgOptions {
    double width = 800.0; ///< pixels; the height follows the cell's aspect ratio
    double margin = 30.0;
    bool fillers = true;
    bool labels = true;
};

namespace detail {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", x);
    std::string s(buf);
    if (s == "-0.000") s = "0.000";
    return s;
}

} // namespace detail

/// SVG 1.1 rendering: the cell with its identified edges ticked (one tick on
/// the ω₁ edges, two on the ω₂ edges), trajectories split at wraps, zeros ○,
/// poles ●, saddles +. Saddle connections are drawn in red, undecided
/// separatrices dashed. Output depends only on the portrait.
inline std::string export_svg(const Portrait& p, const SvgOptions& opt = {}) {
    const Lattice& L = p.lattice();
    const cplx w1 = L.omega1(), w2 = L.omega2();
    const cplx corners[4] = {0.0, w1, w1 + w2, w2};
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    for (cplx c : corners) {
        xmin = std::min(xmin, c.real()), xmax = std::max(xmax, c.real());
        ymin = std::min(ymin, c.imag()), ymax = std::max(ymax, c.imag());
    }
    const double k = (opt.width - 2 * opt.margin) / (xmax - xmin);
    const double height = k * (ymax - ymin) + 2 * opt.margin;
    auto X = [&](cplx z) { return detail::fmt(opt.margin + k * (z.real() - xmin)); };
    auto Y = [&](cplx z) { return detail::fmt(opt.margin + k * (ymax - z.imag())); };
    auto pt = [&](cplx z) { return X(z) + "," + Y(z); };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << detail::fmt(opt.width)
       << "\" height=\"" << detail::fmt(height) << "\" viewBox=\"0 0 " << detail::fmt(opt.width) << " "
       << detail::fmt(height) << "\">\n"
       << "<style>\n"
       << "  .cell{fill:none;stroke:#444;stroke-width:1}\n"
       << "  .tick{stroke:#444;stroke-width:1.5}\n"
       << "  .filler{fill:none;stroke:#9ab;stroke-width:0.8}\n"
       << "  .separatrix{fill:none;stroke:#124;stroke-width:1.4}\n"
       << "  .connection{fill:none;stroke:#d22;stroke-width:2.4}\n"
       << "  .undecided{fill:none;stroke:#e80;stroke-width:1.4;stroke-dasharray:4 3}\n"
       << "  .zero{fill:#fff;stroke:#000;stroke-width:1.4}\n"
       << "  .pole{fill:#000;stroke:#000}\n"
       << "  .saddle{stroke:#000;stroke-width:1.8}\n"
       << "  text{font-family:sans-serif;font-size:11px}\n"
       << "</style>\n";

    os << "<polygon class=\"cell\" points=\"" << pt(corners[0]) << " " << pt(corners[1]) << " " << pt(corners[2])
       << " " << pt(corners[3]) << "\"/>\n";
    // identified edges: matching tick marks on opposite sides
    auto ticks = [&](cplx from, cplx along, cplx across, int count) {
        const double len = 6.0 / k;
        const cplx nrm = across / std::abs(across) * len;
        for (int i = 0; i < count; ++i) {
            const cplx m = from + along * (0.5 + 0.02 * (i - 0.5 * (count - 1)));
            os << "<line class=\"tick\" x1=\"" << X(m - nrm) << "\" y1=\"" << Y(m - nrm) << "\" x2=\"" << X(m + nrm)
               << "\" y2=\"" << Y(m + nrm) << "\"/>\n";
        }
    };
    ticks(0.0, w1, w2, 1);
    ticks(w2, w1, w2, 1);
    ticks(0.0, w2, w1, 2);
    ticks(w1, w2, w1, 2);

    auto polyline = [&](const Trajectory& tr, const char* cls) {
        for (const auto& piece : wrap_split(L, tr)) {
            os << "<polyline class=\"" << cls << "\" points=\"";
            for (std::size_t i = 0; i < piece.size(); ++i) os << (i ? " " : "") << pt(piece[i]);
            os << "\"/>\n";
        }
    };
    // stroke order: by the location of the source equilibrium, then build order
    auto loc_key = [&](int kind, int index) {
        for (const auto& e : p.equilibria)
            if (int(e.kind) == kind && e.index == index) {
                const auto t = L.barycentric(normalize(L, e.z).rep);
                return std::array<double, 2>{t[0], t[1]};
            }
        return std::array<double, 2>{0.0, 0.0};
    };
    if (opt.fillers) {
        std::vector<std::size_t> order(p.fillers.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return loc_key(int(EquilibriumKind::zero), p.fillers[a].zero) <
                   loc_key(int(EquilibriumKind::zero), p.fillers[b].zero);
        });
        os << "<g id=\"fillers\">\n";
        for (std::size_t i : order) polyline(p.fillers[i].trajectory, "filler");
        os << "</g>\n";
    }
    std::vector<std::size_t> order(p.separatrices.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return loc_key(int(EquilibriumKind::critical), p.separatrices[a].saddle) <
               loc_key(int(EquilibriumKind::critical), p.separatrices[b].saddle);
    });
    os << "<g id=\"separatrices\">\n";
    for (std::size_t i : order) {
        const auto& end = p.separatrices[i].trajectory.end;
        const char* cls = end.at_saddle() ? "connection" : end.at_equilibrium() ? "separatrix" : "undecided";
        polyline(p.separatrices[i].trajectory, cls);
    }
    os << "</g>\n";

    // markers, numbered in the order zeros, poles, saddles
    os << "<g id=\"equilibria\">\n";
    int label = 0;
    for (EquilibriumKind kind : {EquilibriumKind::zero, EquilibriumKind::pole, EquilibriumKind::critical})
        for (const auto& e : p.equilibria) {
            if (e.kind != kind) continue;
            ++label;
            const cplx z = normalize(L, e.z).rep;
            if (kind == EquilibriumKind::critical) {
                const double r = 5.0 / k;
                os << "<path class=\"saddle\" d=\"M" << pt(z - r) << " L" << pt(z + r) << " M"
                   << pt(z - cplx(0, r)) << " L" << pt(z + cplx(0, r)) << "\"/>\n";
            } else {
                os << "<circle class=\"" << (kind == EquilibriumKind::zero ? "zero" : "pole") << "\" cx=\"" << X(z)
                   << "\" cy=\"" << Y(z) << "\" r=\"4.000\"/>\n";
            }
            if (opt.labels) {
                std::string text = std::to_string(label);
                if (e.mult > 1) text += " (" + std::to_string(e.mult) + "x)";
                os << "<text x=\"" << detail::fmt(opt.margin + k * (z.real() - xmin) + 6) << "\" y=\""
                   << detail::fmt(opt.margin + k * (ymax - z.imag()) - 6) << "\">" << text << "</text>\n";
            }
        }
    os << "</g>\n</svg>\n";
    return os.str();
}

} // namespace newtonflow

#endif // NEWTONFLOW_PORTRAIT_HPP
