#ifndef NEWTONFLOW_FLOW_HPP
#define NEWTONFLOW_FLOW_HPP

// Newton vector fields of an elliptic function and trajectory integration.
//
//   meromorphic     dz/dt = −f/f′
//   desingularized  dz/dt = −conj(f′)·f / (1 + |f|⁴)
//   pq              dz/dt = −(p·conj(p′)|q|² − q·conj(q′)|p|²) / (|p|⁴ + |q|⁴),  f = p/q
//
// The last two are the same field. The desingularized form is evaluated in
// the chart where it is bounded: through f when |f| ≤ 1 and through h = 1/f
// otherwise (where it reads +conj(h′)·h / (1 + |h|⁴)).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "newtonflow/efun.hpp"
#include "newtonflow/error.hpp"
#include "newtonflow/lattice.hpp"
#include "newtonflow/parallel.hpp"

namespace newtonflow {

enum class FieldForm { meromorphic, desingularized, pq };

inline const char* to_string(FieldForm f) {
    switch (f) {
    case FieldForm::meromorphic: return "meromorphic";
    case FieldForm::desingularized: return "desingularized";
    case FieldForm::pq: return "pq";
    }
    return "?";
}

/// Real 2×2 matrix, row-major, acting on (Re z, Im z).
struct Matrix2 {
    std::array<double, 4> a{};

    double trace() const { return a[0] + a[3]; }
    double det() const { return a[0] * a[3] - a[1] * a[2]; }
    std::array<cplx, 2> eigenvalues() const {
        const double h = 0.5 * trace();
        const cplx r = std::sqrt(cplx(h * h - det(), 0.0));
        // larger real part second
        std::array<cplx, 2> ev{h - r, h + r};
        if (ev[0].real() > ev[1].real()) std::swap(ev[0], ev[1]);
        return ev;
    }
    cplx apply(cplx v) const {
        return {a[0] * v.real() + a[1] * v.imag(), a[2] * v.real() + a[3] * v.imag()};
    }
};

class FlowField {
public:
    explicit FlowField(EllipticFunction f, FieldForm form = FieldForm::desingularized)
        : f_(std::move(f)), form_(form) {}

    const EllipticFunction& function() const { return f_; }
    const Lattice& lattice() const { return f_.lattice(); }
    FieldForm form() const { return form_; }

    /// Velocity at z. The desingularized and pq forms are total and vanish at
    /// zeros, poles and critical points. The meromorphic form throws
    /// PoleProximity at critical points.
    cplx velocity(cplx z) const { return probe(z).v; }

    /// Jacobian of the velocity with respect to (Re z, Im z).
    Matrix2 jacobian(cplx z) const {
        if (!is_finite(z)) throw InvalidInput("jacobian: point must be finite");
        const QuotientJet j = f_.quotient_jet(z);
        const bool flip = std::abs(j.p[0]) > std::abs(j.q[0]);
        const QuotientJet g = flip ? j.swapped() : j;
        const cplx F = g.value(), F1 = g.deriv(), F2 = g.second();
        cplx vz, vzb;
        if (form_ == FieldForm::meromorphic) {
            // −f/f′ in the f chart, +h/h′ in the h chart; both holomorphic
            if (F1 == cplx(0.0)) throw PoleProximity("meromorphic Newton field is singular at a critical point");
            const cplx d = F * F2 / (F1 * F1);
            vz = flip ? 1.0 - d : -1.0 + d;
            vzb = 0.0;
        } else {
            // v = s·g·conj(F′)·F with g = 1/(1 + |F|⁴), via Wirtinger derivatives
            const double s = flip ? 1.0 : -1.0;
            const double a2 = std::norm(F);
            const double gi = 1.0 / (1.0 + a2 * a2);
            const cplx cF1 = std::conj(F1);
            const cplx gz = -gi * gi * 2.0 * a2 * F1 * std::conj(F);
            const cplx gzb = std::conj(gz);
            vz = s * (gz * cF1 * F + gi * cF1 * F1);
            vzb = s * (gzb * cF1 * F + gi * std::conj(F2) * F);
        }
        const cplx vx = vz + vzb;
        const cplx vy = cplx(0.0, 1.0) * (vz - vzb);
        return Matrix2{{vx.real(), vy.real(), vx.imag(), vy.imag()}};
    }

    /// Velocity together with |f| and arg f, from a single σ-product evaluation.
    struct Probe {
        cplx v;
        double absf;
        double argf;
    };

    Probe probe(cplx z) const {
        if (!is_finite(z)) throw InvalidInput("field: point must be finite");
        const QuotientJet j = f_.quotient_jet(z);
        Probe out;
        const double ap = std::abs(j.p[0]), aq = std::abs(j.q[0]);
        out.absf = aq == 0.0 ? std::numeric_limits<double>::infinity() : ap / aq;
        out.argf = std::arg(j.p[0]) - std::arg(j.q[0]);
        switch (form_) {
        case FieldForm::meromorphic: out.v = meromorphic(j); break;
        case FieldForm::desingularized: out.v = desingularized(j); break;
        case FieldForm::pq: out.v = pq(j); break;
        }
        return out;
    }

private:
    static cplx meromorphic(const QuotientJet& j) {
        // −f/f′ = −p·q / (p′q − p·q′), finite at zeros and poles
        const cplx den = j.p[1] * j.q[0] - j.p[0] * j.q[1];
        const cplx num = j.p[0] * j.q[0];
        if (num == cplx(0.0)) return 0.0;
        const cplx v = -num / den;
        if (den == cplx(0.0) || !is_finite(v))
            throw PoleProximity("meromorphic Newton field is singular at a critical point");
        return v;
    }

    static cplx desingularized(const QuotientJet& j) {
        if (std::abs(j.p[0]) <= std::abs(j.q[0])) {
            const cplx F = j.value(), F1 = j.deriv();
            const double a2 = std::norm(F);
            return -std::conj(F1) * F / (1.0 + a2 * a2);
        }
        const QuotientJet h = j.swapped();
        const cplx F = h.value(), F1 = h.deriv();
        const double a2 = std::norm(F);
        return std::conj(F1) * F / (1.0 + a2 * a2);
    }

    static cplx pq(const QuotientJet& j) {
        const cplx p = j.p[0], p1 = j.p[1], q = j.q[0], q1 = j.q[1];
        const double np = std::norm(p), nq = std::norm(q);
        const double den = np * np + nq * nq;
        if (den == 0.0) return 0.0;
        return -(p * std::conj(p1) * nq - q * std::conj(q1) * np) / den;
    }

    EllipticFunction f_;
    FieldForm form_;
};

inline cplx field_at(const FlowField& F, cplx z) { return F.velocity(z); }
inline Matrix2 jacobian_at(const FlowField& F, cplx z) { return F.jacobian(z); }

/// One damped Newton step z − t·f/f′.
inline cplx newton_step(const EllipticFunction& f, cplx z, double t) {
    if (!is_finite(z) || !std::isfinite(t)) throw InvalidInput("newton_step: arguments must be finite");
    if (f.pole_distance(z) < kEvalPoleTol * f.lattice().scale())
        throw PoleProximity("newton_step: point is at a pole");
    const QuotientJet j = f.quotient_jet(z);
    if (j.p[0] == cplx(0.0)) return z;
    const cplx d = j.deriv();
    if (d == cplx(0.0) || !is_finite(d)) throw PoleProximity("newton_step: f′ vanishes (critical point)");
    return z - t * j.value() / d;
}

/// Steady-stream potential −log f on the principal branch.
inline cplx potential(const EllipticFunction& f, cplx z) {
    if (f.pole_distance(z) < kEvalPoleTol * f.lattice().scale())
        throw PoleProximity("potential: point is at a pole");
    const cplx v = f.eval(z);
    if (!f.zeros_stale() && f.zero_distance(z) < kEvalPoleTol * f.lattice().scale())
        throw PoleProximity("potential: point is at a zero");
    if (v == cplx(0.0)) throw PoleProximity("potential: point is at a zero");
    return -std::log(v);
}

// ---------------------------------------------------------------------------
// Trajectories

enum class EquilibriumKind { zero, pole, critical };

inline const char* to_string(EquilibriumKind k) {
    switch (k) {
    case EquilibriumKind::zero: return "zero";
    case EquilibriumKind::pole: return "pole";
    case EquilibriumKind::critical: return "critical";
    }
    return "?";
}

enum class Direction { forward, backward };

inline const char* to_string(Direction d) { return d == Direction::forward ? "forward" : "backward"; }

/// An equilibrium the integrator may terminate at.
struct Target {
    cplx z;
    EquilibriumKind kind;
    int index = -1;
    int mult = 1;
    /// Unit unstable eigendirection of a simple saddle, 0 when unknown. Used
    /// to reject captures that are really a close saddle passage.
    cplx unstable_dir = 0.0;
    /// arg f at a critical point (for separatrix hit tests).
    double arg = 0.0;
};

/// Zeros and poles of the divisor as targets. Zeros are omitted for a shifted
/// function since they are not known without recovery.
inline std::vector<Target> divisor_targets(const EllipticFunction& f) {
    std::vector<Target> out;
    if (!f.zeros_stale()) {
        const auto& zs = f.divisor().zeros;
        for (std::size_t i = 0; i < zs.size(); ++i)
            out.push_back({zs[i].z, EquilibriumKind::zero, int(i), zs[i].mult});
    }
    const auto& ps = f.divisor().poles;
    for (std::size_t i = 0; i < ps.size(); ++i) out.push_back({ps[i].z, EquilibriumKind::pole, int(i), ps[i].mult});
    return out;
}

enum class EndKind { zero, pole, saddle, saddle_hit, budget, time_limit, step_underflow };

inline const char* to_string(EndKind k) {
    switch (k) {
    case EndKind::zero: return "zero";
    case EndKind::pole: return "pole";
    case EndKind::saddle: return "saddle";
    case EndKind::saddle_hit: return "saddle_hit";
    case EndKind::budget: return "budget";
    case EndKind::time_limit: return "time_limit";
    case EndKind::step_underflow: return "step_underflow";
    }
    return "?";
}

struct Endpoint {
    EndKind kind = EndKind::budget;
    int target = -1; ///< position in the target list, or −1
    int index = -1;  ///< the target's own index
    cplx z = 0.0;    ///< the equilibrium location when attached

    bool at_equilibrium() const {
        return kind == EndKind::zero || kind == EndKind::pole || kind == EndKind::saddle ||
               kind == EndKind::saddle_hit;
    }
    bool at_saddle() const { return kind == EndKind::saddle || kind == EndKind::saddle_hit; }
    bool operator==(const Endpoint&) const = default;
};

struct Sample {
    double t;
    cplx z;      ///< unwrapped position (continuous along the trajectory)
    double absf;
    double argf; ///< unwrapped arg f
    cplx v;      ///< dz/dt in the integration direction
    bool operator==(const Sample&) const = default;
};

struct Trajectory {
    std::vector<Sample> samples;
    Direction direction = Direction::forward;
    double arg_value = 0.0; ///< arg f at the start
    Endpoint end;
    double arc_length = 0.0;

    TorusPoint point(const Lattice& L, std::size_t i) const { return normalize(L, samples[i].z); }
    double max_arg_drift() const {
        double d = 0.0;
        for (const auto& s : samples) d = std::max(d, std::abs(s.argf - arg_value));
        return d;
    }
    bool operator==(const Trajectory&) const = default;
};

struct TrajectoryOptions {
    Direction direction = Direction::forward;
    double rtol = 1e-9;
    double atol = 1e-12;
    double max_arc_cells = 50.0; ///< arc-length budget in cell diameters
    long max_steps = 1000000;
    double t_max = std::numeric_limits<double>::infinity();
    double capture_radius = 1e-6; ///< relative to the lattice scale
    double clamp_fraction = 0.1;  ///< step ≤ fraction × distance to the nearest equilibrium
    double max_step_cells = 0.02; ///< step ≤ this many cell diameters
    /// Equilibria to stop at; when empty the divisor targets are used.
    std::vector<Target> targets;
    /// Separatrix mode: also stop near a critical target whose arg f matches.
    bool saddle_hit = false;
    double hit_radius = 1e-4; ///< relative to the lattice scale
    double hit_arg_tol = 1e-5;
    int exclude_target = -1; ///< position of the source saddle in targets
};

namespace detail {

inline bool capture_ok(const Target& tg, Direction dir, cplx d) {
    switch (tg.kind) {
    case EquilibriumKind::zero: return dir == Direction::forward;
    case EquilibriumKind::pole: return dir == Direction::backward;
    case EquilibriumKind::critical: {
        if (tg.unstable_dir == cplx(0.0)) return true;
        const cplx r = d * std::conj(tg.unstable_dir);
        const double unstable = std::abs(r.real()), stable = std::abs(r.imag());
        return dir == Direction::forward ? unstable <= 0.25 * stable : stable <= 0.25 * unstable;
    }
    }
    return false;
}

inline EndKind end_kind(EquilibriumKind k) {
    switch (k) {
    case EquilibriumKind::zero: return EndKind::zero;
    case EquilibriumKind::pole: return EndKind::pole;
    case EquilibriumKind::critical: return EndKind::saddle;
    }
    return EndKind::budget;
}

inline double wrap_pi(double x) { return std::remainder(x, 2.0 * kPi); }

} // namespace detail

/// Integrate the field from z0 with an adaptive Dormand–Prince 5(4) pair.
/// Stops on capture by an equilibrium target, on budget exhaustion, at t_max,
/// or when the step can no longer move the point (reported as step_underflow).
inline Trajectory integrate(const FlowField& F, cplx z0, const TrajectoryOptions& opt = {}) {
    if (!is_finite(z0)) throw InvalidInput("integrate: start point must be finite");
    const Lattice& L = F.lattice();
    const std::vector<Target> targets = opt.targets.empty() ? divisor_targets(F.function()) : opt.targets;
    const double scale = L.scale();
    const double diam = L.diameter();
    const double capture = opt.capture_radius * scale;
    const double hit = opt.hit_radius * scale;
    const double max_arc = opt.max_arc_cells * diam;
    const double sgn = opt.direction == Direction::forward ? 1.0 : -1.0;

    Trajectory tr;
    tr.direction = opt.direction;

    // nearest target and its residual vector
    auto nearest = [&](cplx z, int& idx, cplx& d) {
        double best = std::numeric_limits<double>::infinity();
        idx = -1;
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const cplx r = L.nearest_residual(z - targets[i].z);
            const double a = std::abs(r);
            if (a < best) {
                best = a;
                idx = int(i);
                d = r;
            }
        }
        return best;
    };

    // returns true when the trajectory terminates at a target
    auto check_stop = [&](const Sample& s) {
        int idx;
        cplx d;
        const double dist = nearest(s.z, idx, d);
        if (idx >= 0 && dist < capture && idx != opt.exclude_target && detail::capture_ok(targets[idx], opt.direction, d)) {
            tr.end = {detail::end_kind(targets[idx].kind), idx, targets[idx].index, targets[idx].z};
            return true;
        }
        if (opt.saddle_hit) {
            for (std::size_t i = 0; i < targets.size(); ++i) {
                const Target& tg = targets[i];
                if (tg.kind != EquilibriumKind::critical || int(i) == opt.exclude_target) continue;
                if (L.torus_distance(s.z, tg.z) >= hit) continue;
                if (std::abs(detail::wrap_pi(s.argf - tg.arg)) < opt.hit_arg_tol) {
                    tr.end = {EndKind::saddle_hit, int(i), tg.index, tg.z};
                    return true;
                }
            }
        }
        return false;
    };

    auto eq_distance = [&](cplx z) {
        int idx;
        cplx d;
        return nearest(z, idx, d);
    };

    FlowField::Probe p = F.probe(z0);
    Sample cur{0.0, z0, p.absf, p.argf, sgn * p.v};
    tr.arg_value = p.argf;
    tr.samples.push_back(cur);
    if (check_stop(cur)) return tr;

    // Dormand–Prince 5(4)
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                            b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;

    auto vel = [&](cplx z) { return sgn * F.velocity(z); };

    double h = 0.0;
    long steps = 0;
    for (;;) {
        if (steps >= opt.max_steps || tr.arc_length >= max_arc) {
            tr.end.kind = EndKind::budget;
            return tr;
        }
        if (cur.t >= opt.t_max) {
            tr.end.kind = EndKind::time_limit;
            return tr;
        }
        const cplx k1 = cur.v;
        const double speed = std::abs(k1);
        const double roundoff = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(cur.z), scale);
        if (speed == 0.0) {
            tr.end.kind = EndKind::step_underflow;
            return tr;
        }
        const double dmax = std::min(opt.clamp_fraction * eq_distance(cur.z), opt.max_step_cells * diam);
        const double hclamp = dmax / speed;
        if (h == 0.0) h = hclamp;
        h = std::min(h, hclamp);
        if (cur.t + h > opt.t_max) h = opt.t_max - cur.t;

        // attempt loop
        for (;;) {
            if (h * speed < roundoff && cur.t + h < opt.t_max) {
                tr.end.kind = EndKind::step_underflow;
                return tr;
            }
            const cplx y = cur.z;
            const cplx k2 = vel(y + h * (a21 * k1));
            const cplx k3 = vel(y + h * (a31 * k1 + a32 * k2));
            const cplx k4 = vel(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
            const cplx k5 = vel(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
            const cplx k6 = vel(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
            const cplx yn = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
            const FlowField::Probe pn = F.probe(yn);
            const cplx k7 = sgn * pn.v;
            const cplx err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            const double sc = opt.atol + opt.rtol * std::max(std::abs(y), std::abs(yn));
            const double en = std::abs(err) / (sc * std::sqrt(2.0));
            if (!(en <= 1.0) || !is_finite(yn)) {
                const double fac = std::isfinite(en) ? std::max(0.2, 0.9 * std::pow(en, -0.2)) : 0.2;
                h *= fac;
                continue;
            }
            Sample nx{cur.t + h, yn, pn.absf, cur.argf + detail::wrap_pi(pn.argf - cur.argf), k7};
            tr.arc_length += std::abs(yn - y);
            tr.samples.push_back(nx);
            cur = nx;
            ++steps;
            h *= (en == 0.0) ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(en, -0.2)));
            break;
        }
        if (check_stop(cur)) return tr;
    }
}

inline Trajectory integrate(const FlowField& F, cplx z0, Direction dir) {
    TrajectoryOptions opt;
    opt.direction = dir;
    return integrate(F, z0, opt);
}

/// Integrate from every seed. Output order follows the seeds and does not
/// depend on the thread count.
inline std::vector<Trajectory> integrate_many(const FlowField& F, const std::vector<cplx>& seeds,
                                              const TrajectoryOptions& opt = {}) {
    std::vector<Trajectory> out(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) { out[i] = integrate(F, seeds[i], opt); });
    return out;
}

/// Cubic Hermite refinement of the accepted steps, with consecutive points at
/// most `max_spacing` apart (up to the interpolation error).
inline std::vector<cplx> densify(const Trajectory& tr, double max_spacing) {
    std::vector<cplx> out;
    if (tr.samples.empty()) return out;
    out.push_back(tr.samples.front().z);
    for (std::size_t i = 1; i < tr.samples.size(); ++i) {
        const Sample& a = tr.samples[i - 1];
        const Sample& b = tr.samples[i];
        const double h = b.t - a.t;
        const int n = std::max(1, int(std::ceil(std::abs(b.z - a.z) / max_spacing)));
        for (int k = 1; k <= n; ++k) {
            const double s = double(k) / n;
            const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
            const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
            out.push_back(h00 * a.z + h10 * h * a.v + h01 * b.z + h11 * h * b.v);
        }
    }
    return out;
}

/// CSV with header `t,re,im,absf,argf`; positions are cell representatives.
inline void write_trajectory_csv(std::ostream& os, const Lattice& L, const Trajectory& tr) {
    os << "t,re,im,absf,argf\n";
    const auto old = os.precision(17);
    for (const auto& s : tr.samples) {
        const cplx z = normalize(L, s.z).rep;
        os << s.t << ',' << z.real() << ',' << z.imag() << ',' << s.absf << ',' << s.argf << '\n';
    }
    os.precision(old);
}

} // namespace newtonflow

#endif // NEWTONFLOW_FLOW_HPP
