#ifndef NEWTONFLOW_EFUN_HPP
#define NEWTONFLOW_EFUN_HPP

// Elliptic functions built from a zero/pole divisor through the σ-product
//
//   f(z) = C · Π σ(z − a_i)^{n_i} / [ Π_{j<B} σ(z − b_j)^{m_j} · σ(z − b_B)^{m_B − 1} · σ(z − b′_B) ] + c
//
// where b′_B = Σ n_i a_i − Σ_{j<B} m_j b_j − (m_B − 1) b_B makes the numerator and
// denominator arguments sum to the same value, so every quasi-periodicity
// factor cancels. The function is stored as explicit numerator and
// denominator factor lists; the reciprocal just swaps them.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "newtonflow/error.hpp"
#include "newtonflow/lattice.hpp"
#include "newtonflow/weierstrass.hpp"

namespace newtonflow {

/// A zero or pole representative with its multiplicity.
struct DivisorPoint {
    cplx z;
    int mult = 1;
    bool operator==(const DivisorPoint&) const = default;
};

/// Zeros and poles with multiplicities. Representatives are kept exactly as
/// supplied (not wrapped into the cell) so that λ⁰ = Σ n·a − Σ m·b is an exact
/// lattice element of the stored data.
struct Divisor {
    std::vector<DivisorPoint> zeros;
    std::vector<DivisorPoint> poles;
    std::array<std::int64_t, 2> lambda0{0, 0}; ///< coefficients of λ⁰ in the lattice basis

    int order() const {
        int r = 0;
        for (const auto& p : zeros) r += p.mult;
        return r;
    }
    /// Number of distinct zeros and poles, which is also the critical-point count.
    int K() const { return int(zeros.size() + poles.size()); }
    cplx lambda0_value(const Lattice& L) const { return L.point(lambda0[0], lambda0[1]); }

    bool operator==(const Divisor&) const = default;
};

inline constexpr double kDivisorTol = 1e-9;
/// Pole-proximity radius for evaluating f, relative to the lattice scale.
inline constexpr double kEvalPoleTol = 1e-7;

/// Σ n·a − Σ m·b over the stored representatives.
inline cplx abel_sum(const std::vector<DivisorPoint>& zeros, const std::vector<DivisorPoint>& poles) {
    cplx s = 0.0;
    for (const auto& p : zeros) s += double(p.mult) * p.z;
    for (const auto& p : poles) s -= double(p.mult) * p.z;
    return s;
}

/// Check a divisor against the constraints an elliptic function imposes and
/// record λ⁰. Throws InvalidInput on any violation.
inline Divisor validate_divisor(const Lattice& L, std::vector<DivisorPoint> zeros, std::vector<DivisorPoint> poles,
                                double tol = kDivisorTol) {
    if (!(tol > 0.0)) throw InvalidInput("divisor tolerance must be positive");
    if (zeros.empty() || poles.empty()) throw InvalidInput("divisor needs at least one zero and one pole");
    int nz = 0, np = 0;
    for (const auto& p : zeros) {
        if (!is_finite(p.z)) throw InvalidInput("divisor point is not finite");
        if (p.mult < 1) throw InvalidInput("zero multiplicity must be at least 1");
        nz += p.mult;
    }
    for (const auto& p : poles) {
        if (!is_finite(p.z)) throw InvalidInput("divisor point is not finite");
        if (p.mult < 1) throw InvalidInput("pole multiplicity must be at least 1");
        np += p.mult;
    }
    if (nz != np)
        throw InvalidInput("unbalanced divisor: " + std::to_string(nz) + " zeros vs " + std::to_string(np) + " poles");
    if (nz < 2) throw InvalidInput("order " + std::to_string(nz) + " < 2: an elliptic function has order at least 2");
    auto distinct = [&](const std::vector<DivisorPoint>& v, const char* what) {
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j)
                if (congruent(L, v[i].z, v[j].z, tol))
                    throw InvalidInput(std::string("repeated ") + what + " point; merge it into one multiplicity");
    };
    distinct(zeros, "zero");
    distinct(poles, "pole");
    for (const auto& a : zeros)
        for (const auto& b : poles)
            if (congruent(L, a.z, b.z, tol)) throw InvalidInput("zero/pole collision: a zero is congruent to a pole");
    const cplx s = abel_sum(zeros, poles);
    const auto t = L.barycentric(s);
    const double k1 = std::round(t[0]), k2 = std::round(t[1]);
    if (std::abs(t[0] - k1) > tol || std::abs(t[1] - k2) > tol)
        throw InvalidInput("sum of zeros is not congruent to the sum of poles (defect " + std::to_string(t[0] - k1) +
                           ", " + std::to_string(t[1] - k2) + " in lattice coordinates)");
    Divisor d;
    d.zeros = std::move(zeros);
    d.poles = std::move(poles);
    d.lambda0 = {std::int64_t(k1), std::int64_t(k2)};
    return d;
}

namespace detail {

inline cplx ipow(cplx x, int k) {
    cplx r = 1.0;
    for (int i = 0; i < k; ++i) r *= x;
    return r;
}

} // namespace detail

/// f, f′, f″ at one point in the form f = P/Q with (P, Q) and their first two
/// derivatives known up to one common nonzero factor.
struct QuotientJet {
    std::array<cplx, 3> p{};
    std::array<cplx, 3> q{};

    cplx value() const { return p[0] / q[0]; }
    cplx deriv() const { return (p[1] * q[0] - p[0] * q[1]) / (q[0] * q[0]); }
    cplx second() const {
        const cplx q2 = q[0] * q[0];
        return (p[2] * q[0] - p[0] * q[2]) / q2 - 2.0 * q[1] * (p[1] * q[0] - p[0] * q[1]) / (q2 * q[0]);
    }
    QuotientJet swapped() const { return {q, p}; }
};

/// w′, w″, w‴ for w = −log f.
struct LogJet {
    cplx w1, w2, w3;
};

struct Factor {
    cplx point;
    int power;
    bool operator==(const Factor&) const = default;
};

class EllipticFunction {
public:
    /// σ-product for a validated divisor. The last pole plays the role of b_B.
    static EllipticFunction build(const Lattice& L, const Divisor& d, cplx C = 1.0) {
        if (!is_finite(C) || C == cplx(0.0)) throw InvalidInput("multiplier C must be finite and nonzero");
        // re-validate: the caller may have edited the struct
        Divisor v = validate_divisor(L, d.zeros, d.poles);
        if (v.lambda0 != d.lambda0) throw InvalidInput("stored lambda0 does not match the representatives");
        EllipticFunction f;
        f.W_ = std::make_shared<const Weierstrass>(L);
        f.div_ = std::move(v);
        f.C_ = C;
        for (const auto& a : f.div_.zeros) f.num_.push_back({a.z, a.mult});
        const auto& P = f.div_.poles;
        for (std::size_t j = 0; j + 1 < P.size(); ++j) f.den_.push_back({P[j].z, P[j].mult});
        const DivisorPoint& bB = P.back();
        if (bB.mult > 1) f.den_.push_back({bB.z, bB.mult - 1});
        cplx bp = 0.0;
        for (const auto& a : f.div_.zeros) bp += double(a.mult) * a.z;
        for (std::size_t j = 0; j + 1 < P.size(); ++j) bp -= double(P[j].mult) * P[j].z;
        bp -= double(bB.mult - 1) * bB.z;
        f.bprime_ = bp;
        f.den_.push_back({bp, 1});
        return f;
    }

    /// Build with the last pole recomputed from the others so that the stored
    /// λ⁰ coefficients hold exactly: m_B·b_B = Σ n·a − Σ_{j<B} m_j·b_j − λ⁰.
    static EllipticFunction build_with_closure(const Lattice& L, std::vector<DivisorPoint> zeros,
                                               std::vector<DivisorPoint> poles, std::array<std::int64_t, 2> lambda0,
                                               cplx C = 1.0) {
        if (poles.empty()) throw InvalidInput("closure needs at least one pole");
        cplx s = L.point(lambda0[0], lambda0[1]);
        for (const auto& a : zeros) s -= double(a.mult) * a.z;
        for (std::size_t j = 0; j + 1 < poles.size(); ++j) s += double(poles[j].mult) * poles[j].z;
        poles.back().z = -s / double(poles.back().mult);
        Divisor d = validate_divisor(L, std::move(zeros), std::move(poles));
        if (d.lambda0 != lambda0) throw InvalidInput("closure produced a different lambda0");
        return build(L, d, C);
    }

    const Lattice& lattice() const { return W_->lattice(); }
    const Weierstrass& weierstrass() const { return *W_; }
    std::shared_ptr<const Weierstrass> weierstrass_ptr() const { return W_; }
    const Divisor& divisor() const { return div_; }
    cplx multiplier() const { return C_; }
    cplx shift() const { return c_; }
    /// True after add_constant with c ≠ 0: the stored zeros no longer are the zeros of f.
    bool zeros_stale() const { return c_ != cplx(0.0); }
    cplx b_prime() const { return bprime_; }
    const std::vector<Factor>& numerator() const { return num_; }
    const std::vector<Factor>& denominator() const { return den_; }
    int order() const { return div_.order(); }
    int critical_count() const { return div_.K(); }

    /// The same function with the additive constant removed.
    EllipticFunction base() const {
        EllipticFunction g = *this;
        g.c_ = 0.0;
        return g;
    }

    /// 1/f. Exact: the factor lists are swapped and C inverted.
    EllipticFunction reciprocal() const {
        if (c_ != cplx(0.0))
            throw InvalidInput("reciprocal of a shifted function is not a sigma product; absorb the shift first");
        EllipticFunction g = *this;
        std::swap(g.num_, g.den_);
        std::swap(g.div_.zeros, g.div_.poles);
        g.div_.lambda0 = {-div_.lambda0[0], -div_.lambda0[1]};
        g.C_ = 1.0 / C_;
        return g;
    }

    EllipticFunction add_constant(cplx c) const {
        if (!is_finite(c)) throw InvalidInput("additive constant must be finite");
        EllipticFunction g = *this;
        g.c_ += c;
        return g;
    }

    /// Torus distance from z to the nearest pole.
    double pole_distance(cplx z) const { return min_distance(z, div_.poles); }
    /// Torus distance from z to the nearest stored zero (meaningful only when not stale).
    double zero_distance(cplx z) const { return min_distance(z, div_.zeros); }
    double divisor_distance(cplx z) const { return std::min(pole_distance(z), zero_distance(z)); }

    /// P/Q form of f + c. Never throws for finite z: at a pole Q vanishes.
    QuotientJet quotient_jet(cplx z) const {
        const Jet n = product_jet(z, num_), d = product_jet(z, den_);
        const cplx e = C_ * std::exp(n.log - d.log);
        QuotientJet j;
        for (int k = 0; k < 3; ++k) {
            j.p[k] = e * n.v[k] + c_ * d.v[k];
            j.q[k] = d.v[k];
        }
        return j;
    }

    cplx eval(cplx z) const {
        guard_pole(z);
        return quotient_jet(z).value();
    }

    cplx eval_deriv(cplx z) const {
        guard_pole(z);
        return quotient_jet(z).deriv();
    }

    cplx eval_second_deriv(cplx z) const {
        guard_pole(z);
        return quotient_jet(z).second();
    }

    /// w′, w″, w‴ of the unshifted function from the ζ/℘/℘′ sums. Throws near
    /// any zero or pole of the unshifted function.
    LogJet log_jet(cplx z) const {
        guard_divisor(z);
        LogJet j{0.0, 0.0, 0.0};
        for (const auto& fa : num_) {
            const ZetaJet t = W_->zeta_jet(z - fa.point);
            j.w1 -= double(fa.power) * t.zeta;
            j.w2 += double(fa.power) * t.wp;
            j.w3 += double(fa.power) * t.wp_prime;
        }
        for (const auto& fb : den_) {
            const ZetaJet t = W_->zeta_jet(z - fb.point);
            j.w1 += double(fb.power) * t.zeta;
            j.w2 -= double(fb.power) * t.wp;
            j.w3 -= double(fb.power) * t.wp_prime;
        }
        return j;
    }

    /// w′ = −f′/f for w = −log(f + c).
    cplx log_deriv(cplx z) const {
        if (c_ == cplx(0.0)) return log_jet(z).w1;
        const QuotientJet q = shifted_jet_checked(z);
        return -q.deriv() / q.value();
    }

    cplx second_log_deriv(cplx z) const {
        if (c_ == cplx(0.0)) return log_jet(z).w2;
        const QuotientJet q = shifted_jet_checked(z);
        const cplx r = q.deriv() / q.value();
        return -(q.second() / q.value() - r * r);
    }

    cplx third_log_deriv(cplx z) const {
        if (c_ != cplx(0.0)) throw InvalidInput("third log-derivative is defined for the unshifted function only");
        return log_jet(z).w3;
    }

private:
    struct Jet {
        std::array<cplx, 3> v{1.0, 0.0, 0.0};
        cplx log = 0.0;
    };

    Jet product_jet(cplx z, const std::vector<Factor>& fs) const {
        Jet acc;
        for (const auto& fa : fs) {
            const SigmaJet s = W_->sigma_jet(z - fa.point);
            const int k = fa.power;
            std::array<cplx, 3> g;
            if (k == 1) {
                g = {s.value, s.d1, s.d2};
            } else {
                const cplx pk2 = detail::ipow(s.value, k - 2);
                const cplx pk1 = pk2 * s.value;
                g = {pk1 * s.value, double(k) * pk1 * s.d1,
                     double(k) * pk1 * s.d2 + double(k) * double(k - 1) * pk2 * s.d1 * s.d1};
            }
            const auto a = acc.v;
            acc.v = {a[0] * g[0], a[1] * g[0] + a[0] * g[1], a[2] * g[0] + 2.0 * a[1] * g[1] + a[0] * g[2]};
            acc.log += double(k) * s.log_scale;
        }
        return acc;
    }

    double min_distance(cplx z, const std::vector<DivisorPoint>& v) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& p : v) d = std::min(d, lattice().torus_distance(z, p.z));
        return d;
    }

    void guard_pole(cplx z) const {
        if (!is_finite(z)) throw InvalidInput("evaluation point must be finite");
        if (pole_distance(z) < kEvalPoleTol * lattice().scale())
            throw PoleProximity("evaluation too close to a pole of f");
    }

    void guard_divisor(cplx z) const {
        guard_pole(z);
        if (zero_distance(z) < kEvalPoleTol * lattice().scale())
            throw PoleProximity("log-derivative evaluated too close to a zero of f");
    }

    QuotientJet shifted_jet_checked(cplx z) const {
        guard_pole(z);
        const QuotientJet q = quotient_jet(z);
        if (std::abs(q.p[0]) < 1e-300 * std::abs(q.q[0]) || q.p[0] == cplx(0.0))
            throw PoleProximity("log-derivative evaluated at a zero of f");
        return q;
    }

    std::shared_ptr<const Weierstrass> W_;
    Divisor div_;
    cplx C_ = 1.0;
    cplx c_ = 0.0;
    cplx bprime_ = 0.0;
    std::vector<Factor> num_, den_;
};

inline EllipticFunction build(const Lattice& L, const Divisor& d, cplx C = 1.0) {
    return EllipticFunction::build(L, d, C);
}
inline cplx eval(const EllipticFunction& f, cplx z) { return f.eval(z); }
inline cplx eval_deriv(const EllipticFunction& f, cplx z) { return f.eval_deriv(z); }
inline cplx log_deriv(const EllipticFunction& f, cplx z) { return f.log_deriv(z); }
inline cplx second_log_deriv(const EllipticFunction& f, cplx z) { return f.second_log_deriv(z); }
inline EllipticFunction add_constant(const EllipticFunction& f, cplx c) { return f.add_constant(c); }

namespace detail {

// Mean of g over n equispaced points of the circle |z − center| = rho.
template <class G>
cplx circle_mean(G&& g, cplx center, double rho, int n) {
    cplx s = 0.0;
    for (int k = 0; k < n; ++k) s += g(center + std::polar(rho, 2.0 * kPi * k / n), k);
    return s / double(n);
}

} // namespace detail

/// Zeros of f + c, found by polishing from the zeros of the unshifted
/// function. An n-fold zero a splits into n seeds a + (−c/α)^{1/n}·e^{2πik/n},
/// where α is the leading Taylor coefficient of f at a. Each cluster is
/// checked with the argument principle. Returned representatives stay next to
/// the original ones, so sums over them are continuous in c.
inline std::vector<DivisorPoint> recover_zeros(const EllipticFunction& f) {
    const cplx c = f.shift();
    const Divisor& d = f.divisor();
    if (c == cplx(0.0)) return d.zeros;
    const EllipticFunction g = f.base();
    const Lattice& L = f.lattice();
    std::vector<DivisorPoint> out;
    for (std::size_t i = 0; i < d.zeros.size(); ++i) {
        const cplx a = d.zeros[i].z;
        const int n = d.zeros[i].mult;
        double sep = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < d.zeros.size(); ++j)
            if (j != i) sep = std::min(sep, L.torus_distance(a, d.zeros[j].z));
        sep = std::min(sep, g.pole_distance(a));
        sep = std::min(sep, 0.5 * L.scale());
        // leading coefficient α = f^{(n)}(a)/n! by a Cauchy integral
        const double rho = 0.25 * sep;
        const cplx alpha = detail::circle_mean(
            [&](cplx z, int) { return g.eval(z) / detail::ipow(z - a, n); }, a, rho, 64);
        const double delta = std::pow(std::abs(c / alpha), 1.0 / n);
        if (!(delta < 0.2 * sep))
            throw ConvergenceFailure("shift too large to recover zeros by polishing; retry with a smaller constant");
        const cplx root = std::pow(-c / alpha, 1.0 / n);
        std::vector<cplx> found;
        for (int k = 0; k < n; ++k) {
            cplx z = a + root * std::polar(1.0, 2.0 * kPi * k / n);
            bool ok = false;
            for (int it = 0; it < 100; ++it) {
                const QuotientJet q = f.quotient_jet(z);
                const cplx step = q.value() / q.deriv();
                z -= step;
                if (!is_finite(z)) break;
                if (std::abs(step) < 1e-15 * L.scale() + 1e-13 * std::abs(z - a)) {
                    ok = true;
                    break;
                }
            }
            const QuotientJet q = f.quotient_jet(z);
            const double resid = std::abs(q.value());
            if (!ok || !(resid < 1e-10 * std::max(1.0, std::abs(q.deriv()) * L.scale())) ||
                L.torus_distance(z, a) > 0.4 * sep)
                throw ConvergenceFailure("zero polishing did not converge");
            for (cplx w : found)
                if (L.torus_distance(w, z) < 0.1 * delta)
                    throw ConvergenceFailure("zero polishing merged two seeds");
            found.push_back(z);
        }
        // the disk of radius 0.4·sep must hold exactly n zeros of f + c (f has no poles there)
        const double R = 0.4 * sep;
        const int M = 256;
        const cplx wind = detail::circle_mean(
            [&](cplx z, int) {
                const QuotientJet q = f.quotient_jet(z);
                return q.deriv() / q.value() * (z - a);
            },
            a, R, M);
        if (std::abs(wind.real() - n) > 0.01 || std::abs(wind.imag()) > 0.01)
            throw ConvergenceFailure("argument-principle count around a recovered zero cluster disagrees");
        for (cplx z : found) out.push_back({z, 1});
    }
    return out;
}

/// Rebuild f + c as an unshifted σ-product on the recovered zeros, with the
/// multiplier matched at reference points.
inline EllipticFunction absorb_shift(const EllipticFunction& f) {
    if (f.shift() == cplx(0.0)) return f;
    const Lattice& L = f.lattice();
    auto zeros = recover_zeros(f);
    Divisor d = validate_divisor(L, zeros, f.divisor().poles);
    const EllipticFunction g = EllipticFunction::build(L, d, 1.0);
    // reference points: well away from every zero and pole
    std::vector<cplx> refs;
    for (int i = 1; i <= 7 && refs.size() < 3; ++i)
        for (int j = 1; j <= 7 && refs.size() < 3; ++j) {
            const cplx z = L.from_barycentric(i / 8.0 + 0.013, j / 8.0 + 0.007);
            if (g.divisor_distance(z) > 0.05 * L.scale()) refs.push_back(z);
        }
    if (refs.empty()) throw ConvergenceFailure("no reference point to match the multiplier");
    const cplx C = f.eval(refs[0]) / g.eval(refs[0]);
    for (cplx z : refs) {
        const cplx c2 = f.eval(z) / g.eval(z);
        if (std::abs(c2 - C) > 1e-8 * std::abs(C)) throw ConvergenceFailure("absorbed multiplier is inconsistent");
    }
    return EllipticFunction::build(L, d, C);
}

/// Same function on the lattice with basis M·(ω1, ω2).
inline EllipticFunction transport_unimodular(const EllipticFunction& f, const UnimodularMap& M) {
    const Lattice L2 = apply(M, f.lattice());
    Divisor d = validate_divisor(L2, f.divisor().zeros, f.divisor().poles);
    return EllipticFunction::build(L2, d, f.multiplier()).add_constant(f.shift());
}

/// f^α on αΛ with divisor α·(zeros, poles); satisfies f^α(αz) = f(z).
inline EllipticFunction transport_scale(const EllipticFunction& f, cplx alpha) {
    const Lattice L2 = scale(f.lattice(), alpha);
    auto zs = f.divisor().zeros, ps = f.divisor().poles;
    for (auto& p : zs) p.z *= alpha;
    for (auto& p : ps) p.z *= alpha;
    Divisor d = validate_divisor(L2, zs, ps);
    return EllipticFunction::build(L2, d, f.multiplier()).add_constant(f.shift());
}

/// f* on H(Λ) whose divisor is the H-image of the divisor of f. H must
/// preserve orientation.
inline EllipticFunction transport_linear(const EllipticFunction& f, const LinearMap2& H) {
    if (!(H.det() > 0.0)) throw InvalidInput("linear transport must preserve orientation");
    const Lattice& L = f.lattice();
    const Lattice L2(H.apply(L.omega1()), H.apply(L.omega2()));
    auto zs = f.divisor().zeros, ps = f.divisor().poles;
    for (auto& p : zs) p.z = H.apply(p.z);
    for (auto& p : ps) p.z = H.apply(p.z);
    Divisor d = validate_divisor(L2, zs, ps);
    return EllipticFunction::build(L2, d, f.multiplier());
}

} // namespace newtonflow

#endif // NEWTONFLOW_EFUN_HPP
