#ifndef NEWTONFLOW_WEIERSTRASS_HPP
#define NEWTONFLOW_WEIERSTRASS_HPP

// Weierstrass σ, ζ, ℘, ℘′ for an arbitrary lattice.
//
// Everything is evaluated on the reduced basis (s, s·τ) with the Jacobi
// theta function θ1(v | τ), v = π z / s. After reduction |q| = |e^{iπτ}| is at
// most e^{-π√3/2} ≈ 0.066, so a handful of series terms reach double
// precision. Arguments are first reduced into the centred period cell; the
// quasi-periodicity factors of σ are returned in log form so products of many
// σ-factors never overflow.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "newtonflow/error.hpp"
#include "newtonflow/lattice.hpp"

namespace newtonflow {

struct LatticeInvariants {
    cplx g2;
    cplx g3;
    cplx eta1; ///< ζ(z + ω1) − ζ(z)
    cplx eta2; ///< ζ(z + ω2) − ζ(z)
};

/// σ and its first two derivatives at one point, in the form
/// σ^{(k)}(z) = d_k · exp(log_scale).
struct SigmaJet {
    cplx value;
    cplx d1;
    cplx d2;
    cplx log_scale;
};

/// ζ, ℘ and ℘′ from a single theta evaluation.
struct ZetaJet {
    cplx zeta;
    cplx wp;
    cplx wp_prime;
};

/// Pole-proximity threshold, relative to the lattice scale.
inline constexpr double kWeierstrassPoleTol = 1e-8;

class Weierstrass {
public:
    explicit Weierstrass(const Lattice& L) : L_(L) {
        auto [R, M] = reduce_basis(L);
        s_ = R.omega1();
        tau_ = R.tau();
        q_ = std::exp(cplx(0.0, kPi) * tau_);
        for (int n = 0; n < kMaxTerms; ++n) {
            const double e = (n + 0.5) * (n + 0.5);
            cplx c = 2.0 * std::exp(cplx(0.0, kPi) * tau_ * e);
            if (n % 2) c = -c;
            coef_.push_back(c);
            if (std::abs(c) < 1e-300) break;
        }
        cplx d1 = 0.0, d3 = 0.0;
        for (std::size_t n = 0; n < coef_.size(); ++n) {
            const double k = 2.0 * double(n) + 1.0;
            d1 += coef_[n] * k;
            d3 -= coef_[n] * k * k * k;
        }
        theta1p0_ = d1;
        eta1n_ = -(kPi * kPi / 3.0) * d3 / d1;
        eta2n_ = eta1n_ * tau_ - cplx(0.0, 2.0 * kPi);

        // Eisenstein series in q² = e^{2πiτ} for g2, g3 of the normalized lattice.
        const cplx q2 = q_ * q_;
        cplx e4 = 1.0, e6 = 1.0, qn = 1.0;
        for (int n = 1; n < 200; ++n) {
            qn *= q2;
            if (std::abs(qn) < 1e-300) break;
            double s3 = 0.0, s5 = 0.0;
            for (int d = 1; d <= n; ++d)
                if (n % d == 0) {
                    s3 += std::pow(double(d), 3);
                    s5 += std::pow(double(d), 5);
                }
            const cplx t4 = 240.0 * s3 * qn, t6 = -504.0 * s5 * qn;
            e4 += t4;
            e6 += t6;
            if (std::abs(t4) < 1e-18 * std::abs(e4) && std::abs(t6) < 1e-18 * std::abs(e6)) break;
        }
        const double pi4 = std::pow(kPi, 4), pi6 = std::pow(kPi, 6);
        const cplx s4 = std::pow(s_, 4), s6 = std::pow(s_, 6);
        inv_.g2 = (4.0 * pi4 / 3.0) * e4 / s4;
        inv_.g3 = (8.0 * pi6 / 27.0) * e6 / s6;

        // η for the caller's basis: (ω1, ω2) = M^{-1}(r1, r2), and η is additive in the period.
        const cplx er1 = eta1n_ / s_, er2 = eta2n_ / s_;
        const auto& m = M.m;
        inv_.eta1 = double(m[1][1]) * er1 - double(m[0][1]) * er2;
        inv_.eta2 = -double(m[1][0]) * er1 + double(m[0][0]) * er2;
    }

    const Lattice& lattice() const { return L_; }
    const LatticeInvariants& invariants() const { return inv_; }

    /// Quasi-period increment of ζ across an arbitrary period k1·ω1 + k2·ω2.
    cplx eta_of(std::int64_t k1, std::int64_t k2) const { return double(k1) * inv_.eta1 + double(k2) * inv_.eta2; }

    SigmaJet sigma_jet(cplx z) const {
        const Reduced r = reduce(z);
        const Theta th = theta(kPi * r.u0);
        const cplx u = r.u0;
        const cplx g = std::exp(0.5 * eta1n_ * u * u) / (kPi * theta1p0_);
        const cplx s0 = g * th.t0;
        const cplx s1 = g * (eta1n_ * u * th.t0 + kPi * th.t1);
        const cplx s2 = g * ((eta1n_ + eta1n_ * eta1n_ * u * u) * th.t0 + 2.0 * eta1n_ * u * kPi * th.t1 +
                             kPi * kPi * th.t2);
        const cplx e = r.eta;
        SigmaJet j;
        j.value = s_ * s0;
        j.d1 = s1 + e * s0;
        j.d2 = (s2 + 2.0 * e * s1 + e * e * s0) / s_;
        j.log_scale = r.log_factor;
        return j;
    }

    cplx sigma(cplx z) const {
        const SigmaJet j = sigma_jet(z);
        if (j.value == cplx(0.0)) return 0.0;
        return j.value * std::exp(j.log_scale);
    }

    /// Complex logarithm of σ(z) (some branch); σ(z) must be nonzero.
    cplx log_sigma(cplx z) const {
        const SigmaJet j = sigma_jet(z);
        return std::log(j.value) + j.log_scale;
    }

    ZetaJet zeta_jet(cplx z) const {
        const Reduced r = reduce(z);
        check_pole(r.u0, z);
        const Theta th = theta(kPi * r.u0);
        const cplx L1 = th.t1 / th.t0, L2 = th.t2 / th.t0, L3 = th.t3 / th.t0;
        ZetaJet j;
        j.zeta = (eta1n_ * r.u0 + kPi * L1 + r.eta) / s_;
        j.wp = (-eta1n_ - kPi * kPi * (L2 - L1 * L1)) / (s_ * s_);
        j.wp_prime = (-kPi * kPi * kPi * (L3 - 3.0 * L1 * L2 + 2.0 * L1 * L1 * L1)) / (s_ * s_ * s_);
        return j;
    }

    cplx zeta(cplx z) const { return zeta_jet(z).zeta; }
    cplx wp(cplx z) const { return zeta_jet(z).wp; }
    cplx wp_prime(cplx z) const { return zeta_jet(z).wp_prime; }

    /// Distance from z to the nearest lattice point.
    double distance_to_lattice(cplx z) const { return std::abs(L_.nearest_residual(z)); }

private:
    static constexpr int kMaxTerms = 64;

    struct Theta {
        cplx t0, t1, t2, t3; // θ1 and its first three v-derivatives
    };

    struct Reduced {
        cplx u0;         // reduced normalized argument
        cplx eta;        // η of the removed period (normalized units)
        cplx log_factor; // log of the σ quasi-periodicity factor
    };

    Reduced reduce(cplx z) const {
        if (!is_finite(z)) throw InvalidInput("Weierstrass functions need a finite argument");
        const cplx u = z / s_;
        const double n2 = std::round(u.imag() / tau_.imag());
        const cplx u1 = u - n2 * tau_;
        const double n1 = std::round(u1.real());
        Reduced r;
        r.u0 = u1 - n1;
        r.eta = n1 * eta1n_ + n2 * eta2n_;
        const cplx w = n1 + n2 * tau_;
        const double parity = std::fmod(std::abs(n1 + n2 + n1 * n2), 2.0);
        r.log_factor = cplx(0.0, kPi * parity) + r.eta * (r.u0 + 0.5 * w);
        return r;
    }

    void check_pole(cplx u0, cplx z) const {
        if (std::abs(u0 * s_) < kWeierstrassPoleTol * L_.scale())
            throw PoleProximity("Weierstrass evaluation too close to a lattice point at z = (" +
                                std::to_string(z.real()) + ", " + std::to_string(z.imag()) + ")");
    }

    // θ1(v) = Σ c_n sin((2n+1)v) with c_n = 2(−1)^n q^{(n+1/2)²}; the sines and
    // cosines of odd multiples come from the angle-addition recurrence.
    Theta theta(cplx v) const {
        const cplx sv = std::sin(v), cv = std::cos(v);
        const cplx s2 = 2.0 * sv * cv, c2 = 1.0 - 2.0 * sv * sv;
        cplx sn = sv, cn = cv;
        Theta t{0.0, 0.0, 0.0, 0.0};
        for (std::size_t n = 0; n < coef_.size(); ++n) {
            const double k = 2.0 * double(n) + 1.0;
            const cplx a0 = coef_[n] * sn, a1 = coef_[n] * k * cn;
            const cplx a2 = -a0 * (k * k), a3 = -a1 * (k * k);
            t.t0 += a0;
            t.t1 += a1;
            t.t2 += a2;
            t.t3 += a3;
            if (n > 0 && small(a0, t.t0) && small(a1, t.t1) && small(a2, t.t2) && small(a3, t.t3)) break;
            const cplx sn1 = sn * c2 + cn * s2;
            cn = cn * c2 - sn * s2;
            sn = sn1;
        }
        return t;
    }

    static bool small(cplx term, cplx sum) { return std::abs(term) <= 1e-16 * std::abs(sum); }

    Lattice L_;
    cplx s_, tau_, q_;
    std::vector<cplx> coef_;
    cplx theta1p0_, eta1n_, eta2n_;
    LatticeInvariants inv_{};
};

inline LatticeInvariants invariants(const Lattice& L) { return Weierstrass(L).invariants(); }
inline cplx sigma(const Lattice& L, cplx z) { return Weierstrass(L).sigma(z); }
inline cplx zeta(const Lattice& L, cplx z) { return Weierstrass(L).zeta(z); }
inline cplx wp(const Lattice& L, cplx z) { return Weierstrass(L).wp(z); }
inline cplx wp_prime(const Lattice& L, cplx z) { return Weierstrass(L).wp_prime(z); }

} // namespace newtonflow

#endif // NEWTONFLOW_WEIERSTRASS_HPP
