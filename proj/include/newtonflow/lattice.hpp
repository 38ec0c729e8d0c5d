#ifndef NEWTONFLOW_LATTICE_HPP
#define NEWTONFLOW_LATTICE_HPP

// Period lattices Λ = ω1·ℤ + ω2·ℤ: orientation, reduction to the standard
// τ-domain, congruence on the torus ℂ/Λ and the real-linear basis maps used
// to transport flows between lattices.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <string>
#include <tuple>
#include <utility>

#include "newtonflow/error.hpp"

namespace newtonflow {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

inline bool is_finite(cplx z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

/// Integer 2×2 matrix of determinant +1 acting on period pairs:
/// new ω1 = a·ω1 + b·ω2, new ω2 = c·ω1 + d·ω2.
struct UnimodularMap {
    std::array<std::array<std::int64_t, 2>, 2> m{{{1, 0}, {0, 1}}};

    static UnimodularMap identity() { return {}; }

    std::int64_t det() const { return m[0][0] * m[1][1] - m[0][1] * m[1][0]; }

    std::pair<cplx, cplx> apply(cplx w1, cplx w2) const {
        return {double(m[0][0]) * w1 + double(m[0][1]) * w2,
                double(m[1][0]) * w1 + double(m[1][1]) * w2};
    }

    /// Composition: (*this ∘ rhs), i.e. apply rhs first.
    UnimodularMap operator*(const UnimodularMap& rhs) const {
        UnimodularMap out;
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                out.m[i][j] = m[i][0] * rhs.m[0][j] + m[i][1] * rhs.m[1][j];
        return out;
    }

    bool operator==(const UnimodularMap&) const = default;
};

/// Real-linear map of ℝ² ≅ ℂ, stored as a row-major 2×2 matrix acting on (Re z, Im z).
struct LinearMap2 {
    std::array<double, 4> a{1.0, 0.0, 0.0, 1.0};

    cplx apply(cplx z) const {
        return {a[0] * z.real() + a[1] * z.imag(), a[2] * z.real() + a[3] * z.imag()};
    }
    double det() const { return a[0] * a[3] - a[1] * a[2]; }
    LinearMap2 inverse() const {
        const double d = det();
        return {{a[3] / d, -a[1] / d, -a[2] / d, a[0] / d}};
    }
    LinearMap2 operator*(const LinearMap2& r) const {
        return {{a[0] * r.a[0] + a[1] * r.a[2], a[0] * r.a[1] + a[1] * r.a[3],
                 a[2] * r.a[0] + a[3] * r.a[2], a[2] * r.a[1] + a[3] * r.a[3]}};
    }
};

namespace detail {

// Ties in the fundamental-domain conditions are decided with this relative slack.
inline constexpr double kTieTol = 1e-12;

struct Reduction {
    cplx w1, w2;
    UnimodularMap map;
};

// Gauss reduction of a positively oriented pair. The returned basis is
// recomputed from the originals through the integer map, so it spans
// exactly the same point set.
inline Reduction gauss_reduce(cplx w1, cplx w2) {
    UnimodularMap M;
    cplx a = w1, b = w2;
    for (int iter = 0; iter < 4096; ++iter) {
        const cplx tau = b / a;
        const double n = std::floor(tau.real() + 0.5);
        if (n != 0.0) {
            const auto k = static_cast<std::int64_t>(n);
            M.m[1][0] -= k * M.m[0][0];
            M.m[1][1] -= k * M.m[0][1];
            std::tie(a, b) = M.apply(w1, w2);
        }
        if (std::abs(b) < std::abs(a) * (1.0 - kTieTol)) {
            // (a, b) -> (b, -a) keeps the orientation
            UnimodularMap S{{{{0, 1}, {-1, 0}}}};
            M = S * M;
            std::tie(a, b) = M.apply(w1, w2);
            continue;
        }
        break;
    }
    // Boundary conventions: -1/2 <= Re τ < 1/2, and Re τ <= 0 when |τ| = 1.
    cplx tau = b / a;
    if (tau.real() >= 0.5 - kTieTol) {
        M.m[1][0] -= M.m[0][0];
        M.m[1][1] -= M.m[0][1];
        std::tie(a, b) = M.apply(w1, w2);
        tau = b / a;
    }
    if (std::abs(std::abs(tau) - 1.0) <= kTieTol && tau.real() > kTieTol) {
        UnimodularMap S{{{{0, 1}, {-1, 0}}}};
        M = S * M;
        std::tie(a, b) = M.apply(w1, w2);
    }
    return {a, b, M};
}

} // namespace detail

/// Representative of a class in ℂ/Λ inside the half-open period parallelogram.
struct TorusPoint {
    cplx rep;
    bool operator==(const TorusPoint&) const = default;
};

/// A period lattice with a positively oriented basis (Im(ω2/ω1) > 0).
///
/// A negatively oriented input pair is swapped; degenerate or non-finite
/// pairs throw InvalidInput. The reduced basis of the same lattice is cached
/// and used for nearest-lattice-point queries.
class Lattice {
public:
    Lattice() : Lattice(cplx(1.0, 0.0), cplx(0.0, 1.0)) {}

    Lattice(cplx omega1, cplx omega2) : w1_(omega1), w2_(omega2) {
        if (!is_finite(w1_) || !is_finite(w2_))
            throw InvalidInput("lattice periods must be finite");
        if (w1_ == cplx(0.0) || w2_ == cplx(0.0))
            throw InvalidInput("lattice periods must be nonzero");
        double im = (w2_ / w1_).imag();
        if (!(std::abs(im) > 1e-14 * std::abs(w2_ / w1_)))
            throw InvalidInput("lattice periods are linearly dependent over R");
        if (im < 0.0) std::swap(w1_, w2_);
        tau_ = w2_ / w1_;
        const double det = w1_.real() * w2_.imag() - w2_.real() * w1_.imag();
        inv_ = {w2_.imag() / det, -w2_.real() / det, -w1_.imag() / det, w1_.real() / det};
        auto red = detail::gauss_reduce(w1_, w2_);
        r1_ = red.w1;
        r2_ = red.w2;
        const double rdet = r1_.real() * r2_.imag() - r2_.real() * r1_.imag();
        rinv_ = {r2_.imag() / rdet, -r2_.real() / rdet, -r1_.imag() / rdet, r1_.real() / rdet};
    }

    cplx omega1() const { return w1_; }
    cplx omega2() const { return w2_; }
    cplx tau() const { return tau_; }

    /// Basis of the same lattice satisfying the fundamental-domain conditions.
    cplx reduced_omega1() const { return r1_; }
    cplx reduced_omega2() const { return r2_; }

    /// Area of a period parallelogram.
    double area() const { return w1_.real() * w2_.imag() - w2_.real() * w1_.imag(); }
    /// Length scale for cell-relative tolerances: sqrt(area).
    double scale() const { return std::sqrt(area()); }
    /// Longer diagonal of the reduced cell.
    double diameter() const { return std::max(std::abs(r1_ + r2_), std::abs(r1_ - r2_)); }

    /// Coordinates (t1, t2) with z = t1·ω1 + t2·ω2.
    std::array<double, 2> barycentric(cplx z) const {
        return {inv_[0] * z.real() + inv_[1] * z.imag(), inv_[2] * z.real() + inv_[3] * z.imag()};
    }
    cplx from_barycentric(double t1, double t2) const { return t1 * w1_ + t2 * w2_; }

    cplx point(std::int64_t k1, std::int64_t k2) const { return double(k1) * w1_ + double(k2) * w2_; }

    /// Residual z − λ for the lattice point λ nearest to z.
    cplx nearest_residual(cplx z) const {
        const double t1 = rinv_[0] * z.real() + rinv_[1] * z.imag();
        const double t2 = rinv_[2] * z.real() + rinv_[3] * z.imag();
        const cplx base = z - std::round(t1) * r1_ - std::round(t2) * r2_;
        cplx best = base;
        for (int i = -1; i <= 1; ++i)
            for (int j = -1; j <= 1; ++j) {
                const cplx c = base + double(i) * r1_ + double(j) * r2_;
                if (std::norm(c) < std::norm(best)) best = c;
            }
        return best;
    }

    /// Euclidean distance between the classes of z and w on the torus.
    double torus_distance(cplx z, cplx w) const { return std::abs(nearest_residual(z - w)); }

    bool operator==(const Lattice& o) const { return w1_ == o.w1_ && w2_ == o.w2_; }

private:
    cplx w1_, w2_, tau_;
    std::array<double, 4> inv_{};
    cplx r1_, r2_;
    std::array<double, 4> rinv_{};
};

/// Canonical representative of [z] in the half-open parallelogram spanned by ω1, ω2.
inline TorusPoint normalize(const Lattice& L, cplx z) {
    if (!is_finite(z)) throw InvalidInput("cannot normalize a non-finite point");
    auto t = L.barycentric(z);
    constexpr double snap = 4.0 * 2.220446049250313e-16;
    // Points already inside (up to rounding) are returned untouched, which makes
    // normalize exactly idempotent.
    if (t[0] > -snap && t[0] < 1.0 - 0.5 * snap && t[1] > -snap && t[1] < 1.0 - 0.5 * snap) return {z};
    for (double& ti : t) {
        ti -= std::floor(ti);
        if (ti >= 1.0 - snap || ti < 0.0) ti = 0.0;
    }
    return {L.from_barycentric(t[0], t[1])};
}

inline constexpr double kDefaultCongruenceTol = 1e-9;

/// True iff z ≡ w mod Λ within tol, measured in barycentric coordinates of
/// the lattice's own basis.
inline bool congruent(const Lattice& L, cplx z, cplx w, double tol = kDefaultCongruenceTol) {
    if (!(tol > 0.0)) throw InvalidInput("congruence tolerance must be positive");
    const auto t = L.barycentric(L.nearest_residual(z - w));
    return std::abs(t[0]) < tol && std::abs(t[1]) < tol;
}

/// Integer coordinates of the lattice point nearest to z.
inline std::array<std::int64_t, 2> nearest_lattice_coords(const Lattice& L, cplx z) {
    const auto t = L.barycentric(z - L.nearest_residual(z));
    return {static_cast<std::int64_t>(std::llround(t[0])), static_cast<std::int64_t>(std::llround(t[1]))};
}

/// Reduced basis of the same lattice plus the unimodular map carrying the
/// input basis to it. Idempotent.
inline std::pair<Lattice, UnimodularMap> reduce_basis(const Lattice& L) {
    auto red = detail::gauss_reduce(L.omega1(), L.omega2());
    return {Lattice(red.w1, red.w2), red.map};
}

/// True iff τ = ω2/ω1 satisfies the fundamental-domain conditions.
inline bool is_reduced_tau(cplx tau, double tol = detail::kTieTol) {
    const double r = std::abs(tau);
    if (!(tau.imag() > 0.0)) return false;
    if (r < 1.0 - tol) return false;
    if (tau.real() < -0.5 - tol || tau.real() >= 0.5 - tol) return false;
    if (std::abs(r - 1.0) <= tol && tau.real() > tol) return false;
    return true;
}

/// Apply a unimodular basis change to a lattice (same point set).
inline Lattice apply(const UnimodularMap& M, const Lattice& L) {
    if (M.det() != 1) throw InvalidInput("unimodular map must have determinant +1");
    auto [a, b] = M.apply(L.omega1(), L.omega2());
    return Lattice(a, b);
}

/// The lattice αΛ with basis (αω1, αω2).
inline Lattice scale(const Lattice& L, cplx alpha) {
    if (!is_finite(alpha) || alpha == cplx(0.0)) throw InvalidInput("scale factor must be finite and nonzero");
    return Lattice(alpha * L.omega1(), alpha * L.omega2());
}

/// Real-linear map H with H(from.ω1) = to.ω1 and H(from.ω2) = to.ω2.
inline LinearMap2 basis_map(const Lattice& from, const Lattice& to) {
    LinearMap2 Bfrom{{from.omega1().real(), from.omega2().real(), from.omega1().imag(), from.omega2().imag()}};
    LinearMap2 Bto{{to.omega1().real(), to.omega2().real(), to.omega1().imag(), to.omega2().imag()}};
    return Bto * Bfrom.inverse();
}

/// The map (ω1, ω2) ↦ (1, i) for the reduced basis of L. Its determinant is positive.
inline LinearMap2 canonical_map(const Lattice& L) {
    auto [R, M] = reduce_basis(L);
    (void)M;
    return basis_map(R, Lattice(cplx(1.0, 0.0), cplx(0.0, 1.0)));
}

} // namespace newtonflow

#endif // NEWTONFLOW_LATTICE_HPP
