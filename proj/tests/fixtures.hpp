#pragma once

// Divisors shared by the unit tests and the acceptance binary.

#include <cmath>
#include <random>
#include <vector>

#include "newtonflow/efun.hpp"

namespace fixtures {

using newtonflow::cplx;
using newtonflow::Divisor;
using newtonflow::DivisorPoint;
using newtonflow::Lattice;

inline const cplx kRectTau(0.0, 0.8);
inline const cplx kEquiTau = std::polar(1.0 / std::sqrt(3.0), newtonflow::kPi / 3.0);
/// Skewed lattice without a reflection symmetry (rectangular and rhombic
/// lattices make f real on a line through both nuclear saddles).
inline const cplx kSkewTau(0.3, 1.2);

/// sn on the normalized lattice (1, τ): zeros 0, 1/2 and poles τ/2, 1/2 + τ/2.
inline Divisor sn_divisor(const Lattice& L) {
    const cplx tau = L.tau();
    return newtonflow::validate_divisor(L, {{0.0, 1}, {0.5, 1}}, {{0.5 * tau, 1}, {0.5 + 0.5 * tau, 1}});
}

/// One r-fold zero at 0 and one r-fold pole at b with r·b ∈ Λ: b = 1/2 for
/// even r (the half period) and b = 1/r otherwise.
inline cplx nuclear_pole(const Lattice& L, int r) { return (r % 2 == 0 ? 0.5 : 1.0 / r) * L.omega1(); }

inline Divisor nuclear_divisor(const Lattice& L, int r) {
    return newtonflow::validate_divisor(L, {{0.0, r}}, {{nuclear_pole(L, r), r}});
}

/// Double zero at 0 with simple poles at 1/4 and 3/4 (of ω1).
inline Divisor double_zero_divisor(const Lattice& L) {
    return newtonflow::validate_divisor(L, {{0.0, 2}}, {{0.25 * L.omega1(), 1}, {0.75 * L.omega1(), 1}});
}

inline std::vector<int> random_partition(std::mt19937_64& rng, int r, int max_part) {
    std::vector<int> parts;
    while (r > 0) {
        const int hi = std::min(r, max_part);
        const int p = std::uniform_int_distribution<int>(1, hi)(rng);
        parts.push_back(p);
        r -= p;
    }
    return parts;
}

struct RandomDivisorOptions {
    int min_order = 2;
    int max_order = 4;
    int max_mult = 3;
    bool require_multiple = false; ///< at least one multiplicity ≥ 2
    double min_separation = 0.12;  ///< relative to the lattice scale
};

/// Random valid divisor with every point in the cell and the last pole placed
/// by the sum constraint.
inline Divisor random_divisor(const Lattice& L, std::mt19937_64& rng, const RandomDivisorOptions& opt = {}) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (;;) {
        const int r = std::uniform_int_distribution<int>(opt.min_order, opt.max_order)(rng);
        auto zp = random_partition(rng, r, opt.max_mult);
        auto pp = random_partition(rng, r, opt.max_mult);
        if (opt.require_multiple) {
            bool multiple = false;
            for (int m : zp) multiple |= m > 1;
            for (int m : pp) multiple |= m > 1;
            if (!multiple) continue;
        }
        std::vector<DivisorPoint> zeros, poles;
        cplx sum = 0.0;
        for (int m : zp) {
            const cplx z = L.from_barycentric(U(rng), U(rng));
            zeros.push_back({z, m});
            sum += double(m) * z;
        }
        for (std::size_t j = 0; j + 1 < pp.size(); ++j) {
            const cplx z = L.from_barycentric(U(rng), U(rng));
            poles.push_back({z, pp[j]});
            sum -= double(pp[j]) * z;
        }
        // wrapping the last pole into the cell only changes λ⁰ by a lattice vector
        poles.push_back({newtonflow::normalize(L, sum / double(pp.back())).rep, pp.back()});
        // separation check
        std::vector<cplx> all;
        for (auto& p : zeros) all.push_back(p.z);
        for (auto& p : poles) all.push_back(p.z);
        bool ok = true;
        for (std::size_t i = 0; i < all.size() && ok; ++i)
            for (std::size_t j = i + 1; j < all.size() && ok; ++j)
                ok = L.torus_distance(all[i], all[j]) > opt.min_separation * L.scale();
        if (!ok) continue;
        return newtonflow::validate_divisor(L, zeros, poles);
    }
}

inline Lattice random_lattice(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const cplx tau(U(rng) - 0.5, 0.9 + 0.6 * U(rng));
    return Lattice(1.0, tau);
}

} // namespace fixtures
