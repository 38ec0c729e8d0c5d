#ifndef NEWTONFLOW_CONTOUR_HPP
#define NEWTONFLOW_CONTOUR_HPP

// Argument-principle counting: (1/2πi)∮ g′/g dz over circles (periodic
// trapezoid rule, spectrally accurate for analytic integrands) and over
// period parallelograms (composite Gauss–Legendre per edge).

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include "newtonflow/error.hpp"
#include "newtonflow/lattice.hpp"

namespace newtonflow {

struct ArgumentCount {
    int count = 0;          ///< rounded (1/2πi)∮ g′/g
    double residual = 0.0;  ///< distance of the raw integral from that integer
    cplx raw = 0.0;
};

inline constexpr double kArgumentResidualTol = 0.01;

namespace detail {

inline std::vector<std::array<double, 2>> gauss_legendre_nodes(int n) {
    std::vector<std::array<double, 2>> out(n);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
        double dp = 1.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out[i] = {x, 2.0 / ((1.0 - x * x) * dp * dp)};
    }
    return out;
}

inline const std::vector<std::array<double, 2>>& gl32() {
    static const auto nodes = gauss_legendre_nodes(32);
    return nodes;
}

inline ArgumentCount to_count(cplx raw) {
    ArgumentCount c;
    c.raw = raw;
    c.count = int(std::lround(raw.real()));
    c.residual = std::abs(raw - cplx(double(c.count), 0.0));
    return c;
}

} // namespace detail

/// Count zeros minus poles of g inside |z − center| < rho, given the
/// logarithmic derivative h = g′/g. The trapezoid rule is doubled until two
/// successive values agree and the result is within the residual tolerance of
/// an integer.
template <class LogDeriv>
ArgumentCount count_in_circle(LogDeriv&& h, cplx center, double rho, int n0 = 64, int nmax = 8192) {
    cplx prev = std::numeric_limits<double>::quiet_NaN();
    for (int n = n0; n <= nmax; n *= 2) {
        cplx s = 0.0;
        for (int k = 0; k < n; ++k) {
            const cplx d = std::polar(rho, 2.0 * kPi * (k + 0.5) / n);
            s += h(center + d) * d;
        }
        const cplx raw = s / double(n);
        const ArgumentCount c = detail::to_count(raw);
        if (std::abs(raw - prev) < 1e-3 && c.residual < kArgumentResidualTol) return c;
        prev = raw;
    }
    throw ConvergenceFailure("argument principle on a circle did not converge");
}

/// Count zeros minus poles of g inside the parallelogram with corners
/// z0, z0 + e1, z0 + e1 + e2, z0 + e2 (positively oriented when Im(e2/e1) > 0).
template <class LogDeriv>
ArgumentCount count_in_parallelogram(LogDeriv&& h, cplx z0, cplx e1, cplx e2, int panels0 = 4, int panels_max = 512) {
    const auto& gl = detail::gl32();
    const std::array<cplx, 4> start{z0, z0 + e1, z0 + e1 + e2, z0 + e2};
    const std::array<cplx, 4> edge{e1, e2, -e1, -e2};
    cplx prev = std::numeric_limits<double>::quiet_NaN();
    for (int panels = panels0; panels <= panels_max; panels *= 2) {
        cplx s = 0.0;
        for (int e = 0; e < 4; ++e) {
            const cplx step = edge[e] / double(panels);
            for (int p = 0; p < panels; ++p) {
                const cplx mid = start[e] + (p + 0.5) * step;
                for (auto [x, w] : gl) s += w * 0.5 * step * h(mid + 0.5 * x * step);
            }
        }
        const cplx raw = s / cplx(0.0, 2.0 * kPi);
        const ArgumentCount c = detail::to_count(raw);
        if (std::abs(raw - prev) < 1e-3 && c.residual < kArgumentResidualTol) return c;
        prev = raw;
    }
    throw ConvergenceFailure("argument principle on the period cell did not converge");
}

/// Origin of a period cell shifted along its diagonal, z0 = s·(ω1 + ω2), with s
/// in the middle of the widest gap between the barycentric coordinates of the
/// given points. Every point then keeps the largest possible clearance from
/// the four edges.
inline cplx shifted_cell_origin(const Lattice& L, const std::vector<cplx>& points) {
    std::vector<double> ts;
    for (cplx z : points) {
        const auto t = L.barycentric(z);
        for (double ti : t) ts.push_back(ti - std::floor(ti));
    }
    if (ts.empty()) return 0.0;
    std::sort(ts.begin(), ts.end());
    double best_gap = -1.0, best_mid = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        const double a = ts[i];
        const double b = (i + 1 < ts.size()) ? ts[i + 1] : ts[0] + 1.0;
        if (b - a > best_gap) {
            best_gap = b - a;
            best_mid = 0.5 * (a + b);
        }
    }
    best_mid -= std::floor(best_mid);
    return best_mid * (L.omega1() + L.omega2());
}

} // namespace newtonflow

#endif // NEWTONFLOW_CONTOUR_HPP
