#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <string>

#include "fixtures.hpp"
#include "newtonflow/json_io.hpp"
#include "newtonflow/portrait.hpp"

using namespace newtonflow;

namespace {

int occurrences(const std::string& s, const std::string& needle) {
    int n = 0;
    for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
    return n;
}

int multiplicity(const Portrait& p, EquilibriumKind k) {
    int n = 0;
    for (const auto& e : p.equilibria) n += e.kind == k ? e.mult : 0;
    return n;
}

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

const Portrait& nuclear_portrait() {
    static const Portrait p = [] {
        const Lattice L(1.0, fixtures::kSkewTau);
        return build_portrait(build(L, fixtures::nuclear_divisor(L, 2)), 8);
    }();
    return p;
}

} // namespace

TEST(Portrait, NuclearSkeleton) {
    const Portrait& p = nuclear_portrait();
    EXPECT_EQ(p.count(EquilibriumKind::zero), 1);
    EXPECT_EQ(p.count(EquilibriumKind::pole), 1);
    EXPECT_EQ(p.count(EquilibriumKind::critical), 2);
    EXPECT_EQ(multiplicity(p, EquilibriumKind::zero), 2);
    ASSERT_EQ(p.separatrices.size(), 8u);
    for (const auto& s : p.separatrices) {
        EXPECT_TRUE(s.trajectory.end.at_equilibrium());
        // unstable ones run into the zero, stable ones come from the pole
        EXPECT_EQ(s.trajectory.end.kind, s.unstable ? EndKind::zero : EndKind::pole);
    }
    EXPECT_TRUE(p.connections().empty());
    EXPECT_EQ(p.fillers.size(), 8u);
}

TEST(Portrait, EquiharmonicSnMatchesFigure) {
    const Lattice L(1.0, fixtures::kEquiTau);
    const Portrait p = build_portrait(build(L, fixtures::sn_divisor(L)), 4);
    EXPECT_EQ(p.count(EquilibriumKind::zero), 2);
    EXPECT_EQ(p.count(EquilibriumKind::pole), 2);
    EXPECT_EQ(p.count(EquilibriumKind::critical), 4);
    EXPECT_EQ(p.separatrices.size(), 16u);
    EXPECT_TRUE(p.connections().empty());
    EXPECT_TRUE(p.undecided().empty());
}

TEST(Portrait, RectangularSnHighlightsConnections) {
    const Lattice L(1.0, fixtures::kRectTau);
    const Portrait p = build_portrait(build(L, fixtures::sn_divisor(L)), 2);
    EXPECT_EQ(p.separatrices.size(), 16u);
    EXPECT_FALSE(p.connections().empty());
    const std::string svg = export_svg(p);
    EXPECT_GE(occurrences(svg, "class=\"connection\" points="), 1);
}

TEST(Portrait, FillersInterleaveWithSeparatrices) {
    const Portrait& p = nuclear_portrait();
    EXPECT_TRUE(fillers_interleave(p));
    for (const auto& f : p.fillers) {
        EXPECT_EQ(f.trajectory.end.kind, EndKind::pole);
        EXPECT_LT(f.trajectory.max_arg_drift(), 1e-6);
    }
    // the filler arg values are pairwise distinct
    for (std::size_t i = 0; i < p.fillers.size(); ++i)
        for (std::size_t j = i + 1; j < p.fillers.size(); ++j)
            EXPECT_GT(std::abs(std::remainder(p.fillers[i].trajectory.arg_value - p.fillers[j].trajectory.arg_value,
                                              2 * kPi)),
                      1e-3);
}

TEST(Portrait, DensityZeroIsSkeletonOnly) {
    const Lattice L(1.0, fixtures::kSkewTau);
    const Portrait p = build_portrait(build(L, fixtures::nuclear_divisor(L, 3)), 0);
    EXPECT_TRUE(p.fillers.empty());
    EXPECT_EQ(p.separatrices.size(), 8u);
    const std::string svg = export_svg(p);
    EXPECT_EQ(occurrences(svg, "class=\"filler\" points="), 0);
    EXPECT_GT(occurrences(svg, "class=\"separatrix\" points="), 0);
}

TEST(Portrait, RejectsNegativeDensityAndShiftedFunctions) {
    const Lattice L(1.0, fixtures::kSkewTau);
    const EllipticFunction f = build(L, fixtures::nuclear_divisor(L, 2));
    EXPECT_THROW(build_portrait(f, -1), InvalidInput);
    EXPECT_THROW(build_portrait(f.add_constant(0.01), 2), InvalidInput);
}

TEST(Svg, MarkersMatchCensus) {
    const Lattice L(1.0, fixtures::kEquiTau);
    const Portrait p = build_portrait(build(L, fixtures::sn_divisor(L)), 0);
    const std::string svg = export_svg(p);
    EXPECT_EQ(svg.rfind("<?xml", 0), 0u);
    EXPECT_EQ(occurrences(svg, "<circle class=\"zero\""), 2);
    EXPECT_EQ(occurrences(svg, "<circle class=\"pole\""), 2);
    EXPECT_EQ(occurrences(svg, "<path class=\"saddle\""), 4);
    EXPECT_EQ(occurrences(svg, "<polygon class=\"cell\""), 1);
    EXPECT_EQ(occurrences(svg, "<line class=\"tick\""), 6);
}

TEST(Svg, MultiplicityAnnotated) {
    const std::string svg = export_svg(nuclear_portrait());
    EXPECT_EQ(occurrences(svg, "(2x)"), 2); // the double zero and the double pole
}

TEST(Svg, Deterministic) {
    const Lattice L(1.0, fixtures::kEquiTau);
    const EllipticFunction f = build(L, fixtures::sn_divisor(L));
    const std::string a = export_svg(build_portrait(f, 3));
    ::setenv("NEWTONFLOW_THREADS", "1", 1);
    const std::string b = export_svg(build_portrait(f, 3));
    ::unsetenv("NEWTONFLOW_THREADS");
    EXPECT_EQ(a, b);
}

TEST(Wrap, PolylinesStayInsideTheCell) {
    const Portrait& p = nuclear_portrait();
    const Lattice& L = p.lattice();
    auto check = [&](const Trajectory& tr) {
        for (const auto& piece : wrap_split(L, tr))
            for (cplx z : piece) {
                const auto t = L.barycentric(z);
                EXPECT_GE(t[0], -1e-9);
                EXPECT_LE(t[0], 1 + 1e-9);
                EXPECT_GE(t[1], -1e-9);
                EXPECT_LE(t[1], 1 + 1e-9);
            }
    };
    for (const auto& s : p.separatrices) check(s.trajectory);
    for (const auto& f : p.fillers) check(f.trajectory);
}

TEST(Wrap, CrossingTrajectorySplitsAtCongruentPoints) {
    // find a nuclear trajectory whose unwrapped path leaves through the right edge
    const Lattice L(1.0, fixtures::kSkewTau);
    const FlowField F(build(L, fixtures::nuclear_divisor(L, 2)));
    Trajectory crossing;
    bool found = false;
    for (Direction dir : {Direction::backward, Direction::forward})
        for (int i = 0; i < 20 && !found; ++i)
            for (int j = 1; j < 10 && !found; ++j) {
                const Trajectory tr = integrate(F, L.from_barycentric(0.5123 + 0.025 * i, 0.1 * j + 0.0371), dir);
                for (const auto& s : tr.samples) {
                    const auto t = L.barycentric(s.z);
                    if (t[0] > 1.01 && t[1] > 0.01 && t[1] < 0.99) {
                        crossing = tr;
                        found = true;
                        break;
                    }
                }
            }
    ASSERT_TRUE(found);
    const auto pieces = wrap_split(L, crossing);
    ASSERT_GE(pieces.size(), 2u);
    bool right_edge = false;
    for (std::size_t k = 0; k + 1 < pieces.size(); ++k) {
        const cplx end = pieces[k].back(), start = pieces[k + 1].front();
        EXPECT_LT(L.torus_distance(end, start), 1e-12);
        EXPECT_GT(std::abs(end - start), 0.5 * L.scale()); // opposite edges
        const auto te = L.barycentric(end), ts = L.barycentric(start);
        if (std::abs(te[0] - 1.0) < 1e-12 && std::abs(ts[0]) < 1e-12) right_edge = true;
    }
    EXPECT_TRUE(right_edge);
    std::size_t total = 0;
    for (const auto& piece : pieces) total += piece.size();
    EXPECT_EQ(total, crossing.samples.size() + 2 * (pieces.size() - 1));
}

TEST(Wrap, EdgeHuggingPathStaysInOnePiece) {
    const Lattice L;
    std::vector<cplx> path;
    for (int i = 0; i <= 20; ++i) path.push_back(cplx(0.05 * i * 0.9 + 0.02, (i % 2 ? 1e-13 : -1e-13)));
    EXPECT_EQ(wrap_split(L, path).size(), 1u);
}

TEST(Json, PortraitRoundTripIsBitExact) {
    const Portrait& p = nuclear_portrait();
    const json j = export_json(p);
    EXPECT_EQ(j["schema"], "portrait/1");
    const std::string text = j.dump();
    const Portrait q = import_json(parse_json(text));
    EXPECT_EQ(q.equilibria, p.equilibria);
    EXPECT_EQ(q.separatrices, p.separatrices);
    EXPECT_EQ(q.fillers, p.fillers);
    EXPECT_EQ(q.function.divisor(), p.function.divisor());
    EXPECT_EQ(q.density, p.density);
    for (std::size_t i = 0; i < p.separatrices.size(); ++i) {
        const auto& a = p.separatrices[i].trajectory.samples;
        const auto& b = q.separatrices[i].trajectory.samples;
        for (std::size_t k = 0; k < a.size(); ++k) {
            ASSERT_TRUE(bit_equal(a[k].z.real(), b[k].z.real()));
            ASSERT_TRUE(bit_equal(a[k].z.imag(), b[k].z.imag()));
            ASSERT_TRUE(bit_equal(a[k].argf, b[k].argf));
        }
    }
    EXPECT_EQ(export_json(q).dump(), text);
}

TEST(Json, PoleValuesSurviveAsStrings) {
    const Portrait& p = nuclear_portrait();
    const json j = export_json(p);
    bool saw_inf = false;
    for (const auto& e : j["equilibria"])
        if (e["kind"] == "pole") saw_inf = e["value"][0] == "inf";
    EXPECT_TRUE(saw_inf);
}

TEST(Json, StrictReader) {
    json j = export_json(nuclear_portrait());
    json bad = j;
    bad["colour"] = "red";
    EXPECT_THROW(import_json(bad), InvalidInput);
    bad = j;
    bad["schema"] = "portrait/2";
    EXPECT_THROW(import_json(bad), InvalidInput);
    bad = j;
    bad["separatrices"][0]["trajectory"]["samples"]["t"].erase(0);
    EXPECT_THROW(import_json(bad), InvalidInput);
    bad = j;
    bad["metadata"] = 3;
    EXPECT_THROW(import_json(bad), InvalidInput);
    bad["metadata"] = json::object({{"command", "portrait"}});
    EXPECT_NO_THROW(import_json(bad));
    bad = j;
    bad.erase("fillers");
    EXPECT_THROW(import_json(bad), InvalidInput);
}
