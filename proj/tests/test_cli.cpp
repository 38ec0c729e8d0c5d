#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_app.hpp"
#include "oracles.hpp"

using namespace newtonflow;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
    json doc() const { return json::parse(out); }
};

Result run(std::vector<std::string> args, const std::string& stdin_text = "") {
    std::istringstream in(stdin_text);
    std::ostringstream out, err;
    const int code = cli::run_cli(std::move(args), in, out, err);
    return {code, out.str(), err.str()};
}

std::string sample(const std::string& name) { return std::string(NEWTONFLOW_SAMPLES_DIR) + "/" + name; }

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

class TempDir {
public:
    TempDir() {
        path_ = fs::temp_directory_path() / ("newtonflow_cli_" + std::to_string(::getpid()) + "_" +
                                             ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    fs::path operator/(const std::string& s) const { return path_ / s; }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

} // namespace

TEST(Cli, ReduceMatchesBruteForce) {
    const Result r = run({"reduce", "-i", R"({"omega1":[1,0],"omega2":[1,1]})"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = r.doc();
    const auto brute = oracle::brute_reduce(1.0, cplx(1, 1));
    ASSERT_TRUE(brute.found);
    const cplx tau = jsonio::get_cnum(j["tau"], "tau");
    EXPECT_NEAR(std::abs(tau - cplx(0, 1)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(tau - brute.w2 / brute.w1), 0.0, 1e-12);
    EXPECT_EQ(j["map"], json({{1, 0}, {-1, 1}}));
}

TEST(Cli, ReduceIsIdempotent) {
    const Result first = run({"reduce", "-i", sample("lattice.json")});
    ASSERT_EQ(first.code, 0);
    const Result second = run({"reduce", "-i", "-"}, first.out);
    ASSERT_EQ(second.code, 0) << second.err;
    EXPECT_EQ(second.doc()["map"], json({{1, 0}, {0, 1}}));
    EXPECT_EQ(second.doc()["omega1"], first.doc()["omega1"]);
    EXPECT_EQ(second.doc()["omega2"], first.doc()["omega2"]);
}

TEST(Cli, ReduceRejectsZeroPeriod) {
    const Result r = run({"reduce", "-i", R"({"omega1":[0,0],"omega2":[1,1]})"});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("nonzero"), std::string::npos);
}

TEST(Cli, CertifyExitCodes) {
    EXPECT_EQ(run({"certify", "-i", sample("nuclear.json")}).code, 0);
    EXPECT_EQ(run({"certify", "-i", sample("sn_equi.json")}).code, 0);
    EXPECT_EQ(run({"certify", "-i", sample("sn_rect.json")}).code, 1);
    EXPECT_EQ(run({"certify", "-i", sample("nuclear_square.json")}).code, 1);
    EXPECT_EQ(run({"certify", "-i", "{not json"}).code, 3);
    EXPECT_EQ(run({"certify", "-i", sample("missing.json")}).code, 3);
}

TEST(Cli, CertifyDoubleZeroReportsWitness) {
    const Result r = run({"certify", "-i", sample("double_zero.json"), "--seed", "5"});
    ASSERT_EQ(r.code, 1) << r.err;
    const json j = r.doc();
    EXPECT_EQ(j["verdict"], "degenerate");
    EXPECT_EQ(j["seed"], 5);
    ASSERT_FALSE(j["witnesses"].empty());
    EXPECT_EQ(j["witnesses"][0]["kind"], "multiple_zero");
    EXPECT_EQ(j["witnesses"][0]["mult"], 2);
    const StabilityCertificate c = certificate_from_json(j);
    EXPECT_EQ(c.verdict, Verdict::degenerate);
    EXPECT_FALSE(c.conditions.simple_nodes);
}

TEST(Cli, StrictJsonRejectsUnknownKeys) {
    const std::string doc =
        R"({"lattice":{"omega1":[1,0],"omega2":[0,1]},"zeros":[{"z":[0,0],"mult":2}],"poles":[{"z":[0.5,0],"mult":2}],"tolerance":1})";
    const Result r = run({"certify", "-i", doc});
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.err.find("unknown key \"tolerance\""), std::string::npos);
    const std::string nested =
        R"({"lattice":{"omega1":[1,0],"omega2":[0,1],"tau":[0,1]},"zeros":[{"z":[0,0],"mult":2}],"poles":[{"z":[0.5,0],"mult":2}]})";
    EXPECT_EQ(run({"certify", "-i", nested}).code, 3);
}

TEST(Cli, InvalidDivisorIsExit3) {
    // Abel sum fails: zeros sum to 0, poles to ¼
    const std::string doc =
        R"({"lattice":{"omega1":[1,0],"omega2":[0,1]},"zeros":[{"z":[0,0]},{"z":[0.5,0]}],"poles":[{"z":[0.25,0.5]},{"z":[0.5,0.5]}]})";
    EXPECT_EQ(run({"certify", "-i", doc}).code, 3);
}

TEST(Cli, PerturbIsDeterministic) {
    TempDir dir;
    const auto a = dir / "a.json", b = dir / "b.json";
    const std::vector<std::string> base{"perturb", "-i", sample("double_zero.json"), "--epsilon", "1e-3", "--seed", "7"};
    auto args = base;
    args.insert(args.end(), {"-o", a.string()});
    ASSERT_EQ(run(args).code, 0);
    args = base;
    args.insert(args.end(), {"-o", b.string()});
    ASSERT_EQ(run(args).code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    const json j = json::parse(slurp(a));
    EXPECT_EQ(j["certificate"]["verdict"], "stable");
    const EllipticFunction g = function_from_json(j["divisor"]);
    const EllipticFunction f = function_from_json(json::parse(slurp(sample("double_zero.json"))));
    for (const auto& z : g.divisor().zeros) EXPECT_LT(g.lattice().torus_distance(z.z, 0.0), 2e-3);
    EXPECT_EQ(g.divisor().lambda0, f.divisor().lambda0);
    // nothing but the two outputs in the directory
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
    EXPECT_EQ(files, 2);
}

TEST(Cli, PerturbStableInputPassesThrough) {
    const Result r = run({"perturb", "-i", sample("sn_equi.json"), "--seed", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json j = r.doc();
    EXPECT_EQ(j["metadata"]["stage"], 0);
    const json in = json::parse(slurp(sample("sn_equi.json")));
    EXPECT_EQ(j["divisor"]["zeros"], in["zeros"]);
    EXPECT_EQ(j["divisor"]["poles"], in["poles"]);
}

TEST(Cli, PerturbRejectsLargeEpsilon) {
    EXPECT_EQ(run({"perturb", "-i", sample("double_zero.json"), "--epsilon", "0.2"}).code, 3);
}

TEST(Cli, PortraitWritesSvgAndJson) {
    TempDir dir;
    const auto svg = dir / "equi.svg";
    const Result r = run({"portrait", "-i", sample("sn_equi.json"), "--density", "2", "-o", svg.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_TRUE(fs::exists(svg));
    ASSERT_TRUE(fs::exists(dir / "equi.json"));
    const json j = json::parse(slurp(dir / "equi.json"));
    EXPECT_EQ(j["schema"], "portrait/1");
    EXPECT_EQ(j["metadata"]["density"], 2);
    const Portrait p = import_json(j);
    EXPECT_EQ(p.count(EquilibriumKind::critical), 4);
    EXPECT_EQ(p.separatrices.size(), 16u);
    EXPECT_TRUE(p.connections().empty());
    EXPECT_EQ(p.fillers.size(), 4u);
    EXPECT_EQ(slurp(svg), export_svg(p));
}

TEST(Cli, PortraitRectangularHighlightsConnectionsAndSkeleton) {
    TempDir dir;
    const auto svg = dir / "rect.svg";
    ASSERT_EQ(run({"portrait", "-i", sample("sn_rect.json"), "--density", "0", "-o", svg.string()}).code, 0);
    const std::string text = slurp(svg);
    EXPECT_NE(text.find("class=\"connection\" points="), std::string::npos);
    EXPECT_EQ(text.find("class=\"filler\" points="), std::string::npos);
}

TEST(Cli, PortraitNeedsOutput) { EXPECT_EQ(run({"portrait", "-i", sample("nuclear.json")}).code, 3); }

TEST(Cli, EvalAndField) {
    const Result e = run({"eval", "-i", sample("nuclear.json"), "--at", "0.3,0.2", "--at", "0.5,0"});
    ASSERT_EQ(e.code, 0) << e.err;
    const json j = e.doc();
    const EllipticFunction f = function_from_json(json::parse(slurp(sample("nuclear.json"))));
    const cplx v = jsonio::get_cnum(j["points"][0]["f"], "f");
    EXPECT_EQ(v, f.eval(cplx(0.3, 0.2)));
    EXPECT_EQ(j["points"][1]["note"], "pole");

    const Result fl = run({"field", "-i", sample("nuclear.json"), "--at", "0.3,0.2", "--form", "pq"});
    ASSERT_EQ(fl.code, 0) << fl.err;
    const cplx w = jsonio::get_cnum(fl.doc()["points"][0]["v"], "v");
    EXPECT_EQ(w, FlowField(f, FieldForm::pq).velocity(cplx(0.3, 0.2)));
    EXPECT_EQ(fl.doc()["points"][0]["jacobian"].size(), 4u);

    EXPECT_EQ(run({"eval", "-i", sample("nuclear.json"), "--at", "0.3;0.2"}).code, 3);
    EXPECT_EQ(run({"eval", "-i", sample("nuclear.json")}).code, 3);
    EXPECT_EQ(run({"field", "-i", sample("nuclear.json"), "--at", "0.3,0.2", "--form", "other"}).code, 3);
}

TEST(Cli, CriticalPointsAndClassify) {
    const Result c = run({"critical-points", "-i", sample("sn_rect.json")});
    ASSERT_EQ(c.code, 0) << c.err;
    const auto cps = equilibria_from_json(c.doc()["critical_points"]);
    ASSERT_EQ(cps.size(), 4u);
    for (const auto& e : cps) EXPECT_EQ(e.mult, 1);

    const Result k = run({"classify", "-i", sample("nuclear.json")});
    ASSERT_EQ(k.code, 0) << k.err;
    int saddles = 0;
    const json doc = k.doc();
    for (const auto& e : doc["equilibria"]) {
        if (e["kind"] == "critical") {
            ++saddles;
            EXPECT_EQ(e["classification"]["type"], "saddle");
            EXPECT_EQ(e["classification"]["unstable_dirs"].size(), 2u);
        }
        if (e["kind"] == "zero") EXPECT_EQ(e["classification"]["type"], "attractor");
        if (e["kind"] == "pole") EXPECT_EQ(e["classification"]["type"], "repellor");
    }
    EXPECT_EQ(saddles, 2);
}

TEST(Cli, BuildOutputFeedsOtherCommands) {
    const Result b = run({"build", "-i", sample("sn_equi.json")});
    ASSERT_EQ(b.code, 0) << b.err;
    EXPECT_EQ(b.doc()["metadata"]["order"], 2);
    const Result c = run({"certify", "-i", "-"}, b.out);
    EXPECT_EQ(c.code, 0) << c.err;
}

TEST(Cli, TolerancesAreFlagsAndRecorded) {
    const Result r = run({"certify", "-i", sample("nuclear.json"), "--tol-rtol", "1e-10", "--tol-offset", "2e-5"});
    ASSERT_EQ(r.code, 0) << r.err;
    const json t = r.doc()["metadata"]["tolerances"];
    EXPECT_EQ(t["rtol"], 1e-10);
    EXPECT_EQ(t["offset"], 2e-5);
    EXPECT_EQ(t["atol"], 1e-12); // defaults recorded too
    EXPECT_EQ(run({"certify", "-i", sample("nuclear.json"), "--tol-rtol", "-1"}).code, 3);
    EXPECT_EQ(run({"certify", "-i", sample("nuclear.json"), "--tol-rtool", "1e-9"}).code, 3);
}

TEST(Cli, UsageErrors) {
    EXPECT_EQ(run({}).code, 3);
    EXPECT_EQ(run({"frobnicate"}).code, 3);
    EXPECT_EQ(run({"certify"}).code, 3);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, OutputIsWrittenAtomically) {
    TempDir dir;
    const auto target = dir / "cert.json";
    {
        std::ofstream f(target);
        f << "old";
    }
    ASSERT_EQ(run({"certify", "-i", sample("sn_equi.json"), "-o", target.string()}).code, 0);
    EXPECT_EQ(json::parse(slurp(target))["verdict"], "stable");
    int files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir.path())) ++files;
    EXPECT_EQ(files, 1);
    // an unwritable destination is reported, not half-written
    EXPECT_EQ(run({"certify", "-i", sample("sn_equi.json"), "-o", (dir / "no/such/dir/x.json").string()}).code, 3);
}
