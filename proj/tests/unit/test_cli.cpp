#include <gtest/gtest.h>

#include <sstream>

#include "emaint/cli.hpp"
#include "../support/fixtures.hpp"

using namespace emaint;

namespace {

struct Run {
    int code;
    std::string out, err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "emaint");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

const std::string kPump = EMAINT_SOURCE_DIR "/models/hydraulic_pump_seal.amm";

}  // namespace

TEST(Cli, ValidateFixtureIsSilent) {
    auto r = cli({"validate", kPump});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_EQ(r.out, "");
}

TEST(Cli, ValidateReportsDiagnostics) {
    fixture::TempDir dir;
    auto bad = dir.path() / "bad.amm";
    std::ofstream(bad) << "id: Bad Id\ncatalog: {equipment: {id: e}, environment: {id: v}}\ntasks: |\n  leaf a {nominal=10}\n";
    auto r = cli({"validate", bad.string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.out.find("ERROR id:"), std::string::npos);
    EXPECT_NE(r.out.find("ERROR tasks.a:"), std::string::npos);

    auto tm = dir.path() / "t.tm";
    std::ofstream(tm) << "task seq {\n  leaf a {nominal=10}\n  leaf a {nominal=10}\n}\n";
    r = cli({"validate", tm.string()});
    EXPECT_EQ(r.code, kExitValidation);
    EXPECT_NE(r.out.find("(line 3"), std::string::npos);
}

TEST(Cli, MissingFileIsIoError) {
    EXPECT_EQ(cli({"validate", "/nonexistent/x.amm"}).code, kExitIo);
    EXPECT_EQ(cli({"frobnicate"}).code, kExitValidation);
    EXPECT_EQ(cli({"--help"}).code, kExitOk);
}

TEST(Cli, CompileCountsAndDot) {
    fixture::TempDir dir;
    auto tm = dir.path() / "par.tm";
    std::ofstream(tm) << "task par { leaf a {nominal=10} leaf b {nominal=10} }\n";
    auto r = cli({"compile", tm.string()});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_EQ(r.out, "states=4 transitions=4 accepting=1\n");

    auto dot = dir.path() / "pump.dot";
    r = cli({"compile", kPump, "--dot", dot.string()});
    EXPECT_EQ(r.out, "states=15 transitions=20 accepting=1\n");
    EXPECT_EQ(fixture::read(dot), fixture::read(EMAINT_SOURCE_DIR "/tests/golden/hp200_seal.dot"));
}

TEST(Cli, CompileStateCap) {
    fixture::TempDir dir;
    auto tm = dir.path() / "wide.tm";
    std::ofstream(tm) << "task par { leaf a {nominal=10} leaf b {nominal=10} leaf c {nominal=10} leaf d {nominal=10} }\n";
    EXPECT_EQ(cli({"compile", tm.string(), "--max-states", "5"}).code, kExitResourceCap);
}

TEST(Cli, SimulateMatchesGolden) {
    auto r = cli({"simulate", kPump, "--level", "expert", "--seed", "7", "--steps", "30"});
    EXPECT_EQ(r.code, kExitOk);
    EXPECT_EQ(r.out, fixture::read(EMAINT_SOURCE_DIR "/tests/golden/simulate_expert_seed7.txt"));
    EXPECT_EQ(cli({"simulate", kPump, "--level", "guru"}).code, kExitValidation);
}

// 30 steps leave the filter noisy between neighbouring levels, so only the
// direction is checked: experts mostly end expert, novices never do.
TEST(Cli, SimulateSeparatesExpertFromNovice) {
    int expert = 0, novice_as_expert = 0;
    for (int seed = 1; seed <= 20; ++seed) {
        auto s = std::to_string(seed);
        expert += cli({"simulate", kPump, "--level", "expert", "--seed", s}).out.find("final level=expert") !=
                  std::string::npos;
        novice_as_expert += cli({"simulate", kPump, "--level", "none", "--seed", s}).out.find("final level=expert") !=
                            std::string::npos;
    }
    EXPECT_GE(expert, 14);
    EXPECT_EQ(novice_as_expert, 0);
}

TEST(Cli, ServeBadPortEnv) {
    fixture::TempDir dir;
    setenv("EMAINT_PORT", "not-a-port", 1);
    auto r = cli({"serve", "--data-dir", dir.path().string()});
    unsetenv("EMAINT_PORT");
    EXPECT_EQ(r.code, kExitValidation);
}
