#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "pemadm/cli.hpp"
#include "pemadm/csv.hpp"
#include "test_goldens.hpp"

using namespace pemadm;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
        dir_ = fs::temp_directory_path() / (std::string("pemadm_cli_") + info->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string write_config(const json& j, const std::string& name = "config.json") {
        const auto p = (dir_ / name).string();
        write_json_file(p, j);
        return p;
    }

    int run(std::vector<std::string> args) {
        args.insert(args.begin(), "pemadm");
        std::vector<const char*> argv;
        for (const auto& a : args) argv.push_back(a.c_str());
        out_.str("");
        err_.str("");
        return cli::run(static_cast<int>(argv.size()), argv.data(), out_, err_);
    }

    std::string out_path(const std::string& sub = "out") const { return (dir_ / sub).string(); }

    static std::string slurp(const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    fs::path dir_;
    std::ostringstream out_;
    std::ostringstream err_;
};

json ref_config() {
    return {{"scenario", json::object()},
            {"gains", {{"ref_ssc", controller_to_json(golden::ref_ssc())}, {"ref_sogcc", controller_to_json(golden::ref_sogcc())}}}};
}

}  // namespace

TEST_F(CliTest, AnalyzeReferenceSscFeasible) {
    auto j = ref_config();
    j["controllers"] = {"ref_ssc"};
    EXPECT_EQ(run({"analyze", "--config", write_config(j), "--out", out_path()}), 0) << err_.str();
    const auto report = read_json_file(out_path() + "/analysis_ref_ssc.json");
    EXPECT_EQ(report.at("stability").at("verdict"), "feasible");
    EXPECT_LT(report.at("ms_spectral_radius").get<double>(), 1.0);
}

TEST_F(CliTest, AnalyzeZeroGainsInfeasible) {
    json j = {{"scenario", json::object()}, {"gains", {{"zero", {{{0.0, 0.0}}, {{0.0, 0.0}}}}}}, {"controllers", {"zero"}}};
    EXPECT_EQ(run({"analyze", "--config", write_config(j), "--out", out_path()}), 2) << err_.str();
}

TEST_F(CliTest, MissingTransitionIsConfigError) {
    json model = model_to_json(golden::ref_scenario().model);
    model.erase("transition");
    json j = {{"model", model}, {"x0", {1.0, 0.0}}};
    EXPECT_EQ(run({"analyze", "--config", write_config(j)}), 64);
    EXPECT_NE(err_.str().find("transition"), std::string::npos) << err_.str();
}

TEST_F(CliTest, UnknownKeyIsConfigError) {
    json j = {{"scenario", json::object()}, {"trails", 3}};
    EXPECT_EQ(run({"simulate", "--config", write_config(j)}), 64);
}

TEST_F(CliTest, MissingConfigFile) { EXPECT_EQ(run({"analyze", "--config", (dir_ / "absent.json").string()}), 66); }

TEST_F(CliTest, AnalyzeWithoutGainsIsMissingInput) {
    json j = {{"scenario", json::object()}, {"controllers", {"sogcc"}}};
    EXPECT_EQ(run({"analyze", "--config", write_config(j), "--out", out_path()}), 66) << err_.str();
}

TEST_F(CliTest, SynthesizeBoth) {
    const auto cfg = write_config({{"scenario", json::object()}});
    EXPECT_EQ(run({"synthesize", "sogcc", "--config", cfg, "--out", out_path()}), 0) << err_.str();
    const auto art = read_json_file(out_path() + "/gains_sogcc.json");
    EXPECT_NEAR(art.at("synthesis").at("gamma").get<double>(), golden::kGammaSynthesis, 1e-2);
    EXPECT_EQ(run({"synthesize", "ssc", "--config", cfg, "--out", out_path()}), 0) << err_.str();
    EXPECT_TRUE(fs::exists(out_path() + "/gains_ssc.json"));
    // cached gains now feed analyze
    json j = {{"scenario", json::object()}, {"controllers", {"ssc", "sogcc"}}};
    EXPECT_EQ(run({"analyze", "--config", write_config(j, "analyze.json"), "--out", out_path()}), 0) << err_.str();
}

TEST_F(CliTest, SynthesizeUncontrollableInfeasible) {
    json model = {{"A", 2.0}, {"B", 0.0}, {"modes", {{{"C", 1.0}, {"D", 0.0}, {"E", 0.0}}}}, {"transition", 1.0}};
    EXPECT_EQ(run({"synthesize", "ssc", "--config", write_config({{"model", model}, {"x0", {1.0}}}), "--out", out_path()}), 2);
}

TEST_F(CliTest, SynthesizeLargeLambdaEchoed) {
    EXPECT_EQ(run({"synthesize", "sogcc", "--config", write_config({{"scenario", json::object()}}), "--lambda", "1000", "--out", out_path()}), 2);
    EXPECT_NE(err_.str().find("lambda = 1000"), std::string::npos) << err_.str();
}

TEST_F(CliTest, SimulateSingleTrialZeroStd) {
    auto j = ref_config();
    j["controllers"] = {"ref_sogcc", "idm"};
    ASSERT_EQ(run({"simulate", "--config", write_config(j), "--out", out_path(), "--trials", "1", "--horizon", "100"}), 0) << err_.str();
    const auto t = csv::read(out_path() + "/summary_ref_sogcc.csv");
    EXPECT_EQ(t.rows.size(), 101u);
    for (const char* c : {"x1_std", "x2_std", "u_std", "gap_std"}) {
        for (double v : t.numbers(c)) EXPECT_EQ(v, 0.0) << c;
    }
    EXPECT_TRUE(fs::exists(out_path() + "/summary_idm.csv"));
    EXPECT_TRUE(fs::exists(out_path() + "/costs_idm.csv"));
    const auto meta = read_json_file(out_path() + "/run_meta.json");
    EXPECT_EQ(meta.at("config").at("trials"), 1);
    // the embedded config re-loads
    EXPECT_NO_THROW(cli::load_config(meta.at("config")));
}

TEST_F(CliTest, SimulateDeterministicAcrossThreads) {
    auto j = ref_config();
    j["controllers"] = {"ref_sogcc", "ref_ssc", "idm"};
    j["master_seed"] = 77;
    const auto cfg = write_config(j);
    ::setenv("PEMADM_THREADS", "1", 1);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out_path("a"), "--trials", "24", "--horizon", "300"}), 0) << err_.str();
    ::setenv("PEMADM_THREADS", "4", 1);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out_path("b"), "--trials", "24", "--horizon", "300"}), 0) << err_.str();
    ::unsetenv("PEMADM_THREADS");
    for (const char* f : {"summary_ref_sogcc.csv", "summary_ref_ssc.csv", "summary_idm.csv", "costs_ref_sogcc.csv", "costs_idm.csv"}) {
        EXPECT_EQ(slurp(dir_ / "a" / f), slurp(dir_ / "b" / f)) << f;
    }
}

TEST_F(CliTest, SeedChangesOutput) {
    auto j = ref_config();
    j["controllers"] = {"ref_sogcc"};
    const auto cfg = write_config(j);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out_path("a"), "--trials", "4", "--horizon", "50", "--seed", "1"}), 0);
    ASSERT_EQ(run({"simulate", "--config", cfg, "--out", out_path("b"), "--trials", "4", "--horizon", "50", "--seed", "2"}), 0);
    EXPECT_NE(slurp(dir_ / "a" / "summary_ref_sogcc.csv"), slurp(dir_ / "b" / "summary_ref_sogcc.csv"));
}

TEST_F(CliTest, CompareMissingInputs) {
    auto j = ref_config();
    j["controllers"] = {"ref_sogcc"};
    EXPECT_EQ(run({"compare", "--config", write_config(j), "--out", out_path()}), 66);
}

TEST_F(CliTest, CompareSingleControllerPassthrough) {
    auto j = ref_config();
    j["controllers"] = {"ref_sogcc"};
    const auto cfg = write_config(j);
    ASSERT_EQ(run({"compare", "--run", "--config", cfg, "--out", out_path(), "--trials", "5", "--horizon", "200"}), 0) << err_.str();
    const auto cmp = csv::read(out_path() + "/comparison.csv");
    ASSERT_EQ(cmp.rows.size(), 1u);
    const auto summary = csv::read(out_path() + "/summary_ref_sogcc.csv");
    EXPECT_EQ(cmp.rows[0][cmp.column("controller")], "ref_sogcc");
    EXPECT_EQ(cmp.numbers("final_rmse")[0], summary.numbers("rmse").back());
    EXPECT_EQ(cmp.numbers("initial_rmse")[0], summary.numbers("rmse").front());
    EXPECT_EQ(cmp.numbers("collision_fraction")[0], 0.0);
}

TEST_F(CliTest, CompareOrdersReferenceControllers) {
    auto j = ref_config();
    j["controllers"] = {"ref_ssc", "ref_sogcc", "idm"};
    ASSERT_EQ(run({"compare", "--run", "--config", write_config(j), "--out", out_path(), "--trials", "20", "--horizon", "3000"}), 0) << err_.str();
    const auto cmp = csv::read(out_path() + "/comparison.csv");
    ASSERT_EQ(cmp.rows.size(), 3u);
    const auto ss = cmp.numbers("steady_state_rmse");
    EXPECT_LT(ss[1], ss[0]);
    EXPECT_NO_THROW(cmp.column("collision_fraction"));
    EXPECT_NO_THROW(cmp.column("mean_cost"));
}

TEST_F(CliTest, VersionAndHelp) {
    EXPECT_EQ(run({"--version"}), 0);
    EXPECT_NE(out_.str().find(cli::kVersion), std::string::npos);
    EXPECT_EQ(run({}), 64);
}
