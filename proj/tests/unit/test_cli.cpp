#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "quanto/expert_matrix.hpp"
#include "quanto/key_value.hpp"
#include "quanto/market_model.hpp"
#include "quanto/normal.hpp"
#include "quanto/stats.hpp"

namespace fs = std::filesystem;
using namespace quanto;

namespace {

struct Run {
    int code;
    std::string out;
};

Run run(const std::string& args, const std::string& env = "") {
    const fs::path capture = fs::temp_directory_path() / ("quanto_cli_" + std::to_string(::getpid()) + ".out");
    const std::string cmd = env + " " + QUANTO_CLI_PATH + " " + args + " >" + capture.string() + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    std::ifstream in(capture);
    std::stringstream ss;
    ss << in.rdbuf();
    fs::remove(capture);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, ss.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("quanto_cli_test_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    fs::path dir_;
};

// Normal scores: Phi^{-1}(rank / (n + 1)).
std::vector<double> scores(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return x[a] < x[b]; });
    std::vector<double> s(x.size());
    for (std::size_t r = 0; r < idx.size(); ++r)
        s[idx[r]] = norm_quantile(static_cast<double>(r + 1) / static_cast<double>(x.size() + 1));
    return s;
}

}  // namespace

TEST_F(Cli, PractitionerMatchesClosedForm) {
    const auto r = run("price --model practitioner --strike 2500 --maturity 3 --vol-sf-atm 0.2 --vol-q-atm 0.2 "
                       "--vol-sf-strike 0.2");
    ASSERT_EQ(r.code, 0);
    ASSERT_EQ(r.out.rfind("price=", 0), 0u) << r.out;
    const auto se = r.out.find(" se=");
    ASSERT_NE(se, std::string::npos);
    EXPECT_NEAR(std::stod(r.out.substr(6, se - 6)), 606.83240401934245, 1e-7);
    EXPECT_EQ(r.out.substr(se), " se=0\n");
}

TEST_F(Cli, ConfigFileIsHonoured) {
    std::ofstream(path("m.cfg")) << "rho_sf_qinv = -0.7\nq0 = 3.1\ns0 = 2500\nr = 0.1\nrf = 0.01\nq_fix = 6\n";
    const auto r = run("price --model practitioner --config " + path("m.cfg") +
                       " --strike 2500 --maturity 3 --vol-sf-atm 0.2 --vol-q-atm 0.2 --vol-sf-strike 0.2");
    ASSERT_EQ(r.code, 0);
    EXPECT_NEAR(std::stod(r.out.substr(6)), 2 * 606.83240401934245, 1e-6);
    std::ofstream(path("bad.cfg")) << "rho_sf_qinv = -0.7\nq0 = 3.1\n";
    EXPECT_EQ(run("price --model practitioner --config " + path("bad.cfg") +
                  " --strike 2500 --maturity 3 --vol-sf-atm 0.2 --vol-q-atm 0.2 --vol-sf-strike 0.2")
                  .code,
              1);
}

TEST_F(Cli, UsageErrorsExitTwo) {
    EXPECT_EQ(run("price --model practitioner --maturity 3 --vol-sf-atm 0.2 --vol-q-atm 0.2 --vol-sf-strike 0.2").code, 2);
    EXPECT_EQ(run("price --model copula --strike 2500 --maturity 1").code, 2);
    EXPECT_EQ(run("price --model bogus --strike 2500 --maturity 1").code, 2);
    EXPECT_EQ(run("case --id 7 --out " + path("c.csv")).code, 2);
    EXPECT_EQ(run("case --id 0 --out " + path("c.csv")).code, 2);
    EXPECT_EQ(run("gen-expert --family gaussian --param abc --out " + path("e.csv")).code, 2);
    EXPECT_EQ(run("").code, 2);
    EXPECT_FALSE(fs::exists(path("c.csv")));
}

TEST_F(Cli, DomainErrorsExitOne) {
    EXPECT_EQ(run("price --model practitioner --strike -5 --maturity 3 --vol-sf-atm 0.2 --vol-q-atm 0.2 "
                  "--vol-sf-strike 0.2")
                  .code,
              1);
    EXPECT_EQ(run("gen-expert --family gaussian --param -0.7 --n 5 --out " + path("e.csv")).code, 1);
    EXPECT_EQ(run("gen-expert --family gaussian --param 1.5 --n 100 --out " + path("e.csv")).code, 1);
    EXPECT_TRUE(fs::is_empty(dir_)) << "failed commands must leave no files";
}

TEST_F(Cli, UnwritableOutputExitsOne) {
    EXPECT_EQ(run("gen-expert --family gaussian --param -0.7 --n 100 --out " + path("missing/dir/e.csv")).code, 1);
    EXPECT_EQ(run("case --id 1 --paths 500 --steps 4 --out " + path("missing/c.csv")).code, 1);
}

TEST_F(Cli, GaussianExpertRoundTrip) {
    ASSERT_EQ(run("gen-expert --family gaussian --param -0.7 --n 100000 --seed 3 --out " + path("g.csv")).code, 0);
    const auto m = load_expert_csv(path("g.csv"));
    ASSERT_EQ(m.size(), 100000u);
    EXPECT_NEAR(stats::correlation(scores(m.column(1)), scores(m.column(2))), -0.7, 0.02);
    const auto kv = read_key_values(path("g.csv") + ".manifest");
    EXPECT_EQ(kv.find("command")->value, "gen-expert");
    EXPECT_EQ(kv.find("seed")->value, "3");
    EXPECT_EQ(kv.find("rho")->value, "-0.7");
    ASSERT_TRUE(kv.find("version"));
    ASSERT_TRUE(kv.find("started_at"));
}

TEST_F(Cli, FrankTargetRecordsResolvedAlpha) {
    ASSERT_EQ(run("gen-expert --family frank --param rho=-0.7 --n 200 --out " + path("f.csv")).code, 0);
    const auto kv = read_key_values(path("f.csv") + ".manifest");
    ASSERT_TRUE(kv.find("frank_alpha"));
    const double alpha = parse_double(kv.find("frank_alpha")->value, "alpha");
    EXPECT_LT(alpha, 0);
    EXPECT_EQ(kv.find("frank_target_rho")->value, "-0.7");
    // Replaying with the resolved alpha reproduces the file.
    ASSERT_EQ(run("gen-expert --family frank --param alpha=" + kv.find("frank_alpha")->value + " --n 200 --out " +
                  path("f2.csv"))
                  .code,
              0);
    EXPECT_EQ(slurp(path("f.csv")), slurp(path("f2.csv")));
}

TEST_F(Cli, CaseIsByteIdenticalAcrossRunsAndWorkers) {
    const std::string args = "case --id 2 --paths 2000 --steps 12 --seed 9 --out ";
    ASSERT_EQ(run(args + path("a.csv"), "QUANTO_THREADS=1").code, 0);
    ASSERT_EQ(run(args + path("b.csv"), "QUANTO_THREADS=3").code, 0);
    ASSERT_EQ(run(args + path("c.csv")).code, 0);
    const auto a = slurp(path("a.csv"));
    EXPECT_EQ(a, slurp(path("b.csv")));
    EXPECT_EQ(a, slurp(path("c.csv")));
    EXPECT_EQ(a.substr(0, a.find('\n')), "strike,price_practitioner,price_dsw,se_dsw,price_copula,se_copula");
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 22);
    const auto kv = read_key_values(path("a.csv") + ".manifest");
    EXPECT_EQ(kv.find("case_id")->value, "2");
    EXPECT_EQ(kv.find("paths")->value, "2000");
    EXPECT_EQ(kv.find("family")->value, "gaussian");
    EXPECT_EQ(kv.find("phi_sf")->value, "-0.7,1,0.1,0.2,0.5");
    EXPECT_EQ(MarketConfig::from_key_values([&] {
                  KeyValueFile only;
                  for (auto k : MarketConfig::kKeys) only.set(std::string(k), kv.find(k)->value);
                  return only;
              }()).q0(),
              3.1);
}

TEST_F(Cli, SmileWritesFlaggedCsv) {
    ASSERT_EQ(run("smile --phi=0,0,0,0.04,0 --spot 100 --drift 0.01 --maturity 1 --strikes 100,1e6 --paths 2000 "
                  "--steps 1 --out " + path("s.csv"))
                  .code,
              0);
    const auto text = slurp(path("s.csv"));
    EXPECT_EQ(text.substr(0, text.find('\n')), "strike,price,se_price,implied_vol,se_vol,flag");
    EXPECT_NE(text.find(",ok\n"), std::string::npos);
    EXPECT_NE(text.find(",outside_band\n"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("s.csv") + ".manifest"));
}

TEST_F(Cli, ModelPricesAreDeterministic) {
    const std::string args = "price --model dsw --strike 2500 --maturity 0.5 --paths 3000 --seed 4";
    const auto a = run(args), b = run(args);
    ASSERT_EQ(a.code, 0);
    EXPECT_EQ(a.out, b.out);
    const auto c = run("price --model copula --copula-family t --copula-param=-0.7,3 --expert-rows 2000 --strike 2500 "
                       "--maturity 0.5 --paths 3000 --seed 4");
    ASSERT_EQ(c.code, 0);
    EXPECT_EQ(c.out.rfind("price=", 0), 0u);
}
