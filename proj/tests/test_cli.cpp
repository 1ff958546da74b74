#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "pcsense/bivariate.hpp"
#include "pcsense/io.hpp"
#include "pcsense/montecarlo.hpp"

namespace fs = std::filesystem;
using namespace pcsense;

namespace {

struct CmdResult {
  int code;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("pcsense_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  CmdResult run(const std::string& args) {
    const auto out = dir_ / "stdout.txt";
    const auto err = dir_ / "stderr.txt";
    const std::string cmd = std::string(PCSENSE_CLI) + " " + args + " >" + out.string() +
                            " 2>" + err.string();
    const int status = std::system(cmd.c_str());
    return {WEXITSTATUS(status), slurp(out), slurp(err)};
  }

  fs::path write(const std::string& name, const std::string& text) {
    const auto p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    rows.push_back(f);
  }
  return rows;
}

}  // namespace

TEST_F(CliTest, SensitivityIdentityIsZero) {
  const auto s0 = write("s0.json", "[[1,0,0],[0,1,0],[0,0,1]]");
  const auto ch = write("c.json", R"({"post_mean":[0,0,0],"post_cov":[[1,0,0],[0,1,0],[0,0,1]]})");
  const auto r = run("sensitivity --sigma0 " + s0.string() + " --change " + ch.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(r.out.substr(0, r.out.find('\n')), io::kProfileHeader);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_EQ(rows[i][4], "0");
}

TEST_F(CliTest, SensitivityOneMeanChangeMatchesClosedForm) {
  const auto s0 = write("s0.json", "[[1,0.5],[0.5,1]]");
  const auto ch = write("c.json", R"({"post_mean":[1,0],"post_cov":[[1,0.5],[0.5,1]]})");
  const auto out = dir_ / "profile.csv";
  const auto r = run("sensitivity --sigma0 " + s0.string() + " --change " + ch.string() +
                     " --out " + out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(slurp(out));
  ASSERT_EQ(rows.size(), 3u);
  const auto [h1, h2] = closed_form_sensitivities(BivariateScenario{0.5, 1, 0});
  EXPECT_NEAR(std::stod(rows[1][4]), h1, 1e-12);
  EXPECT_NEAR(std::stod(rows[2][4]), h2, 1e-12);
  EXPECT_GT(h2, h1);
  EXPECT_NEAR(std::stod(rows[1][1]), 1.5, 1e-14);
}

TEST_F(CliTest, MalformedJsonExitsWithInputError) {
  const auto s0 = write("s0.json", "[[1,0.5],[0.5,1");
  const auto ch = write("c.json", R"({"post_mean":[0,0],"post_cov":[[1,0],[0,1]]})");
  const auto r = run("sensitivity --sigma0 " + s0.string() + " --change " + ch.string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("JSON"), std::string::npos);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(CliTest, DimensionMismatchAndMissingFileAreInputErrors) {
  const auto s0 = write("s0.json", "[[1,0.5],[0.5,1]]");
  const auto ch = write("c.json", R"({"post_mean":[0,0,0],"post_cov":[[1,0,0],[0,1,0],[0,0,1]]})");
  EXPECT_EQ(run("sensitivity --sigma0 " + s0.string() + " --change " + ch.string()).code, 2);
  EXPECT_EQ(run("sensitivity --sigma0 /nonexistent.json --change " + ch.string()).code, 2);
  EXPECT_EQ(run("simulate --dim 3").code, 2);  // seed is required
  EXPECT_EQ(run("").code, 2);
}

TEST_F(CliTest, OneVarianceMapTracesSqrtBoundary) {
  const auto r = run("bivariate-map --family one-variance --grid-rho 0.88:0.98:6 --grid-a 0.01:0.99:99");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_EQ(rows[0][0], "rho");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double rho = std::stod(rows[i][0]);
    const double a = std::stod(rows[i][1]);
    const double a0 = std::sqrt(4 * rho * rho - 3);
    const std::string& v = rows[i][3];
    if (std::abs(a - a0) < 1e-9) continue;
    EXPECT_EQ(v, a < a0 ? "minor" : "principal") << rho << " " << a;
    const double h1 = std::stod(rows[i][4]), h2 = std::stod(rows[i][5]);
    EXPECT_EQ(h2 > h1, a < a0);
  }
}

TEST_F(CliTest, EqualVarianceMapIsEqualEverywhere) {
  const auto r = run("bivariate-map --family equal-variance");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_GT(rows.size(), 100u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][3], "equal");
    EXPECT_NEAR(std::stod(rows[i][4]), std::stod(rows[i][5]), 1e-12);
  }
  EXPECT_NE(r.err.find("dropped 1 rho"), std::string::npos);
}

TEST_F(CliTest, CorrelationMapFavoursMinorAboveMinusOne) {
  const auto r = run("bivariate-map --family correlation --grid-rho 0.1:0.9:9 --grid-a -0.95:1.05:41");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = csv_rows(r.out);
  ASSERT_GT(rows.size(), 300u);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i][3], "minor");
    EXPECT_GT(std::stod(rows[i][5]), std::stod(rows[i][4]));
  }
}

TEST_F(CliTest, MeanMapAndGridClipping) {
  const auto r = run("bivariate-map --family mean --grid-rho -1:1:5");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("dropped 3 rho"), std::string::npos);
  const auto rows = csv_rows(r.out);
  EXPECT_EQ(rows.size(), 1u + 2u * 48u);
  EXPECT_EQ(run("bivariate-map --family shape").code, 2);
  EXPECT_EQ(run("bivariate-map --grid-rho 0.5:0.6:1").code, 2);
}

TEST_F(CliTest, SimulateWritesSchemasAndIsWorkerIndependent) {
  const auto a = dir_ / "a";
  const auto b = dir_ / "b";
  const std::string common = "simulate --dim 5 --n-sigma 6 --n-changes 20 --seed 99 ";
  const auto ra = run(common + "--workers 1 --out-dir " + a.string());
  ASSERT_EQ(ra.code, 0) << ra.err;
  const auto rb = run(common + "--workers 3 --out-dir " + b.string());
  ASSERT_EQ(rb.code, 0) << rb.err;
  EXPECT_EQ(slurp(a / "records.csv"), slurp(b / "records.csv"));
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_EQ(ra.out, rb.out);
  EXPECT_FALSE(fs::exists(a / ".incomplete"));

  const auto records = slurp(a / "records.csv");
  EXPECT_EQ(records.substr(0, records.find('\n')), io::kRecordHeader);
  EXPECT_EQ(csv_rows(records).size(), 1u + 6u * 20u * 3u * 5u);
  const auto summary = slurp(a / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), io::kSummaryHeader);
  EXPECT_NE(ra.out.find("correlation,"), std::string::npos);
}

TEST_F(CliTest, TwoDimensionalRunAgreesWithClassifiers) {
  // In D = 2 every change has sparsity 2: the mean moves by the same mu in
  // both coordinates, both sds scale equally, and the correlation shrinks by
  // a in (0, 1). The classifiers then predict principal/minor by sign(rho),
  // equal, and minor respectively. rho is recovered from the sigma substream.
  const auto out = dir_ / "d2";
  const auto r = run("simulate --dim 2 --n-sigma 40 --n-changes 10 --seed 5 --out-dir " +
                     out.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(out / "records.csv");
  const auto recs = io::read_records(in);
  ASSERT_EQ(recs.size(), 40u * 10u * 6u);
  for (std::size_t i = 0; i < recs.size(); i += 2) {
    const auto& p = recs[i];
    const auto& m = recs[i + 1];
    ASSERT_EQ(p.j, 1);
    ASSERT_EQ(m.j, 2);
    const Verdict v = numeric_verdict(p.h, m.h, 1e-12);
    switch (p.change_type) {
      case ChangeType::kMean: {
        auto rng = Substream::keyed(5, static_cast<std::uint64_t>(p.sigma_id), 0);
        const double rho = sample_correlation_uniform(2, rng)(0, 1);
        EXPECT_EQ(v, classify_mean_change(rho, 1.0, 1.0)) << rho;
        break;
      }
      case ChangeType::kVariance:
        EXPECT_EQ(v, Verdict::kEqual);
        break;
      case ChangeType::kCorrelation:
        EXPECT_EQ(v, Verdict::kMinorMoreSensitive);
        break;
    }
  }
}

TEST_F(CliTest, VerifyPassesAndFaultInjectionFails) {
  const auto ok = run("verify --lemma-samples 2000");
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const auto bad = run("verify --lemma-samples 200 --inject-sign-flip");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL"), std::string::npos);
  EXPECT_NE(bad.out.find("rho="), std::string::npos);
}
