#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "specaus/specaus.hpp"

using namespace specaus;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = SPECAUS_SOURCE_DIR;
const fs::path kCli = SPECAUS_CLI;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run(const std::string& args) {
  const std::string cmd = kCli.string() + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("specaus_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  std::string config() const { return (kSource / "configs" / "supplement.json").string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(dir_ / name) << text;
    return path(name);
  }

  fs::path dir_;
};

json base_config() {
  std::ifstream in(kSource / "configs" / "supplement.json");
  return json::parse(in);
}

CsvTable table(std::vector<std::string> header, std::vector<std::vector<double>> cols) {
  CsvTable t;
  t.header = std::move(header);
  t.columns = std::move(cols);
  return t;
}

}  // namespace

TEST(Config, BundledConfigsParse) {
  const auto c = load_config(kSource / "configs" / "supplement.json");
  EXPECT_EQ(c.graph.size(), 5u);
  EXPECT_EQ(c.queries.size(), 5u);
  EXPECT_EQ(c.angles.size(), 64u);
  ASSERT_TRUE(c.model.has_value());
  EXPECT_EQ(c.model->coefficients().size(), 12u);
  const auto s = load_config(kSource / "configs" / "solar_nao.json");
  EXPECT_EQ(s.lags.order, 10);
  EXPECT_NEAR(s.angles.front(), 2 * std::numbers::pi / 20, 1e-12);
  EXPECT_NEAR(s.angles.back(), std::numbers::pi, 1e-12);
}

TEST(Config, QueryPathResolution) {
  const auto c = parse_config(base_config());
  EXPECT_EQ(c.queries[0].paths.size(), 1u);
  EXPECT_EQ(c.queries[1].paths[0].vertices.size(), 3u);
  EXPECT_EQ(c.queries[2].paths.size(), 2u);
  EXPECT_EQ(c.queries[3].paths.size(), 2u);
}

TEST(Config, RejectsBadInput) {
  auto j = base_config();
  j["queries"][0]["target"] = "nowhere";
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["schema"] = "specaus.config/0";
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["confidence"] = 1.5;
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["lags"]["sets"]["w"]["u1"] = {1, 2};
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["queries"][0]["source"] = "u1";  // no edge u1 -> w
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["queries"][1]["paths"] = json::array();
  EXPECT_THROW(parse_config(j), ValidationError);
  j = base_config();
  j["frequencies"] = json{{"periods", json{{"min", 1.0}, {"max", 10.0}, {"count", 4}}}};
  EXPECT_THROW(parse_config(j), ValidationError);
}

TEST(Preprocess, Difference) {
  PreprocessSpec spec;
  spec.columns["x"].difference = true;
  const auto out = preprocess(table({"x"}, {{1, 2, 3, 4}}), spec);
  EXPECT_EQ(out.columns.back(), (std::vector<double>{1, 1, 1}));
}

TEST(Preprocess, DifferencingAlignsOtherColumns) {
  PreprocessSpec spec;
  spec.columns["x"].difference = true;
  const auto out = preprocess(table({"x", "y"}, {{1, 2, 4, 8}, {5, 6, 7, 8}}), spec);
  EXPECT_EQ(out.columns[0], (std::vector<double>{1, 2, 4}));
  EXPECT_EQ(out.columns[1], (std::vector<double>{6, 7, 8}));
}

TEST(Preprocess, ZeroVariance) {
  PreprocessSpec spec;
  spec.columns["x"].normalize = true;
  try {
    preprocess(table({"x"}, {{2, 2, 2}}), spec);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("zero variance"), std::string::npos);
  }
}

TEST(Preprocess, NormalizeGivesUnitVariance) {
  PreprocessSpec spec;
  spec.columns["x"].normalize = true;
  const auto out = preprocess(table({"x"}, {{1, 2, 3, 4, 10}}), spec);
  double m = 0, s = 0;
  for (double v : out.columns[0]) m += v;
  for (double v : out.columns[0]) s += v * v;
  EXPECT_NEAR(m, 0.0, 1e-12);
  EXPECT_NEAR(s / 5, 1.0, 1e-12);
}

TEST(Preprocess, WinterAverageAcrossYearBoundary) {
  std::vector<double> year, month, x;
  for (int y = 2000; y <= 2002; ++y)
    for (int m = 1; m <= 12; ++m) {
      year.push_back(y);
      month.push_back(m);
      x.push_back(100.0 * y + m);
    }
  PreprocessSpec spec;
  spec.columns["x"].seasonal_months = {12, 1, 2};
  const auto out = preprocess(table({"year", "month", "x"}, {year, month, x}), spec);
  // winters 2001 (Dec 2000, Jan/Feb 2001) and 2002; winter 2000 lacks December and 2003 lacks Jan/Feb
  EXPECT_EQ(out.columns[0], (std::vector<double>{2001, 2002}));
  EXPECT_NEAR(out.columns[1][0], (200012.0 + 200101.0 + 200102.0) / 3, 1e-9);
  EXPECT_NEAR(out.columns[1][1], (200112.0 + 200201.0 + 200202.0) / 3, 1e-9);
}

TEST(Io, CsvRoundTripAndNumberFormat) {
  std::istringstream in("a,b\n1,2.5\n-3,4e-3\n");
  const auto t = parse_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.columns[1], (std::vector<double>{2.5, 0.004}));
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0 / 3.0, 6), "0.333333");
  std::istringstream bad("a,b\n1\n");
  EXPECT_THROW(parse_csv(bad), ValidationError);
}

TEST_F(Cli, SimulateWritesTPlusQRowsDeterministically) {
  ASSERT_EQ(run("simulate --config " + config() + " --output " + path("a.csv") + " --seed 11 --length 500"), 0);
  ASSERT_EQ(run("simulate --config " + config() + " --output " + path("b.csv") + " --seed 11 --length 500"), 0);
  ASSERT_EQ(run("simulate --config " + config() + " --output " + path("c.csv") + " --seed 12 --length 500"), 0);
  const auto a = slurp(path("a.csv"));
  EXPECT_EQ(a, slurp(path("b.csv")));
  EXPECT_NE(a, slurp(path("c.csv")));
  EXPECT_EQ(read_csv(path("a.csv")).rows(), 503u);
}

TEST_F(Cli, WhiteNoiseColumnsAreUncorrelated) {
  auto j = base_config();
  j["model"]["coefficients"] = json::array();
  const auto cfg = write("white.json", j.dump());
  ASSERT_EQ(run("simulate --config " + cfg + " --output " + path("w.csv") + " --seed 3 --length 10000"), 0);
  const auto t = read_csv(path("w.csv"));
  for (std::size_t a = 0; a < 5; ++a)
    for (std::size_t b = a + 1; b < 5; ++b) {
      double ab = 0, aa = 0, bb = 0;
      for (std::size_t i = 0; i < t.rows(); ++i) {
        ab += t.columns[a][i] * t.columns[b][i];
        aa += t.columns[a][i] * t.columns[a][i];
        bb += t.columns[b][i] * t.columns[b][i];
      }
      EXPECT_LT(std::abs(ab / std::sqrt(aa * bb)), 0.05);
    }
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("simulate --config " + config() + " --output " + path("missing/dir/x.csv")), 3);
  EXPECT_EQ(run("simulate --config " + path("nope.json") + " --output " + path("x.csv")), 3);
  EXPECT_EQ(run("simulate --config " + write("bad.json", "{ not json") + " --output " + path("x.csv")), 1);
  auto j = base_config();
  j["queries"][0]["source"] = "ghost";
  EXPECT_EQ(run("analyze --config " + write("ghost.json", j.dump()) + " --input x --output " + path("r.json")), 1);
  EXPECT_EQ(run("frobnicate"), 1);
  j = base_config();
  j["model"]["coefficients"] = json::array({{{"driver", "u1"}, {"target", "u1"}, {"lag", 1}, {"value", 1.0}}});
  EXPECT_EQ(run("simulate --config " + write("unit_root.json", j.dump()) + " --output " + path("x.csv")), 2);
  // constant column breaks the regression
  std::string csv = "u1,u2,v,m,w\n";
  for (int i = 0; i < 50; ++i) csv += "1,1,1,1,1\n";
  EXPECT_EQ(run("fit --config " + config() + " --input " + write("flat.csv", csv) + " --output " + path("f.json")), 2);
}

TEST_F(Cli, FitAndAnalyzeEndToEnd) {
  ASSERT_EQ(run("simulate --config " + config() + " --output " + path("s.csv") + " --seed 5 --length 500"), 0);
  ASSERT_EQ(run("fit --config " + config() + " --input " + path("s.csv") + " --output " + path("fit.json")), 0);
  const auto fit = json::parse(slurp(path("fit.json")));
  EXPECT_EQ(fit.at("schema"), "specaus.fit/1");
  EXPECT_EQ(fit.at("T"), 500);
  ASSERT_EQ(run("analyze --config " + config() + " --input " + path("s.csv") + " --output " + path("r.json") +
                " --grid 16 --alpha 0.9"),
            0);
  const auto r = json::parse(slurp(path("r.json")));
  EXPECT_EQ(r.at("schema"), "specaus.results/1");
  EXPECT_EQ(r.at("confidence"), 0.9);
  ASSERT_EQ(r.at("records").size(), 5u);
  for (const auto& rec : r.at("records")) {
    ASSERT_EQ(rec.at("rows").size(), 16u);
    double prev = -1;
    for (const auto& row : rec.at("rows")) {
      ASSERT_FALSE(row.contains("error")) << row.dump();
      EXPECT_GT(row.at("angle").get<double>(), prev);
      prev = row.at("angle").get<double>();
      EXPECT_LE(row.at("lo").get<double>(), row.at("magnitude").get<double>());
      EXPECT_GE(row.at("hi").get<double>(), row.at("magnitude").get<double>());
      EXPECT_GE(row.at("p_value").get<double>(), 0.0);
      EXPECT_LE(row.at("p_value").get<double>(), 1.0);
    }
  }
  EXPECT_TRUE(r.at("records")[2].at("rows")[0].contains("any_path_p_value"));
  EXPECT_EQ(r.at("records")[3].at("rows")[0].at("ancestors").size(), 3u);
  const auto csv = slurp(path("r.csv"));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 5 * 16);
}

TEST_F(Cli, AnalyzeIsDeterministicAndMatchesGolden) {
  ASSERT_EQ(run("simulate --config " + config() + " --output " + path("s.csv") + " --seed 1 --length 300"), 0);
  ASSERT_EQ(run("analyze --config " + config() + " --input " + path("s.csv") + " --output " + path("a.json") + " --grid 4"), 0);
  ASSERT_EQ(run("analyze --config " + config() + " --input " + path("s.csv") + " --output " + path("b.json") + " --grid 4"), 0);
  EXPECT_EQ(slurp(path("a.json")), slurp(path("b.json")));
  EXPECT_EQ(slurp(path("a.csv")), slurp(kSource / "tests" / "golden" / "supplement_seed1_T300_grid4.csv"));
}

TEST_F(Cli, PreprocessCommand) {
  auto j = base_config();
  j["preprocess"] = {{"columns", {{"u1", {{"difference", true}}}}}};
  const auto cfg = write("pre.json", j.dump());
  const auto in = write("in.csv", "u1,u2\n1,5\n2,6\n4,7\n");
  ASSERT_EQ(run("preprocess --config " + cfg + " --input " + in + " --output " + path("out.csv")), 0);
  const auto t = read_csv(path("out.csv"));
  EXPECT_EQ(t.columns[0], (std::vector<double>{1, 2}));
  EXPECT_EQ(t.columns[1], (std::vector<double>{6, 7}));
}
