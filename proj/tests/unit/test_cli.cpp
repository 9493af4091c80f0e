#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <unistd.h>

#include "fuq/cli/cli.hpp"
#include "fuq/dataset_io.hpp"
#include "fuq/stats.hpp"
#include "fuq/testbed.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result fuq_run(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = fuq::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

std::size_t count_csv_files(const fs::path& dir) {
  std::size_t k = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.path().extension() == ".csv") ++k;
  return k;
}

class CliTest : public ::testing::Test {
 protected:
  static fs::path root;
  static fs::path dataset;
  static fs::path model;

  static void SetUpTestSuite() {
    root = fs::temp_directory_path() / ("fuq_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    auto r = fuq_run({"testbed", "--out", (root / "tb").string(), "--n", "150", "--seed", "5", "--oracle-n", "100"});
    ASSERT_EQ(r.code, 0) << r.err;
    dataset = root / "tb" / "dataset.csv";
    r = fuq_run({"fit", "--dataset", dataset.string(), "--out", (root / "fit").string(), "--restarts", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    model = root / "fit" / "model.json";
  }

  static void TearDownTestSuite() { fs::remove_all(root); }
};

fs::path CliTest::root;
fs::path CliTest::dataset;
fs::path CliTest::model;

TEST_F(CliTest, TestbedDatasetHasOneColumnPerInputPlusImAndResponse) {
  const auto rows = read_csv(dataset);
  ASSERT_EQ(rows.size(), 151u);
  const std::vector<std::string> header{"a", "x1", "x2", "x3", "x4", "x5", "x6", "y"};
  EXPECT_EQ(rows[0], header);
  for (const auto& r : rows) EXPECT_EQ(r.size(), 8u);
}

TEST_F(CliTest, TestbedTruthFileMatchesRecomputation) {
  const auto spec = fuq::linear_testbed();
  const auto rows = read_csv(root / "tb" / "truth_fragility.csv");
  ASSERT_EQ(rows.size(), 151u);
  EXPECT_EQ(rows[0].back(), "psi");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    std::vector<double> x;
    for (std::size_t k = 1; k + 1 < rows[i].size(); ++k) x.push_back(std::stod(rows[i][k]));
    EXPECT_EQ(std::stod(rows[i].back()), fuq::true_fragility(spec, std::stod(rows[i][0]), x));
  }
}

TEST_F(CliTest, TestbedOracleFileCarriesStandardErrors) {
  const auto rows = read_csv(root / "tb" / "oracle_indices.csv");
  const std::vector<std::string> header{"kind", "input", "estimate", "se"};
  EXPECT_EQ(rows[0], header);
  EXPECT_EQ(rows.size(), 1u + 4u * 6u);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GE(std::stod(rows[i][3]), 0.0);
}

TEST_F(CliTest, ManifestRecordsConfigSeedsAndOutputs) {
  const json m = read_json(root / "tb" / "manifest.json");
  EXPECT_EQ(m["command"], "testbed");
  EXPECT_EQ(m["config"]["n"], 150);
  EXPECT_EQ(m["seeds"]["master"], 5);
  EXPECT_TRUE(m["seeds"].contains("dataset"));
  EXPECT_TRUE(m.contains("version"));
  for (const auto& f : m["outputs"]) EXPECT_TRUE(fs::exists(root / "tb" / f.get<std::string>())) << f;
}

TEST_F(CliTest, FitReportHasQ2AndNineCoverageRows) {
  const json rep = read_json(root / "fit" / "fit_report.json");
  const double q2 = rep["q2"];
  EXPECT_GE(q2, 0.0);
  EXPECT_LE(q2, 1.0);
  EXPECT_EQ(rep["coverage"].size(), 9u);
  EXPECT_EQ(rep["noise"]["type"], "heteroskedastic");
}

TEST_F(CliTest, FitRerunIsByteIdentical) {
  const auto out = root / "fit2";
  const auto r = fuq_run({"fit", "--dataset", dataset.string(), "--out", out.string(), "--restarts", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"fit_report.json", "model.json"}) EXPECT_EQ(slurp(out / f), slurp(root / "fit" / f)) << f;
}

TEST_F(CliTest, MalformedCsvRowGivesInputErrorWithLineNumber) {
  const auto bad = root / "bad.csv";
  {
    std::ofstream f(bad);
    f << "a,x1,y\n1.0,2.0,3.0\n1.5,oops,2.0\n";
  }
  const auto r = fuq_run({"fit", "--dataset", bad.string(), "--out", (root / "badfit").string()});
  EXPECT_EQ(r.code, fuq::cli::kInputError);
  EXPECT_NE(r.err.find("line 3"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingModelIsAnInputError) {
  const auto r = fuq_run({"fragility", "--model", (root / "nope.json").string(), "--out", (root / "x").string(),
                          "--threshold", "1"});
  EXPECT_EQ(r.code, fuq::cli::kInputError);
}

TEST_F(CliTest, BadSettingsAreInputErrors) {
  const auto cfg = root / "cfg_bad.json";
  {
    std::ofstream f(cfg);
    f << R"({"unknown_key": 3})";
  }
  EXPECT_EQ(fuq_run({"testbed", "--config", cfg.string(), "--out", (root / "y").string()}).code, fuq::cli::kInputError);
  EXPECT_EQ(fuq_run({"testbed", "--out", (root / "y").string(), "--grid", "5,1,10"}).code, fuq::cli::kInputError);
  EXPECT_EQ(fuq_run({"testbed", "--out", (root / "y").string(), "--n", "0"}).code, fuq::cli::kInputError);
  EXPECT_EQ(fuq_run({"fit", "--dataset", dataset.string(), "--out", (root / "y").string(), "--variant", "other"}).code,
            fuq::cli::kInputError);
  EXPECT_EQ(fuq_run({"gsa", "--model", model.string(), "--out", (root / "y").string()}).code, fuq::cli::kInputError);
  EXPECT_EQ(fuq_run({"nonsense"}).code, fuq::cli::kInputError);
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  const auto cfg = root / "cfg.json";
  {
    std::ofstream f(cfg);
    f << R"({"m": 50, "P": 7, "grid": [0.5, 10, 8], "threshold": 1.0})";
  }
  const auto out = root / "frag_cfg";
  const auto r = fuq_run({"fragility", "--config", cfg.string(), "--model", model.string(), "--out", out.string(),
                          "--m", "20"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json m = read_json(out / "manifest.json");
  EXPECT_EQ(m["config"]["m"], 20);
  EXPECT_EQ(m["config"]["P"], 7);
  EXPECT_EQ(read_csv(out / "mean.csv").size(), 9u);
}

TEST_F(CliTest, FragilityWritesFiveCurvesInUnitInterval) {
  const auto out = root / "frag";
  const auto r = fuq_run({"fragility", "--model", model.string(), "--out", out.string(), "--threshold", "1",
                          "--gamma", "0.1,0.9", "--m", "60", "--P", "30", "--grid", "0.1,25,20"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(count_csv_files(out), 5u);
  for (const char* f : {"mean.csv", "quantile_0.1.csv", "quantile_0.9.csv", "bilevel_0.1.csv", "bilevel_0.9.csv"}) {
    const auto rows = read_csv(out / f);
    ASSERT_EQ(rows.size(), 21u) << f;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const double v = std::stod(rows[i][1]);
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  const json m = read_json(out / "manifest.json");
  EXPECT_TRUE(m["seeds"].contains("posterior"));
  EXPECT_TRUE(m["seeds"].contains("design"));
}

TEST_F(CliTest, SeveralThresholdsGetOneDirectoryEach) {
  const auto out = root / "frag_multi";
  const auto r = fuq_run({"fragility", "--model", model.string(), "--out", out.string(), "--threshold", "0.5,2",
                          "--m", "20", "--P", "10", "--grid", "0.5,20,6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out / "c_0.5" / "mean.csv"));
  EXPECT_TRUE(fs::exists(out / "c_2" / "bilevel_0.9.csv"));
  EXPECT_EQ(count_csv_files(out), 10u);
}

TEST_F(CliTest, GsaSingleDrawHasZeroMetamodelSpread) {
  const auto out = root / "gsa_p1";
  const auto r = fuq_run({"gsa", "--model", model.string(), "--out", out.string(), "--threshold", "1", "--m", "300",
                          "--P", "1", "--B", "5", "--grid", "0.5,20,8"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = read_json(out / "sensitivity.json");
  for (const auto& [kind, rows] : doc["indices"].items())
    for (const auto& row : rows) EXPECT_EQ(row["sigma_gp"].get<double>(), 0.0) << kind;
}

TEST_F(CliTest, GsaRatioColumnMatchesReplicates) {
  const auto out = root / "gsa";
  const auto r = fuq_run({"gsa", "--model", model.string(), "--out", out.string(), "--threshold", "1", "--m", "300",
                          "--P", "4", "--B", "6", "--grid", "0.5,20,8"});
  ASSERT_EQ(r.code, 0) << r.err;
  // values[kind][input][p][b]
  std::map<std::string, std::map<std::string, std::vector<std::vector<double>>>> values;
  const auto rows = read_csv(out / "replicates.csv");
  ASSERT_EQ(rows[0], (std::vector<std::string>{"kind", "input", "p", "b", "value"}));
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto& v = values[rows[i][0]][rows[i][1]];
    const auto p = std::stoul(rows[i][2]);
    const auto b = std::stoul(rows[i][3]);
    v.resize(4, std::vector<double>(6, std::nan("")));
    v[p][b] = std::stod(rows[i][4]);
  }
  const json doc = read_json(out / "sensitivity.json");
  std::size_t checked = 0;
  for (const auto& [kind, list] : doc["indices"].items()) {
    for (const auto& row : list) {
      const auto& v = values.at(kind).at(row["name"].get<std::string>());
      double gp = 0.0;
      for (std::size_t b = 0; b < 6; ++b) {
        std::vector<double> col;
        for (std::size_t p = 0; p < 4; ++p) col.push_back(v[p][b]);
        gp += fuq::sample_variance(col);
      }
      double mc = 0.0;
      for (std::size_t p = 0; p < 4; ++p) mc += fuq::sample_variance(v[p]);
      const double ratio = std::sqrt(mc / 4.0) / std::sqrt(gp / 6.0);
      if (row["ratio_mc_gp"].is_null()) continue;
      EXPECT_NEAR(row["ratio_mc_gp"].get<double>(), ratio, 1e-12) << kind;
      ++checked;
    }
  }
  EXPECT_GE(checked, 12u);
}

TEST_F(CliTest, GsaRanksTheSingleActiveInputFirst) {
  const auto cfg = root / "single.json";
  {
    std::ofstream f(cfg);
    f << R"({"betas": [0.3, 0, 0, 0, 0, 0], "oracle": false})";
  }
  auto r = fuq_run({"testbed", "--config", cfg.string(), "--out", (root / "single_tb").string(), "--n", "200"});
  ASSERT_EQ(r.code, 0) << r.err;
  r = fuq_run({"fit", "--dataset", (root / "single_tb" / "dataset.csv").string(), "--out",
               (root / "single_fit").string(), "--restarts", "2"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto out = root / "single_gsa";
  r = fuq_run({"gsa", "--model", (root / "single_fit" / "model.json").string(), "--out", out.string(), "--threshold",
               "1", "--m", "1000", "--P", "10", "--B", "10", "--grid", "0.5,20,10"});
  ASSERT_EQ(r.code, 0) << r.err;
  const json doc = read_json(out / "sensitivity.json");
  ASSERT_EQ(doc["indices"].size(), 4u);
  for (const auto& [kind, rows] : doc["indices"].items()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rows.size(); ++i)
      if (rows[i]["estimate"].get<double>() > rows[best]["estimate"].get<double>()) best = i;
    EXPECT_EQ(best, 0u) << kind;
  }
}

TEST_F(CliTest, ValidateRerunIsByteIdentical) {
  const auto dir = root / "val";
  const std::vector<std::string> args{"validate", "--quick", "--criteria", "1,9", "--out", dir.string()};
  const auto first = fuq_run(args);
  ASSERT_EQ(first.code, 0) << first.out << first.err;
  const std::string report = slurp(dir / "report.json");
  const std::string manifest = slurp(dir / "manifest.json");
  fs::remove_all(dir);
  ASSERT_EQ(fuq_run(args).code, 0);
  EXPECT_EQ(slurp(dir / "report.json"), report);
  EXPECT_EQ(slurp(dir / "manifest.json"), manifest);
  EXPECT_EQ(read_json(dir / "report.json")["criteria"].size(), 2u);
}

}  // namespace
