#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "eigenclose/report.hpp"

using namespace eigenclose;

TEST(FitRate, Basics) {
  EXPECT_NEAR(*fit_rate({4.0, 1.0}, {1.0, 0.5}), 2.0, 1e-12);
  EXPECT_NEAR(*fit_rate({16.0, 1.0}, {1.0, 0.5}), 4.0, 1e-12);
  EXPECT_FALSE(fit_rate({1.0}, {0.5}).has_value());
  EXPECT_FALSE(fit_rate({-1.0, 0.0, 2.0}, {1.0, 0.5, 0.25}).has_value());  // one point left
  EXPECT_NEAR(*fit_rate({-1.0, 4.0, 1.0}, {1.0, 1.0, 0.5}), 2.0, 1e-12);   // negatives excluded
}

TEST(FitRate, RecordedHigherOrderSequence) {
  // slope of a recorded fourth-order error sequence (levels 8, 16, 32)
  const double exact = 2.0 * std::numbers::pi * std::numbers::pi;
  const std::vector<double> values = {19.743647, 19.739492, 19.739227};
  std::vector<double> errs, hs;
  for (size_t k = 0; k < values.size(); ++k) {
    errs.push_back(values[k] - exact);
    hs.push_back(1.0 / (8 << k));
  }
  EXPECT_NEAR(*fit_rate(errs, hs), 3.9, 0.15);
}

namespace {

ExperimentConfig small_config() {
  ExperimentConfig config;
  config.domain = DomainKind::UnitSquare;
  config.nc_kind = ElementKind::EQ1Rot;
  config.levels = {4, 8};
  config.m = 3;
  return config;
}

}  // namespace

TEST(Experiment, RunsAndDetectsTrends) {
  const ExperimentResult result = run_experiment(small_config());
  ASSERT_EQ(result.levels.size(), 2u);
  EXPECT_FALSE(result.any_failure);
  EXPECT_FALSE(result.any_inversion);
  for (const LevelResult& level : result.levels) {
    ASSERT_FALSE(level.failed);
    ASSERT_EQ(level.lower.size(), 3u);
    ASSERT_EQ(level.upper_lowest.size(), 3u);
    ASSERT_EQ(level.upper_higher.size(), 3u);
  }
  // lower bounds increase under refinement, upper bounds decrease
  for (int j = 0; j < 3; ++j) {
    EXPECT_LT(result.levels[0].lower[size_t(j)], result.levels[1].lower[size_t(j)]);
    EXPECT_GT(result.levels[0].upper_higher[size_t(j)], result.levels[1].upper_higher[size_t(j)]);
  }
  EXPECT_TRUE(result.reference_certified);
  ASSERT_FALSE(result.rate_tables.empty());
  ASSERT_FALSE(result.err_series.empty());
  EXPECT_EQ(result.err_series[0].name, "Err1");
}

TEST(Experiment, LowerOnlyConfig) {
  ExperimentConfig config = small_config();
  config.post_lowest = config.post_higher = false;
  const ExperimentResult result = run_experiment(config);
  for (const LevelResult& level : result.levels) {
    EXPECT_TRUE(level.upper_lowest.empty());
    EXPECT_TRUE(level.upper_higher.empty());
    EXPECT_FALSE(level.lower.empty());
  }
}

TEST(Experiment, FailedLevelIsRecordedAndOthersContinue) {
  ExperimentConfig config = small_config();
  config.levels = {1, 4};  // n=1 has no free conforming DOFs -> postprocess fails
  const ExperimentResult result = run_experiment(config);
  ASSERT_EQ(result.levels.size(), 2u);
  EXPECT_TRUE(result.levels[0].failed);
  EXPECT_FALSE(result.levels[0].error.empty());
  EXPECT_FALSE(result.levels[1].failed);
  EXPECT_TRUE(result.any_failure);
}

TEST(Experiment, ConfigValidation) {
  ExperimentConfig config = small_config();
  config.levels = {8, 8};
  EXPECT_THROW(run_experiment(config), std::invalid_argument);
  config.levels = {8};
  config.m = 0;
  EXPECT_THROW(run_experiment(config), std::invalid_argument);
}

TEST(Emit, CsvLayoutAndDeterminism) {
  const ExperimentResult result = run_experiment(small_config());
  const std::string csv = emit_csv(result);
  std::istringstream is(csv);
  std::string header;
  std::getline(is, header);
  EXPECT_EQ(header,
            "domain,element,n,h,j,lambda_lower,lambda_upper_lowest,lambda_upper_higher,width,rate");
  int rows = 0;
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2 * 3);  // levels x m
  EXPECT_EQ(csv, emit_csv(run_experiment(small_config())));  // byte-identical
}

TEST(Emit, EmptyBundleGivesHeaderOnlyCsv) {
  ExperimentResult empty;
  empty.config = small_config();
  EXPECT_EQ(emit_csv(empty),
            "domain,element,n,h,j,lambda_lower,lambda_upper_lowest,lambda_upper_higher,width,rate\n");
}

TEST(Emit, MarkdownHasTrendRow) {
  const ExperimentResult result = run_experiment(small_config());
  const std::string md = emit_markdown(result);
  EXPECT_NE(md.find("| Trend |"), std::string::npos);
  EXPECT_NE(md.find("↗"), std::string::npos);  // nonconforming values increase
  EXPECT_NE(md.find("↘"), std::string::npos);  // postprocessed values decrease
  EXPECT_NE(md.find("lambda_3"), std::string::npos);
}

TEST(Emit, JsonRoundTripAndProvenance) {
  const ExperimentResult result = run_experiment(small_config());
  const nlohmann::json j = to_json(result);
  EXPECT_EQ(j["config"]["seed"], 42u);
  EXPECT_EQ(j["config"]["m"], 3);
  EXPECT_EQ(j["version"], kVersion);
  const nlohmann::json parsed = nlohmann::json::parse(j.dump(2));
  EXPECT_EQ(parsed, j);
}

TEST(Emit, WritesFiles) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / "eigenclose_emit_test";
  std::filesystem::remove_all(dir);
  const ExperimentResult result = run_experiment(small_config());
  for (EmitFormat format : {EmitFormat::Csv, EmitFormat::Markdown, EmitFormat::Json}) {
    const std::filesystem::path path = emit(result, format, dir);
    EXPECT_TRUE(std::filesystem::exists(path));
    EXPECT_GT(std::filesystem::file_size(path), 0u);
  }
  std::filesystem::remove_all(dir);
}

TEST(Verify, CleanRunHasNoViolations) {
  const ExperimentResult result = run_experiment(small_config());
  EXPECT_TRUE(verify_bounds(result).empty());
}

TEST(Verify, DoctoredResultIsFlagged) {
  ExperimentResult result = run_experiment(small_config());
  result.levels[0].lower[0] = result.reference[0] + 1.0;  // fake a bad lower bound
  EXPECT_FALSE(verify_bounds(result).empty());
}

TEST(Threads, SourceSolvesIndependentOfThreadCount) {
  const Mesh mesh = build_mesh(DomainKind::UnitSquare, CellKind::Rectangle, 6);
  const LowerBoundResult lower = lower_bounds(mesh, ElementKind::EQ1Rot, 4);
  setenv("EIGENCLOSE_THREADS", "1", 1);
  const UpperBoundResult serial = upper_bound_lowest(lower, ElementKind::Q1);
  setenv("EIGENCLOSE_THREADS", "3", 1);
  const UpperBoundResult parallel = upper_bound_lowest(lower, ElementKind::Q1);
  unsetenv("EIGENCLOSE_THREADS");
  EXPECT_EQ(serial.values, parallel.values);
}
