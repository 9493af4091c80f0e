#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace fuq::validate {

inline constexpr std::uint64_t kDefaultSeed = 2718;
inline constexpr int kCriterionCount = 10;

struct AcceptanceOptions {
  std::uint64_t seed = kDefaultSeed;
  // Reduced problem sizes: same code paths, thresholds not meaningful.
  bool quick = false;
  std::set<int> criteria;  // empty: all
  std::ostream* log = nullptr;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string summary;
  nlohmann::json measured;
  // Wall time and budget are kept out of the report so that it stays
  // byte-reproducible.
  double seconds = 0.0;
  double budget_seconds = 0.0;
  bool budget_applies = true;

  bool within_budget() const { return !budget_applies || seconds < budget_seconds; }
};

struct AcceptanceReport {
  std::uint64_t seed = 0;
  bool quick = false;
  std::vector<CriterionResult> results;

  bool all_pass() const;
  nlohmann::json to_json() const;
};

AcceptanceReport run_acceptance(const AcceptanceOptions& options);

// One line per criterion: "criterion <id> <name>: PASS|FAIL <summary> (<t> s, budget <b> s)".
std::string format_line(const CriterionResult& result);

// report.json; returns the file written.
std::filesystem::path write_report(const AcceptanceReport& report,
                                   const std::filesystem::path& directory);

}  // namespace fuq::validate
