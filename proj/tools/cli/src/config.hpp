#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fuq/error.hpp"
#include "fuq/fragility.hpp"
#include "fuq/surrogate.hpp"
#include "fuq/testbed.hpp"

namespace fuq::cli {

using nlohmann::json;

// Effective run configuration: command defaults, then the JSON file, then flags.
class Config {
 public:
  explicit Config(json doc) : doc_(std::move(doc)) {}

  const json& doc() const noexcept { return doc_; }
  bool has(const std::string& key) const { return doc_.contains(key) && !doc_.at(key).is_null(); }

  template <class T>
  T get(const std::string& key) const {
    if (!has(key)) throw InputError("missing setting '" + key + "'");
    try {
      return doc_.at(key).get<T>();
    } catch (const json::exception&) {
      throw InputError("setting '" + key + "' has the wrong type");
    }
  }

  std::size_t count(const std::string& key) const;  // positive integer
  std::uint64_t seed() const { return get<std::uint64_t>("seed"); }
  std::filesystem::path out() const { return get<std::string>("out"); }
  ImGrid grid() const;
  std::vector<double> thresholds() const;
  std::vector<double> gammas() const;
  SamplingOptions sampling() const;
  InputDistributionSpec inputs(std::size_t dim) const;

  // Rejects keys outside `allowed`.
  void check_keys(std::initializer_list<std::string_view> allowed) const;

 private:
  json doc_;
};

// Reads a JSON object from disk.
json read_config_file(const std::filesystem::path& path);

// "a,b,c" split on commas; empty fields rejected.
std::vector<std::string> split_list(const std::string& text, const std::string& what);
double parse_double(const std::string& text, const std::string& what);
std::uint64_t parse_unsigned(const std::string& text, const std::string& what);

}  // namespace fuq::cli
