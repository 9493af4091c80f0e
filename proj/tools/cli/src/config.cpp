#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

#include "fuq/error.hpp"

namespace fuq::cli {

json read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw InputError("config " + path.string() + " must hold a JSON object");
  return doc;
}

std::vector<std::string> split_list(const std::string& text, const std::string& what) {
  std::vector<std::string> parts;
  std::size_t begin = 0;
  while (true) {
    const std::size_t end = text.find(',', begin);
    std::string item = text.substr(begin, end == std::string::npos ? std::string::npos : end - begin);
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) throw InputError(what + ": empty list item in '" + text + "'");
    parts.push_back(std::move(item));
    if (end == std::string::npos) break;
    begin = end + 1;
  }
  return parts;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) throw InputError(what + ": not a number: '" + text + "'");
  return v;
}

std::uint64_t parse_unsigned(const std::string& text, const std::string& what) {
  std::uint64_t v = 0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end)
    throw InputError(what + ": not a non-negative integer: '" + text + "'");
  return v;
}

std::size_t Config::count(const std::string& key) const {
  const auto v = get<std::int64_t>(key);
  if (v < 1) throw InputError("setting '" + key + "' must be a positive count");
  return static_cast<std::size_t>(v);
}

ImGrid Config::grid() const {
  std::vector<double> g;
  if (has("grid") && doc_.at("grid").is_string()) {
    for (const auto& s : split_list(doc_.at("grid").get<std::string>(), "grid")) g.push_back(parse_double(s, "grid"));
  } else {
    g = get<std::vector<double>>("grid");
  }
  if (g.size() != 3) throw InputError("grid needs three values a0,a1,T");
  const double count = g[2];
  if (!(g[0] > 0.0 && g[0] < g[1])) throw InputError("grid needs 0 < a0 < a1");
  if (!(count >= 2.0) || count != static_cast<double>(static_cast<std::size_t>(count)))
    throw InputError("grid size T must be an integer >= 2");
  return ImGrid::regular(g[0], g[1], static_cast<std::size_t>(count));
}

std::vector<double> Config::thresholds() const {
  std::vector<double> c;
  if (has("threshold") && doc_.at("threshold").is_number()) {
    c.push_back(get<double>("threshold"));
  } else {
    c = get<std::vector<double>>("threshold");
  }
  if (c.empty()) throw InputError("at least one threshold is required");
  for (double v : c)
    if (!(v > 0.0)) throw InputError("thresholds must be positive");
  return c;
}

std::vector<double> Config::gammas() const {
  auto g = get<std::vector<double>>("gamma");
  if (g.empty()) throw InputError("at least one gamma level is required");
  for (double v : g)
    if (!(v > 0.0 && v < 1.0)) throw InputError("gamma levels must lie in (0, 1)");
  return g;
}

SamplingOptions Config::sampling() const {
  SamplingOptions s;
  if (!has("sampling")) return s;
  const json& j = doc_.at("sampling");
  if (!j.is_object()) throw InputError("setting 'sampling' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number_unsigned()) throw InputError("sampling." + key + " must be a non-negative integer");
    const auto v = value.get<std::size_t>();
    if (key == "exact_threshold") s.exact_threshold = v;
    else if (key == "nystrom_rank") s.nystrom_rank = v;
    else throw InputError("unknown setting sampling." + key);
  }
  return s;
}

InputDistributionSpec Config::inputs(std::size_t dim) const {
  if (!has("inputs")) {
    auto def = default_inputs();
    if (def.size() != dim)
      throw InputError("the model has " + std::to_string(dim) +
                       " parameters; describe them under 'inputs' in the config");
    return def;
  }
  InputDistributionSpec spec;
  try {
    for (const auto& item : doc_.at("inputs"))
      spec.push_back({item.at("name").get<std::string>(), item.at("mean").get<double>(), item.at("cov").get<double>()});
  } catch (const json::exception&) {
    throw InputError("each entry of 'inputs' needs name, mean and cov");
  }
  if (spec.size() != dim)
    throw InputError("'inputs' lists " + std::to_string(spec.size()) + " parameters, the model has " +
                     std::to_string(dim));
  for (const auto& in : spec) in.law().validate();
  return spec;
}

void Config::check_keys(std::initializer_list<std::string_view> allowed) const {
  for (const auto& [key, value] : doc_.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InputError("unknown setting '" + key + "' for this command");
  }
}

}  // namespace fuq::cli
