#include "fuq/cli/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "fuq/error.hpp"

#ifndef FUQ_VERSION
#define FUQ_VERSION "unknown"
#endif

namespace fuq::cli {
namespace {

enum class Kind { String, Unsigned, Double, DoubleList, UnsignedList, StringList, Bool };

struct FlagSpec {
  const char* name;
  const char* key;
  Kind kind;
  const char* help;
};

json to_json_value(const std::string& raw, Kind kind, const std::string& key) {
  switch (kind) {
    case Kind::String:
      return raw;
    case Kind::Unsigned:
      return parse_unsigned(raw, "--" + key);
    case Kind::Double:
      return parse_double(raw, "--" + key);
    case Kind::DoubleList: {
      json a = json::array();
      for (const auto& s : split_list(raw, "--" + key)) a.push_back(parse_double(s, "--" + key));
      return a;
    }
    case Kind::UnsignedList: {
      json a = json::array();
      for (const auto& s : split_list(raw, "--" + key)) a.push_back(parse_unsigned(s, "--" + key));
      return a;
    }
    case Kind::StringList:
      return split_list(raw, "--" + key);
    case Kind::Bool:
      break;
  }
  return raw == "true";
}

struct Command {
  std::string name;
  std::string description;
  std::function<json()> defaults;
  std::function<int(const Config&, std::ostream&, std::ostream&)> run;
  std::vector<FlagSpec> flags;
};

const FlagSpec kOut{"--out", "out", Kind::String, "output directory"};
const FlagSpec kSeed{"--seed", "seed", Kind::Unsigned, "master seed"};
const FlagSpec kModel{"--model", "model", Kind::String, "model JSON written by fit"};
const FlagSpec kThreshold{"--threshold", "threshold", Kind::DoubleList, "failure threshold c, or a comma list"};
const FlagSpec kGrid{"--grid", "grid", Kind::DoubleList, "IM grid a0,a1,T"};

std::vector<Command> commands() {
  return {
      {"fit", "fit a Gaussian process surrogate to a dataset CSV", fit_defaults, cmd_fit,
       {{"--dataset", "dataset", Kind::String, "dataset CSV (a,x1,...,xd,y)"},
        kOut,
        kSeed,
        {"--variant", "variant", Kind::String, "noise model: homo or hetero"},
        {"--restarts", "restarts", Kind::Unsigned, "optimizer restarts"}}},
      {"fragility", "fragility curves with metamodel uncertainty", fragility_defaults, cmd_fragility,
       {kModel,
        kOut,
        kSeed,
        kThreshold,
        kGrid,
        {"--gamma", "gamma", Kind::DoubleList, "quantile levels"},
        {"--m", "m", Kind::Unsigned, "input samples"},
        {"--P", "P", Kind::Unsigned, "posterior draws"}}},
      {"gsa", "sensitivity indices with the metamodel / Monte-Carlo variance split", gsa_defaults, cmd_gsa,
       {kModel,
        kOut,
        kSeed,
        kThreshold,
        kGrid,
        {"--m", "m", Kind::Unsigned, "pick-freeze sample size"},
        {"--P", "P", Kind::Unsigned, "posterior draws"},
        {"--B", "B", Kind::Unsigned, "bootstrap resamples"},
        {"--bandwidth", "bandwidth", Kind::Double, "curve kernel bandwidth"},
        {"--indices", "indices", Kind::StringList, "index families: sobol,betak"}}},
      {"testbed", "synthetic dataset with known fragility and oracle indices", testbed_defaults, cmd_testbed,
       {kOut,
        kSeed,
        {"--variant", "variant", Kind::String, "linear or nonlinear"},
        {"--n", "n", Kind::Unsigned, "number of runs"},
        kGrid,
        kThreshold,
        {"--oracle-n", "oracle_n", Kind::Unsigned, "nested oracle sample size"}}},
      {"validate", "run the acceptance suite on the testbed", validate_defaults, cmd_validate,
       {kOut, kSeed, {"--criteria", "criteria", Kind::UnsignedList, "subset of criteria, e.g. 1,3,9"}}},
  };
}

void overlay(json& target, const json& source) {
  for (const auto& [key, value] : source.items()) target[key] = value;
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Seismic fragility curves with Gaussian process surrogates", "fuq"};
  app.set_version_flag("--version", FUQ_VERSION);
  app.require_subcommand(1);

  const auto cmds = commands();
  struct Bound {
    const Command* command;
    CLI::App* sub;
    std::string config;
    std::map<std::string, std::string> values;
    std::map<std::string, CLI::Option*> options;
    std::map<std::string, bool> bools;
    std::map<std::string, CLI::Option*> bool_options;
  };
  std::vector<Bound> bound(cmds.size());
  for (std::size_t k = 0; k < cmds.size(); ++k) {
    Bound& b = bound[k];
    b.command = &cmds[k];
    b.sub = app.add_subcommand(cmds[k].name, cmds[k].description);
    b.sub->add_option("--config", b.config, "JSON settings file; flags override it");
    for (const auto& f : cmds[k].flags) b.options[f.key] = b.sub->add_option(f.name, b.values[f.key], f.help);
  }
  // Boolean switches.
  auto add_switch = [&](const std::string& cmd, const char* spec, const std::string& key, const char* help) {
    for (auto& b : bound)
      if (b.command->name == cmd) b.bool_options[key] = b.sub->add_flag(spec, b.bools[key], help);
  };
  add_switch("fit", "--map,!--no-map", "map", "penalized (MAP) hyperparameter estimation");
  add_switch("fragility", "--isotonic,!--no-isotonic", "isotonic", "project curves onto non-decreasing ones");
  add_switch("fragility", "--ensemble,!--no-ensemble", "ensemble", "also write the posterior fragility draws");
  add_switch("testbed", "--oracle,!--no-oracle", "oracle", "compute oracle sensitivity indices");
  add_switch("validate", "--quick,!--full", "quick", "reduced problem sizes");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kInputError;
  }

  for (auto& b : bound) {
    if (!b.sub->parsed()) continue;
    json doc = b.command->defaults();
    if (!b.config.empty()) overlay(doc, read_config_file(b.config));
    const auto kind_of = [&](const std::string& key) {
      for (const auto& f : b.command->flags)
        if (f.key == key) return f.kind;
      return Kind::String;
    };
    for (const auto& [key, opt] : b.options)
      if (opt->count() > 0) doc[key] = to_json_value(b.values[key], kind_of(key), key);
    for (const auto& [key, opt] : b.bool_options)
      if (opt->count() > 0) doc[key] = b.bools[key];
    const Config cfg(std::move(doc));
    if (!cfg.has("out")) throw InputError("an output directory is required (--out)");
    return b.command->run(cfg, out, err);
  }
  return kInputError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  try {
    return dispatch(args, out, err);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  } catch (const json::exception& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalError;
  }
}

}  // namespace fuq::cli
