#include "commands.hpp"

#include <algorithm>
#include <fstream>
#include <ostream>
#include <vector>

#include "fuq/cli/cli.hpp"
#include "fuq/dataset_io.hpp"
#include "fuq/error.hpp"
#include "fuq/format.hpp"
#include "fuq/gp.hpp"
#include "fuq/gsa.hpp"
#include "fuq/rng.hpp"
#include "fuq/validate/acceptance.hpp"

#ifndef FUQ_VERSION
#define FUQ_VERSION "unknown"
#endif

namespace fuq::cli {
namespace {

namespace fs = std::filesystem;

// Output directory plus the list of files written into it, for the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  const fs::path& dir() const noexcept { return dir_; }

  fs::path add(const std::string& relative) {
    files_.push_back(relative);
    const fs::path p = dir_ / relative;
    fs::create_directories(p.parent_path());
    return p;
  }

  std::ofstream open(const std::string& relative) {
    const fs::path p = add(relative);
    std::ofstream f(p, std::ios::binary);
    if (!f) throw InputError("cannot write " + p.string());
    return f;
  }

  void write_json(const std::string& relative, const json& doc) { open(relative) << doc.dump(2) << '\n'; }

  void manifest(const std::string& command, const Config& cfg, const json& seeds) {
    std::vector<std::string> files = files_;
    std::sort(files.begin(), files.end());
    const json doc{{"tool", "fuq"},
                   {"version", FUQ_VERSION},
                   {"command", command},
                   {"config", cfg.doc()},
                   {"seeds", seeds},
                   {"outputs", files}};
    std::ofstream f(dir_ / "manifest.json", std::ios::binary);
    if (!f) throw InputError("cannot write " + (dir_ / "manifest.json").string());
    f << doc.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

json nugget_json(const NuggetModel& nugget) {
  if (const auto* h = std::get_if<Heteroskedastic>(&nugget))
    return {{"type", "heteroskedastic"}, {"theta0", h->theta0}, {"theta1", h->theta1}, {"theta2", h->theta2}};
  return {{"type", "homoskedastic"}, {"sigma_eps", std::get<Homoskedastic>(nugget).sigma_eps}};
}

std::vector<std::string> input_names(const InputDistributionSpec& spec) {
  std::vector<std::string> names;
  for (const auto& in : spec) names.push_back(in.name);
  return names;
}

// Subdirectory per threshold when several are requested.
std::string threshold_prefix(const std::vector<double>& thresholds, double c) {
  return thresholds.size() == 1 ? std::string() : "c_" + format_double(c) + "/";
}

json grid_json(const ImGrid& grid) { return {grid.lower(), grid.upper(), grid.size()}; }

void write_curve(Outputs& o, const std::string& name, const FragilityCurve& curve, bool monotone) {
  auto f = o.open(name);
  write_curve_csv(f, monotone ? isotonic(curve) : curve);
}

SyntheticModelSpec testbed_spec(const Config& cfg) {
  const auto variant = cfg.get<std::string>("variant");
  SyntheticModelSpec spec;
  if (variant == "linear") spec = linear_testbed();
  else if (variant == "nonlinear") spec = nonlinear_testbed();
  else throw InputError("testbed variant must be linear or nonlinear, got '" + variant + "'");
  if (cfg.has("inputs")) spec.inputs = cfg.inputs(cfg.doc().at("inputs").size());
  if (cfg.has("beta0")) spec.beta0 = cfg.get<double>("beta0");
  if (cfg.has("beta_a")) spec.beta_a = cfg.get<double>("beta_a");
  if (cfg.has("betas")) spec.betas = cfg.get<std::vector<double>>("betas");
  if (cfg.has("threshold")) {
    const auto c = cfg.thresholds();
    if (c.size() != 1) throw InputError("testbed takes a single threshold");
    spec.threshold_c = c.front();
  }
  if (cfg.has("interaction")) {
    const json& j = cfg.doc().at("interaction");
    if (j == "none") {
      spec.interaction.reset();
    } else {
      try {
        spec.interaction = Interaction{j.at("kappa").get<double>(), j.at("lambda").get<double>()};
      } catch (const json::exception&) {
        throw InputError("'interaction' must be \"none\" or {kappa, lambda}");
      }
    }
  }
  if (cfg.has("noise")) {
    const json& j = cfg.doc().at("noise");
    if (j == "none") {
      spec.noise.reset();
    } else {
      try {
        spec.noise = Heteroskedastic{j.at("theta0").get<double>(), j.at("theta1").get<double>(),
                                     j.at("theta2").get<double>()};
      } catch (const json::exception&) {
        throw InputError("'noise' must be \"none\" or {theta0, theta1, theta2}");
      }
    }
  }
  spec.validate();
  return spec;
}

ImLaw im_law(const Config& cfg) {
  const json& j = cfg.doc().at("im_law");
  try {
    const auto type = j.at("type").get<std::string>();
    if (type == "lognormal") {
      const double median = j.at("median").get<double>();
      const double sd = j.at("log_sd").get<double>();
      if (!(median > 0.0 && sd > 0.0)) throw InputError("lognormal IM law needs median > 0 and log_sd > 0");
      return LogNormalIm{std::log(median), sd};
    }
    if (type == "uniform") {
      const double lo = j.at("lower").get<double>();
      const double hi = j.at("upper").get<double>();
      if (!(lo > 0.0 && lo < hi)) throw InputError("uniform IM law needs 0 < lower < upper");
      return UniformIm{lo, hi};
    }
  } catch (const json::exception&) {
  }
  throw InputError("'im_law' must be {type: lognormal, median, log_sd} or {type: uniform, lower, upper}");
}

json spec_json(const SyntheticModelSpec& spec, const json& law) {
  json inputs = json::array();
  for (const auto& in : spec.inputs) inputs.push_back({{"name", in.name}, {"mean", in.mean}, {"cov", in.cov}});
  json doc{{"beta0", spec.beta0},
           {"beta_a", spec.beta_a},
           {"betas", spec.betas},
           {"threshold", spec.threshold_c},
           {"inputs", inputs},
           {"im_law", law}};
  doc["interaction"] = spec.interaction ? json{{"kappa", spec.interaction->kappa}, {"lambda", spec.interaction->lambda}}
                                        : json("none");
  doc["noise"] = spec.noise ? nugget_json(*spec.noise) : json("none");
  return doc;
}

}  // namespace

json fit_defaults() {
  return {{"dataset", nullptr},
          {"out", nullptr},
          {"seed", 1},
          {"variant", "hetero"},
          {"map", nullptr},
          {"restarts", 10},
          {"noise_floor", 1e-4},
          {"coverage_levels", {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}}};
}

json fragility_defaults() {
  return {{"model", nullptr},  {"out", nullptr},         {"seed", 1},         {"threshold", nullptr},
          {"grid", {0.1, 25.0, 100}}, {"gamma", {0.1, 0.9}}, {"m", 1000},     {"P", 200},
          {"inputs", nullptr}, {"sampling", nullptr},    {"isotonic", false}, {"ensemble", false}};
}

json gsa_defaults() {
  return {{"model", nullptr},          {"out", nullptr},      {"seed", 1},    {"threshold", nullptr},
          {"grid", {0.1, 25.0, 30}},  {"m", 20000},          {"P", 200},     {"B", 150},
          {"bandwidth", nullptr},      {"indices", {"sobol", "betak"}},        {"inputs", nullptr},
          {"sampling", nullptr}};
}

json testbed_defaults() {
  return {{"out", nullptr},        {"seed", 1},         {"variant", "linear"}, {"n", 500},
          {"grid", {0.1, 25.0, 100}}, {"oracle", true}, {"oracle_n", 300},     {"threshold", nullptr},
          {"beta0", nullptr},      {"beta_a", nullptr}, {"betas", nullptr},    {"interaction", nullptr},
          {"noise", nullptr},      {"inputs", nullptr},
          {"im_law", {{"type", "lognormal"}, {"median", 5.0}, {"log_sd", 0.6}}}};
}

json validate_defaults() {
  return {{"out", nullptr}, {"seed", validate::kDefaultSeed}, {"quick", false}, {"criteria", nullptr}};
}

int cmd_fit(const Config& cfg, std::ostream& out, std::ostream& err) {
  cfg.check_keys({"dataset", "out", "seed", "variant", "map", "restarts", "noise_floor", "coverage_levels"});
  const auto dataset_path = cfg.get<std::string>("dataset");
  const Dataset data = read_dataset_csv(fs::path(dataset_path));
  const auto variant = cfg.get<std::string>("variant");
  if (variant != "homo" && variant != "hetero")
    throw InputError("variant must be homo or hetero, got '" + variant + "'");
  const auto levels = cfg.get<std::vector<double>>("coverage_levels");
  FitConfig fc;
  fc.seed = derive_seed(cfg.seed(), "fit");
  fc.restarts = cfg.count("restarts");
  fc.noise_floor = cfg.get<double>("noise_floor");
  if (!(fc.noise_floor > 0.0)) throw InputError("noise_floor must be positive");
  if (cfg.has("map")) fc.map_prior = cfg.get<bool>("map");
  Outputs o(cfg.out());

  err << "fitting " << variant << " model on " << data.size() << " runs, " << fc.restarts << " restarts\n";
  FitReport rep;
  const GpModel gp = variant == "homo" ? fit_homoskedastic(data, fc, &rep) : fit_heteroskedastic(data, fc, &rep);
  save_model(gp, o.add("model.json"));

  const double q2 = loo_q2(gp, data);
  const auto cov = coverage_curve(gp, data, levels);
  json rows = json::array();
  for (std::size_t k = 0; k < levels.size(); ++k) rows.push_back({{"alpha", levels[k]}, {"empirical", cov[k]}});
  const json report{{"variant", variant},
                    {"n", data.size()},
                    {"d", data.param_dim()},
                    {"q2", q2},
                    {"coverage", rows},
                    {"log_marginal_likelihood", gp.log_marginal_likelihood()},
                    {"kernel", {{"intensity", gp.kernel_params().intensity},
                                {"lengthscales", gp.kernel_params().lengthscales}}},
                    {"noise", nugget_json(gp.nugget())},
                    {"prior_mean", gp.prior_mean()},
                    {"map_prior", rep.map_prior},
                    {"best_start", rep.best_start},
                    {"start_objective", rep.start_objective},
                    {"final_objective", rep.final_objective}};
  o.write_json("fit_report.json", report);
  o.manifest("fit", cfg, {{"master", cfg.seed()}, {"fit", fc.seed}});
  out << "Q2 " << format_double(q2) << '\n';
  for (std::size_t k = 0; k < levels.size(); ++k)
    out << "coverage " << format_double(levels[k]) << " " << format_double(cov[k]) << '\n';
  return kOk;
}

int cmd_fragility(const Config& cfg, std::ostream& out, std::ostream& err) {
  cfg.check_keys({"model", "out", "seed", "threshold", "grid", "gamma", "m", "P", "inputs", "sampling",
                  "isotonic", "ensemble"});
  const GpModel gp = load_model(fs::path(cfg.get<std::string>("model")));
  const auto thresholds = cfg.thresholds();
  const ImGrid grid = cfg.grid();
  const auto gammas = cfg.gammas();
  const std::size_t m = cfg.count("m");
  const std::size_t draws = cfg.count("P");
  const bool monotone = cfg.get<bool>("isotonic");
  const bool ensemble = cfg.get<bool>("ensemble");
  const auto inputs = cfg.inputs(gp.param_dim());
  const auto sampling = cfg.sampling();
  const std::uint64_t design_seed = derive_seed(cfg.seed(), "design");
  const std::uint64_t posterior_seed = derive_seed(cfg.seed(), "posterior");
  Outputs o(cfg.out());

  const RowMatrix xs = sample_inputs(inputs, m, design_seed);
  std::size_t curves = 0;
  for (double c : thresholds) {
    err << "threshold " << format_double(c) << ": " << m << " input samples, " << draws << " posterior draws\n";
    const std::string prefix = threshold_prefix(thresholds, c);
    const CurveEnsemble plug = psi1_curves(gp, grid, xs, c);
    const CurveEnsemble post = psi2_samples(gp, grid, xs, c, draws, posterior_seed, sampling);
    write_curve(o, prefix + "mean.csv", mean_curve(plug), monotone);
    ++curves;
    for (double g : gammas) {
      write_curve(o, prefix + "quantile_" + format_double(g) + ".csv", quantile_curve(plug, g), monotone);
      write_curve(o, prefix + "bilevel_" + format_double(g) + ".csv", bilevel_quantile_curve(post, g, g), monotone);
      curves += 2;
    }
    if (ensemble) {
      auto f = o.open(prefix + "posterior_draws.csv");
      write_ensemble_csv(f, post);
    }
  }
  o.manifest("fragility", cfg, {{"master", cfg.seed()}, {"design", design_seed}, {"posterior", posterior_seed}});
  out << "wrote " << curves << " curves to " << o.dir().string() << '\n';
  return kOk;
}

int cmd_gsa(const Config& cfg, std::ostream& out, std::ostream& err) {
  cfg.check_keys({"model", "out", "seed", "threshold", "grid", "m", "P", "B", "bandwidth", "indices", "inputs",
                  "sampling"});
  const GpModel gp = load_model(fs::path(cfg.get<std::string>("model")));
  const auto thresholds = cfg.thresholds();
  const ImGrid grid = cfg.grid();
  const auto inputs = cfg.inputs(gp.param_dim());
  const auto names = input_names(inputs);
  PosteriorGsaConfig pc;
  pc.draws = cfg.count("P");
  pc.bootstrap = cfg.count("B");
  pc.seed = cfg.seed();
  pc.sampling = cfg.sampling();
  if (cfg.has("bandwidth")) {
    pc.bandwidth = cfg.get<double>("bandwidth");
    if (!(*pc.bandwidth > 0.0)) throw InputError("bandwidth must be positive");
  }
  pc.sobol = false;
  pc.betak = false;
  for (const auto& k : cfg.get<std::vector<std::string>>("indices")) {
    if (k == "sobol") pc.sobol = true;
    else if (k == "betak") pc.betak = true;
    else throw InputError("index family must be sobol or betak, got '" + k + "'");
  }
  const std::size_t m = cfg.count("m");
  const std::uint64_t design_seed = derive_seed(cfg.seed(), "design");
  Outputs o(cfg.out());
  const PickFreezeDesign design = pickfreeze_design(m, input_laws(inputs), design_seed);

  for (double c : thresholds) {
    err << "threshold " << format_double(c) << ": m = " << m << ", P = " << pc.draws << ", B = " << pc.bootstrap
        << '\n';
    const PosteriorGsaResult res = posterior_sensitivity(gp, design, grid, c, pc);
    std::vector<SensitivityResult> families;
    if (pc.sobol) {
      families.push_back(res.sobol_first);
      families.push_back(res.sobol_total);
    }
    if (pc.betak) {
      families.push_back(res.betak_first);
      families.push_back(res.betak_total);
    }
    json doc = sensitivity_to_json(families, names);
    doc["threshold"] = c;
    doc["grid"] = grid_json(grid);
    doc["m"] = m;
    doc["P"] = pc.draws;
    doc["B"] = pc.bootstrap;
    if (pc.betak) doc["bandwidth"] = res.bandwidth;
    const std::string prefix = threshold_prefix(thresholds, c);
    o.write_json(prefix + "sensitivity.json", doc);
    {
      auto f = o.open(prefix + "replicates.csv");
      write_replicates_csv(f, families, names);
    }
    out << "threshold " << format_double(c) << '\n';
    for (const auto& r : families) {
      for (std::size_t i = 0; i < names.size(); ++i) {
        out << "  " << to_string(r.kind) << ' ' << names[i] << " estimate " << format_double(r.point_estimate[i])
            << " sigma_gp " << format_double(r.sigma_gp[i]) << " sigma_mc " << format_double(r.sigma_mc[i]) << '\n';
      }
    }
  }
  o.manifest("gsa", cfg,
             {{"master", cfg.seed()},
              {"design", design_seed},
              {"posterior", derive_seed(cfg.seed(), "posterior")},
              {"bootstrap", derive_seed(cfg.seed(), "bootstrap")}});
  return kOk;
}

int cmd_testbed(const Config& cfg, std::ostream& out, std::ostream& err) {
  cfg.check_keys({"out", "seed", "variant", "n", "grid", "oracle", "oracle_n", "threshold", "beta0", "beta_a",
                  "betas", "interaction", "noise", "inputs", "im_law"});
  const SyntheticModelSpec spec = testbed_spec(cfg);
  const ImLaw law = im_law(cfg);
  const std::size_t n = cfg.count("n");
  const ImGrid grid = cfg.grid();
  const std::uint64_t dataset_seed = derive_seed(cfg.seed(), "dataset");
  const std::uint64_t oracle_seed = derive_seed(cfg.seed(), "oracle");
  const std::uint64_t design_seed = derive_seed(cfg.seed(), "design");
  Outputs o(cfg.out());

  const Dataset data = generate_dataset(spec, law, n, dataset_seed);
  write_dataset_csv(o.add("dataset.csv"), data);
  {
    auto f = o.open("truth_fragility.csv");
    f << 'a';
    for (std::size_t i = 0; i < spec.dim(); ++i) f << ",x" << i + 1;
    f << ",psi\n";
    for (const auto& p : data.points) {
      f << format_double(p.im);
      for (double x : p.params) f << ',' << format_double(x);
      f << ',' << format_double(true_fragility(spec, p.im, p.params)) << '\n';
    }
  }
  {
    auto f = o.open("truth_mean.csv");
    write_curve_csv(f, quadrature_mean_curve(spec, grid));
  }
  json spec_doc = spec_json(spec, cfg.doc().at("im_law"));
  if (cfg.get<bool>("oracle")) {
    const std::size_t on = cfg.count("oracle_n");
    err << "oracle indices, " << on << " x " << on << " nested samples\n";
    const OracleIndices sob = oracle_aggregated_sobol(spec, grid, on, on, oracle_seed);
    const DesignCurves probe =
        design_curves_psi1(AnalyticSurrogate(spec), pickfreeze_design(500, input_laws(spec.inputs), design_seed), grid,
                           spec.threshold_c);
    const CurveKernel kernel(bandwidth_heuristic(probe.base(), grid), grid);
    const OracleIndices bk = oracle_betak(spec, grid, kernel, on, on, oracle_seed);
    auto f = o.open("oracle_indices.csv");
    f << "kind,input,estimate,se\n";
    auto rows = [&](IndexKind kind, const std::vector<double>& est, const std::vector<double>& se) {
      for (std::size_t i = 0; i < spec.dim(); ++i)
        f << to_string(kind) << ',' << spec.inputs[i].name << ',' << format_double(est[i]) << ','
          << format_double(se[i]) << '\n';
    };
    rows(IndexKind::SobolFirst, sob.first, sob.first_se);
    rows(IndexKind::SobolTotal, sob.total, sob.total_se);
    rows(IndexKind::BetaKFirst, bk.first, bk.first_se);
    rows(IndexKind::BetaKTotal, bk.total, bk.total_se);
    spec_doc["oracle_bandwidth"] = kernel.bandwidth();
  }
  o.write_json("testbed.json", spec_doc);
  o.manifest("testbed", cfg,
             {{"master", cfg.seed()}, {"dataset", dataset_seed}, {"oracle", oracle_seed}, {"design", design_seed}});
  out << "wrote " << n << " runs to " << (o.dir() / "dataset.csv").string() << '\n';
  return kOk;
}

int cmd_validate(const Config& cfg, std::ostream& out, std::ostream& err) {
  cfg.check_keys({"out", "seed", "quick", "criteria"});
  validate::AcceptanceOptions opts;
  opts.seed = cfg.seed();
  opts.quick = cfg.get<bool>("quick");
  if (cfg.has("criteria"))
    for (int id : cfg.get<std::vector<int>>("criteria")) opts.criteria.insert(id);
  opts.log = &err;
  Outputs o(cfg.out());
  const auto report = validate::run_acceptance(opts);
  o.write_json("report.json", report.to_json());
  o.manifest("validate", cfg, {{"master", opts.seed}});
  for (const auto& r : report.results) out << validate::format_line(r) << '\n';
  return report.all_pass() ? kOk : kCriteriaFailed;
}

}  // namespace fuq::cli
