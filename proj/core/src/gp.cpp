#include "fuq/gp.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "fuq/error.hpp"
#include "fuq/parallel.hpp"
#include "fuq/stats.hpp"

namespace fuq {

void Dataset::validate() const {
  if (points.size() != responses.size())
    throw InputError("dataset: " + std::to_string(points.size()) + " points but " +
                     std::to_string(responses.size()) + " responses");
  if (responses.size() < 2) throw InputError("dataset: at least 2 observations are required");
  const std::size_t d = points[0].params.size();
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].params.size() != d)
      throw DimensionError("dataset: row " + std::to_string(i) + " has " +
                               std::to_string(points[i].params.size()) + " parameters, expected " +
                               std::to_string(d),
                           points[i].params.size());
    if (!(points[i].im > 0.0) || !std::isfinite(points[i].im))
      throw InputError("dataset: row " + std::to_string(i) + " has a nonpositive IM");
    for (double v : points[i].params)
      if (!std::isfinite(v)) throw InputError("dataset: row " + std::to_string(i) + " is not finite");
    if (!std::isfinite(responses[i]))
      throw InputError("dataset: response " + std::to_string(i) + " is not finite");
  }
}

double noise_sd(const NuggetModel& nugget, double im) noexcept {
  if (const auto* h = std::get_if<Homoskedastic>(&nugget)) return h->sigma_eps;
  const auto& r = std::get<Heteroskedastic>(nugget);
  return std::max(r.theta0 + r.theta1 * im, r.theta2);
}

void validate_nugget(const NuggetModel& nugget) {
  if (const auto* h = std::get_if<Homoskedastic>(&nugget)) {
    if (!(h->sigma_eps > 0.0) || !std::isfinite(h->sigma_eps))
      throw InputError("homoskedastic noise sd must be positive");
    return;
  }
  const auto& r = std::get<Heteroskedastic>(nugget);
  if (!std::isfinite(r.theta0) || !std::isfinite(r.theta1))
    throw InputError("ramp coefficients must be finite");
  if (!(r.theta2 > 0.0) || !std::isfinite(r.theta2))
    throw InputError("ramp floor theta2 must be positive");
}

GpModel::GpModel(KernelParams kernel, NuggetModel nugget, Dataset training,
                 Standardizer standardization, double prior_mean)
    : kernel_(std::move(kernel)),
      nugget_(nugget),
      training_(std::move(training)),
      standardizer_(std::move(standardization)),
      prior_mean_(prior_mean) {
  training_.validate();
  const std::size_t dim = training_.param_dim() + 1;
  kernel_.validate(dim);
  validate_nugget(nugget_);
  if (standardizer_.dim() != dim)
    throw DimensionError("standardization has the wrong dimension", standardizer_.dim());
  if (!std::isfinite(prior_mean_)) throw InputError("prior mean must be finite");

  const auto n = static_cast<Eigen::Index>(training_.size());
  z_ = standardize(training_.points);
  centered_.resize(n);
  nugget_var_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    centered_[i] = training_.responses[k] - prior_mean_;
    const double s = fuq::noise_sd(nugget_, training_.points[k].im);
    nugget_var_[i] = s * s;
  }
  const double s2 = kernel_.intensity * kernel_.intensity;
  Eigen::MatrixXd a = s2 * matern_correlation(z_, z_, kernel_.lengthscales);
  a.diagonal() += nugget_var_;
  auto chol = cholesky_with_jitter(a, s2);
  factor_ = std::move(chol.lower);
  jitter_ = chol.jitter;
  weights_ = factor_.triangularView<Eigen::Lower>().solve(centered_);
  factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(weights_);
}

Eigen::MatrixXd GpModel::training_covariance() const {
  const double s2 = kernel_.intensity * kernel_.intensity;
  Eigen::MatrixXd a = s2 * matern_correlation(z_, z_, kernel_.lengthscales);
  a.diagonal() += nugget_var_;
  a.diagonal().array() += jitter_;
  return a;
}

double GpModel::log_marginal_likelihood() const {
  const double n = static_cast<double>(training_.size());
  return -0.5 * centered_.dot(weights_) - factor_.diagonal().array().log().sum() -
         0.5 * n * std::log(2.0 * std::numbers::pi);
}

RowMatrix GpModel::standardize(std::span<const InputPoint> queries) const {
  const std::size_t dim = training_.param_dim() + 1;
  RowMatrix z(static_cast<Eigen::Index>(queries.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].dim() != dim)
      throw DimensionError("query has " + std::to_string(queries[i].dim()) +
                               " coordinates, model expects " + std::to_string(dim),
                           queries[i].dim());
    for (std::size_t k = 0; k < dim; ++k)
      z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          standardizer_.apply(k, queries[i].coord(k));
  }
  return z;
}

RowMatrix GpModel::standardize_params(const RowMatrix& params) const {
  if (static_cast<std::size_t>(params.cols()) != training_.param_dim())
    throw DimensionError("parameter matrix has " + std::to_string(params.cols()) +
                             " columns, model expects " + std::to_string(training_.param_dim()),
                         static_cast<std::size_t>(params.cols()));
  RowMatrix z(params.rows(), params.cols());
  for (Eigen::Index k = 0; k < params.cols(); ++k) {
    const double lo = standardizer_.lower()[static_cast<std::size_t>(k) + 1];
    const double sc = standardizer_.scale()[static_cast<std::size_t>(k) + 1];
    z.col(k) = (params.col(k).array() - lo) / sc;
  }
  return z;
}

Eigen::MatrixXd GpModel::cross_covariance(const RowMatrix& standardized_queries) const {
  const double s2 = kernel_.intensity * kernel_.intensity;
  return s2 * matern_correlation(standardized_queries, z_, kernel_.lengthscales);
}

std::vector<PredictionMoments> GpModel::predict(std::span<const InputPoint> queries) const {
  const RowMatrix zq = standardize(queries);
  const double s2 = kernel_.intensity * kernel_.intensity;
  std::vector<PredictionMoments> out(queries.size());
  constexpr std::size_t kChunk = 512;
  const std::size_t chunks = (queries.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, [&](std::size_t c) {
    const auto b0 = static_cast<Eigen::Index>(c * kChunk);
    const auto bn = static_cast<Eigen::Index>(std::min(kChunk, queries.size() - c * kChunk));
    const RowMatrix zb = zq.middleRows(b0, bn);
    const Eigen::MatrixXd kq = cross_covariance(zb);
    const Eigen::VectorXd mu = kq * weights_;
    Eigen::MatrixXd v = kq.transpose();
    factor_.triangularView<Eigen::Lower>().solveInPlace(v);
    const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
    for (Eigen::Index i = 0; i < bn; ++i) {
      auto& pm = out[static_cast<std::size_t>(b0 + i)];
      pm.mean = prior_mean_ + mu[i];
      const double latent_var = std::max(0.0, s2 - explained[i]);
      pm.latent_sd = std::sqrt(latent_var);
      const double noise = fuq::noise_sd(nugget_, queries[static_cast<std::size_t>(b0 + i)].im);
      pm.observation_sd = std::sqrt(latent_var + noise * noise);
    }
  });
  return out;
}

PredictionMoments GpModel::predict(const InputPoint& query) const {
  return predict(std::span<const InputPoint>(&query, 1)).front();
}

void GpModel::predict_product(std::span<const double> grid, const RowMatrix& points,
                              RowMatrix& mean, RowMatrix& observation_sd) const {
  const RowMatrix xq = standardize_params(points);
  const auto m = points.rows();
  const auto t_count = static_cast<Eigen::Index>(grid.size());
  const auto n = static_cast<Eigen::Index>(training_.size());
  const double s2 = kernel_.intensity * kernel_.intensity;

  std::vector<double> ag(grid.size());
  for (std::size_t t = 0; t < grid.size(); ++t) ag[t] = standardize_im(grid[t]);
  std::vector<double> at(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) at[static_cast<std::size_t>(i)] = z_(i, 0);
  const Eigen::MatrixXd ka = matern_correlation_1d(ag, at, kernel_.lengthscales[0]);  // T x n
  const RowMatrix xt = z_.rightCols(z_.cols() - 1);
  const std::span<const double> ls_x(kernel_.lengthscales.data() + 1, kernel_.lengthscales.size() - 1);

  mean.resize(m, t_count);
  observation_sd.resize(m, t_count);
  const Eigen::Index block = std::max<Eigen::Index>(1, 8192 / std::max<Eigen::Index>(t_count, 1));
  const auto blocks = static_cast<std::size_t>((m + block - 1) / block);
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index j0 = static_cast<Eigen::Index>(b) * block;
    const Eigen::Index bm = std::min(block, m - j0);
    const Eigen::MatrixXd kx = matern_correlation(xq.middleRows(j0, bm), xt, ls_x);  // bm x n
    Eigen::MatrixXd kq(bm * t_count, n);  // row t * bm + j
    for (Eigen::Index t = 0; t < t_count; ++t)
      kq.middleRows(t * bm, bm) = s2 * (kx.array().rowwise() * ka.row(t).array()).matrix();
    const Eigen::VectorXd mu = kq * weights_;
    Eigen::MatrixXd v = kq.transpose();
    factor_.triangularView<Eigen::Lower>().solveInPlace(v);
    const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
    for (Eigen::Index t = 0; t < t_count; ++t) {
      const double noise = fuq::noise_sd(nugget_, grid[static_cast<std::size_t>(t)]);
      for (Eigen::Index j = 0; j < bm; ++j) {
        const double latent_var = std::max(0.0, s2 - explained[t * bm + j]);
        mean(j0 + j, t) = prior_mean_ + mu[t * bm + j];
        observation_sd(j0 + j, t) = std::sqrt(latent_var + noise * noise);
      }
    }
  });
}

double log_marginal_likelihood(const Dataset& data, const Standardizer& standardization,
                               const KernelParams& kernel, const NuggetModel& nugget,
                               double prior_mean) {
  return GpModel(kernel, nugget, data, standardization, prior_mean).log_marginal_likelihood();
}

namespace {

void check_same_data(const GpModel& model, const Dataset& data) {
  const auto& tr = model.training();
  if (data.size() != tr.size() || data.responses != tr.responses)
    throw InputError("leave-one-out diagnostics require the model's training data");
}

}  // namespace

LooPredictions loo_predictions(const GpModel& model) {
  const auto& tr = model.training();
  const auto n = static_cast<Eigen::Index>(tr.size());
  if (n < 3) throw InputError("leave-one-out needs at least 3 observations");
  Eigen::MatrixXd linv = Eigen::MatrixXd::Identity(n, n);
  model.factor().triangularView<Eigen::Lower>().solveInPlace(linv);
  const Eigen::VectorXd diag_inv = linv.colwise().squaredNorm().transpose();
  LooPredictions out;
  out.mean.resize(n);
  out.sd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double y = tr.responses[static_cast<std::size_t>(i)];
    out.mean[i] = y - model.weights()[i] / diag_inv[i];
    out.sd[i] = std::sqrt(1.0 / diag_inv[i]);
  }
  return out;
}

LooPredictions loo_predictions_refit(const GpModel& model) {
  const auto& tr = model.training();
  const auto n = static_cast<Eigen::Index>(tr.size());
  if (n < 3) throw InputError("leave-one-out needs at least 3 observations");
  const Eigen::MatrixXd a = model.training_covariance();
  LooPredictions out;
  out.mean.resize(n);
  out.sd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) keep.push_back(j);
    const Eigen::MatrixXd sub = a(keep, keep);
    Eigen::VectorXd y(n - 1);
    for (Eigen::Index j = 0; j < n - 1; ++j)
      y[j] = tr.responses[static_cast<std::size_t>(keep[static_cast<std::size_t>(j)])] - model.prior_mean();
    const Eigen::VectorXd k = a(keep, i);
    const Eigen::LLT<Eigen::MatrixXd> llt(sub);
    if (llt.info() != Eigen::Success)
      throw FactorizationError("leave-one-out refit failed", model.jitter());
    out.mean[i] = model.prior_mean() + k.dot(llt.solve(y));
    out.sd[i] = std::sqrt(a(i, i) - k.dot(llt.solve(k)));
  }
  return out;
}

double loo_q2(const GpModel& model, const Dataset& data) {
  check_same_data(model, data);
  const auto loo = loo_predictions(model);
  const double ybar = mean(data.responses);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = data.responses[i] - loo.mean[static_cast<Eigen::Index>(i)];
    ss_res += e * e;
    ss_tot += (data.responses[i] - ybar) * (data.responses[i] - ybar);
  }
  if (!(ss_tot > 0.0)) throw DegenerateError("Q2 undefined: responses have zero variance");
  return 1.0 - ss_res / ss_tot;
}

std::vector<double> coverage_curve(const GpModel& model, const Dataset& data,
                                   std::span<const double> alphas) {
  check_same_data(model, data);
  for (std::size_t k = 0; k < alphas.size(); ++k) {
    if (!(alphas[k] > 0.0 && alphas[k] < 1.0)) throw InputError("coverage levels must lie in (0, 1)");
    if (k > 0 && !(alphas[k] > alphas[k - 1]))
      throw InputError("coverage levels must be strictly increasing");
  }
  const auto loo = loo_predictions(model);
  std::vector<double> out;
  out.reserve(alphas.size());
  for (double alpha : alphas) {
    const double z = normal_quantile(0.5 * (1.0 + alpha));
    std::size_t inside = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (std::abs(data.responses[i] - loo.mean[ii]) <= z * loo.sd[ii]) ++inside;
    }
    out.push_back(static_cast<double>(inside) / static_cast<double>(data.size()));
  }
  return out;
}

nlohmann::json model_to_json(const GpModel& model) {
  using nlohmann::json;
  json doc;
  doc["format"] = "fuq-gp-model";
  doc["version"] = 1;
  doc["kernel"] = {{"intensity", model.kernel_params().intensity},
                   {"lengthscales", model.kernel_params().lengthscales}};
  if (const auto* h = std::get_if<Homoskedastic>(&model.nugget())) {
    doc["nugget"] = {{"variant", "homoskedastic"}, {"sigma_eps", h->sigma_eps}};
  } else {
    const auto& r = std::get<Heteroskedastic>(model.nugget());
    doc["nugget"] = {{"variant", "heteroskedastic"},
                     {"theta0", r.theta0},
                     {"theta1", r.theta1},
                     {"theta2", r.theta2}};
  }
  doc["standardization"] = {{"lower", model.standardization().lower()},
                            {"scale", model.standardization().scale()}};
  doc["prior_mean"] = model.prior_mean();
  json im = json::array();
  json params = json::array();
  for (const auto& p : model.training().points) {
    im.push_back(p.im);
    params.push_back(p.params);
  }
  doc["training"] = {{"im", im}, {"params", params}, {"responses", model.training().responses}};
  return doc;
}

GpModel model_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "fuq-gp-model")
      throw InputError("model file: unknown format");
    KernelParams kernel;
    kernel.intensity = doc.at("kernel").at("intensity").get<double>();
    kernel.lengthscales = doc.at("kernel").at("lengthscales").get<std::vector<double>>();
    NuggetModel nugget;
    const auto& nj = doc.at("nugget");
    const auto variant = nj.at("variant").get<std::string>();
    if (variant == "homoskedastic") {
      nugget = Homoskedastic{nj.at("sigma_eps").get<double>()};
    } else if (variant == "heteroskedastic") {
      nugget = Heteroskedastic{nj.at("theta0").get<double>(), nj.at("theta1").get<double>(),
                               nj.at("theta2").get<double>()};
    } else {
      throw InputError("model file: unknown nugget variant '" + variant + "'");
    }
    Standardizer st(doc.at("standardization").at("lower").get<std::vector<double>>(),
                    doc.at("standardization").at("scale").get<std::vector<double>>());
    Dataset data;
    const auto im = doc.at("training").at("im").get<std::vector<double>>();
    const auto params = doc.at("training").at("params").get<std::vector<std::vector<double>>>();
    data.responses = doc.at("training").at("responses").get<std::vector<double>>();
    if (im.size() != params.size()) throw InputError("model file: training arrays differ in length");
    for (std::size_t i = 0; i < im.size(); ++i) data.points.push_back({im[i], params[i]});
    return GpModel(std::move(kernel), nugget, std::move(data), std::move(st),
                   doc.at("prior_mean").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: ") + e.what());
  }
}

void save_model(const GpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write model file " + path.string());
  out << model_to_json(model).dump(2) << '\n';
}

GpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("model file " + path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace fuq
