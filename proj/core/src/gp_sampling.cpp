#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fuq/error.hpp"
#include "fuq/gp.hpp"
#include "fuq/parallel.hpp"
#include "fuq/rng.hpp"

namespace fuq {
namespace {

// Square root of a PSD matrix: Cholesky with jitter, falling back to a clipped
// eigen-decomposition for rank-deficient cases.
Eigen::MatrixXd psd_root(const Eigen::MatrixXd& c, double scale) {
  try {
    return cholesky_with_jitter(c, scale).lower;
  } catch (const FactorizationError&) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success)
      throw NumericalError("posterior covariance decomposition failed");
    return eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
}

void fill_normals(Eigen::Ref<Eigen::VectorXd> v, std::uint64_t key) {
  Rng rng(key);
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.normal();
}

std::vector<std::size_t> choose_subset(std::size_t population, std::size_t count,
                                       std::uint64_t key) {
  std::vector<std::size_t> idx(population);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(key);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(population - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::size_t default_rank(std::size_t queries, const SamplingOptions& options) {
  const std::size_t r = options.nystrom_rank ? options.nystrom_rank
                                             : std::min<std::size_t>(1000, queries / 2);
  if (r > queries)
    throw InputError("low-rank sampler: rank " + std::to_string(r) + " exceeds the " +
                     std::to_string(queries) + " query points");
  return std::max<std::size_t>(r, 1);
}

// Lexicographic dedupe of matrix rows; returns the distinct row ids in order of
// first appearance and the id of every row.
std::vector<std::size_t> distinct_rows(const RowMatrix& x, std::vector<std::size_t>& first) {
  const auto n = static_cast<std::size_t>(x.rows());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto cols = x.cols();
  auto less = [&](std::size_t a, std::size_t b) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double va = x(static_cast<Eigen::Index>(a), c);
      const double vb = x(static_cast<Eigen::Index>(b), c);
      if (va != vb) return va < vb;
    }
    return a < b;
  };
  auto equal = [&](std::size_t a, std::size_t b) {
    return (x.row(static_cast<Eigen::Index>(a)).array() ==
            x.row(static_cast<Eigen::Index>(b)).array())
        .all();
  };
  std::sort(order.begin(), order.end(), less);
  std::vector<std::size_t> id(n);
  std::vector<std::size_t> leader(n);
  for (std::size_t k = 0; k < n; ++k)
    leader[order[k]] = (k > 0 && equal(order[k], order[k - 1])) ? leader[order[k - 1]] : order[k];
  std::vector<std::size_t> remap(n, static_cast<std::size_t>(-1));
  first.clear();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t l = leader[i];
    if (remap[l] == static_cast<std::size_t>(-1)) {
      remap[l] = first.size();
      first.push_back(i);
    }
    id[i] = remap[l];
  }
  return id;
}

}  // namespace

Eigen::MatrixXd GpModel::posterior_covariance(std::span<const InputPoint> queries) const {
  const RowMatrix zq = standardize(queries);
  const Eigen::MatrixXd kq = cross_covariance(zq);
  Eigen::MatrixXd v = kq.transpose();
  factor_.triangularView<Eigen::Lower>().solveInPlace(v);
  const double s2 = kernel_.intensity * kernel_.intensity;
  Eigen::MatrixXd c = s2 * matern_correlation(zq, zq, kernel_.lengthscales);
  c.noalias() -= v.transpose() * v;
  return 0.5 * (c + c.transpose());
}

Eigen::MatrixXd GpModel::sample_posterior(std::span<const InputPoint> queries, std::size_t count,
                                          std::uint64_t seed,
                                          const SamplingOptions& options) const {
  if (count < 1) throw InputError("sample_posterior: at least one draw is required");
  const auto q = static_cast<Eigen::Index>(queries.size());
  const auto pc = static_cast<Eigen::Index>(count);
  if (q == 0) return Eigen::MatrixXd(0, pc);
  const double s2 = kernel_.intensity * kernel_.intensity;

  if (queries.size() <= options.exact_threshold) {
    const auto preds = predict(queries);
    Eigen::VectorXd mu(q);
    for (Eigen::Index i = 0; i < q; ++i) mu[i] = preds[static_cast<std::size_t>(i)].mean;
    const Eigen::MatrixXd root = psd_root(posterior_covariance(queries), s2);
    const std::uint64_t key = derive_seed(seed, "posterior-exact");
    Eigen::MatrixXd z(root.cols(), pc);
    for (Eigen::Index p = 0; p < pc; ++p) fill_normals(z.col(p), derive_seed(key, static_cast<std::uint64_t>(p)));
    Eigen::MatrixXd out = root * z;
    out.colwise() += mu;
    return out;
  }

  // Low-rank path: joint prior draw on V = (query anchors, training inputs),
  // extended to every query by kriging on V plus an independent residual with the
  // exact prior variance, then conditioned on the data (Matheron's update).
  const std::size_t r = default_rank(queries.size(), options);
  const std::uint64_t key = derive_seed(seed, "posterior-nystrom");
  const auto anchors = choose_subset(queries.size(), r, derive_seed(key, "anchors"));
  const RowMatrix zq = standardize(queries);
  const auto n = z_.rows();
  const auto nv = static_cast<Eigen::Index>(r) + n;
  RowMatrix zv(nv, z_.cols());
  for (std::size_t k = 0; k < r; ++k)
    zv.row(static_cast<Eigen::Index>(k)) = zq.row(static_cast<Eigen::Index>(anchors[k]));
  zv.bottomRows(n) = z_;
  const Eigen::MatrixXd lv =
      cholesky_with_jitter(s2 * matern_correlation(zv, zv, kernel_.lengthscales), s2).lower;

  // coef_p = K_VV^-1 g_V + [0; A^-1 (y - g_X - eps)]
  Eigen::MatrixXd coef(nv, pc);
  parallel_for(count, [&](std::size_t p) {
    Eigen::VectorXd xi(nv);
    fill_normals(xi, derive_seed(derive_seed(key, "prior"), p));
    const Eigen::VectorXd g = lv.triangularView<Eigen::Lower>() * xi;
    Eigen::VectorXd c = lv.triangularView<Eigen::Lower>().transpose().solve(xi);
    Rng noise(derive_seed(derive_seed(key, "noise"), p));
    Eigen::VectorXd resid(n);
    for (Eigen::Index i = 0; i < n; ++i)
      resid[i] = centered_[i] - g[static_cast<Eigen::Index>(r) + i] -
                 std::sqrt(nugget_var_[i] + jitter_) * noise.normal();
    factor_.triangularView<Eigen::Lower>().solveInPlace(resid);
    factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(resid);
    c.tail(n) += resid;
    coef.col(static_cast<Eigen::Index>(p)) = c;
  });

  Eigen::MatrixXd out(q, pc);
  constexpr Eigen::Index kBlock = 512;
  const auto blocks = static_cast<std::size_t>((q + kBlock - 1) / kBlock);
  const std::uint64_t resid_key = derive_seed(key, "residual");
  parallel_for(blocks, [&](std::size_t b) {
    const Eigen::Index q0 = static_cast<Eigen::Index>(b) * kBlock;
    const Eigen::Index bq = std::min(kBlock, q - q0);
    const Eigen::MatrixXd kqv =
        s2 * matern_correlation(zq.middleRows(q0, bq), zv, kernel_.lengthscales);
    Eigen::MatrixXd v = kqv.transpose();
    lv.triangularView<Eigen::Lower>().solveInPlace(v);
    const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
    out.middleRows(q0, bq).noalias() = kqv * coef;
    for (Eigen::Index i = 0; i < bq; ++i) {
      const double delta = std::sqrt(std::max(0.0, s2 - explained[i]));
      out.row(q0 + i).array() += prior_mean_;
      if (delta > 0.0) {
        Rng rng(derive_seed(resid_key, static_cast<std::uint64_t>(q0 + i)));
        for (Eigen::Index p = 0; p < pc; ++p) out(q0 + i, p) += delta * rng.normal();
      }
    }
  });
  return out;
}

void GpModel::sample_product(std::span<const double> grid, const RowMatrix& points,
                             std::size_t draws, std::uint64_t seed,
                             const SamplingOptions& options, const ProductDrawSink& sink) const {
  if (draws < 1) throw InputError("sample_product: at least one draw is required");
  if (grid.empty()) throw InputError("sample_product: empty grid");
  const RowMatrix xq = standardize_params(points);
  const std::size_t t_count = grid.size();
  const auto m = static_cast<std::size_t>(points.rows());
  const std::size_t total = t_count * m;
  const double s2 = kernel_.intensity * kernel_.intensity;
  const double sigma = kernel_.intensity;
  const auto tc = static_cast<Eigen::Index>(t_count);
  if (m == 0) return;

  if (total <= options.exact_threshold) {
    std::vector<InputPoint> queries;
    queries.reserve(total);
    for (std::size_t j = 0; j < m; ++j) {
      InputPoint qp;
      qp.params.assign(points.row(static_cast<Eigen::Index>(j)).data(),
                       points.row(static_cast<Eigen::Index>(j)).data() + points.cols());
      for (double a : grid) {
        qp.im = a;
        queries.push_back(qp);
      }
    }
    const Eigen::MatrixXd g = sample_posterior(queries, draws, seed, options);
    Eigen::MatrixXd values(static_cast<Eigen::Index>(m), tc * static_cast<Eigen::Index>(draws));
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < t_count; ++t)
        for (std::size_t p = 0; p < draws; ++p)
          values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(t * draws + p)) =
              g(static_cast<Eigen::Index>(j * t_count + t), static_cast<Eigen::Index>(p));
    ProductDrawBlock block{0, draws, 0, m, t_count, &values};
    sink(block);
    return;
  }

  // Anchor set U = Aa x Xa with Aa = grid IMs and training IMs, Xa = training
  // parameter vectors and a seeded subsample of the query parameter vectors. The
  // prior on U is a Kronecker product, so one draw costs two triangular products.
  const std::size_t rank = default_rank(total, options);
  const std::uint64_t key = derive_seed(seed, "posterior-product");
  const auto n = static_cast<std::size_t>(z_.rows());
  const auto d = z_.cols() - 1;
  const std::span<const double> ls_x(kernel_.lengthscales.data() + 1, static_cast<std::size_t>(d));
  const double ls_a = kernel_.lengthscales[0];

  std::vector<double> ag(t_count);
  for (std::size_t t = 0; t < t_count; ++t) ag[t] = standardize_im(grid[t]);
  std::vector<double> at(n);
  for (std::size_t i = 0; i < n; ++i) at[i] = z_(static_cast<Eigen::Index>(i), 0);
  std::vector<double> aa(ag);
  aa.insert(aa.end(), at.begin(), at.end());
  std::sort(aa.begin(), aa.end());
  aa.erase(std::unique(aa.begin(), aa.end()), aa.end());
  auto a_index = [&](double v) {
    return static_cast<Eigen::Index>(std::lower_bound(aa.begin(), aa.end(), v) - aa.begin());
  };
  std::vector<Eigen::Index> grid_row(t_count);
  std::vector<Eigen::Index> train_row(n);
  for (std::size_t t = 0; t < t_count; ++t) grid_row[t] = a_index(ag[t]);
  for (std::size_t i = 0; i < n; ++i) train_row[i] = a_index(at[i]);

  // Training rows first, then query rows, deduplicated jointly.
  RowMatrix all_x(static_cast<Eigen::Index>(n + m), d);
  all_x.topRows(static_cast<Eigen::Index>(n)) = z_.rightCols(d);
  all_x.bottomRows(static_cast<Eigen::Index>(m)) = xq;
  std::vector<std::size_t> first;
  const auto row_id = distinct_rows(all_x, first);
  std::vector<char> is_training(first.size(), 0);
  for (std::size_t i = 0; i < n; ++i) is_training[row_id[i]] = 1;
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < first.size(); ++k)
    if (!is_training[k]) candidates.push_back(k);
  std::vector<std::size_t> chosen;
  if (candidates.size() <= rank) {
    chosen = candidates;
  } else {
    for (std::size_t c : choose_subset(candidates.size(), rank, derive_seed(key, "anchors")))
      chosen.push_back(candidates[c]);
  }
  std::vector<Eigen::Index> anchor_col(first.size(), -1);
  std::vector<std::size_t> xa_rows;
  for (std::size_t k = 0; k < first.size(); ++k)
    if (is_training[k]) {
      anchor_col[k] = static_cast<Eigen::Index>(xa_rows.size());
      xa_rows.push_back(first[k]);
    }
  for (std::size_t k : chosen) {
    anchor_col[k] = static_cast<Eigen::Index>(xa_rows.size());
    xa_rows.push_back(first[k]);
  }
  const auto nx = static_cast<Eigen::Index>(xa_rows.size());
  const auto na = static_cast<Eigen::Index>(aa.size());
  RowMatrix xa(nx, d);
  for (Eigen::Index k = 0; k < nx; ++k) xa.row(k) = all_x.row(static_cast<Eigen::Index>(xa_rows[static_cast<std::size_t>(k)]));
  std::vector<Eigen::Index> train_col(n);
  for (std::size_t i = 0; i < n; ++i) train_col[i] = anchor_col[row_id[i]];

  const Eigen::MatrixXd la = cholesky_with_jitter(matern_correlation_1d(aa, aa, ls_a), 1.0).lower;
  const Eigen::MatrixXd lx = cholesky_with_jitter(matern_correlation(xa, xa, ls_x), 1.0).lower;
  const Eigen::MatrixXd lg = cholesky_with_jitter(matern_correlation_1d(ag, ag, ls_a), 1.0).lower;
  const Eigen::MatrixXd kat = matern_correlation_1d(ag, at, ls_a);  // T x n

  const ProductPlan plan =
      plan_product(t_count, m, draws, static_cast<std::size_t>(nx) * t_count, options);
  std::vector<double> delta(m, -1.0);  // residual sd / sigma, filled on the first chunk
  const std::uint64_t prior_key = derive_seed(key, "prior");
  const std::uint64_t noise_key = derive_seed(key, "noise");
  const std::uint64_t resid_key = derive_seed(key, "residual");

  for (std::size_t p0 = 0; p0 < draws; p0 += plan.draw_chunk) {
    const std::size_t pc = std::min(plan.draw_chunk, draws - p0);
    const auto pce = static_cast<Eigen::Index>(pc);
    Eigen::MatrixXd coef = Eigen::MatrixXd::Zero(nx, tc * pce);  // column t * pc + p

    parallel_for(pc, [&](std::size_t pl) {
      const std::size_t p = p0 + pl;
      Eigen::MatrixXd xi(na, nx);
      Rng rng(derive_seed(prior_key, p));
      for (Eigen::Index c = 0; c < nx; ++c)
        for (Eigen::Index r = 0; r < na; ++r) xi(r, c) = rng.normal();
      // Prior values on U are sigma * La * Xi * Lx^T.
      Eigen::MatrixXd w = la.triangularView<Eigen::Lower>() * xi;
      w *= sigma;
      Eigen::MatrixXd wg(nx, tc);
      for (std::size_t t = 0; t < t_count; ++t)
        wg.col(static_cast<Eigen::Index>(t)) = w.row(grid_row[t]).transpose();
      lx.triangularView<Eigen::Lower>().transpose().solveInPlace(wg);

      Rng noise(derive_seed(noise_key, p));
      Eigen::VectorXd resid(static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Eigen::Index c = train_col[i];
        const double g = w.row(train_row[i]).head(c + 1).dot(lx.row(c).head(c + 1));
        resid[ii] = centered_[ii] - g - std::sqrt(nugget_var_[ii] + jitter_) * noise.normal();
      }
      factor_.triangularView<Eigen::Lower>().solveInPlace(resid);
      factor_.triangularView<Eigen::Lower>().transpose().solveInPlace(resid);

      for (std::size_t t = 0; t < t_count; ++t) {
        const Eigen::Index col = static_cast<Eigen::Index>(t) * pce + static_cast<Eigen::Index>(pl);
        coef.col(col) = wg.col(static_cast<Eigen::Index>(t));
        for (std::size_t i = 0; i < n; ++i)
          coef(train_col[i], col) += s2 * kat(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(i)) *
                                     resid[static_cast<Eigen::Index>(i)];
      }
    });

    for (std::size_t j0 = 0; j0 < m; j0 += plan.block_points) {
      const std::size_t bm = std::min(plan.block_points, m - j0);
      const auto bme = static_cast<Eigen::Index>(bm);
      Eigen::MatrixXd values(bme, tc * pce);
      parallel_chunks(
          bm,
          [&](std::size_t r0, std::size_t r1) {
            const auto rows = static_cast<Eigen::Index>(r1 - r0);
            const Eigen::MatrixXd kx = matern_correlation(
                xq.middleRows(static_cast<Eigen::Index>(j0 + r0), rows), xa, ls_x);
            values.middleRows(static_cast<Eigen::Index>(r0), rows).noalias() = kx * coef;
            if (delta[j0 + r0] >= 0.0) return;
            Eigen::MatrixXd v = kx.transpose();
            lx.triangularView<Eigen::Lower>().solveInPlace(v);
            const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
            for (std::size_t r = r0; r < r1; ++r) {
              const std::size_t j = j0 + r;
              delta[j] = anchor_col[row_id[n + j]] >= 0
                             ? 0.0
                             : std::sqrt(std::max(0.0, 1.0 - explained[static_cast<Eigen::Index>(r - r0)]));
            }
          },
          32);

      const double mu0 = prior_mean_;
      parallel_for(bm, [&](std::size_t r) {
        const std::size_t j = j0 + r;
        const auto re = static_cast<Eigen::Index>(r);
        values.row(re).array() += mu0;
        if (delta[j] <= 0.0) return;
        Eigen::MatrixXd zeta(tc, pce);
        for (std::size_t pl = 0; pl < pc; ++pl)
          fill_normals(zeta.col(static_cast<Eigen::Index>(pl)), derive_seed(resid_key, j, p0 + pl));
        Eigen::MatrixXd e = lg.triangularView<Eigen::Lower>() * zeta;
        e *= sigma * delta[j];
        // (p, t) view of this row of values
        Eigen::Map<Eigen::MatrixXd, 0, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>> out(
            values.data() + re, pce, tc, Eigen::Stride<Eigen::Dynamic, Eigen::Dynamic>(bme * pce, bme));
        out += e.transpose();
      }, 16);

      ProductDrawBlock block{p0, pc, j0, bm, t_count, &values};
      sink(block);
    }
  }
}

}  // namespace fuq
