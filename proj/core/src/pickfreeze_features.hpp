#pragma once

// Per-sample feature rows shared by the plug-in and posterior estimators: summing
// rows (optionally with bootstrap multiplicities) gives every moment the ratio
// estimators need.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "fuq/kernel.hpp"

namespace fuq::detail {

class PickFreezeFeatures {
 public:
  PickFreezeFeatures(std::size_t dim, std::span<const double> weights, bool sobol, bool betak,
                     double bandwidth)
      : d_(dim), w_(weights.begin(), weights.end()), sobol_(sobol), betak_(betak),
        inv_two_l2_(betak ? 1.0 / (2.0 * bandwidth * bandwidth) : 0.0) {}

  std::size_t grid_size() const noexcept { return w_.size(); }
  std::size_t sobol_stride() const noexcept { return 2 + 4 * d_; }
  std::size_t sobol_size() const noexcept { return sobol_ ? w_.size() * sobol_stride() : 0; }
  std::size_t size() const noexcept { return sobol_size() + (betak_ ? 1 + 2 * d_ : 0); }

  // psi(g, r, t): curve value of group g (0 base, 1 copy, 2 + i frozen_i,
  // 2 + d + i complement_i) for row r at grid index t.
  template <class Psi>
  void fill(std::size_t rows, Psi&& psi, RowMatrix& f) const {
    const std::size_t t_count = w_.size();
    const std::size_t groups = 2 + 2 * d_;
    f.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(size()));
    std::vector<double> dist(groups);
    std::vector<double> v(groups);
    for (std::size_t r = 0; r < rows; ++r) {
      double* row = f.row(static_cast<Eigen::Index>(r)).data();
      std::fill(dist.begin(), dist.end(), 0.0);
      for (std::size_t t = 0; t < t_count; ++t) {
        for (std::size_t g = 0; g < groups; ++g) v[g] = psi(g, r, t);
        const double p0 = v[0];
        if (sobol_) {
          double* s = row + t * sobol_stride();
          s[0] = p0;
          s[1] = p0 * p0;
          for (std::size_t i = 0; i < d_; ++i) {
            const double pf = v[2 + i];
            const double pc = v[2 + d_ + i];
            s[2 + i] = p0 * pf;
            s[2 + d_ + i] = pf;
            s[2 + 2 * d_ + i] = p0 * pc;
            s[2 + 3 * d_ + i] = pc;
          }
        }
        if (betak_) {
          for (std::size_t g = 1; g < groups; ++g) {
            const double e = p0 - v[g];
            dist[g] += w_[t] * e * e;
          }
        }
      }
      if (betak_) {
        double* k = row + sobol_size();
        for (std::size_t g = 1; g < groups; ++g) k[g - 1] = std::exp(-dist[g] * inv_two_l2_);
      }
    }
  }

  // out: S (d), T (d), beta first (d), beta total (d); NaN where the denominator
  // vanishes or the family was not requested.
  void finalize(std::span<const double> acc, double mass, std::span<double> out) const {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::fill(out.begin(), out.end(), nan);
    const double inv = 1.0 / mass;
    if (sobol_) {
      double den = 0.0;
      double second = 0.0;
      for (std::size_t t = 0; t < w_.size(); ++t) {
        const double* s = acc.data() + t * sobol_stride();
        const double m0 = s[0] * inv;
        den += w_[t] * (s[1] * inv - m0 * m0);
        second += w_[t] * s[1] * inv;
      }
      if (den > 1e-12 * second) {
        for (std::size_t i = 0; i < d_; ++i) {
          double num_f = 0.0;
          double num_c = 0.0;
          for (std::size_t t = 0; t < w_.size(); ++t) {
            const double* s = acc.data() + t * sobol_stride();
            const double m0 = s[0] * inv;
            num_f += w_[t] * (s[2 + i] * inv - m0 * s[2 + d_ + i] * inv);
            num_c += w_[t] * (s[2 + 2 * d_ + i] * inv - m0 * s[2 + 3 * d_ + i] * inv);
          }
          out[i] = num_f / den;
          out[d_ + i] = 1.0 - num_c / den;
        }
      }
    }
    if (betak_) {
      const double* k = acc.data() + sobol_size();
      const double k0 = k[0] * inv;
      const double den = 1.0 - k0;
      if (den > 1e-12) {
        for (std::size_t i = 0; i < d_; ++i) {
          out[2 * d_ + i] = (k[1 + i] * inv - k0) / den;
          out[3 * d_ + i] = 1.0 - (k[1 + d_ + i] * inv - k0) / den;
        }
      }
    }
  }

 private:
  std::size_t d_;
  std::vector<double> w_;
  bool sobol_;
  bool betak_;
  double inv_two_l2_;
};

}  // namespace fuq::detail
