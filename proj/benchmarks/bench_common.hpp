#pragma once

#include "fuq/gp.hpp"
#include "fuq/stats.hpp"
#include "fuq/testbed.hpp"

namespace bench {

// Testbed data with fixed hyperparameters, so benchmarks skip the optimizer.
inline fuq::GpModel testbed_model(std::size_t n) {
  const auto data = fuq::generate_dataset(fuq::linear_testbed(), fuq::default_im_law(), n, 11);
  const fuq::KernelParams kp{0.8, {0.4, 3.0, 3.0, 2.0, 2.0, 2.0, 3.0}};
  return fuq::GpModel(kp, fuq::Heteroskedastic{0.15, 0.02, 0.2}, data,
                      fuq::Standardizer::from_points(data.points), fuq::mean(data.responses));
}

}  // namespace bench
