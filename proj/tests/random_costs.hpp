#pragma once

#include "optipmb/association.hpp"

#include <random>

namespace optipmb::testing {

/// Random cost matrix shaped like the tracker's: object columns with
/// `inf_fraction` gated-out entries, then a diagonal first-detection block.
/// With `integer_costs` entries are small integers so exact ties are common.
inline CostMatrix random_tracker_costs(std::mt19937_64& rng, std::size_t max_rows, std::size_t max_cols,
                                       double inf_fraction, bool integer_costs) {
  std::uniform_int_distribution<std::size_t> rows_d(0, max_rows);
  const std::size_t rows = rows_d(rng);
  std::uniform_int_distribution<std::size_t> obj_d(0, max_cols - std::max<std::size_t>(rows, 1));
  const std::size_t objects = rows == 0 ? obj_d(rng) : std::min(obj_d(rng), max_cols - rows);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> small(0, 4);
  auto draw = [&] { return integer_costs ? static_cast<double>(small(rng)) : -3.0 + 15.0 * u(rng); };

  CostMatrix c;
  c.num_objects = objects;
  c.cost = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(objects + rows), kInf);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < objects; ++j) {
      if (u(rng) >= inf_fraction) c.cost(row, static_cast<Eigen::Index>(j)) = draw();
    }
    c.cost(row, static_cast<Eigen::Index>(objects + r)) = integer_costs ? draw() : 2.0 + 10.0 * u(rng);
  }
  return c;
}

/// Dense random matrix with rows <= cols and arbitrary +inf entries.
inline CostMatrix random_dense_costs(std::mt19937_64& rng, std::size_t max_rows, std::size_t max_cols,
                                     double inf_fraction) {
  std::uniform_int_distribution<std::size_t> rows_d(1, max_rows);
  const std::size_t rows = rows_d(rng);
  std::uniform_int_distribution<std::size_t> cols_d(rows, max_cols);
  const std::size_t cols = cols_d(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CostMatrix c;
  c.cost.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < c.cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < c.cost.cols(); ++j) c.cost(i, j) = u(rng) < inf_fraction ? kInf : 20.0 * u(rng) - 5.0;
  }
  return c;
}

}  // namespace optipmb::testing
