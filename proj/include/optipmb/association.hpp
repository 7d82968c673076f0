#pragma once

#include "optipmb/common.hpp"
#include "optipmb/density.hpp"
#include "optipmb/filter.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace optipmb {

/// Measurements are rows. The first `num_objects` columns are existing
/// objects; column num_objects + m is the first-time detection of row m.
/// Impossible pairs hold +inf.
struct CostMatrix {
  Eigen::MatrixXd cost;
  std::size_t num_objects = 0;

  [[nodiscard]] std::size_t rows() const { return static_cast<std::size_t>(cost.rows()); }
  [[nodiscard]] std::size_t cols() const { return static_cast<std::size_t>(cost.cols()); }
};

/// Column chosen for each measurement. Objects not chosen are misdetected.
struct GlobalHypothesis {
  std::vector<std::size_t> column_of_row;

  [[nodiscard]] std::size_t size() const { return column_of_row.size(); }
  friend bool operator==(const GlobalHypothesis&, const GlobalHypothesis&) = default;
};

/// Same-class detections whose BEV center lies within eta_dist (inclusive) of
/// the object's predicted position.
inline std::vector<std::size_t> gate_object(const BernoulliComponent& bern, std::span<const Detection> dets,
                                            double eta_dist) {
  std::vector<std::size_t> out;
  const Vector2 center = bern.density.mean.head<2>();
  for (std::size_t m = 0; m < dets.size(); ++m) {
    if (dets[m].label == bern.fixed.label && (dets[m].xy - center).norm() <= eta_dist) out.push_back(m);
  }
  return out;
}

/// Same-class Poisson components within eta_dist (inclusive) of the detection.
inline std::vector<std::size_t> gate_measurement(const Detection& det, std::span<const PoissonComponent> poisson,
                                                 double eta_dist) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < poisson.size(); ++j) {
    if (poisson[j].label == det.label && (poisson[j].density.mean.head<2>() - det.xy).norm() <= eta_dist) {
      out.push_back(j);
    }
  }
  return out;
}

/// Lays out detection and first-time detection costs. Misdetection hypotheses
/// are the zero-cost reference and do not appear.
inline CostMatrix build_cost_matrix(std::span<const LocalHypothesis> hyps, std::size_t num_objects,
                                    std::size_t num_measurements) {
  CostMatrix c;
  c.num_objects = num_objects;
  c.cost = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(num_measurements),
                                     static_cast<Eigen::Index>(num_objects + num_measurements), kInf);
  for (const auto& h : hyps) {
    if (h.kind == HypothesisKind::misdetection) continue;
    if (!h.measurement_index || *h.measurement_index >= num_measurements) {
      throw std::invalid_argument("build_cost_matrix: hypothesis without a valid measurement index");
    }
    const auto row = static_cast<Eigen::Index>(*h.measurement_index);
    if (h.kind == HypothesisKind::detection) {
      if (h.object_index >= num_objects) throw std::invalid_argument("build_cost_matrix: object index out of range");
      c.cost(row, static_cast<Eigen::Index>(h.object_index)) = h.cost;
    } else {
      c.cost(row, static_cast<Eigen::Index>(num_objects) + row) = h.cost;
    }
  }
  return c;
}

/// Sum of chosen entries, accumulated in row order.
inline double assignment_cost(const CostMatrix& c, const GlobalHypothesis& g) {
  double total = 0.0;
  for (std::size_t r = 0; r < g.size(); ++r) {
    total += c.cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(g.column_of_row[r]));
  }
  return total;
}

namespace detail {

/// Two totals closer than this count as a tie.
inline double tie_tolerance(double total) { return 1e-10 * (1.0 + std::abs(total)); }

/// Shortest augmenting path Hungarian method on a rows <= cols matrix.
/// +inf entries are replaced by a sentinel exceeding any all-finite total;
/// returns nullopt if the optimum still needs one.
inline std::optional<std::vector<std::size_t>> hungarian(const Eigen::MatrixXd& a) {
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  if (n == 0) return std::vector<std::size_t>{};

  double lo = kInf, hi = -kInf;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double v = a.data()[i];
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) return std::nullopt;
  const double sentinel = hi + static_cast<double>(n + 1) * (hi - lo + 1.0);
  auto at = [&](std::size_t i, std::size_t j) {
    const double v = a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    return std::isfinite(v) ? v : sentinel;
  };

  // 1-based potentials; p[j] is the row matched to column j.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> col(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) col[p[j] - 1] = j - 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(col[i])))) return std::nullopt;
  }
  return col;
}

}  // namespace detail

/// Minimum-cost assignment of every measurement to a distinct column. Among
/// optimal assignments the lexicographically smallest column sequence wins.
/// Throws std::domain_error if no all-finite assignment exists.
inline GlobalHypothesis solve_assignment(const CostMatrix& c) {
  if (c.rows() > c.cols()) throw std::invalid_argument("solve_assignment: more rows than columns");
  auto best = detail::hungarian(c.cost);
  if (!best) throw std::domain_error("solve_assignment: no feasible assignment");
  GlobalHypothesis g{*best};
  const double optimum = assignment_cost(c, g);

  // Lexicographic refinement: pin rows in order to the smallest column that
  // still admits an optimal completion.
  Eigen::MatrixXd pinned = c.cost;
  for (std::size_t r = 0; r < c.rows(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    for (std::size_t j = 0; j < g.column_of_row[r]; ++j) {
      const auto col = static_cast<Eigen::Index>(j);
      if (!std::isfinite(pinned(row, col))) continue;
      Eigen::MatrixXd trial = pinned;
      const double keep = trial(row, col);
      trial.row(row).setConstant(kInf);
      trial.col(col).setConstant(kInf);
      trial(row, col) = keep;
      auto cand = detail::hungarian(trial);
      if (!cand) continue;
      GlobalHypothesis h{*cand};
      if (assignment_cost(c, h) <= optimum + detail::tie_tolerance(optimum)) {
        g = std::move(h);
        break;
      }
    }
    const auto chosen = static_cast<Eigen::Index>(g.column_of_row[r]);
    const double keep = pinned(row, chosen);
    pinned.row(row).setConstant(kInf);
    pinned.col(chosen).setConstant(kInf);
    pinned(row, chosen) = keep;
  }
  return g;
}

/// Exhaustive search over all feasible assignments (verification oracle).
inline GlobalHypothesis brute_force_assignment(const CostMatrix& c) {
  if (c.rows() > 8) throw std::invalid_argument("brute_force_assignment: at most 8 rows");
  const std::size_t n = c.rows();
  const std::size_t m = c.cols();
  std::vector<std::size_t> current(n, 0);
  std::vector<char> used(m, 0);
  std::optional<GlobalHypothesis> best;
  double best_total = kInf;

  auto recurse = [&](auto&& self, std::size_t r) -> void {
    if (r == n) {
      GlobalHypothesis g{current};
      const double total = assignment_cost(c, g);
      if (!best || total < best_total - detail::tie_tolerance(best_total)) {
        best = std::move(g);
        best_total = total;
      }
      return;
    }
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j] || !std::isfinite(c.cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)))) continue;
      used[j] = 1;
      current[r] = j;
      self(self, r + 1);
      used[j] = 0;
    }
  };
  recurse(recurse, 0);
  if (!best) throw std::domain_error("brute_force_assignment: no feasible assignment");
  return *best;
}

}  // namespace optipmb
