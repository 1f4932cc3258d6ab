#pragma once

// Least-distance projection solved inside every controller cycle:
//
//   min_w  |w + g|^2 + rho |s|^2
//   s.t.   input_lower <= alpha w <= input_upper           (hard)
//          output_lower - s <= A w <= output_upper + s     (soft, s >= 0)
//
// A is the scaled sensitivity alpha * dh/du restricted to constrained
// outputs, and the output bounds are the residual limits relative to the
// current measurement. Either output bound may be infinite.

#include <string_view>
#include <vector>

#include "flex/linalg.hpp"

namespace flex {

struct LeastDistanceProblem {
  std::vector<double> g;
  double alpha = 1.0;
  std::vector<double> input_lower;
  std::vector<double> input_upper;
  RowMatrix output_rows;  // n x p
  std::vector<double> output_lower;
  std::vector<double> output_upper;
  double rho = 1e6;

  std::size_t inputs() const { return g.size(); }
  std::size_t outputs() const { return static_cast<std::size_t>(output_rows.rows()); }
};

enum class QpStatus { optimal, optimal_with_slack };

std::string_view to_string(QpStatus status);

struct QpResult {
  std::vector<double> w;
  std::vector<double> slack;  // one per output row
  double kkt_residual = 0.0;
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
};

struct QpOptions {
  double slack_threshold = 1e-9;
  int max_iterations = 0;  // 0: derived from the problem size
};

// Goldfarb-Idnani dual active-set method. Throws DimensionError on
// inconsistent sizes, PreconditionError on an inverted input box and
// QpError if the iteration cap is hit.
QpResult solve_least_distance(const LeastDistanceProblem& problem, QpOptions options = {});

// Optimality residual of `result` for the softened problem: the natural
// (projected-gradient) residual of the slack-eliminated objective over the
// input box, plus the mismatch between reported and implied slacks.
double kkt_check(const LeastDistanceProblem& problem, const QpResult& result);

}  // namespace flex
