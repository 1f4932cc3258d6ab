#include "flex/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flex/error.hpp"
#include "flex/simd/kernels.hpp"

namespace flex {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dimensions(const LeastDistanceProblem& pr) {
  const std::size_t p = pr.g.size();
  const std::size_t n = pr.outputs();
  if (pr.input_lower.size() != p || pr.input_upper.size() != p)
    throw DimensionError("input bounds do not match the gradient length");
  if (n > 0 && static_cast<std::size_t>(pr.output_rows.cols()) != p)
    throw DimensionError("output rows do not match the gradient length");
  if (pr.output_lower.size() != n || pr.output_upper.size() != n)
    throw DimensionError("output bounds do not match the output row count");
  if (!(pr.alpha > 0.0) || !std::isfinite(pr.alpha))
    throw PreconditionError("alpha must be positive and finite");
  if (!(pr.rho > 0.0)) throw PreconditionError("rho must be positive");
}

double distance_to(double v, double lo, double hi) {
  if (v < lo) return lo - v;
  if (v > hi) return v - hi;
  return 0.0;
}

// Dense Goldfarb-Idnani state for min 1/2 x'Gx + a'x s.t. C x >= b, with G
// diagonal. J = L^-T, R upper triangular, both n x n row-major.
class DualActiveSet {
 public:
  DualActiveSet(std::vector<double> gdiag, const std::vector<double>& a, std::vector<double> c,
                std::vector<double> b, int max_iterations)
      : n_(gdiag.size()),
        m_(b.size()),
        c_(std::move(c)),
        b_(std::move(b)),
        j_(n_ * n_, 0.0),
        r_(n_ * n_, 0.0),
        x_(n_),
        d_(n_),
        z_(n_),
        rv_(n_),
        u_(n_ + 1, 0.0),
        act_(n_ + 1, 0),
        slack_(m_),
        tol_(m_),
        active_(m_, 0),
        max_iterations_(max_iterations) {
    double xmax = 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      j_[i * n_ + i] = 1.0 / std::sqrt(gdiag[i]);
      x_[i] = -a[i] / gdiag[i];
      xmax = std::max(xmax, std::abs(x_[i]));
    }
    for (std::size_t k = 0; k < m_; ++k) {
      double row = 0.0;
      for (std::size_t i = 0; i < n_; ++i) row = std::max(row, std::abs(c_[k * n_ + i]));
      tol_[k] = 1e-12 * (1.0 + std::abs(b_[k]) + row * xmax);
    }
  }

  void solve() {
    const auto& kern = simd::kernels();
    for (;;) {
      tick();
      if (m_ > 0) kern.gemv(c_.data(), n_, m_, n_, x_.data(), slack_.data());
      std::size_t p = m_;
      double worst = 0.0;
      for (std::size_t k = 0; k < m_; ++k) {
        slack_[k] -= b_[k];
        if (active_[k] || slack_[k] >= -tol_[k]) continue;
        const double scaled = slack_[k] / tol_[k];
        if (p == m_ || scaled < worst) {
          worst = scaled;
          p = k;
        }
      }
      if (p == m_) return;
      add_violated(p);
    }
  }

  const std::vector<double>& x() const { return x_; }
  int iterations() const { return iterations_; }

 private:
  void tick() {
    if (++iterations_ > max_iterations_)
      throw QpError("least-distance QP hit its iteration cap (" + std::to_string(max_iterations_) +
                    ")");
  }

  void add_violated(std::size_t p) {
    const auto& kern = simd::kernels();
    const double* np = &c_[p * n_];
    u_[iq_] = 0.0;
    act_[iq_] = p;
    double sp = slack_[p];
    for (;;) {
      tick();
      kern.gemv_t(j_.data(), n_, n_, n_, np, d_.data());
      if (iq_ < n_)
        kern.gemv(j_.data() + iq_, n_, n_, n_ - iq_, d_.data() + iq_, z_.data());
      else
        std::fill(z_.begin(), z_.end(), 0.0);
      for (std::size_t i = iq_; i-- > 0;) {
        double sum = d_[i];
        for (std::size_t k = i + 1; k < iq_; ++k) sum -= r_[i * n_ + k] * rv_[k];
        rv_[i] = sum / r_[i * n_ + i];
      }

      double t1 = kInf;
      std::size_t drop = 0;
      for (std::size_t k = 0; k < iq_; ++k) {
        if (rv_[k] > 0.0 && u_[k] / rv_[k] < t1) {
          t1 = u_[k] / rv_[k];
          drop = k;
        }
      }
      double dn = 0.0, d2 = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        dn += d_[i] * d_[i];
        if (i >= iq_) d2 += d_[i] * d_[i];
      }
      double t2 = kInf;
      if (d2 > 1e-20 * dn) t2 = -sp / kern.dot(z_.data(), np, n_);

      if (t1 == kInf && t2 == kInf) throw QpError("least-distance QP is infeasible");
      if (t2 == kInf) {
        for (std::size_t k = 0; k < iq_; ++k) u_[k] -= t1 * rv_[k];
        u_[iq_] += t1;
        active_[act_[drop]] = 0;
        drop_constraint(drop);
        continue;
      }
      const double t = std::min(t1, t2);
      kern.axpy(t, z_.data(), x_.data(), n_);
      for (std::size_t k = 0; k < iq_; ++k) u_[k] -= t * rv_[k];
      u_[iq_] += t;
      if (t2 <= t1) {
        add_constraint();
        active_[p] = 1;
        return;
      }
      active_[act_[drop]] = 0;
      drop_constraint(drop);
      sp = kern.dot(np, x_.data(), n_) - b_[p];
    }
  }

  // Rotates d (= J' n+) so its tail vanishes and appends it as the next
  // column of R.
  void add_constraint() {
    for (std::size_t j = n_ - 1; j > iq_; --j) {
      double cc = d_[j - 1];
      double ss = d_[j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      d_[j] = 0.0;
      cc /= h;
      ss /= h;
      if (cc < 0.0) {
        cc = -cc;
        ss = -ss;
        d_[j - 1] = -h;
      } else {
        d_[j - 1] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (std::size_t k = 0; k < n_; ++k) {
        const double a = j_[k * n_ + j - 1];
        const double b = j_[k * n_ + j];
        j_[k * n_ + j - 1] = a * cc + b * ss;
        j_[k * n_ + j] = xny * (a + j_[k * n_ + j - 1]) - b;
      }
    }
    for (std::size_t i = 0; i <= iq_; ++i) r_[i * n_ + iq_] = d_[i];
    ++iq_;
  }

  void drop_constraint(std::size_t l) {
    for (std::size_t i = l; i < iq_; ++i) {
      act_[i] = act_[i + 1];
      u_[i] = u_[i + 1];
      if (i + 1 < iq_)
        for (std::size_t k = 0; k < n_; ++k) r_[k * n_ + i] = r_[k * n_ + i + 1];
    }
    act_[iq_] = 0;
    u_[iq_] = 0.0;
    for (std::size_t k = 0; k < n_; ++k) r_[k * n_ + iq_ - 1] = 0.0;
    --iq_;
    for (std::size_t j = l; j < iq_; ++j) {
      double cc = r_[j * n_ + j];
      double ss = r_[(j + 1) * n_ + j];
      const double h = std::hypot(cc, ss);
      if (h == 0.0) continue;
      cc /= h;
      ss /= h;
      r_[(j + 1) * n_ + j] = 0.0;
      if (cc < 0.0) {
        r_[j * n_ + j] = -h;
        cc = -cc;
        ss = -ss;
      } else {
        r_[j * n_ + j] = h;
      }
      const double xny = ss / (1.0 + cc);
      for (std::size_t k = j + 1; k < iq_; ++k) {
        const double a = r_[j * n_ + k];
        const double b = r_[(j + 1) * n_ + k];
        r_[j * n_ + k] = a * cc + b * ss;
        r_[(j + 1) * n_ + k] = xny * (a + r_[j * n_ + k]) - b;
      }
      for (std::size_t k = 0; k < n_; ++k) {
        const double a = j_[k * n_ + j];
        const double b = j_[k * n_ + j + 1];
        j_[k * n_ + j] = a * cc + b * ss;
        j_[k * n_ + j + 1] = xny * (j_[k * n_ + j] + a) - b;
      }
    }
  }

  std::size_t n_, m_;
  std::vector<double> c_, b_;
  std::vector<double> j_, r_;
  std::vector<double> x_, d_, z_, rv_, u_;
  std::vector<std::size_t> act_;
  std::vector<double> slack_, tol_;
  std::vector<char> active_;
  std::size_t iq_ = 0;
  int iterations_ = 0;
  int max_iterations_;
};

}  // namespace

std::string_view to_string(QpStatus status) {
  return status == QpStatus::optimal ? "optimal" : "optimal_with_slack";
}

QpResult solve_least_distance(const LeastDistanceProblem& pr, QpOptions options) {
  check_dimensions(pr);
  const std::size_t p = pr.inputs();
  const std::size_t rows = pr.outputs();

  std::vector<double> wl(p), wu(p), w(p, 0.0);
  std::vector<std::size_t> free_idx;
  for (std::size_t i = 0; i < p; ++i) {
    if (std::isnan(pr.g[i]) || std::isnan(pr.input_lower[i]) || std::isnan(pr.input_upper[i]))
      throw PreconditionError("NaN in least-distance problem");
    wl[i] = pr.input_lower[i] / pr.alpha;
    wu[i] = pr.input_upper[i] / pr.alpha;
    if (wl[i] > wu[i]) {
      if (wl[i] - wu[i] > 1e-12 * std::max(1.0, std::abs(wl[i])))
        throw PreconditionError("input box is inverted at coordinate " + std::to_string(i));
      wu[i] = wl[i];
    }
    if (wl[i] == wu[i])
      w[i] = wl[i];
    else
      free_idx.push_back(i);
  }
  const std::size_t nf = free_idx.size();

  struct Row {
    std::size_t index;
    double lo, hi;
  };
  std::vector<Row> kept;
  for (std::size_t r = 0; r < rows; ++r) {
    double lo = pr.output_lower[r], hi = pr.output_upper[r];
    if (std::isnan(lo) || std::isnan(hi)) throw PreconditionError("NaN output bound");
    if (lo > hi) throw PreconditionError("output bounds inverted at row " + std::to_string(r));
    if (lo == -kInf && hi == kInf) continue;
    double shift = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      if (wl[i] == wu[i]) shift += pr.output_rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) * w[i];
    kept.push_back({r, lo - shift, hi - shift});
  }
  const std::size_t ns = kept.size();
  const std::size_t n = nf + ns;

  QpResult res;
  if (n > 0) {
    std::vector<double> gdiag(n), a(n, 0.0);
    for (std::size_t k = 0; k < nf; ++k) {
      gdiag[k] = 2.0;
      a[k] = 2.0 * pr.g[free_idx[k]];
    }
    for (std::size_t k = nf; k < n; ++k) gdiag[k] = 2.0 * pr.rho;

    std::vector<double> c, b;
    auto new_row = [&](double bound) {
      c.resize(c.size() + n, 0.0);
      b.push_back(bound);
      return c.size() - n;
    };
    for (std::size_t k = 0; k < nf; ++k) {
      const std::size_t i = free_idx[k];
      if (std::isfinite(wl[i])) c[new_row(wl[i]) + k] = 1.0;
      if (std::isfinite(wu[i])) c[new_row(-wu[i]) + k] = -1.0;
    }
    for (std::size_t j = 0; j < ns; ++j) {
      const Row& row = kept[j];
      const auto ri = static_cast<Eigen::Index>(row.index);
      for (int side : {1, -1}) {
        const double bound = side > 0 ? row.lo : -row.hi;
        if (!std::isfinite(bound)) continue;
        const std::size_t at = new_row(bound);
        for (std::size_t k = 0; k < nf; ++k)
          c[at + k] = side * pr.output_rows(ri, static_cast<Eigen::Index>(free_idx[k]));
        c[at + nf + j] = 1.0;
      }
      c[new_row(0.0) + nf + j] = 1.0;
    }

    const int cap = options.max_iterations > 0
                        ? options.max_iterations
                        : static_cast<int>(20 * (n + b.size()) + 100);
    DualActiveSet solver(std::move(gdiag), a, std::move(c), std::move(b), cap);
    solver.solve();
    for (std::size_t k = 0; k < nf; ++k) w[free_idx[k]] = solver.x()[k];
    res.iterations = solver.iterations();
  }

  // The input box is hard: remove any rounding-level excursion.
  for (std::size_t i = 0; i < p; ++i) {
    w[i] = std::clamp(w[i], wl[i], wu[i]);
    while (pr.alpha * w[i] > pr.input_upper[i]) w[i] = std::nextafter(w[i], -kInf);
    while (pr.alpha * w[i] < pr.input_lower[i] && pr.alpha * std::nextafter(w[i], kInf) <= pr.input_upper[i])
      w[i] = std::nextafter(w[i], kInf);
  }

  res.w = std::move(w);
  res.slack.assign(rows, 0.0);
  res.status = QpStatus::optimal;
  for (std::size_t r = 0; r < rows; ++r) {
    double v = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      v += pr.output_rows(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) * res.w[i];
    res.slack[r] = distance_to(v, pr.output_lower[r], pr.output_upper[r]);
    if (res.slack[r] > options.slack_threshold) res.status = QpStatus::optimal_with_slack;
  }
  res.kkt_residual = kkt_check(pr, res);
  return res;
}

double kkt_check(const LeastDistanceProblem& pr, const QpResult& res) {
  check_dimensions(pr);
  const std::size_t p = pr.inputs();
  const std::size_t rows = pr.outputs();
  if (res.w.size() != p || res.slack.size() != rows) return kInf;

  std::vector<double> grad(p);
  for (std::size_t i = 0; i < p; ++i) grad[i] = 2.0 * (res.w[i] + pr.g[i]);
  double residual = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const auto ri = static_cast<Eigen::Index>(r);
    double v = 0.0;
    for (std::size_t i = 0; i < p; ++i) v += pr.output_rows(ri, static_cast<Eigen::Index>(i)) * res.w[i];
    const double lo = pr.output_lower[r], hi = pr.output_upper[r];
    const double excess = v < lo ? v - lo : (v > hi ? v - hi : 0.0);
    residual = std::max(residual, std::abs(res.slack[r] - std::abs(excess)));
    if (excess != 0.0)
      for (std::size_t i = 0; i < p; ++i)
        grad[i] += 2.0 * pr.rho * excess * pr.output_rows(ri, static_cast<Eigen::Index>(i));
  }
  for (std::size_t i = 0; i < p; ++i) {
    const double lo = pr.input_lower[i] / pr.alpha;
    const double hi = std::max(lo, pr.input_upper[i] / pr.alpha);
    const double projected = std::clamp(res.w[i] - 0.5 * grad[i], lo, hi);
    residual = std::max(residual, std::abs(res.w[i] - projected));
    const double aw = pr.alpha * res.w[i];
    residual = std::max(residual, std::max(aw - pr.input_upper[i], pr.input_lower[i] - aw) / pr.alpha);
  }
  return std::isfinite(residual) ? residual : kInf;
}

}  // namespace flex
