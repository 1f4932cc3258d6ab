#include "flex/powerflow.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "flex/error.hpp"
#include "flex/simd/kernels.hpp"

namespace flex {

using cplx = std::complex<double>;

OperatingPoint nominal_operating_point(const GridNetwork& net) {
  const std::size_t na = net.actors().size();
  OperatingPoint op;
  op.actor_p.assign(na, 0.0);
  op.actor_q.assign(na, 0.0);
  op.actor_online.assign(na, true);
  op.bus_p.assign(net.buses().size(), 0.0);
  op.bus_q.assign(net.buses().size(), 0.0);
  for (std::size_t i = 0; i < na; ++i) {
    const Actor& a = net.actors()[i];
    switch (a.kind) {
      case ActorKind::controllable:
        op.actor_p[i] = std::clamp(a.p_reference, a.p_min, a.p_max);
        op.actor_q[i] = std::clamp(0.0, a.q_min, a.q_max);
        break;
      case ActorKind::voltvar:
        op.actor_p[i] = a.p_reference;
        break;
      case ActorKind::fixed_load:
        op.actor_p[i] = a.p_reference;
        op.actor_q[i] = a.q_reference;
        break;
    }
  }
  return op;
}

InjectionProfile assemble_injections(const GridNetwork& net, const OperatingPoint& op) {
  InjectionProfile inj;
  inj.p = op.bus_p;
  inj.q = op.bus_q;
  inj.p.resize(net.buses().size(), 0.0);
  inj.q.resize(net.buses().size(), 0.0);
  for (std::size_t i = 0; i < net.actors().size(); ++i) {
    if (i < op.actor_online.size() && !op.actor_online[i]) continue;
    const std::size_t b = net.bus_index(net.actors()[i].bus);
    inj.p[b] += op.actor_p[i];
    inj.q[b] += op.actor_q[i];
  }
  return inj;
}

PowerFlowSolver::PowerFlowSolver(const GridNetwork& net, PowerFlowOptions options)
    : network_(&net), options_(options), n_(net.buses().size()) {
  auto slack = net.slack_bus();
  if (!slack) throw PreconditionError("power flow needs a slack bus");
  slack_ = *slack;
  for (std::size_t i = 0; i < n_; ++i)
    if (i != slack_) pq_.push_back(i);

  y_re_.assign(n_ * n_, 0.0);
  y_im_.assign(n_ * n_, 0.0);
  for (const auto& br : net.branches()) {
    const std::size_t f = net.bus_index(br.from_bus);
    const std::size_t t = net.bus_index(br.to_bus);
    const cplx y = 1.0 / cplx(br.resistance, br.reactance);
    br_g_.push_back(y.real());
    br_b_.push_back(y.imag());
    br_from_.push_back(f);
    br_to_.push_back(t);
    y_re_[f * n_ + f] += y.real();
    y_im_[f * n_ + f] += y.imag();
    y_re_[t * n_ + t] += y.real();
    y_im_[t * n_ + t] += y.imag();
    y_re_[f * n_ + t] -= y.real();
    y_im_[f * n_ + t] -= y.imag();
    y_re_[t * n_ + f] -= y.real();
    y_im_[t * n_ + f] -= y.imag();
  }
}

PowerFlowSolution PowerFlowSolver::solve(const InjectionProfile& inj,
                                         const PowerFlowSolution* warm) const {
  const GridNetwork& net = *network_;
  if (inj.p.size() != n_ || inj.q.size() != n_)
    throw DimensionError("injection profile does not match the bus count");
  const auto& kern = simd::kernels();
  const std::size_t m = pq_.size();

  std::vector<double> vm(n_, 1.0), va(n_, 0.0);
  if (warm != nullptr && warm->vm.size() == n_ && warm->va.size() == n_) {
    vm = warm->vm;
    va = warm->va;
  }
  vm[slack_] = net.buses()[slack_].v_setpoint;
  va[slack_] = 0.0;

  std::vector<double> v_re(n_), v_im(n_), i_re(n_), i_im(n_);
  std::vector<double> mismatch(2 * m);
  Eigen::MatrixXd jac(2 * m, 2 * m);

  auto evaluate = [&] {
    for (std::size_t i = 0; i < n_; ++i) {
      v_re[i] = vm[i] * std::cos(va[i]);
      v_im[i] = vm[i] * std::sin(va[i]);
    }
    kern.cgemv(y_re_.data(), y_im_.data(), n_, n_, n_, v_re.data(), v_im.data(), i_re.data(),
               i_im.data());
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = pq_[k];
      // S = V conj(I)
      const double p = v_re[i] * i_re[i] + v_im[i] * i_im[i];
      const double q = v_im[i] * i_re[i] - v_re[i] * i_im[i];
      mismatch[k] = p - inj.p[i];
      mismatch[m + k] = q - inj.q[i];
    }
    return kern.max_abs(mismatch.data(), mismatch.size());
  };

  double err = evaluate();
  int iter = 0;
  while (!(err <= options_.tolerance)) {
    if (iter >= options_.max_iterations || !std::isfinite(err))
      throw DivergenceError("power flow did not converge after " + std::to_string(iter) +
                                " iterations (max mismatch " + std::to_string(err) + " p.u.)",
                            err, iter);
    for (std::size_t r = 0; r < m; ++r) {
      const std::size_t i = pq_[r];
      const cplx vi(v_re[i], v_im[i]);
      const cplx ii(i_re[i], i_im[i]);
      for (std::size_t c = 0; c < m; ++c) {
        const std::size_t k = pq_[c];
        const cplx yik(y_re_[i * n_ + k], y_im_[i * n_ + k]);
        const cplx vk(v_re[k], v_im[k]);
        cplx ds_dva = cplx(0.0, 1.0) * vi * std::conj(-yik * vk);
        cplx ds_dvm = vi * std::conj(yik * vk / vm[k]);
        if (i == k) {
          ds_dva += cplx(0.0, 1.0) * vi * std::conj(ii);
          ds_dvm += std::conj(ii) * vi / vm[i];
        }
        jac(r, c) = ds_dva.real();
        jac(r, m + c) = ds_dvm.real();
        jac(m + r, c) = ds_dva.imag();
        jac(m + r, m + c) = ds_dvm.imag();
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(jac);
    const double rc = lu.rcond();
    if (!(rc > 1e-14))
      throw NumericalError("power flow Jacobian is singular (rcond " + std::to_string(rc) + ")");
    const Eigen::Map<const Eigen::VectorXd> f(mismatch.data(), 2 * m);
    const Eigen::VectorXd dx = lu.solve(f);
    for (std::size_t k = 0; k < m; ++k) {
      va[pq_[k]] -= dx[k];
      vm[pq_[k]] -= dx[m + k];
    }
    ++iter;
    err = evaluate();
  }

  PowerFlowSolution sol;
  sol.vm = std::move(vm);
  sol.va = std::move(va);
  sol.iterations = iter;
  sol.max_mismatch = err;
  sol.slack_p = v_re[slack_] * i_re[slack_] + v_im[slack_] * i_im[slack_];
  sol.slack_q = v_im[slack_] * i_re[slack_] - v_re[slack_] * i_im[slack_];

  const std::size_t nbr = br_from_.size();
  sol.branch_s.resize(nbr);
  sol.branch_p.resize(nbr);
  sol.branch_q.resize(nbr);
  for (std::size_t k = 0; k < nbr; ++k) {
    const std::size_t f = br_from_[k];
    const std::size_t t = br_to_[k];
    const cplx vf(v_re[f], v_im[f]);
    const cplx dv = vf - cplx(v_re[t], v_im[t]);
    const cplx s = vf * std::conj(cplx(br_g_[k], br_b_[k]) * dv);
    sol.branch_p[k] = s.real();
    sol.branch_q[k] = s.imag();
    sol.branch_s[k] = std::abs(s);
  }
  return sol;
}

PowerFlowSolution solve_ac_power_flow(const GridNetwork& net, const InjectionProfile& inj,
                                      const PowerFlowSolution* warm, PowerFlowOptions options) {
  return PowerFlowSolver(net, options).solve(inj, warm);
}

MeasurementVector extract_measurements(const PowerFlowSolution& sol, const ControllerScope& scope,
                                       double timestamp, MeasurementAccessLog* log) {
  MeasurementVector y;
  y.timestamp = timestamp;
  y.values.reserve(scope.measurement_size());
  for (std::size_t b : scope.buses) {
    if (b >= sol.vm.size()) throw ScopeError("scoped bus index out of range");
    if (log) log->buses.push_back(b);
    y.values.push_back(sol.vm[b]);
  }
  for (std::size_t k : scope.branches) {
    if (k >= sol.branch_s.size()) throw ScopeError("scoped branch index out of range");
    if (log) log->branches.push_back(k);
    y.values.push_back(sol.branch_s[k]);
  }
  for (std::size_t k : scope.pcc_branches) {
    if (k >= sol.branch_p.size()) throw ScopeError("scoped pcc branch index out of range");
    if (log) log->branches.push_back(k);
    y.values.push_back(sol.branch_p[k]);
  }
  return y;
}

double total_losses(const GridNetwork& net, const PowerFlowSolution& sol) {
  double loss = 0.0;
  for (const auto& br : net.branches()) {
    const std::size_t f = net.bus_index(br.from_bus);
    const std::size_t t = net.bus_index(br.to_bus);
    const cplx dv = std::polar(sol.vm[f], sol.va[f]) - std::polar(sol.vm[t], sol.va[t]);
    const cplx y = 1.0 / cplx(br.resistance, br.reactance);
    loss += y.real() * std::norm(dv);
  }
  return loss;
}

}  // namespace flex
