#include "firt/optim.hpp"

#include <cmath>
#include <deque>
#include <limits>

namespace firt::optim {
namespace {

struct Correction {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho;
};

Eigen::VectorXd two_loop(const std::deque<Correction>& mem, const Eigen::VectorXd& g) {
  Eigen::VectorXd q = g;
  std::vector<double> a(mem.size());
  for (std::size_t k = mem.size(); k-- > 0;) {
    a[k] = mem[k].rho * mem[k].s.dot(q);
    q -= a[k] * mem[k].y;
  }
  if (!mem.empty()) {
    const auto& last = mem.back();
    q *= last.s.dot(last.y) / last.y.squaredNorm();
  }
  for (std::size_t k = 0; k < mem.size(); ++k) {
    const double b = mem[k].rho * mem[k].y.dot(q);
    q += (a[k] - b) * mem[k].s;
  }
  return -q;
}

struct LineSearchOutcome {
  bool ok = false;
  double step = 0.0;
  double value = 0.0;
  Eigen::VectorXd x;
  Eigen::VectorXd grad;
  bool flat = false;  // last trial value indistinguishable from f in rounding
};

// Weak Wolfe bracketing/bisection search (Armijo c1 = 1e-4, curvature c2 = 0.9).
LineSearchOutcome wolfe_search(const Objective& fn, const Eigen::VectorXd& x, double f,
                               const Eigen::VectorXd& g, const Eigen::VectorXd& d,
                               double step0, int max_evals) {
  constexpr double c1 = 1e-4;
  constexpr double c2 = 0.9;
  const double dg0 = g.dot(d);
  double lo = 0.0;
  double hi = std::numeric_limits<double>::infinity();
  double step = step0;
  LineSearchOutcome best;
  best.value = f;
  Eigen::VectorXd grad(x.size());
  double last = f;
  for (int it = 0; it < max_evals; ++it) {
    Eigen::VectorXd xn = x + step * d;
    const double fn_val = fn(xn, &grad);
    last = fn_val;
    if (!std::isfinite(fn_val) || !grad.allFinite() || fn_val > f + c1 * step * dg0) {
      hi = step;
      step = 0.5 * (lo + hi);
      continue;
    }
    if (fn_val < best.value) {
      best.ok = true;
      best.step = step;
      best.value = fn_val;
      best.x = xn;
      best.grad = grad;
    }
    if (grad.dot(d) < c2 * dg0) {
      lo = step;
      step = std::isinf(hi) ? 2.0 * step : 0.5 * (lo + hi);
      continue;
    }
    LineSearchOutcome out;
    out.ok = true;
    out.step = step;
    out.value = fn_val;
    out.x = std::move(xn);
    out.grad = grad;
    return out;
  }
  // Accept the best Armijo point found even without the curvature condition.
  best.flat = std::abs(last - f) <= 64.0 * std::numeric_limits<double>::epsilon() *
                                        std::max(1.0, std::abs(f));
  return best;
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, const Eigen::VectorXd& x0,
                           const LbfgsOptions& options) {
  LbfgsResult res;
  res.x = x0;
  res.gradient.resize(x0.size());
  res.value = objective(res.x, &res.gradient);
  if (!std::isfinite(res.value) || !res.gradient.allFinite()) {
    res.message = "objective not finite at the starting point";
    return res;
  }
  std::deque<Correction> mem;
  int stalls = 0;
  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    const double gnorm = res.gradient.lpNorm<Eigen::Infinity>();
    if (gnorm <= options.gradient_tolerance * std::max(1.0, std::abs(res.value))) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }
    Eigen::VectorXd d = two_loop(mem, res.gradient);
    if (d.dot(res.gradient) >= 0.0) {
      mem.clear();
      d = -res.gradient;
    }
    double step0 = 1.0;
    if (mem.empty()) step0 = std::min(1.0, 1.0 / std::max(gnorm, 1e-300));
    auto ls = wolfe_search(objective, res.x, res.value, res.gradient, d, step0,
                           options.max_line_search);
    if (!ls.ok) {
      if (!mem.empty()) {
        mem.clear();
        continue;
      }
      // No representable decrease along steepest descent.
      if (ls.flat) {
        res.converged = true;
        res.message = "stationary to working precision";
        return res;
      }
      res.message = "line search failed";
      return res;
    }
    const Eigen::VectorXd s = ls.x - res.x;
    const Eigen::VectorXd y = ls.grad - res.gradient;
    const double prev = res.value;
    res.x = ls.x;
    res.value = ls.value;
    res.gradient = ls.grad;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      mem.push_back({s, y, 1.0 / sy});
      if (static_cast<int>(mem.size()) > options.memory) mem.pop_front();
    }
    const double xscale = std::max(1.0, res.x.lpNorm<Eigen::Infinity>());
    if (s.lpNorm<Eigen::Infinity>() <= options.step_tolerance * xscale) {
      res.converged = true;
      res.message = "step tolerance reached";
      ++res.iterations;
      return res;
    }
    if (std::abs(prev - res.value) <= 1e-15 * std::max(1.0, std::abs(res.value))) {
      if (++stalls >= 3) {
        res.converged = true;
        res.message = "no further decrease at machine precision";
        ++res.iterations;
        return res;
      }
    } else {
      stalls = 0;
    }
  }
  res.message = "iteration limit reached";
  return res;
}

Eigen::VectorXd central_difference_gradient(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double hk = h * std::max(1.0, std::abs(x[k]));
    xp[k] = x[k] + hk;
    const double fp = f(xp);
    xp[k] = x[k] - hk;
    const double fm = f(xp);
    xp[k] = x[k];
    g[k] = (fp - fm) / (2.0 * hk);
  }
  return g;
}

Objective with_central_differences(std::function<double(const Eigen::VectorXd&)> f,
                                   double h) {
  return [f = std::move(f), h](const Eigen::VectorXd& x, Eigen::VectorXd* grad) {
    const double v = f(x);
    if (grad != nullptr) {
      if (std::isfinite(v)) {
        *grad = central_difference_gradient(f, x, h);
      } else {
        grad->setConstant(x.size(), std::numeric_limits<double>::quiet_NaN());
      }
    }
    return v;
  };
}

Eigen::MatrixXd central_difference_hessian(
    const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double h) {
  const Eigen::Index n = x.size();
  Eigen::MatrixXd hess(n, n);
  Eigen::VectorXd xp = x;
  const double f0 = f(x);
  for (Eigen::Index a = 0; a < n; ++a) {
    const double ha = h * std::max(1.0, std::abs(x[a]));
    for (Eigen::Index b = a; b < n; ++b) {
      const double hb = h * std::max(1.0, std::abs(x[b]));
      double v;
      if (a == b) {
        xp[a] = x[a] + ha;
        const double fp = f(xp);
        xp[a] = x[a] - ha;
        const double fm = f(xp);
        xp[a] = x[a];
        v = (fp - 2.0 * f0 + fm) / (ha * ha);
      } else {
        double acc = 0.0;
        for (int sa : {1, -1}) {
          for (int sb : {1, -1}) {
            xp[a] = x[a] + sa * ha;
            xp[b] = x[b] + sb * hb;
            acc += sa * sb * f(xp);
          }
        }
        xp[a] = x[a];
        xp[b] = x[b];
        v = acc / (4.0 * ha * hb);
      }
      hess(a, b) = v;
      hess(b, a) = v;
    }
  }
  return hess;
}

}  // namespace firt::optim
