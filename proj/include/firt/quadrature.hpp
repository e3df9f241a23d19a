#pragma once

#include <cstddef>
#include <vector>

namespace firt {

// Fixed-order Gauss-Legendre rule on [-1, 1].
class GaussLegendre {
 public:
  explicit GaussLegendre(std::size_t order);

  // Shared 64-point rule used for membership integrals.
  static const GaussLegendre& order64();

  std::size_t order() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }

  // Integrates f over [a, b].
  template <typename F>
  double integrate(F&& f, double a, double b) const {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    double sum = 0.0;
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      sum += weights_[k] * f(mid + half * nodes_[k]);
    }
    return half * sum;
  }

  // Same rule after t = 10s^3 - 15s^4 + 6s^5, which flattens endpoint
  // singularities of the y^omega kind. Calls f(y, w) for each node y in
  // [a, b] with its weight w.
  template <typename F>
  void for_each_graded(F&& f, double a, double b) const {
    for (std::size_t k = 0; k < nodes_.size(); ++k) {
      const double s = 0.5 * (1.0 + nodes_[k]);
      const double t = s * s * s * (10.0 + s * (6.0 * s - 15.0));
      const double dt = 30.0 * s * s * (1.0 - s) * (1.0 - s);
      f(a + (b - a) * t, 0.5 * weights_[k] * dt * (b - a));
    }
  }

  template <typename F>
  double integrate_graded(F&& f, double a, double b) const {
    double sum = 0.0;
    for_each_graded([&](double y, double w) { sum += w * f(y); }, a, b);
    return sum;
  }

 private:
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace firt
