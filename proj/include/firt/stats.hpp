#pragma once

#include <array>
#include <span>
#include <vector>

namespace firt::stats {

double mean(std::span<const double> x);

// Sample variance with denominator n-1. Returns 0 for n < 2.
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);

// Hyndman-Fan type 7 quantile (linear interpolation between order statistics),
// p in [0,1]. Throws InputError on empty input.
double quantile_type7(std::span<const double> x, double p);
double median(std::span<const double> x);
std::array<double, 3> quartiles(std::span<const double> x);

// Right-continuous empirical CDF: F(t) = #{x_k <= t} / n.
class Ecdf {
 public:
  explicit Ecdf(std::span<const double> sample);
  double operator()(double t) const;
  std::size_t size() const { return sorted_.size(); }

 private:
  std::vector<double> sorted_;
};

// Standard normal quantile. Used for Wald intervals.
double normal_quantile(double p);

}  // namespace firt::stats
