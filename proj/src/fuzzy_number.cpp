#include "firt/fuzzy_number.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "firt/diagnostics.hpp"
#include "firt/quadrature.hpp"

namespace firt {

Fptfn::Fptfn(double l, double c, double r, double omega)
    : l_(l), c_(c), r_(r), omega_(omega), degenerate_(false) {
  if (!std::isfinite(l) || !std::isfinite(c) || !std::isfinite(r)) {
    throw DomainError("fuzzy number bounds must be finite");
  }
  if (!std::isfinite(omega) || omega <= 0.0) {
    throw DomainError("intensification parameter omega must be positive");
  }
  degenerate_ = (r - l) <= 2.0 * kSupportEpsilon;
  if (degenerate_) {
    if (!(l <= c && c <= r)) throw DomainError("degenerate fuzzy number requires l <= c <= r");
  } else if (!(l < c && c < r)) {
    std::ostringstream os;
    os << "fuzzy number requires l < c < r, got (" << l << ", " << c << ", " << r << ")";
    throw DomainError(os.str());
  }
  if (omega < kOmegaMin || omega > kOmegaMax) {
    omega_ = std::clamp(omega, kOmegaMin, kOmegaMax);
    std::ostringstream os;
    os << "omega " << omega << " clamped to " << omega_;
    warn(os.str());
  }
}

Fptfn Fptfn::crisp(double y, double omega) { return Fptfn(y, y, y, omega); }

double membership(const Fptfn& f, double y) {
  if (!std::isfinite(y)) throw DomainError("membership evaluated at a non-finite point");
  const double l = f.l();
  const double c = f.c();
  const double r = f.r();
  if (y < l || y > r) return 0.0;
  if (y == c) return 1.0;
  if (y < c) {
    if (y == l) return 0.0;
    const double q = (c - y) / (y - l);
    return 1.0 / (1.0 + std::pow(q, f.omega()));
  }
  if (y == r) return 0.0;
  const double q = (y - c) / (r - y);
  return 1.0 / (1.0 + std::pow(q, f.omega()));
}

MembershipMoments moments(const Fptfn& f) {
  MembershipMoments m;
  if (f.degenerate()) {
    m.degenerate = true;
    m.mass = std::max(f.r() - f.l(), 2.0 * Fptfn::kSupportEpsilon) / 2.0;
    m.mean = f.c();
    m.variance = 0.0;
    m.second_moment = f.c() * f.c();
    return m;
  }
  const auto& gl = GaussLegendre::order64();
  auto limbs = [&](auto&& g) {
    return gl.integrate_graded(g, f.l(), f.c()) + gl.integrate_graded(g, f.c(), f.r());
  };
  m.mass = limbs([&](double y) { return membership(f, y); });
  m.mean = limbs([&](double y) { return y * membership(f, y); }) / m.mass;
  m.variance = limbs([&](double y) {
                 const double d = y - m.mean;
                 return d * d * membership(f, y);
               }) /
               m.mass;
  m.variance = std::max(m.variance, 0.0);
  m.second_moment = m.variance + m.mean * m.mean;
  return m;
}

Fptfn scale_affine(const Fptfn& f, double a, double b) {
  if (!(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw DomainError("affine rescaling requires finite a and b > 0");
  }
  const double l = a + b * f.l();
  const double c = a + b * f.c();
  const double r = a + b * f.r();
  if (f.degenerate() && !(l < c && c < r) && (r - l) > 2.0 * Fptfn::kSupportEpsilon) {
    return Fptfn::crisp(c, f.omega());
  }
  return Fptfn(l, c, r, f.omega());
}

}  // namespace firt
