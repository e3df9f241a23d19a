#pragma once

namespace firt {

// Four-parameter triangular fuzzy number: support [l, r], mode c and an
// intensification exponent omega that bends both limbs of the membership.
// omega = 1 gives the ordinary triangular fuzzy number.
class Fptfn {
 public:
  // Supports with r - l <= 2 * kSupportEpsilon are treated as crisp points.
  static constexpr double kSupportEpsilon = 1e-6;
  static constexpr double kOmegaMin = 1e-3;
  static constexpr double kOmegaMax = 1e3;

  // Throws DomainError unless l < c < r (or l <= c <= r for a degenerate
  // support) and omega > 0. omega is clamped to [kOmegaMin, kOmegaMax] with a
  // warning.
  Fptfn(double l, double c, double r, double omega = 1.0);

  // Degenerate fuzzy number concentrated at y.
  static Fptfn crisp(double y, double omega = 1.0);

  double l() const { return l_; }
  double c() const { return c_; }
  double r() const { return r_; }
  double omega() const { return omega_; }
  bool degenerate() const { return degenerate_; }

  friend bool operator==(const Fptfn&, const Fptfn&) = default;

 private:
  double l_;
  double c_;
  double r_;
  double omega_;
  bool degenerate_;
};

struct MembershipMoments {
  double mass = 0.0;           // integral of the membership over [l, r]
  double mean = 0.0;           // moments of the standardized membership
  double second_moment = 0.0;
  double variance = 0.0;
  bool degenerate = false;
};

// Membership degree of y. The limb formulas are replaced by their limits at
// y = l, y = c and y = r. Throws DomainError for non-finite y.
double membership(const Fptfn& f, double y);

// Graded 64-point Gauss-Legendre quadrature on each limb. Degenerate supports return
// point-mass moments (mean = c, variance = 0).
MembershipMoments moments(const Fptfn& f);

// Returns (a + b l, a + b c, a + b r, omega). Throws DomainError if b <= 0.
Fptfn scale_affine(const Fptfn& f, double a, double b);

}  // namespace firt
