#include "doctest.h"

#include <cmath>
#include <limits>

#include "firt/diagnostics.hpp"
#include "firt/fuzzify.hpp"
#include "firt/irtree.hpp"
#include "firt/simulate.hpp"

namespace fz = firt::fuzzify;
using firt::ResponseTimeMatrix;

namespace {

const double kNaN = std::numeric_limits<double>::quiet_NaN();

ResponseTimeMatrix column(const std::vector<double>& v) {
  ResponseTimeMatrix t;
  t.values.resize(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t.values(static_cast<Eigen::Index>(i), 0) = v[i];
  return t;
}

}  // namespace

TEST_CASE("mode and precision") {
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  auto mp = fz::mode_and_precision(uniform);
  CHECK(mp.c == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(mp.s == doctest::Approx(5.0 / 36.0).epsilon(1e-14));
  const double bottom[] = {1, 0, 0, 0};
  mp = fz::mode_and_precision(bottom);
  CHECK(mp.c == 0.0);
  CHECK(mp.s == 0.0);
  const double top[] = {0, 0, 0, 1};
  mp = fz::mode_and_precision(top);
  CHECK(mp.c == 1.0);
  CHECK(mp.s == 0.0);
  const double one[] = {1.0};
  CHECK_THROWS_AS(fz::mode_and_precision(one), firt::InputError);
}

TEST_CASE("membership mean") {
  CHECK(fz::membership_mean(0.5, 0.0) == 0.5);
  CHECK(fz::membership_mean(0.5, 5.0 / 36.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fz::membership_mean(0.5, 3.7) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(fz::membership_mean(0.0, 0.0) == 0.5);
}

TEST_CASE("bounds") {
  auto b = fz::bounds(0.5, 5.0 / 36.0, 0.5);
  CHECK(!b.fallback);
  CHECK(b.l == doctest::Approx(0.5 - 0.5 * std::sqrt(3.5 * 5.0 / 36.0)).epsilon(1e-14));
  CHECK(b.l == doctest::Approx(0.1514).epsilon(1e-3));
  CHECK(b.r == doctest::Approx(0.8486).epsilon(1e-3));
  CHECK(b.r - b.l == doctest::Approx(std::sqrt(3.5 * 5.0 / 36.0)).epsilon(1e-14));

  b = fz::bounds(0.5, 0.0, 0.5);
  CHECK(b.fallback);
  CHECK(b.l == doctest::Approx(0.49));
  CHECK(b.r == doctest::Approx(0.51));

  b = fz::bounds(0.0, 0.0, 0.5);
  CHECK(b.fallback);
  CHECK(b.l == 0.0);
  CHECK(b.r == doctest::Approx(0.01));
  CHECK(b.l < b.c);
  CHECK(b.c < b.r);

  for (double c = 0.0; c <= 1.0; c += 0.05)
    for (double s = 0.0; s <= 0.3; s += 0.02) {
      const auto x = fz::bounds(c, s, fz::membership_mean(c, s));
      CHECK(0.0 <= x.l);
      CHECK(x.l < x.c);
      CHECK(x.c < x.r);
      CHECK(x.r <= 1.0);
    }
}

TEST_CASE("intensification") {
  const std::vector<double> t = {300, 100, 200, 500, 400};
  const auto w = fz::intensification(t);
  CHECK(w[0] == 1.0);                               // median time
  CHECK(w[3] == doctest::Approx(0.6));              // slowest: F(Mdn) = 3/5
  CHECK(w[1] == doctest::Approx(0.6 - 0.2 + 1.0));  // fastest: F = 1/5

  std::vector<double> big;
  for (int k = 1; k <= 1001; ++k) big.push_back(k);
  const auto wb = fz::intensification(big);
  CHECK(wb[500] == 1.0);
  CHECK(wb[1000] == doctest::Approx(0.5).epsilon(1e-3));
  CHECK(wb[0] == doctest::Approx(1.5).epsilon(1e-3));
  for (double x : wb) {
    CHECK(x > 0.0);
    CHECK(x < 2.0);
  }

  const std::vector<double> holes = {kNaN, 100, 300, 200};
  const auto wh = fz::intensification(holes);
  CHECK(wh[0] == 1.0);
  CHECK(wh[3] == 1.0);

  firt::WarningCapture capture;
  const std::vector<double> lonely = {kNaN, 100};
  const auto wl = fz::intensification(lonely);
  CHECK(wl[1] == 1.0);
  CHECK(capture.messages().size() == 1);
}

TEST_CASE("trim times") {
  auto t = column({100, 100, 100, 100});
  CHECK(fz::trim_times(t).values.isApprox(t.values));

  // With five points no value can be more than (n - 1) / sqrt(n) < 2 sample
  // standard deviations from the mean, so nothing is removed.
  t = column({100, 110, 105, 95, 5000});
  CHECK(!fz::trim_times(t).values.hasNaN());

  t = column({100, 110, 105, 95, 102, 98, 101, 99, 103, 5000});
  const auto out = fz::trim_times(t);
  CHECK(std::isnan(out.values(9, 0)));
  for (int i = 0; i < 9; ++i) CHECK(out.values(i, 0) == t.values(i, 0));

  t = column({kNaN, kNaN, kNaN});
  CHECK(fz::trim_times(t).values.array().isNaN().all());
}

TEST_CASE("uniform cell distribution chains to the expected number") {
  const double uniform[] = {0.25, 0.25, 0.25, 0.25};
  const auto mp = fz::mode_and_precision(uniform);
  const auto b = fz::bounds(mp.c, mp.s, fz::membership_mean(mp.c, mp.s));
  const auto f = firt::scale_affine(firt::Fptfn(b.l, b.c, b.r, 1.0), 1.0, 3.0);
  CHECK(f.l() == doctest::Approx(1.454).epsilon(1e-3));
  CHECK(f.c() == doctest::Approx(2.5));
  CHECK(f.r() == doctest::Approx(3.546).epsilon(1e-3));
}

TEST_CASE("fuzzify_all invariants and switches") {
  const auto tree = firt::TreeSpec::builtin("fig3-linear");
  const auto cfg = firt::simulate::default_config(tree, 80, 8, 17);
  auto sim = firt::simulate::simulate(cfg);
  sim.ratings.values(0, 0) = firt::RatingMatrix::kMissing;
  sim.times.values(0, 0) = kNaN;
  const auto fit = firt::irtree::fit(tree, sim.ratings);
  const auto data = fz::fuzzify_all(fit, tree, sim.ratings, sim.times);

  CHECK(std::isnan(data.C(0, 0)));
  CHECK(std::isnan(data.W(0, 0)));
  for (int i = 0; i < 80; ++i)
    for (int j = 0; j < 8; ++j) {
      if (sim.ratings.missing(i, j)) continue;
      const bool ok = (1.0 <= data.L(i, j) && data.L(i, j) < data.C(i, j) && data.C(i, j) < data.R(i, j) &&
                       data.R(i, j) <= 4.0) ||
                      data.degenerate(i, j);
      CHECK(ok);
      CHECK(data.W(i, j) > 0.0);
      CHECK(data.W(i, j) < 2.0);
    }
  REQUIRE(data.composite.size() == 80);
  // Composite is the parameterwise average.
  double l = 0, c = 0, r = 0, w = 0;
  int n = 0;
  for (int j = 0; j < 8; ++j) {
    if (std::isnan(data.C(3, j))) continue;
    l += data.L(3, j);
    c += data.C(3, j);
    r += data.R(3, j);
    w += data.W(3, j);
    ++n;
  }
  CHECK(data.composite[3].l() == doctest::Approx(l / n));
  CHECK(data.composite[3].c() == doctest::Approx(c / n));
  CHECK(data.composite[3].r() == doctest::Approx(r / n));
  CHECK(data.composite[3].omega() == doctest::Approx(w / n));

  fz::FuzzifyOptions ones;
  ones.unit_intensification = true;
  const auto d1 = fz::fuzzify_all(fit, tree, sim.ratings, sim.times, ones);
  for (int i = 0; i < 80; ++i)
    for (int j = 0; j < 8; ++j)
      if (!sim.ratings.missing(i, j)) CHECK(d1.W(i, j) == 1.0);
  CHECK((d1.C.array() == data.C.array() || data.C.array().isNaN()).all());
  CHECK((d1.L.array() == data.L.array() || data.L.array().isNaN()).all());
}

TEST_CASE("identical cells give the common composite") {
  fz::FuzzyDataset d;
  d.C = Eigen::MatrixXd::Constant(2, 3, 2.5);
  d.L = Eigen::MatrixXd::Constant(2, 3, 1.5);
  d.R = Eigen::MatrixXd::Constant(2, 3, 3.0);
  d.W = Eigen::MatrixXd::Constant(2, 3, 0.8);
  d.degenerate = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(2, 3, false);
  fz::build_composites(d);
  REQUIRE(d.composite.size() == 2);
  CHECK(d.composite[0] == firt::Fptfn(1.5, 2.5, 3.0, 0.8));
  CHECK(d.composite[1] == firt::Fptfn(1.5, 2.5, 3.0, 0.8));
}

TEST_CASE("fuzzify_all checks dimensions") {
  const auto tree = firt::TreeSpec::builtin("fig3-linear");
  const auto cfg = firt::simulate::default_config(tree, 30, 4, 2);
  const auto sim = firt::simulate::simulate(cfg);
  const auto fit = firt::irtree::fit(tree, sim.ratings);
  ResponseTimeMatrix short_times;
  short_times.values = sim.times.values.leftCols(3);
  CHECK_THROWS_AS(fz::fuzzify_all(fit, tree, sim.ratings, short_times), firt::InputError);
}
