#include <doctest.h>

#include <cmath>
#include <random>

#include "emfield/exposure_map.hpp"
#include "emfield/synthetic.hpp"

using namespace emfield;

namespace
{

using C = std::complex<double>;

PathLossConfig window_config(double lo, double hi)
{
  PathLossConfig cfg;
  cfg.window = {lo, hi};
  cfg.floor_db = lo;
  return cfg;
}

Scene open_scene(Eigen::Index h, Eigen::Index w, Eigen::Index tr, Eigen::Index tc, double pixel = 1.0,
                 double freq = 5.9e9)
{
  return make_scene(make_grid(h, w, pixel, freq), MaskArray::Zero(h, w), tr, tc);
}

}  // namespace

TEST_CASE("field to level in dB")
{
  const GridSpec g = make_grid(4, 4, 1.0, 1e9);
  PathLossConfig cfg = window_config(-60.0, 20.0);
  cfg.normalize = false;

  SUBCASE("reference magnitude maps to 0 dB")
  {
    const ComplexFieldd e(g, ComplexArray<double>::Constant(4, 4, C(0.6, 0.8)));
    const auto m = field_to_pathloss(e, cfg);
    CHECK(m.unit == MapUnit::decibel);
    CHECK((m.values.abs() <= 1e-15).all());
    PathLossConfig norm_cfg = cfg;
    norm_cfg.normalize = true;
    const auto n = field_to_pathloss(e, norm_cfg);
    CHECK(n.values(2, 2) == doctest::Approx((0.0 + 60.0) / 80.0).epsilon(1e-15));
    CHECK(n.is_normalized());
  }
  SUBCASE("decade rule")
  {
    const ComplexFieldd e(g, ComplexArray<double>::Constant(4, 4, C(0.0, -10.0)));
    CHECK(field_to_pathloss(e, cfg).values(1, 3) == doctest::Approx(20.0).epsilon(1e-15));
  }
  SUBCASE("reference level offset")
  {
    PathLossConfig shifted = cfg;
    shifted.ref_db = -40.0;  // reference magnitude 0.01
    const ComplexFieldd e(g, ComplexArray<double>::Constant(4, 4, C(0.01, 0.0)));
    CHECK(field_to_pathloss(e, shifted).values(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("zero magnitude clamps to the floor")
  {
    ComplexFieldd e(g, ComplexArray<double>::Constant(4, 4, C(1.0, 0.0)));
    e.values(2, 1) = 0.0;
    e.values(0, 3) = 1e-300;
    const auto m = field_to_pathloss(e, cfg);
    CHECK(m.values(2, 1) == -60.0);
    CHECK(m.values(0, 3) == -60.0);
    PathLossConfig norm_cfg = cfg;
    norm_cfg.normalize = true;
    CHECK(field_to_pathloss(e, norm_cfg).values(2, 1) == 0.0);
  }
  SUBCASE("invalid windows are rejected")
  {
    const auto e = ComplexFieldd::Zero(g);
    PathLossConfig bad = cfg;
    bad.floor_db = -50.0;
    CHECK_THROWS_AS(field_to_pathloss(e, bad), ValidationError);
    bad = cfg;
    bad.window = {10.0, 10.0};
    CHECK_THROWS_AS(field_to_pathloss(e, bad), ValidationError);
  }
}

TEST_CASE("path loss is monotone in magnitude and normalized output stays in [0, 1]")
{
  std::mt19937_64 rng(51);
  std::lognormal_distribution<double> mag(0.0, 4.0);
  std::uniform_real_distribution<double> phase(0.0, 6.283185307179586);
  const GridSpec g = make_grid(12, 9, 1.0, 1e9);
  for (int trial = 0; trial < 40; ++trial)
  {
    ComplexFieldd a = ComplexFieldd::Zero(g), b = ComplexFieldd::Zero(g);
    for (Eigen::Index i = 0; i < a.values.size(); ++i)
    {
      const double m1 = mag(rng), m2 = mag(rng);
      a.values.data()[i] = std::polar(std::max(m1, m2), phase(rng));
      b.values.data()[i] = std::polar(std::min(m1, m2), phase(rng));
    }
    b.values(0, 0) = 0.0;
    PathLossConfig cfg = window_config(-30.0 - trial, 10.0 + trial);
    cfg.floor_db = cfg.window.min_db - 15.0;
    cfg.normalize = false;
    const auto la = field_to_pathloss(a, cfg);
    const auto lb = field_to_pathloss(b, cfg);
    CHECK((la.values >= lb.values).all());
    cfg.normalize = true;
    CHECK(field_to_pathloss(a, cfg).is_normalized());
    CHECK(field_to_pathloss(b, cfg).is_normalized());
  }
}

TEST_CASE("log-distance baseline")
{
  const Scene s = open_scene(32, 32, 5, 7, 0.5);
  const double n = 2.7, d0 = 1.5, pl0 = 38.0;
  const auto m = baseline_log_distance(s, n, d0, pl0);
  CHECK(m.unit == MapUnit::decibel);
  for (Eigen::Index r = 0; r < 32; ++r)
  {
    for (Eigen::Index c = 0; c < 32; ++c)
    {
      const double dx = 0.5 * double(r - 5), dy = 0.5 * double(c - 7);
      const double d = std::max(std::sqrt(dx * dx + dy * dy), d0);
      CHECK(m.values(r, c) == pl0 + 10.0 * n * std::log10(d / d0));
    }
  }
  CHECK(m.values(5, 7) == pl0);
  // n = 2 at ten times the reference distance adds 20 dB
  const auto m2 = baseline_log_distance(open_scene(40, 40, 0, 0, 1.0), 2.0, 3.0, 40.0);
  CHECK(m2.values(0, 30) == doctest::Approx(60.0).epsilon(1e-14));
  CHECK(m2.values(3, 0) == doctest::Approx(40.0).epsilon(1e-15));
  CHECK_THROWS_AS(baseline_log_distance(s, 0.0, 1.0, 0.0), ValidationError);
  CHECK_THROWS_AS(baseline_log_distance(s, 2.0, 0.0, 0.0), ValidationError);
}

TEST_CASE("free-space baseline")
{
  const Scene s = open_scene(201, 5, 0, 2, 1.0, 5.9e9);
  const auto m = baseline_free_space(s);
  // 20 log10(4 pi 100 5.9e9 / 299792458), evaluated separately
  CHECK(m.values(100, 2) == doctest::Approx(87.86482345472626).epsilon(1e-13));
  CHECK(m.values(40, 2) - m.values(20, 2) == doctest::Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
  CHECK(m.values(40, 2) - m.values(20, 2) == doctest::Approx(6.0206).epsilon(1e-5));
  CHECK(std::isfinite(m.values(0, 2)));
  CHECK(m.values(0, 2) == doctest::Approx(20.0 * std::log10(4.0 * M_PI * 0.5 * 5.9e9 / 299792458.0)));
}

TEST_CASE("baselines are radially symmetric")
{
  const Scene s = open_scene(25, 25, 12, 12, 0.8, 3.5e9);
  const auto fs = baseline_free_space(s);
  const auto ld = baseline_log_distance(s, 3.1, 1.0, 30.0);
  for (const auto *m : {&fs, &ld})
  {
    CHECK(m->values(12, 17) == m->values(7, 12));
    CHECK(m->values(15, 16) == m->values(8, 9));   // (3, 4) and (-4, -3)
    CHECK(m->values(12, 17) == m->values(16, 15));  // 5 = |(4, 3)|
  }
}

TEST_CASE("dB window normalization")
{
  const GridSpec g = make_grid(2, 3, 1.0, 1e9);
  GridArray<double> v(2, 3);
  v << 0.0, 50.0, 100.0, 150.0, -10.0, 75.0;
  const RealMapd db(g, v, MapUnit::decibel);
  const auto loss = normalize_db(db, {0.0, 100.0}, false);
  CHECK(loss.values(0, 1) == 0.5);
  CHECK(loss.values(1, 0) == 1.0);
  CHECK(loss.values(1, 1) == 0.0);
  const auto gain = normalize_db(db, {-100.0, 0.0}, true);
  CHECK(gain.values(0, 0) == 1.0);
  CHECK(gain.values(0, 2) == 0.0);
  CHECK(gain.values(1, 2) == 0.25);
  CHECK(gain.is_normalized());
  CHECK_THROWS_AS(normalize_db(loss, {0.0, 1.0}, false), ValidationError);
}
