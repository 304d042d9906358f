#include "catch_amalgamated.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gadoa/error.hpp"
#include "gadoa/room.hpp"

using namespace gadoa;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

RoomSpec room_of(double lx, double ly, double lz, double t60) {
  RoomSpec r;
  r.dims = {lx, ly, lz};
  r.t60 = t60;
  return r;
}

std::size_t first_nonzero(const std::vector<double>& h) {
  std::size_t i = 0;
  while (i < h.size() && h[i] == 0.0) ++i;
  return i;
}

// Time at which the Schroeder backward integral first falls `db` below its
// start.
double decay_time(const std::vector<double>& h, double fs, double db) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (std::size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  const double floor = edc[0] * std::pow(10.0, -db / 10.0);
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (edc[i] < floor) return static_cast<double>(i) / fs;
  }
  return static_cast<double>(h.size()) / fs;
}

}  // namespace

TEST_CASE("room validation", "[room]") {
  CHECK_NOTHROW(room_of(9, 5, 3, 0.5).validate());
  CHECK_THROWS_AS(room_of(0, 5, 3, 0.5).validate(), Error);
  CHECK_THROWS_AS(room_of(9, 5, 3, 0.04).validate(), Error);
  CHECK_THROWS_AS(room_of(9, 5, 3, 2.5).validate(), Error);
  CHECK_NOTHROW(room_of(9, 5, 3, 2.0).validate());
}

TEST_CASE("sabine absorption", "[room]") {
  const auto r = room_of(9, 5, 3, 0.5);
  // V = 135, S = 174.
  CHECK_THAT(sabine_absorption(r), WithinRel(0.1611 * 135.0 / (174.0 * 0.5), 1e-12));
  CHECK_THAT(sabine_reflection(r), WithinRel(std::sqrt(1.0 - 0.1611 * 135.0 / 87.0), 1e-12));
  // A large, very dead room would need alpha > 1; the value is clipped.
  const double a = sabine_absorption(room_of(10, 10, 10, 0.05));
  CHECK(a < 1.0);
  CHECK(a > 0.99);
}

TEST_CASE("rir length covers the decay", "[room]") {
  const auto r = room_of(6, 4, 3, 0.4);
  const auto h = simulate_rir(r, {1, 1, 1.5}, {3, 2, 1.5});
  CHECK(h.size() == static_cast<std::size_t>(std::ceil(1.1 * 0.4 * 8000.0)) + 2);
  CHECK(static_cast<double>(h.size()) >= 0.4 * 8000.0);
}

TEST_CASE("anechoic rir has one tap", "[room]") {
  const auto r = room_of(9, 5, 3, 0.5);
  RirOptions opts;
  opts.reflection = 0.0;
  opts.placement = TapPlacement::kNearest;
  // 1.715 m at fs = 8000, c = 343 is exactly 40 samples.
  const Point3 src{2.0, 2.0, 1.5}, mic{2.0 + 1.715, 2.0, 1.5};
  const auto h = simulate_rir(r, src, mic, opts);
  std::size_t nonzero = 0;
  for (double v : h) nonzero += v != 0.0;
  CHECK(nonzero == 1);
  CHECK(first_nonzero(h) == 40);
  CHECK_THAT(h[40], WithinRel(1.0 / (4.0 * std::numbers::pi * 1.715), 1e-9));

  // Amplitude falls as 1/distance.
  const auto far = simulate_rir(r, src, {2.0 + 3.43, 2.0, 1.5}, opts);
  CHECK_THAT(far[80] / h[40], WithinRel(0.5, 1e-9));
}

TEST_CASE("linear taps split the direct path", "[room]") {
  const auto r = room_of(9, 5, 3, 0.5);
  RirOptions opts;
  opts.reflection = 0.0;
  const double d = 1.5;  // 34.985... samples
  const auto h = simulate_rir(r, {2, 2, 1.5}, {2 + d, 2, 1.5}, opts);
  const double t = d * 8000.0 / 343.0;
  const auto i0 = static_cast<std::size_t>(t);
  const double amp = 1.0 / (4.0 * std::numbers::pi * d);
  CHECK(first_nonzero(h) == i0);
  CHECK_THAT(h[i0], WithinRel(amp * (1.0 - (t - std::floor(t))), 1e-9));
  CHECK_THAT(h[i0 + 1], WithinRel(amp * (t - std::floor(t)), 1e-9));
}

TEST_CASE("max order zero keeps only the direct path", "[room]") {
  RirOptions opts;
  opts.max_order = 0;
  opts.placement = TapPlacement::kNearest;
  const auto h = simulate_rir(room_of(7, 5, 3, 0.8), {1, 1, 1}, {4, 3, 2}, opts);
  std::size_t nonzero = 0;
  for (double v : h) nonzero += v != 0.0;
  CHECK(nonzero == 1);
}

TEST_CASE("direct path delay over random scenes", "[room]") {
  Rng rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const auto r = room_of(8 + 2 * u(rng), 4 + 2 * u(rng), 2.5 + u(rng), 0.13 + 0.87 * u(rng));
    auto inside = [&] {
      return Point3{0.1 + (r.dims.x - 0.2) * u(rng), 0.1 + (r.dims.y - 0.2) * u(rng),
                    0.1 + (r.dims.z - 0.2) * u(rng)};
    };
    const Point3 src = inside(), mic = inside();
    RirOptions opts;
    opts.coverage = 0.2;  // only the head of the response matters here
    const auto h = simulate_rir(r, src, mic, opts);
    const double expected = std::round(distance(src, mic) * 8000.0 / 343.0);
    if (expected >= static_cast<double>(h.size())) continue;
    const auto first = static_cast<double>(first_nonzero(h));
    CHECK(std::abs(first - expected) <= 1.0);
  }
}

TEST_CASE("energy decay matches the configured T60", "[room]") {
  struct Case {
    RoomSpec room;
    Point3 src, mic;
  };
  const std::vector<Case> cases = {
      {room_of(9, 5, 3, 0.3), {2.3, 1.7, 1.4}, {6.1, 3.2, 1.6}},
      {room_of(9, 5, 3, 0.5), {2.3, 1.7, 1.4}, {6.1, 3.2, 1.6}},
      {room_of(9, 5, 3, 0.8), {1.1, 4.2, 2.5}, {7.5, 0.8, 0.6}},
      {room_of(4, 3.5, 2.6, 0.2), {1.0, 1.0, 1.2}, {3.1, 2.4, 1.5}},
      {room_of(10, 6, 3.5, 0.13), {3.0, 2.0, 1.0}, {6.5, 4.0, 2.0}},
      {room_of(6, 6, 3, 1.0), {1.5, 4.5, 1.5}, {4.0, 2.0, 1.0}},
  };
  for (const auto& c : cases) {
    RirOptions opts;
    opts.coverage = 3.0;
    const auto h = simulate_rir(c.room, c.src, c.mic, opts);
    const double direct = distance(c.src, c.mic) / c.room.c;
    const double measured = decay_time(h, c.room.fs, 60.0) - direct;
    INFO("T60 " << c.room.t60 << " measured " << measured);
    CHECK(std::abs(measured - c.room.t60) <= 0.15 * c.room.t60);
  }
}

TEST_CASE("calibrated reflection is cached and monotone", "[room]") {
  const double short_t = wall_reflection(room_of(7, 5, 3, 0.3));
  const double long_t = wall_reflection(room_of(7, 5, 3, 0.9));
  CHECK(short_t < long_t);
  CHECK(long_t < 1.0);
  CHECK(wall_reflection(room_of(7, 5, 3, 0.3)) == short_t);
}

TEST_CASE("rir placement errors", "[room]") {
  const auto r = room_of(5, 4, 3, 0.5);
  try {
    simulate_rir(r, {6, 1, 1}, {1, 1, 1});
    FAIL("outside source accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kInvalidScene);
  }
  CHECK_THROWS_AS(simulate_rir(r, {1, 1, 1}, {1, 1, 3}), Error);
  CHECK_THROWS_AS(simulate_rir(r, {1, 1, 1}, {1, 1, 1}), Error);
}

TEST_CASE("rir is reciprocal", "[room]") {
  const auto r = room_of(6, 5, 3, 0.4);
  const auto a = simulate_rir(r, {1.2, 2.0, 1.1}, {4.0, 3.1, 1.7});
  const auto b = simulate_rir(r, {4.0, 3.1, 1.7}, {1.2, 2.0, 1.1});
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK_THAT(a[i], WithinAbs(b[i], 1e-12));
}
