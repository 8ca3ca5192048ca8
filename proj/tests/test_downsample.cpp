#include <doctest.h>

#include <algorithm>
#include <set>

#include "n2f/downsample.hpp"
#include "n2f/rng.hpp"
#include "support/check.hpp"

using namespace n2f;
using n2f::testing::random_plane;

namespace {

Plane rows(std::vector<std::vector<Real>> r) {
  Plane p(static_cast<int>(r.size()), static_cast<int>(r[0].size()));
  for (int i = 0; i < p.height; ++i)
    for (int j = 0; j < p.width; ++j) p(i, j) = r[i][j];
  return p;
}

// Pixel value = its linear index, so every output pixel names its source.
Plane index_plane(int h, int w) {
  Plane p(h, w);
  for (std::size_t k = 0; k < p.size(); ++k) p.pixels[k] = static_cast<Real>(k);
  return p;
}

std::vector<Real> sorted(std::vector<Real> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<Real> concat(std::initializer_list<const Plane*> planes) {
  std::vector<Real> all;
  for (const Plane* p : planes) all.insert(all.end(), p->pixels.begin(), p->pixels.end());
  return all;
}

const Plane kExample = rows({{1, 2, 3, 4}, {5, 6, 7, 8}});

}  // namespace

TEST_CASE("checkerboard_down on the 2x4 example") {
  const auto h = checkerboard_down(kExample);
  CHECK(h.even_up == rows({{1, 3}, {6, 8}}));
  CHECK(h.odd_up == rows({{2, 4}, {5, 7}}));
  CHECK(h.even_left == rows({{1, 6, 3, 8}}));
  CHECK(h.odd_left == rows({{5, 2, 7, 4}}));
}

TEST_CASE("checkerboard_down of a constant image is constant") {
  const auto h = checkerboard_down(Plane(6, 4, Real(3.5)));
  for (const Plane* p : {&h.even_up, &h.odd_up, &h.even_left, &h.odd_left})
    for (Real v : p->pixels) CHECK(v == Real(3.5));
}

TEST_CASE("checkerboard_down rejects odd sizes") {
  CHECK_THROWS_AS(checkerboard_down(Plane(3, 4)), ShapeError);
  CHECK_THROWS_AS(checkerboard_down(Plane(4, 5)), ShapeError);
}

TEST_CASE("checkerboard_recombine inverts the example") {
  const auto h = checkerboard_down(kExample);
  CHECK(checkerboard_recombine(h.even_up, h.odd_up, Orientation::up) == kExample);
  CHECK(checkerboard_recombine(h.even_left, h.odd_left, Orientation::left) == kExample);
  CHECK(checkerboard_recombine(Plane(2, 3, Real(7)), Plane(2, 3, Real(7)), Orientation::up) == Plane(2, 6, Real(7)));
  CHECK_THROWS_AS(checkerboard_recombine(Plane(2, 3), Plane(2, 2), Orientation::up), ShapeError);
  CHECK_THROWS_AS(checkerboard_recombine(Plane(3, 2), Plane(3, 2), Orientation::up), ShapeError);
}

TEST_CASE("checkerboard round trip and conservation on random images") {
  Philox dims(2024, 1);
  for (std::uint64_t t = 0; t < 100; ++t) {
    const auto b = dims.block(t);
    const int h = 2 * (1 + static_cast<int>(b[0] % 16));
    const int w = 2 * (1 + static_cast<int>(b[1] % 16));
    const Plane x = random_plane(h, w, 500 + t, -50.0, 300.0);
    const auto halves = checkerboard_down(x);
    REQUIRE(checkerboard_recombine(halves.even_up, halves.odd_up, Orientation::up) == x);
    REQUIRE(checkerboard_recombine(halves.even_left, halves.odd_left, Orientation::left) == x);
    REQUIRE(sorted(concat({&halves.even_up, &halves.odd_up})) == sorted(x.pixels));
    REQUIRE(sorted(concat({&halves.even_left, &halves.odd_left})) == sorted(x.pixels));
    const auto q = quad_down(x);
    REQUIRE(sorted(concat({&q.tl, &q.tr, &q.bl, &q.br})) == sorted(x.pixels));
  }
}

TEST_CASE("checkerboard parity classes") {
  const int h = 8, w = 10;
  const auto halves = checkerboard_down(index_plane(h, w));
  auto parity = [w](Real v) {
    const int k = static_cast<int>(v);
    return (k / w + k % w) % 2;
  };
  for (const Plane* p : {&halves.even_up, &halves.even_left})
    for (Real v : p->pixels) CHECK(parity(v) == 0);
  for (const Plane* p : {&halves.odd_up, &halves.odd_left})
    for (Real v : p->pixels) CHECK(parity(v) == 1);
}

TEST_CASE("pair inputs and targets come from disjoint pixels") {
  for (Scheme scheme : {Scheme::checkerboard, Scheme::quad}) {
    for (const auto& pair : make_training_pairs(index_plane(6, 8), scheme)) {
      const std::set<Real> in(pair.input.pixels.begin(), pair.input.pixels.end());
      for (Real v : pair.target.pixels) CHECK(in.count(v) == 0);
    }
  }
}

TEST_CASE("quad_down") {
  const auto q = quad_down(rows({{1, 2}, {3, 4}}));
  CHECK(q.tl == rows({{1}}));
  CHECK(q.tr == rows({{2}}));
  CHECK(q.bl == rows({{3}}));
  CHECK(q.br == rows({{4}}));
  const auto c = quad_down(Plane(4, 6, Real(-2)));
  for (const Plane* p : {&c.tl, &c.tr, &c.bl, &c.br}) {
    CHECK(p->height == 2);
    CHECK(p->width == 3);
    for (Real v : p->pixels) CHECK(v == Real(-2));
  }
  CHECK_THROWS_AS(quad_down(Plane(3, 2)), ShapeError);
}

TEST_CASE("make_training_pairs: checkerboard order and contents") {
  const auto pairs = make_training_pairs(kExample, Scheme::checkerboard);
  REQUIRE(pairs.size() == 4);
  const auto h = checkerboard_down(kExample);
  CHECK(pairs[0].input == h.even_up);
  CHECK(pairs[0].target == h.odd_up);
  CHECK(pairs[1].input == h.odd_up);
  CHECK(pairs[1].target == h.even_up);
  CHECK(pairs[2].input == h.even_left);
  CHECK(pairs[2].target == h.odd_left);
  CHECK(pairs[3].input == h.odd_left);
  CHECK(pairs[3].target == h.even_left);
  CHECK(pairs[0].orientation == Orientation::up);
  CHECK(pairs[2].orientation == Orientation::left);
  CHECK(pairs[0].tag == PairTag::even_to_odd);
  CHECK(pairs[1].tag == PairTag::odd_to_even);
  for (const auto& p : pairs) CHECK(p.input.same_shape(p.target));
}

TEST_CASE("make_training_pairs crops odd sizes") {
  const auto pairs = make_training_pairs(random_plane(5, 5, 3), Scheme::checkerboard);
  CHECK(pairs[0].input.height == 4);
  CHECK(pairs[0].input.width == 2);
  CHECK(pairs[2].input.height == 2);
  CHECK(pairs[2].input.width == 4);
  const auto quad = make_training_pairs(random_plane(7, 4, 3), Scheme::quad);
  CHECK(quad[0].input.height == 3);
  CHECK(quad[0].input.width == 2);
  CHECK_THROWS_AS(make_training_pairs(Plane(1, 4), Scheme::checkerboard), ShapeError);
}

TEST_CASE("make_training_pairs: quad order") {
  const auto pairs = make_training_pairs(rows({{1, 2}, {3, 4}}), Scheme::quad);
  REQUIRE(pairs.size() == 4);
  CHECK(pairs[0].input == rows({{1}}));
  CHECK(pairs[0].target == rows({{2}}));
  CHECK(pairs[1].input == rows({{2}}));
  CHECK(pairs[1].target == rows({{1}}));
  CHECK(pairs[2].input == rows({{1}}));
  CHECK(pairs[2].target == rows({{3}}));
  CHECK(pairs[3].input == rows({{3}}));
  CHECK(pairs[3].target == rows({{1}}));
}

TEST_CASE("make_exact_pairs") {
  const Plane noisy = random_plane(4, 4, 77, -20.0, 20.0);
  SUBCASE("constant clean image leaves the pairs unchanged") {
    const auto exact = make_exact_pairs(noisy, Plane(4, 4, Real(9)));
    const auto normal = make_training_pairs(noisy, Scheme::checkerboard);
    for (int k = 0; k < 4; ++k) {
      CHECK(exact[k].input == normal[k].input);
      CHECK(exact[k].target == normal[k].target);
    }
  }
  SUBCASE("zero noise turns every target into its input") {
    for (const auto& p : make_exact_pairs(noisy, noisy)) CHECK(p.target == p.input);
  }
  SUBCASE("hand-checked 4x4 instance") {
    // x = s + n with n = 100 * index; x_odd - s_odd + s_even = n_odd + s_even.
    const Plane s = random_plane(4, 4, 78, 0.0, 1.0);
    Plane x = s;
    for (std::size_t k = 0; k < x.size(); ++k) x.pixels[k] += static_cast<Real>(100 * k);
    const auto pairs = make_exact_pairs(x, s);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) {
        const int odd_col = 2 * j + (i + 1) % 2;
        const int even_col = 2 * j + i % 2;
        const Real expect = x(i, odd_col) - s(i, odd_col) + s(i, even_col);
        CHECK(pairs[0].target(i, j) == doctest::Approx(expect).epsilon(1e-6));
        const Real back = x(i, even_col) - s(i, even_col) + s(i, odd_col);
        CHECK(pairs[1].target(i, j) == doctest::Approx(back).epsilon(1e-6));
      }
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 4; ++j) {
        const int odd_row = 2 * i + (j + 1) % 2;
        const int even_row = 2 * i + j % 2;
        CHECK(pairs[2].target(i, j) ==
              doctest::Approx(x(odd_row, j) - s(odd_row, j) + s(even_row, j)).epsilon(1e-6));
        CHECK(pairs[3].target(i, j) ==
              doctest::Approx(x(even_row, j) - s(even_row, j) + s(odd_row, j)).epsilon(1e-6));
      }
  }
  CHECK_THROWS_AS(make_exact_pairs(noisy, Plane(4, 6)), ShapeError);
}
