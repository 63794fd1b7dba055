#include "doctest.h"

#include <random>
#include <set>

#include "fracpile/torus.hpp"

using namespace fracpile;

namespace {
Coords make(std::initializer_list<int> v) {
  Coords c(int(v.size()));
  int i = 0;
  for (int x : v) c[i++] = x;
  return c;
}
}  // namespace

TEST_CASE("spec invariants") {
  CHECK_THROWS_AS(LatticeSpec(0, 4), std::invalid_argument);
  CHECK_THROWS_AS(LatticeSpec(2, 1), std::invalid_argument);
  CHECK(LatticeSpec(2, 8).sites() == 64);
  CHECK(LatticeSpec(3, 4).sites() == 64);
}

TEST_CASE("canonical window examples") {
  CHECK(canonical(make({5}), LatticeSpec(1, 4))[0] == 1);
  CHECK(canonical(make({-3}), LatticeSpec(1, 4))[0] == 1);
  Coords z = canonical(make({0, 0}), LatticeSpec(2, 8));
  CHECK(z[0] == 0);
  CHECK(z[1] == 0);
  // window endpoints: even n -> [-n/2, n/2 - 1]
  CHECK(canonical(make({2}), LatticeSpec(1, 4))[0] == -2);
  CHECK(canonical(make({3}), LatticeSpec(1, 4))[0] == -1);
  // odd n -> symmetric window
  CHECK(canonical(make({3}), LatticeSpec(1, 5))[0] == -2);
  CHECK(canonical(make({2}), LatticeSpec(1, 5))[0] == 2);
  CHECK_THROWS_AS(canonical(make({1, 2}), LatticeSpec(1, 4)), std::invalid_argument);
}

TEST_CASE("canonical is idempotent on random vectors") {
  std::mt19937 gen(7);
  std::uniform_int_distribution<int> coord(-1000, 1000);
  for (int d : {1, 2, 3}) {
    for (int n : {2, 3, 8, 17}) {
      LatticeSpec spec(d, n);
      for (int rep = 0; rep < 200; ++rep) {
        Coords p(d);
        for (int j = 0; j < d; ++j) p[j] = coord(gen);
        Coords c1 = canonical(p, spec);
        Coords c2 = canonical(c1, spec);
        CHECK((c1 == c2).all());
        for (int j = 0; j < d; ++j) {
          CHECK(((c1[j] - p[j]) % n + n) % n == 0);
          CHECK(c1[j] >= -(n / 2));
          CHECK(c1[j] <= (n + 1) / 2 - 1);
        }
      }
    }
  }
}

TEST_CASE("flat index is a bijection compatible with site_at") {
  for (int d : {1, 2, 3}) {
    for (int n : {2, 5, 8}) {
      LatticeSpec spec(d, n);
      std::set<std::int64_t> seen;
      for_each_site(spec, [&](std::int64_t i, const Coords& c) {
        CHECK(flat_index(c, spec) == i);
        CHECK((site_at(i, spec) == c).all());
        seen.insert(i);
      });
      CHECK(std::int64_t(seen.size()) == spec.sites());
      CHECK(*seen.begin() == 0);
      CHECK(*seen.rbegin() == spec.sites() - 1);
    }
  }
}

TEST_CASE("torus_diff identities") {
  std::mt19937 gen(11);
  LatticeSpec spec(2, 8);
  std::uniform_int_distribution<int> coord(-20, 20);
  for (int rep = 0; rep < 200; ++rep) {
    Coords x(2), y(2);
    for (int j = 0; j < 2; ++j) {
      x[j] = coord(gen);
      y[j] = coord(gen);
    }
    Coords d = torus_diff(x, y, spec);
    CHECK((torus_diff(x, x, spec) == 0).all());
    for (int j = 0; j < 2; ++j) CHECK(((d[j] + y[j] - x[j]) % 8 + 8) % 8 == 0);
    Coords zero = Coords::Zero(2);
    Coords anti = torus_diff(zero, y, spec);
    CHECK((anti == canonical(Coords(-y), spec)).all());
  }
  CHECK(torus_diff(make({1}), make({3}), LatticeSpec(1, 4))[0] == -2);
  CHECK_THROWS_AS(torus_diff(make({1}), make({1, 2}), LatticeSpec(1, 4)),
                  std::invalid_argument);
}

TEST_CASE("frequencies enumerate every mode once") {
  CHECK(frequencies(LatticeSpec(2, 2)).size() == 4);
  auto freq = frequencies(LatticeSpec(1, 2));
  REQUIRE(freq.size() == 2);
  CHECK(freq[0][0] == 0);   // zero mode always present, index 0
  CHECK(freq[1][0] == -1);  // window representative of the odd class
  auto freq3 = frequencies(LatticeSpec(3, 3));
  CHECK(freq3.size() == 27);
}
