#include <random>
#include <set>

#include "doctest.h"
#include "soorl/oomdp.hpp"

using namespace soorl;

namespace {

ObjectState box(int x, int y, int w, int h) { return {0, x, y, w, h, true}; }

ObjectState random_box(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pos(0, 12), ext(1, 4), cls(0, 2);
  return {cls(rng), pos(rng), pos(rng), ext(rng), ext(rng), true};
}

bool intervals_meet(int a0, int a1, int b0, int b1) {
  return std::max(a0, b0) <= std::min(a1, b1);
}

}  // namespace

TEST_CASE("bounding box overlap uses closed intervals") {
  CHECK(bounding_box_overlap(box(0, 0, 2, 2), box(1, 1, 2, 2)));
  CHECK_FALSE(bounding_box_overlap(box(0, 0, 1, 1), box(5, 5, 1, 1)));
  CHECK(bounding_box_overlap(box(0, 0, 2, 2), box(2, 0, 2, 2)));
  CHECK(bounding_box_overlap(box(0, 0, 2, 2), box(2, 2, 1, 1)));
  CHECK_FALSE(bounding_box_overlap(box(0, 0, 2, 2), box(3, 0, 1, 1)));
}

TEST_CASE("bounding box overlap is symmetric and matches interval arithmetic") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20000; ++i) {
    const ObjectState a = random_box(rng), b = random_box(rng);
    const bool expected = intervals_meet(a.x, a.x + a.w, b.x, b.x + b.w) &&
                          intervals_meet(a.y, a.y + a.h, b.y, b.y + b.h);
    REQUIRE(bounding_box_overlap(a, b) == expected);
    REQUIRE(bounding_box_overlap(a, b) == bounding_box_overlap(b, a));
  }
}

TEST_CASE("detect_interactions examples") {
  FactoredState s;
  CHECK(detect_interactions(s).empty());

  s.objects = {box(0, 0, 2, 2), box(1, 1, 2, 2)};
  auto pairs = detect_interactions(s);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].first == 0);
  CHECK(pairs[0].second == 1);

  s.objects = {box(0, 0, 6, 2), box(0, 0, 1, 1), box(5, 0, 1, 1)};
  pairs = detect_interactions(s);
  REQUIRE(pairs.size() == 2);
  CHECK((pairs[0].first == 0 && pairs[0].second == 1));
  CHECK((pairs[1].first == 0 && pairs[1].second == 2));
}

TEST_CASE("detect_interactions skips dead objects") {
  FactoredState s;
  s.objects = {box(0, 0, 2, 2), box(1, 1, 2, 2)};
  s.objects[1].alive = false;
  CHECK(detect_interactions(s).empty());
}

TEST_CASE("detect_interactions agrees with a brute-force scan") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> count(0, 10), coin(0, 9);
  for (int trial = 0; trial < 2000; ++trial) {
    FactoredState s;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      ObjectState o = random_box(rng);
      o.alive = coin(rng) != 0;
      s.objects.push_back(o);
    }
    std::vector<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t i = 0; i < s.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < s.objects.size(); ++j) {
        const auto& a = s.objects[i];
        const auto& b = s.objects[j];
        if (a.alive && b.alive && intervals_meet(a.x, a.x + a.w, b.x, b.x + b.w) &&
            intervals_meet(a.y, a.y + a.h, b.y, b.y + b.h)) {
          expected.emplace_back(i, j);
        }
      }
    }
    const auto got = detect_interactions(s);
    REQUIRE(got.size() == expected.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(static_cast<std::size_t>(got[k].first) == expected[k].first);
      CHECK(static_cast<std::size_t>(got[k].second) == expected[k].second);
    }
  }
}

TEST_CASE("state_key examples") {
  FactoredState s;
  s.objects = {box(1, 2, 3, 4), box(5, 6, 1, 1)};
  s.step = 3;
  FactoredState copy = s;
  CHECK(state_key(s) == state_key(copy));

  FactoredState shifted = s;
  shifted.objects[0].x += 1;
  CHECK_FALSE(state_key(s) == state_key(shifted));

  FactoredState later = s;
  later.step = 99;
  CHECK(state_key(s) == state_key(later));
}

TEST_CASE("state_key equality matches field equality") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> count(0, 3), small(0, 2), coin(0, 1);
  auto random_state = [&] {
    FactoredState s;
    const int n = count(rng);
    for (int i = 0; i < n; ++i) {
      s.objects.push_back({small(rng), small(rng), small(rng), 1 + small(rng) / 2, 1, coin(rng) == 1});
    }
    s.step = small(rng);
    return s;
  };
  int equal_pairs = 0;
  for (int i = 0; i < 10000; ++i) {
    const FactoredState a = random_state(), b = random_state();
    const bool same = a.objects == b.objects;
    equal_pairs += same;
    REQUIRE((state_key(a) == state_key(b)) == same);
    if (same) REQUIRE(std::hash<StateKey>{}(state_key(a)) == std::hash<StateKey>{}(state_key(b)));
  }
  CHECK(equal_pairs > 0);
}

TEST_CASE("factored state JSON round trip keeps object order") {
  FactoredState s;
  s.step = 12;
  s.objects = {{2, 1, 2, 3, 4, true}, {0, -5, 7, 1, 1, false}, {1, 0, 0, 2, 2, true}};
  const nlohmann::json j = s;
  CHECK(j["step"] == 12);
  CHECK(j["objects"][1]["class"] == 0);
  CHECK(j["objects"][1]["alive"] == false);
  const FactoredState back = j.get<FactoredState>();
  CHECK(back == s);
}
