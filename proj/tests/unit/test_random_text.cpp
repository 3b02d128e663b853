#include <doctest.h>

#include <set>

#include "haystack/random.hpp"
#include "haystack/text.hpp"
#include "haystack/types.hpp"

using namespace haystack;

TEST_SUITE("random") {
  TEST_CASE("fnv1a64 known vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
  }

  TEST_CASE("counter rng replays from key and counter") {
    CounterRng a(42);
    std::vector<std::uint64_t> first;
    for (int k = 0; k < 10; ++k) first.push_back(a.next());
    CounterRng b(42, 5);
    for (int k = 5; k < 10; ++k) CHECK(b.next() == first[k]);
    CHECK(CounterRng(43).next() != first[0]);
  }

  TEST_CASE("below stays in range and covers it") {
    CounterRng rng(7);
    std::set<std::uint64_t> seen;
    for (int k = 0; k < 2000; ++k) {
      const auto v = rng.below(6);
      REQUIRE(v < 6);
      seen.insert(v);
    }
    CHECK(seen.size() == 6);
    CHECK(rng.below(1) == 0);
  }

  TEST_CASE("uniform and gaussian moments") {
    CounterRng rng(99);
    double su = 0, sg = 0, sg2 = 0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
      const double u = rng.uniform();
      REQUIRE(u >= 0.0);
      REQUIRE(u < 1.0);
      su += u;
      const double g = rng.gaussian();
      sg += g;
      sg2 += g * g;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.02));
    CHECK(std::abs(sg / n) < 0.03);
    CHECK(sg2 / n == doctest::Approx(1.0).epsilon(0.05));
  }

  TEST_CASE("hash_all is order sensitive") {
    CHECK(hash_all(1ULL, std::string_view("a"), std::string_view("b")) !=
          hash_all(1ULL, std::string_view("b"), std::string_view("a")));
    CHECK(hash_all(1ULL, 2ULL) == hash_combine(1ULL, 2ULL));
  }

  TEST_CASE("positions enumerate the grid row-major") {
    const auto ps = all_positions(2);
    REQUIRE(ps.size() == 9);
    CHECK(ps.front() == Position{0, 0});
    CHECK(ps[1] == Position{0, 1});
    CHECK(ps.back() == Position{2, 2});
    CHECK(Position{3, 4}.length() == 8);
  }

  TEST_CASE("enum names round trip") {
    for (auto n : kAllNeedles) CHECK(needle_from_string(to_string(n)) == n);
    for (auto h : kAllHays) CHECK(hay_from_string(to_string(h)) == h);
    CHECK_THROWS_AS(needle_from_string("bogus"), std::invalid_argument);
  }
}

TEST_SUITE("text") {
  TEST_CASE("utf8 round trip and offsets") {
    const std::string s = "Zoë in São Paulo 😀!";
    const auto cps = text::decode_utf8(s);
    CHECK(text::encode_utf8(cps) == s);
    CHECK(text::code_point_count(s) == cps.size());
    CHECK(text::code_point_count("Zoë") == 3);
    CHECK(text::byte_offset("Zoë x", 3) == 4);
    CHECK(text::byte_offset(s, cps.size()) == s.size());
    CHECK(text::slice(s, 7, 16) == "São Paulo");
    CHECK(text::slice(s, 17, 18) == "😀");
  }

  TEST_CASE("whitespace normalization") {
    CHECK(text::normalize_whitespace("  a \t\n b  c ") == "a b c");
    CHECK(text::normalize_whitespace("") == "");
    CHECK(text::trim("  x y  ") == "x y");
  }

  TEST_CASE("count_word is whole-word and case-sensitive") {
    CHECK(text::count_word("not nothing not. knot Not", "not") == 2);
    CHECK(text::count_word("and sand andes, and", "and") == 2);
  }

  TEST_CASE("join") {
    CHECK(text::join({"a", "b", "c"}, " ") == "a b c");
    CHECK(text::join({}, " ").empty());
  }
}
