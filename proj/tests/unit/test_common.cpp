#include "doctest.h"

#include <string>

#include "subtext/common.hpp"

using namespace subtext;

TEST_CASE("utf8 round trip") {
  const std::string samples[] = {"", "abc", "नमस्ते दुनिया", "தமிழ்", "a▁b",
                                 "mixed नमस्ते latin 123"};
  for (const auto& s : samples) {
    CHECK(utf8_encode(utf8_decode(s)) == s);
  }
}

TEST_CASE("utf8 rejects malformed input with offset") {
  CHECK_THROWS_WITH_AS(utf8_decode("ab\xFFzz"), doctest::Contains("offset 2"),
                       Error);
  // truncated 3-byte sequence
  CHECK_THROWS_AS(utf8_decode(std::string("\xE0\xA4")), Error);
  // overlong encoding of '/'
  CHECK_THROWS_WITH_AS(utf8_decode(std::string("\xC0\xAF")),
                       doctest::Contains("overlong"), Error);
  // surrogate half
  CHECK_THROWS_WITH_AS(utf8_decode(std::string("\xED\xA0\x80")),
                       doctest::Contains("surrogate"), Error);
  // error message carries the file name when given
  CHECK_THROWS_WITH_AS(utf8_decode("\xFF", "corpus/a.txt"),
                       doctest::Contains("corpus/a.txt"), Error);
}

TEST_CASE("splitmix64 is a stable pure function") {
  CHECK(splitmix64(0) == splitmix64(0));
  CHECK(splitmix64(1) != splitmix64(2));
}

TEST_CASE("rng draws are deterministic per seed") {
  Rng a(42), b(42), c(43);
  bool all_equal = true;
  bool any_diff_seed = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform();
    all_equal = all_equal && (x == b.uniform());
    any_diff_seed = any_diff_seed || (x != c.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);
}

TEST_CASE("format_g17 survives parse round trip") {
  const double vals[] = {0.0, -1.5, 0.1, -0.3333333333333333, 1e-17, -123.456};
  for (double v : vals) {
    CHECK(std::stod(format_g17(v)) == v);
  }
}

TEST_CASE("split_whitespace") {
  CHECK(split_whitespace("  a  bb\tc ") ==
        std::vector<std::string>{"a", "bb", "c"});
  CHECK(split_whitespace("").empty());
}
