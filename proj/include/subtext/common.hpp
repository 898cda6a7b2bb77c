#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace subtext {

// Anything data- or model-shaped that went wrong: unreadable files, corrupt
// artifacts, violated contracts. The CLI maps these to exit code 2.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Command-line misuse. Exit code 1.
struct UsageError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------
// UTF-8

// Decodes strict UTF-8 (rejects overlong forms, surrogates, > U+10FFFF).
// On bad input throws Error naming the byte offset; `where` prefixes the
// message, typically with a file name.
std::u32string utf8_decode(std::string_view text, std::string_view where = {});

std::string utf8_encode(std::u32string_view text);
std::string utf8_encode(char32_t cp);

// ---------------------------------------------------------------------------
// Deterministic hashing & RNG

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled draws so that a seed pins the exact byte
// stream regardless of the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n), n > 0
  std::uint64_t uniform_int(std::uint64_t n);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Small string helpers

bool is_unicode_space(char32_t cp);
bool is_unicode_control(char32_t cp);

// %.17g — the precision all persisted reals are printed at.
std::string format_g17(double v);

std::vector<std::string> split_whitespace(std::string_view text);

std::string read_file(const std::string& path);

}  // namespace subtext
