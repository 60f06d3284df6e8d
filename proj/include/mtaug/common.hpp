#ifndef MTAUG_COMMON_HPP
#define MTAUG_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace mtaug {

using TokenList = std::vector<std::string>;

// Error taxonomy. The CLI maps each class onto a process exit code.

/// Bad configuration or out-of-range parameter (exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (exit code 3).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An internal invariant did not hold (exit code 4).
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace log {

enum class Level { kQuiet = 0, kWarn = 1, kInfo = 2 };

inline Level& level() {
  static Level lvl = Level::kWarn;
  return lvl;
}

inline std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

inline void warn(std::string_view msg) {
  if (level() < Level::kWarn) return;
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << "WARNING: " << msg << '\n';
}

inline void info(std::string_view msg) {
  if (level() < Level::kInfo) return;
  std::lock_guard<std::mutex> lock(sink_mutex());
  std::cerr << msg << '\n';
}

}  // namespace log

/// Number of items kept when retaining the top `fraction` of `n` items
/// (nearest rank). The 1e-9 slack absorbs binary representation error so
/// that e.g. 0.65 * 100 keeps 65 items rather than 66.
inline std::size_t nearest_rank_count(double fraction, std::size_t n) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ConfigError("fraction must lie in (0, 1], got " + std::to_string(fraction));
  }
  if (n == 0) return 0;
  const double raw = std::ceil(fraction * static_cast<double>(n) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
}

// Deterministic random streams. Standard library distributions are
// implementation defined, so sampling is done by hand on top of a
// splitmix64 generator to keep outputs byte-identical across platforms.

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound) without modulo bias.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t r;
    do {
      r = next();
    } while (r >= limit);
    return r % bound;
  }

 private:
  std::uint64_t state_;
};

/// Stream for one item of one stage: the global seed xor the item id hash,
/// salted per stage so that stages never share draws.
inline SplitMix64 item_stream(std::uint64_t seed, std::string_view item_id,
                              std::string_view stage) {
  return SplitMix64(seed ^ fnv1a64(item_id) ^ (fnv1a64(stage) * 0x9e3779b97f4a7c15ULL));
}

/// In-place Fisher-Yates shuffle driven by SplitMix64.
template <typename T>
void seeded_shuffle(std::vector<T>& items, std::uint64_t seed) {
  SplitMix64 rng(seed);
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Each index is
/// handled exactly once; callers write into pre-sized slots so the merged
/// result does not depend on scheduling.
inline void parallel_for(std::size_t n, unsigned jobs,
                         const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(jobs, n));
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::string join_tokens(const TokenList& tokens, char sep = ' ') {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(sep);
    out += tokens[i];
  }
  return out;
}

inline TokenList split_whitespace(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' ||
                               text[i] == '\r' || text[i] == '\f' || text[i] == '\v')) {
      ++i;
    }
    std::size_t j = i;
    while (j < text.size() && !(text[j] == ' ' || text[j] == '\t' || text[j] == '\n' ||
                                text[j] == '\r' || text[j] == '\f' || text[j] == '\v')) {
      ++j;
    }
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

/// printf-style fixed-point formatting ("%.<digits>f").
inline std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace mtaug

#endif  // MTAUG_COMMON_HPP
