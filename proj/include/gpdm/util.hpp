#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <initializer_list>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gpdm {

// splitmix64 finalizer; used to derive independent rng streams from a base
// seed plus structural coordinates (domain index, dialogue index, ...) so
// results do not depend on scheduling or evaluation order.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::initializer_list<std::uint64_t> parts) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t p : parts) h = mix64(h ^ p);
  return h;
}

// Stable tag for stream separation ("train", "eval", ...).
inline std::uint64_t tag64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline unsigned thread_budget() {
  if (const char* env = std::getenv("GPDM_THREADS")) {
    long v = std::atol(env);
    if (v >= 1) return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

// Runs fn(i) for i in [0, n). Work is chunked over at most thread_budget()
// threads; with a budget of 1 it degenerates to a plain loop. Caller is
// responsible for making iterations independent.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  unsigned budget = thread_budget();
  if (budget <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = static_cast<unsigned>(std::min<std::size_t>(budget, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::size_t> next{0};
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        fn(i);
      }
    });
  }
  for (auto& t : pool) t.join();
}

// Uniform in [0,1) built from the top 53 bits of one engine draw; avoids the
// implementation-defined std::uniform_real_distribution so seeded runs are
// reproducible across standard libraries.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::uint64_t bounded_uniform(std::mt19937_64& rng, std::uint64_t n) {
  return n ? rng() % n : 0;
}

// Box-Muller, one value per call (the sine branch is discarded so each sample
// consumes exactly two engine draws).
inline double normal_sample(std::mt19937_64& rng) {
  double u1 = 1.0 - uniform01(rng);
  double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

// Marsaglia-Tsang gamma sampler for shape >= 1 (all uses here are).
inline double gamma_sample(std::mt19937_64& rng, double shape) {
  double d = shape - 1.0 / 3.0;
  double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = normal_sample(rng);
    double t = 1.0 + c * x;
    if (t <= 0.0) continue;
    double v = t * t * t;
    double u = 1.0 - uniform01(rng);
    if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) return d * v;
  }
}

inline double beta_sample(std::mt19937_64& rng, double a, double b) {
  double ga = gamma_sample(rng, a);
  double gb = gamma_sample(rng, b);
  return ga / (ga + gb);
}

inline std::string base64_encode(const void* data, std::size_t len) {
  static const char* alphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::string out;
  out.reserve((len + 2) / 3 * 4);
  for (std::size_t i = 0; i < len; i += 3) {
    unsigned v = p[i] << 16;
    if (i + 1 < len) v |= p[i + 1] << 8;
    if (i + 2 < len) v |= p[i + 2];
    out.push_back(alphabet[(v >> 18) & 63]);
    out.push_back(alphabet[(v >> 12) & 63]);
    out.push_back(i + 1 < len ? alphabet[(v >> 6) & 63] : '=');
    out.push_back(i + 2 < len ? alphabet[v & 63] : '=');
  }
  return out;
}

inline std::vector<unsigned char> base64_decode(const std::string& s) {
  auto value = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw std::invalid_argument("invalid base64 character");
  };
  if (s.size() % 4 != 0) throw std::invalid_argument("base64 length must be a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int a = value(s[i]), b = value(s[i + 1]), c = value(s[i + 2]), d = value(s[i + 3]);
    if (a < 0 || b < 0) throw std::invalid_argument("malformed base64 block");
    unsigned v = (static_cast<unsigned>(a) << 18) | (static_cast<unsigned>(b) << 12);
    out.push_back((v >> 16) & 0xff);
    if (c >= 0) {
      v |= static_cast<unsigned>(c) << 6;
      out.push_back((v >> 8) & 0xff);
      if (d >= 0) {
        v |= static_cast<unsigned>(d);
        out.push_back(v & 0xff);
      }
    } else if (d >= 0) {
      throw std::invalid_argument("malformed base64 padding");
    }
  }
  return out;
}

struct SummaryStat {
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci95 = 0.0;  // 1.96 * stderr
  std::size_t n = 0;
};

inline SummaryStat summarize(const std::vector<double>& xs) {
  SummaryStat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    double var = ss / static_cast<double>(xs.size() - 1);
    s.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
    s.ci95 = 1.96 * s.stderr_;
  }
  return s;
}

// Trailing moving average: element t averages the last min(t+1, window) values.
inline std::vector<double> moving_average(const std::vector<double>& xs, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be positive");
  std::vector<double> out(xs.size());
  double acc = 0.0;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    acc += xs[t];
    if (t >= window) acc -= xs[t - window];
    out[t] = acc / static_cast<double>(std::min(t + 1, window));
  }
  return out;
}

}  // namespace gpdm
