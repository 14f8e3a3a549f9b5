#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "cophmm/errors.hpp"

namespace cophmm {

/// Seeded random number generator. mt19937_64 produces an implementation-
/// independent stream; the distribution transforms are written out by hand
/// (instead of using std:: distributions) so that a given seed reproduces the
/// same draws on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return (engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via the polar method; second value cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

  /// Index draw from an (unnormalized-tolerant) probability vector.
  int categorical(const std::vector<double>& probs) {
    if (probs.empty()) throw ArgumentError("categorical: empty probability vector");
    double total = 0.0;
    for (double p : probs) total += p;
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return int(i);
    }
    return int(probs.size()) - 1;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Sum of n independent bernoulli(p) draws; n is small in this code base.
  int binomial(int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
    return k;
  }

  std::uint64_t integer() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace cophmm
