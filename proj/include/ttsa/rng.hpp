#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>

namespace ttsa {

// Deterministic Gaussian stream: mt19937_64 with a fixed Box-Muller transform.
// The mapping from seed to output is pinned down by the C++ standard's
// definition of mt19937_64, so trajectories replay bit-identically for a
// given (seed, replicate index) on the same build.
class GaussianStream {
 public:
  explicit GaussianStream(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32)};
    gen_.seed(seq);
  }

  // Stream for replicate `index` of a Monte Carlo run. Distinct indices give
  // independent streams; the derivation is a pure function of (seed, index).
  static GaussianStream replicate_stream(std::uint64_t base_seed, std::uint64_t index) {
    GaussianStream s(0);
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed),
                      static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    s.gen_.seed(seq);
    return s;
  }

  // Fills `out` with standard normals, consuming exactly ceil(n/2)
  // Box-Muller pairs; the spare half of an odd draw is discarded so the
  // stream position depends only on n.
  template <typename Derived>
  void fill_standard_normal(Eigen::MatrixBase<Derived>& out) {
    const Eigen::Index n = out.size();
    Eigen::Index i = 0;
    while (i + 1 < n) {
      const auto [z0, z1] = pair();
      out(i) = z0;
      out(i + 1) = z1;
      i += 2;
    }
    if (i < n) out(i) = pair().first;
  }

  double normal() { return pair().first; }

  std::uint64_t raw() { return gen_(); }

 private:
  // u1 in (0,1], u2 in [0,1): 53-bit mantissas from the top bits.
  std::pair<double, double> pair() {
    const double u1 = (static_cast<double>(gen_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    return {r * std::cos(a), r * std::sin(a)};
  }

  std::mt19937_64 gen_;
};

}  // namespace ttsa
