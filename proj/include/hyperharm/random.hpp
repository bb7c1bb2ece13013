#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <Eigen/Dense>
#include <boost/random/gamma_distribution.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

namespace hyperharm {

/// Philox4x32-10 counter-based generator.
class Philox4x32 {
 public:
  using result_type = std::uint32_t;
  using counter_type = std::array<std::uint32_t, 4>;
  using key_type = std::array<std::uint32_t, 2>;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  Philox4x32(key_type key, counter_type counter) : key_(key), counter_(counter) {}

  static counter_type apply(counter_type c, key_type k) {
    for (int r = 0; r < 10; ++r) {
      const std::uint64_t p0 = std::uint64_t(0xD2511F53u) * c[0];
      const std::uint64_t p1 = std::uint64_t(0xCD9E8D57u) * c[2];
      const std::uint32_t hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
      const std::uint32_t hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += 0x9E3779B9u;
      k[1] += 0xBB67AE85u;
    }
    return c;
  }

  result_type operator()() {
    if (index_ == 4) {
      block_ = apply(counter_, key_);
      ++counter_[0];
      index_ = 0;
    }
    return block_[index_++];
  }

 private:
  key_type key_;
  counter_type counter_;
  counter_type block_{};
  int index_ = 4;
};

/// Independent sub-stream roles within one replicate.
enum class Purpose : std::uint32_t {
  coefficients = 1,
  radius = 2,
  pilot = 3,
  model = 4,
  points = 5,
  field = 6,
  rotation = 7,
  generic = 8,
};

/// Reproducible stream keyed by (seed, ell, replicate, purpose).
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint32_t ell, std::uint32_t replicate, Purpose purpose)
      : engine_({std::uint32_t(seed), std::uint32_t(seed >> 32)},
                {0u, static_cast<std::uint32_t>(purpose), replicate, ell}) {}
  explicit RandomStream(std::uint64_t seed) : RandomStream(seed, 0, 0, Purpose::generic) {}

  double normal() { return normal_(engine_); }
  double uniform() { return boost::random::uniform_01<double>()(engine_); }
  double gamma(double shape, double scale) {
    return boost::random::gamma_distribution<double>(shape, scale)(engine_);
  }
  Eigen::VectorXd normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = normal();
    return v;
  }
  std::uint32_t bits() { return engine_(); }
  Philox4x32& engine() { return engine_; }

 private:
  Philox4x32 engine_;
  boost::random::normal_distribution<double> normal_;
};

}  // namespace hyperharm
