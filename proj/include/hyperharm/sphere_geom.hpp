#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "point.hpp"
#include "random.hpp"

namespace hyperharm {

/// Point set on S^dim with cubature weights for the normalized measure.
struct SphereGrid {
  int dim = 2;
  Eigen::MatrixXd points;  // N x (dim+1), one unit vector per row
  Eigen::VectorXd weights;
  double min_separation = 0.0;

  Eigen::Index size() const { return points.rows(); }
  SpherePoint point(Eigen::Index i) const {
    SpherePoint p;
    p.coordinates = points.row(i).transpose();
    if (dim == 2) p.cache_angles();
    return p;
  }
};

/// Thrown when a separated grid cannot reach its cardinality target.
struct PackingError : GeometryError {
  PackingError(const std::string& what, Eigen::Index achieved_count)
      : GeometryError(what), achieved(achieved_count) {}
  Eigen::Index achieved;
};

/// Minimum pairwise geodesic distance, by spatial hashing of the ambient coordinates.
inline double min_geodesic_separation(const Eigen::MatrixXd& pts) {
  const Eigen::Index N = pts.rows();
  const int D = static_cast<int>(pts.cols());
  if (N < 2) return std::numbers::pi;
  const int d = D - 1;
  double h = 2.0 * std::pow(4.0 * std::numbers::pi / static_cast<double>(N), 1.0 / d);
  for (;;) {
    if (h >= 2.0) {
      double best = 4.0;
      for (Eigen::Index i = 0; i < N; ++i)
        for (Eigen::Index j = i + 1; j < N; ++j) best = std::min(best, (pts.row(i) - pts.row(j)).norm());
      return 2.0 * std::asin(std::min(1.0, 0.5 * best));
    }
    const std::int64_t K = static_cast<std::int64_t>(std::ceil(1.0 / h)) + 2;
    const std::int64_t W = 2 * K + 1;
    auto cell_of = [&](Eigen::Index i, std::array<std::int64_t, 8>& c) {
      for (int a = 0; a < D; ++a) c[a] = static_cast<std::int64_t>(std::floor(pts(i, a) / h)) + K;
    };
    auto key_of = [&](const std::array<std::int64_t, 8>& c) {
      std::int64_t k = 0;
      for (int a = 0; a < D; ++a) k = k * W + c[a];
      return k;
    };
    std::unordered_map<std::int64_t, std::vector<Eigen::Index>> buckets;
    buckets.reserve(static_cast<size_t>(N));
    std::array<std::int64_t, 8> c{};
    for (Eigen::Index i = 0; i < N; ++i) {
      cell_of(i, c);
      buckets[key_of(c)].push_back(i);
    }
    double best = 4.0;
    int neighbours = 1;
    for (int a = 0; a < D; ++a) neighbours *= 3;
    for (Eigen::Index i = 0; i < N; ++i) {
      cell_of(i, c);
      for (int t = 0; t < neighbours; ++t) {
        std::array<std::int64_t, 8> nc = c;
        int r = t;
        for (int a = 0; a < D; ++a) {
          nc[a] += (r % 3) - 1;
          r /= 3;
        }
        auto it = buckets.find(key_of(nc));
        if (it == buckets.end()) continue;
        for (Eigen::Index j : it->second)
          if (j > i) best = std::min(best, (pts.row(i) - pts.row(j)).norm());
      }
    }
    if (best < h) return 2.0 * std::asin(std::min(1.0, 0.5 * best));
    h *= 2.0;
  }
}

inline constexpr std::uint64_t default_grid_seed = 0x5eed'9a1dULL;

/// Fibonacci lattice for dim = 2, i.i.d. uniform points for dim >= 3; equal weights.
inline SphereGrid quasi_uniform_grid(int dim, Eigen::Index count, std::uint64_t seed = default_grid_seed) {
  if (dim < 2) throw DomainError("quasi_uniform_grid: dim must be >= 2");
  if (count < 2) throw DomainError("quasi_uniform_grid: count must be >= 2");
  SphereGrid g;
  g.dim = dim;
  g.points.resize(count, dim + 1);
  if (dim == 2) {
    const double inv_golden = (std::sqrt(5.0) - 1.0) / 2.0;
    for (Eigen::Index i = 0; i < count; ++i) {
      const double z = 1.0 - (2.0 * i + 1.0) / static_cast<double>(count);
      const double phi = 2.0 * std::numbers::pi * std::fmod(static_cast<double>(i) * inv_golden, 1.0);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      g.points.row(i) << r * std::cos(phi), r * std::sin(phi), z;
    }
  } else {
    RandomStream rng(seed, 0, 0, Purpose::points);
    for (Eigen::Index i = 0; i < count; ++i) {
      Eigen::VectorXd v = rng.normal_vector(dim + 1);
      g.points.row(i) = (v / v.norm()).transpose();
    }
  }
  g.weights = Eigen::VectorXd::Constant(count, 1.0 / static_cast<double>(count));
  g.min_separation = min_geodesic_separation(g.points);
  return g;
}

/// Greedy maximin (farthest point) selection of round(ell^{dim alpha}) points
/// with pairwise separation at least ell^{-alpha}. Candidates come from
/// quasi_uniform_grid; `candidates` = 0 picks max(2000, 64 * target).
inline SphereGrid separated_grid(int ell, double alpha, int dim, Eigen::Index candidates = 0) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("separated_grid: alpha must lie in (0,1)");
  if (ell < 1) throw DomainError("separated_grid: ell must be >= 1");
  if (dim < 2) throw DomainError("separated_grid: dim must be >= 2");
  const double delta = std::pow(static_cast<double>(ell), -alpha);
  const double target_real = std::pow(static_cast<double>(ell), dim * alpha);
  if (target_real > 1e7) throw CapacityError("separated_grid: cardinality target too large");
  const Eigen::Index target = std::max<Eigen::Index>(1, std::llround(target_real));
  const Eigen::Index M = candidates > 0 ? candidates : std::max<Eigen::Index>(2000, 64 * target);
  if (static_cast<double>(M) * (dim + 1) > 2e8) throw CapacityError("separated_grid: candidate set exceeds the memory guard");
  SphereGrid cand = quasi_uniform_grid(dim, std::max<Eigen::Index>(M, 2));
  // Track the largest cosine to the chosen set; the farthest candidate has the smallest.
  const double cos_delta = std::cos(delta);
  std::vector<Eigen::Index> chosen{0};
  Eigen::VectorXd near = cand.points * cand.points.row(0).transpose();
  while (static_cast<Eigen::Index>(chosen.size()) < target) {
    Eigen::Index best;
    const double c = near.minCoeff(&best);
    if (c > cos_delta)
      throw PackingError("separated_grid: target " + std::to_string(target) + " unreachable at separation " +
                             std::to_string(delta) + ", achieved " + std::to_string(chosen.size()),
                         static_cast<Eigen::Index>(chosen.size()));
    chosen.push_back(best);
    near = near.cwiseMax(cand.points * cand.points.row(best).transpose());
  }
  SphereGrid g;
  g.dim = dim;
  g.points.resize(static_cast<Eigen::Index>(chosen.size()), dim + 1);
  for (size_t k = 0; k < chosen.size(); ++k) g.points.row(static_cast<Eigen::Index>(k)) = cand.points.row(chosen[k]);
  g.weights = Eigen::VectorXd::Constant(g.points.rows(), 1.0 / static_cast<double>(g.points.rows()));
  g.min_separation = min_geodesic_separation(g.points);
  return g;
}

/// Geodesic subdivision of the icosahedron.
struct SphereMesh {
  Eigen::MatrixXd vertices;  // V x 3
  std::vector<std::array<int, 2>> edges;
  std::vector<std::array<int, 3>> faces;
  int subdivision_level = 0;

  long euler_characteristic() const {
    return static_cast<long>(vertices.rows()) - static_cast<long>(edges.size()) + static_cast<long>(faces.size());
  }
};

inline SphereMesh icosphere(int subdivision) {
  if (subdivision < 0) throw DomainError("icosphere: subdivision must be >= 0");
  if (subdivision > 8) throw CapacityError("icosphere: subdivision above 8 exceeds the memory guard");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                                    {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<std::array<int, 3>> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                                       {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                                       {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                                       {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int level = 0; level < subdivision; ++level) {
    std::unordered_map<std::int64_t, int> mid;
    mid.reserve(f.size() * 2);
    auto midpoint = [&](int a, int b) {
      const std::int64_t key = static_cast<std::int64_t>(std::min(a, b)) * (1LL << 32) + std::max(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int idx = static_cast<int>(v.size()) - 1;
      mid.emplace(key, idx);
      return idx;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(f.size() * 4);
    for (const auto& tri : f) {
      const int ab = midpoint(tri[0], tri[1]), bc = midpoint(tri[1], tri[2]), ca = midpoint(tri[2], tri[0]);
      next.push_back({tri[0], ab, ca});
      next.push_back({tri[1], bc, ab});
      next.push_back({tri[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    f.swap(next);
  }
  SphereMesh mesh;
  mesh.subdivision_level = subdivision;
  mesh.vertices.resize(static_cast<Eigen::Index>(v.size()), 3);
  for (size_t i = 0; i < v.size(); ++i) mesh.vertices.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  for (auto& tri : f) {
    const Eigen::Vector3d &a = v[tri[0]], &b = v[tri[1]], &c = v[tri[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0.0) std::swap(tri[1], tri[2]);
  }
  mesh.faces = std::move(f);
  std::vector<std::int64_t> keys;
  keys.reserve(mesh.faces.size() * 3);
  for (const auto& tri : mesh.faces)
    for (int k = 0; k < 3; ++k) {
      const int a = tri[k], b = tri[(k + 1) % 3];
      keys.push_back(static_cast<std::int64_t>(std::min(a, b)) * (1LL << 32) + std::max(a, b));
    }
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  mesh.edges.reserve(keys.size());
  for (auto k : keys) mesh.edges.push_back({static_cast<int>(k >> 32), static_cast<int>(k & 0xffffffffLL)});
  return mesh;
}

/// CSV with columns index, x0..xd, weight.
inline void write_grid_csv(const SphereGrid& g, std::ostream& os) {
  os << "index";
  for (int a = 0; a <= g.dim; ++a) os << ",x" << a;
  os << ",weight\n";
  char buf[64];
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    os << i;
    for (int a = 0; a <= g.dim; ++a) {
      std::snprintf(buf, sizeof buf, ",%.17g", g.points(i, a));
      os << buf;
    }
    std::snprintf(buf, sizeof buf, ",%.17g\n", g.weights[i]);
    os << buf;
  }
}

}  // namespace hyperharm
