#pragma once

#include <vector>

#include "facefit/vec.h"

namespace facefit {

struct RayHit {
  int tri = -1;
  double t = 0.0;
  double b1 = 0.0, b2 = 0.0;  // barycentrics of vertices 1 and 2
  bool hit() const { return tri >= 0; }
};

// Moller-Trumbore with inclusive edge handling; epsilon-free in the
// barycentric test so shared edges cannot drop rays.
RayHit intersect_triangle(const Vec3& orig, const Vec3& dir, const Vec3& p0, const Vec3& p1, const Vec3& p2,
                          int tri_index);

// Median-split BVH over the current vertex positions, rebuilt per geometry
// update.  Leaves hold at most 4 triangles.
class Bvh {
 public:
  static constexpr int kLeafSize = 4;

  Bvh() = default;
  Bvh(const std::vector<Vec3>& vertices, const std::vector<int>& triangles);

  // Closest hit with t in (t_min, t_max); ties broken toward the lower
  // triangle index for determinism.
  RayHit intersect(const Vec3& orig, const Vec3& dir, double t_min = 0.0, double t_max = 1e30) const;
  // Any hit in (t_min, t_max).
  bool occluded(const Vec3& orig, const Vec3& dir, double t_min, double t_max) const;

  int triangle_count() const { return int(tri_index_.size()); }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal children; -1/-1 for leaves
    int first = 0, count = 0;   // leaf triangle range in tri_index_
  };

  const std::vector<Vec3>* vertices_ = nullptr;
  const std::vector<int>* triangles_ = nullptr;
  std::vector<Node> nodes_;
  std::vector<int> tri_index_;

  int build(std::vector<int>& items, int begin, int end);
};

}  // namespace facefit
