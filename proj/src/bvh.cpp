#include "facefit/bvh.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace facefit {

RayHit intersect_triangle(const Vec3& orig, const Vec3& dir, const Vec3& p0, const Vec3& p1, const Vec3& p2,
                          int tri_index) {
  RayHit miss;
  Vec3 e1 = p1 - p0, e2 = p2 - p0;
  Vec3 pv = cross(dir, e2);
  double det = dot(e1, pv);
  if (std::fabs(det) < 1e-14) return miss;
  double inv = 1.0 / det;
  Vec3 tv = orig - p0;
  double u = dot(tv, pv) * inv;
  if (u < 0.0 || u > 1.0) return miss;
  Vec3 qv = cross(tv, e1);
  double v = dot(dir, qv) * inv;
  if (v < 0.0 || u + v > 1.0) return miss;
  double t = dot(e2, qv) * inv;
  RayHit h;
  h.tri = tri_index;
  h.t = t;
  h.b1 = u;
  h.b2 = v;
  return h;
}

Bvh::Bvh(const std::vector<Vec3>& vertices, const std::vector<int>& triangles)
    : vertices_(&vertices), triangles_(&triangles) {
  int n = int(triangles.size() / 3);
  if (n == 0) throw std::runtime_error("bvh: no triangles");
  std::vector<int> items(n);
  for (int i = 0; i < n; ++i) items[i] = i;
  nodes_.reserve(std::size_t(2) * n);
  build(items, 0, n);
}

int Bvh::build(std::vector<int>& items, int begin, int end) {
  int node_id = int(nodes_.size());
  nodes_.push_back({});
  Vec3 lo{1e30, 1e30, 1e30}, hi{-1e30, -1e30, -1e30};
  Vec3 clo = lo, chi = hi;  // centroid bounds pick the split axis
  for (int i = begin; i < end; ++i) {
    Vec3 cen{0, 0, 0};
    for (int k = 0; k < 3; ++k) {
      const Vec3& p = (*vertices_)[(*triangles_)[3 * items[i] + k]];
      lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
      hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
      cen += p;
    }
    cen = cen * (1.0 / 3.0);
    clo = {std::min(clo.x, cen.x), std::min(clo.y, cen.y), std::min(clo.z, cen.z)};
    chi = {std::max(chi.x, cen.x), std::max(chi.y, cen.y), std::max(chi.z, cen.z)};
  }
  nodes_[node_id].lo = lo;
  nodes_[node_id].hi = hi;

  int count = end - begin;
  Vec3 ext = chi - clo;
  if (count <= kLeafSize || (ext.x <= 0.0 && ext.y <= 0.0 && ext.z <= 0.0)) {
    nodes_[node_id].first = int(tri_index_.size());
    nodes_[node_id].count = count;
    // Ascending triangle ids inside a leaf keep hit ties deterministic.
    std::sort(items.begin() + begin, items.begin() + end);
    for (int i = begin; i < end; ++i) tri_index_.push_back(items[i]);
    return node_id;
  }

  int axis = 0;
  if (ext.y > ext.x) axis = 1;
  if ((axis == 0 ? ext.z > ext.x : ext.z > ext.y)) axis = 2;
  auto centroid = [&](int tri) {
    Vec3 c{0, 0, 0};
    for (int k = 0; k < 3; ++k) c += (*vertices_)[(*triangles_)[3 * tri + k]];
    return axis == 0 ? c.x : axis == 1 ? c.y : c.z;
  };
  int mid = begin + count / 2;
  std::nth_element(items.begin() + begin, items.begin() + mid, items.begin() + end,
                   [&](int a, int b) { return centroid(a) < centroid(b) || (centroid(a) == centroid(b) && a < b); });
  int left = build(items, begin, mid);
  int right = build(items, mid, end);
  nodes_[node_id].left = left;
  nodes_[node_id].right = right;
  return node_id;
}

namespace {

inline bool box_hit(const Vec3& lo, const Vec3& hi, const Vec3& orig, const Vec3& inv_dir, double t_min,
                    double t_max) {
  double t0 = (lo.x - orig.x) * inv_dir.x, t1 = (hi.x - orig.x) * inv_dir.x;
  if (t0 > t1) std::swap(t0, t1);
  t_min = std::max(t_min, t0);
  t_max = std::min(t_max, t1);
  t0 = (lo.y - orig.y) * inv_dir.y;
  t1 = (hi.y - orig.y) * inv_dir.y;
  if (t0 > t1) std::swap(t0, t1);
  t_min = std::max(t_min, t0);
  t_max = std::min(t_max, t1);
  t0 = (lo.z - orig.z) * inv_dir.z;
  t1 = (hi.z - orig.z) * inv_dir.z;
  if (t0 > t1) std::swap(t0, t1);
  return std::max(t_min, t0) <= std::min(t_max, t1);
}

}  // namespace

RayHit Bvh::intersect(const Vec3& orig, const Vec3& dir, double t_min, double t_max) const {
  Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
  RayHit best;
  best.t = t_max;
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!box_hit(node.lo, node.hi, orig, inv, t_min, best.t)) continue;
    if (node.left < 0) {
      for (int i = 0; i < node.count; ++i) {
        int tri = tri_index_[node.first + i];
        const int* idx = &(*triangles_)[3 * tri];
        RayHit h = intersect_triangle(orig, dir, (*vertices_)[idx[0]], (*vertices_)[idx[1]], (*vertices_)[idx[2]], tri);
        if (!h.hit() || h.t <= t_min) continue;
        if (h.t < best.t || (h.t == best.t && h.tri < best.tri)) best = h;
      }
    } else {
      stack[sp++] = node.right;
      stack[sp++] = node.left;  // left child visited first
    }
  }
  if (best.tri < 0) best = RayHit{};
  return best;
}

bool Bvh::occluded(const Vec3& orig, const Vec3& dir, double t_min, double t_max) const {
  Vec3 inv{1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z};
  int stack[64];
  int sp = 0;
  stack[sp++] = 0;
  while (sp > 0) {
    const Node& node = nodes_[stack[--sp]];
    if (!box_hit(node.lo, node.hi, orig, inv, t_min, t_max)) continue;
    if (node.left < 0) {
      for (int i = 0; i < node.count; ++i) {
        int tri = tri_index_[node.first + i];
        const int* idx = &(*triangles_)[3 * tri];
        RayHit h = intersect_triangle(orig, dir, (*vertices_)[idx[0]], (*vertices_)[idx[1]], (*vertices_)[idx[2]], tri);
        if (h.hit() && h.t > t_min && h.t < t_max) return true;
      }
    } else {
      stack[sp++] = node.right;
      stack[sp++] = node.left;
    }
  }
  return false;
}

}  // namespace facefit
