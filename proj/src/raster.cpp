#include "facefit/raster.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace facefit {

DepthBuffer rasterize_depth(const std::vector<Vec3>& vertices, const std::vector<int>& triangles,
                            const Camera& cam, const CameraIntrinsics& intr) {
  DepthBuffer db;
  db.width = intr.width;
  db.height = intr.height;
  db.z.assign(std::size_t(db.width) * db.height, std::numeric_limits<float>::infinity());
  db.tri.assign(std::size_t(db.width) * db.height, -1);

  const std::size_t n = vertices.size();
  std::vector<Vec2> pix(n);
  std::vector<double> depth(n);
  std::vector<char> behind(n);
  for (std::size_t i = 0; i < n; ++i) {
    ProjectedValue pr = project(cam, vertices[i]);
    pix[i] = pr.pixel;
    depth[i] = pr.z;
    behind[i] = pr.behind ? 1 : 0;
  }

  const int tri_count = int(triangles.size() / 3);
  for (int t = 0; t < tri_count; ++t) {
    int i0 = triangles[3 * t], i1 = triangles[3 * t + 1], i2 = triangles[3 * t + 2];
    if (behind[i0] || behind[i1] || behind[i2]) continue;
    const Vec2 &a = pix[i0], &b = pix[i1], &c = pix[i2];
    double area = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    if (area == 0.0) continue;
    double inv_area = 1.0 / area;

    double min_x = std::min({a.x, b.x, c.x}), max_x = std::max({a.x, b.x, c.x});
    double min_y = std::min({a.y, b.y, c.y}), max_y = std::max({a.y, b.y, c.y});
    int x0 = std::max(0, int(std::floor(min_x - 0.5)));
    int x1 = std::min(db.width - 1, int(std::ceil(max_x - 0.5)));
    int y0 = std::max(0, int(std::floor(min_y - 0.5)));
    int y1 = std::min(db.height - 1, int(std::ceil(max_y - 0.5)));
    if (x0 > x1 || y0 > y1) continue;

    double iz0 = 1.0 / depth[i0], iz1 = 1.0 / depth[i1], iz2 = 1.0 / depth[i2];
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        double px = x + 0.5, py = y + 0.5;
        double w0 = ((b.x - px) * (c.y - py) - (b.y - py) * (c.x - px)) * inv_area;
        double w1 = ((c.x - px) * (a.y - py) - (c.y - py) * (a.x - px)) * inv_area;
        double w2 = 1.0 - w0 - w1;
        if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
        double z = 1.0 / (w0 * iz0 + w1 * iz1 + w2 * iz2);
        std::size_t at = std::size_t(y) * db.width + x;
        if (z < db.z[at] || (float(z) == db.z[at] && t < db.tri[at])) {
          db.z[at] = float(z);
          db.tri[at] = t;
        }
      }
    }
  }
  return db;
}

std::vector<std::uint8_t> vertex_visibility(const MeshValues& mesh, const Camera& cam,
                                            const DepthBuffer& depth) {
  const double band = 1e-3 * mesh.scene_scale;
  Vec3 center = cam.t;
  std::vector<std::uint8_t> vis(mesh.vertices.size(), 0);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    ProjectedValue pr = project(cam, mesh.vertices[i]);
    if (pr.behind) continue;
    if (pr.pixel.x < 0.0 || pr.pixel.x >= depth.width || pr.pixel.y < 0.0 ||
        pr.pixel.y >= depth.height)
      continue;
    if (dot(mesh.normals[i], center - mesh.vertices[i]) <= 0.0) continue;
    int px = std::min(depth.width - 1, int(pr.pixel.x));
    int py = std::min(depth.height - 1, int(pr.pixel.y));
    if (pr.z - double(depth.depth_at(px, py)) > band) continue;
    // Exclude silhouette-adjacent vertices: if any pixel in the 3x3 screen
    // neighborhood is uncovered, the bilinear image fetch would blend
    // foreground with background, poisoning the photo term with an error no
    // parameter can remove.
    bool edge = false;
    for (int dy = -1; dy <= 1 && !edge; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        int nx = px + dx, ny = py + dy;
        if (nx < 0 || ny < 0 || nx >= depth.width || ny >= depth.height ||
            depth.tri_at(nx, ny) < 0) {
          edge = true;
          break;
        }
      }
    }
    if (edge) continue;
    vis[i] = 1;
  }
  return vis;
}

DVec3 sample_image_bilinear(const Image& img, const DiffValue& x, const DiffValue& y) {
  // Texel centers sit at integer+0.5; clamp-to-edge outside.
  DiffValue u = x - 0.5, v = y - 0.5;
  double uf = std::floor(u.v), vf = std::floor(v.v);
  int x0 = std::clamp(int(uf), 0, img.width - 1);
  int x1 = std::clamp(int(uf) + 1, 0, img.width - 1);
  int y0 = std::clamp(int(vf), 0, img.height - 1);
  int y1 = std::clamp(int(vf) + 1, 0, img.height - 1);
  DiffValue ax = u - uf, ay = v - vf;
  DiffValue bx = 1.0 - ax, by = 1.0 - ay;
  DVec3 out{DiffValue(0.0), DiffValue(0.0), DiffValue(0.0)};
  DiffValue* chan[3] = {&out.x, &out.y, &out.z};
  for (int c = 0; c < std::min(3, img.channels); ++c) {
    DiffValue top = bx * double(img.at(x0, y0, c)) + ax * double(img.at(x1, y0, c));
    DiffValue bot = bx * double(img.at(x0, y1, c)) + ax * double(img.at(x1, y1, c));
    *chan[c] = by * top + ay * bot;
  }
  if (img.channels == 1) out.y = out.x, out.z = out.x;
  return out;
}

DiffValue vertex_photo_loss(const std::vector<DVec3>& shaded, const std::vector<DVec2>& projected,
                            const std::vector<std::uint8_t>& visible, const Image& image) {
  std::vector<DiffValue> terms;
  terms.reserve(shaded.size());
  for (std::size_t i = 0; i < shaded.size(); ++i) {
    if (!visible[i]) continue;
    DVec3 want = sample_image_bilinear(image, projected[i].x, projected[i].y);
    terms.push_back(abs(shaded[i].x - want.x) + abs(shaded[i].y - want.y) +
                    abs(shaded[i].z - want.z));
  }
  if (terms.empty()) throw std::runtime_error("raster: no visible vertices (degenerate pose)");
  return fsum(terms);
}

DiffValue landmark_loss(const std::vector<DVec2>& projected, const std::vector<Vec2>& target) {
  if (projected.size() != kNumLandmarks || target.size() != kNumLandmarks)
    throw std::runtime_error("raster: landmark count must be 68");
  std::vector<DiffValue> terms;
  terms.reserve(kNumLandmarks);
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    DiffValue dx = projected[i].x - target[i].x;
    DiffValue dy = projected[i].y - target[i].y;
    terms.push_back(sq(dx) + sq(dy));
  }
  return fsum(terms) * (1.0 / double(kNumLandmarks));
}

std::vector<Vec2> load_landmarks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("raster: cannot open landmark file " + path);
  std::vector<Vec2> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Vec2 p;
    if (!(ls >> p.x >> p.y)) throw std::runtime_error("raster: bad landmark line in " + path);
    pts.push_back(p);
  }
  if (pts.size() != kNumLandmarks) throw std::runtime_error("raster: landmark count must be 68");
  return pts;
}

void save_landmarks(const std::string& path, const std::vector<Vec2>& pts) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("raster: cannot write landmark file " + path);
  out.precision(17);
  for (const Vec2& p : pts) out << p.x << " " << p.y << "\n";
}

UvProjection project_to_uv(const Image& image, const ModelBundle& bundle, const MeshValues& mesh,
                           const Camera& cam) {
  const UvAtlas& atlas = bundle.atlas;
  UvProjection out;
  out.res = atlas.res;
  out.color = Image(atlas.res, atlas.res, 3);
  out.valid.assign(std::size_t(atlas.res) * atlas.res, 0);

  DepthBuffer db = rasterize_depth(mesh.vertices, bundle.triangles, cam, cam.k);
  const double band = 1e-3 * mesh.scene_scale;

  for (int y = 0; y < atlas.res; ++y) {
    for (int x = 0; x < atlas.res; ++x) {
      std::size_t at = std::size_t(y) * atlas.res + x;
      int t = atlas.tri[at];
      if (t < 0) continue;
      const int* idx = &bundle.triangles[3 * t];
      double b0 = atlas.bary[3 * at], b1 = atlas.bary[3 * at + 1], b2 = atlas.bary[3 * at + 2];
      Vec3 point = mesh.vertices[idx[0]] * b0 + mesh.vertices[idx[1]] * b1 + mesh.vertices[idx[2]] * b2;
      Vec3 normal = normalized(mesh.normals[idx[0]] * b0 + mesh.normals[idx[1]] * b1 +
                               mesh.normals[idx[2]] * b2);
      if (dot(normal, cam.t - point) <= 0.0) continue;
      ProjectedValue pr = project(cam, point);
      if (pr.behind) continue;
      if (pr.pixel.x < 0.0 || pr.pixel.x >= cam.k.width || pr.pixel.y < 0.0 ||
          pr.pixel.y >= cam.k.height)
        continue;
      int px = std::min(cam.k.width - 1, int(pr.pixel.x));
      int py = std::min(cam.k.height - 1, int(pr.pixel.y));
      if (pr.z - double(db.depth_at(px, py)) > band) continue;
      out.valid[at] = 1;
      for (int c = 0; c < 3; ++c)
        out.color.at(x, y, c) = sample_bilinear(image, pr.pixel.x, pr.pixel.y, std::min(c, image.channels - 1));
    }
  }
  return out;
}

}  // namespace facefit
