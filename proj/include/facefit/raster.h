#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "facefit/bundle.h"
#include "facefit/image.h"
#include "facefit/scene.h"

namespace facefit {

struct DepthBuffer {
  int width = 0, height = 0;
  std::vector<float> z;    // camera-space depth of the nearest surface, +inf where empty
  std::vector<int> tri;    // covering triangle id, -1 where empty

  float depth_at(int x, int y) const { return z[std::size_t(y) * width + x]; }
  int tri_at(int x, int y) const { return tri[std::size_t(y) * width + x]; }
};

// Barycentric triangle rasterization with perspective-correct depth (1/z
// interpolated in screen space).  Triangles with any vertex behind the camera
// are skipped; depth ties go to the lower triangle id.
DepthBuffer rasterize_depth(const std::vector<Vec3>& vertices, const std::vector<int>& triangles,
                            const Camera& cam, const CameraIntrinsics& intr);

// A vertex is visible when it projects inside the viewport in front of the
// camera, its normal faces the camera, its depth beats the buffer within a
// band of 1e-3 * scene_scale, and its 3x3 pixel neighborhood is fully
// covered (silhouette-adjacent vertices would bilinearly mix background into
// the photo term).
std::vector<std::uint8_t> vertex_visibility(const MeshValues& mesh, const Camera& cam,
                                            const DepthBuffer& depth);

// Bilinear image fetch at a pixel position carried on the tape: the blend
// weights differentiate, the texels are constants.
DVec3 sample_image_bilinear(const Image& img, const DiffValue& x, const DiffValue& y);

// L1 sum over visible vertices of |shaded - image(projected)|, per channel.
// `shaded` / `projected` entries at invisible indices are ignored.
DiffValue vertex_photo_loss(const std::vector<DVec3>& shaded, const std::vector<DVec2>& projected,
                            const std::vector<std::uint8_t>& visible, const Image& image);

// Mean squared pixel distance between projected landmark vertices and the
// given image positions.
DiffValue landmark_loss(const std::vector<DVec2>& projected, const std::vector<Vec2>& target);

std::vector<Vec2> load_landmarks(const std::string& path);
void save_landmarks(const std::string& path, const std::vector<Vec2>& pts);

// Input image pulled back into uv space through the current mesh and camera.
struct UvProjection {
  int res = 0;
  Image color;                      // res x res, 3 channels, zeros where invalid
  std::vector<std::uint8_t> valid;  // texel's surface point was front-facing and unoccluded
};
UvProjection project_to_uv(const Image& image, const ModelBundle& bundle, const MeshValues& mesh,
                           const Camera& cam);

}  // namespace facefit
