#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>

#include "facefit/bundle.h"
#include "facefit/fixture.h"

using namespace facefit;

namespace {

std::string fresh_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  return p.string();
}

}  // namespace

TEST_SUITE("bundle") {

TEST_CASE("synthetic face bundle is internally consistent") {
  ModelBundle b = make_face_bundle(7, false);
  CHECK_NOTHROW(validate_bundle(b));
  CHECK(b.num_vertices > 1000);
  CHECK(b.num_triangles > 2000);
  CHECK(int(b.landmark_ids.size()) == kNumLandmarks);
  CHECK(b.K_s > 0);
  CHECK(b.K_e > 0);
  CHECK(b.K_r > 0);
  // The mirror map is an involution that fixes or swaps every vertex.
  for (int i = 0; i < b.num_vertices; ++i) {
    int j = b.mirror[i];
    CHECK(b.mirror[j] == i);
  }
  // uv coordinates live in the unit square.
  for (double u : b.uv) {
    CHECK(u >= 0.0);
    CHECK(u <= 1.0);
  }
  // Prior variances are positive and non-increasing (leading modes dominate).
  for (int k = 0; k + 1 < b.K_s; ++k) CHECK(b.prior_var_shape[k] >= b.prior_var_shape[k + 1]);
  for (double v : b.prior_var_shape) CHECK(v > 0.0);
  for (double v : b.prior_var_refl) CHECK(v > 0.0);
}

TEST_CASE("mirror map pairs mirrored positions") {
  ModelBundle b = make_face_bundle(7, false);
  for (int i = 0; i < b.num_vertices; i += 97) {
    Vec3 p = b.vertex_mean(i);
    Vec3 q = b.vertex_mean(b.mirror[i]);
    CHECK(q.x == doctest::Approx(-p.x).scale(1.0).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(p.y).scale(1.0).epsilon(1e-9));
    CHECK(q.z == doctest::Approx(p.z).scale(1.0).epsilon(1e-9));
  }
}

TEST_CASE("save and load round-trip bit-exactly") {
  ModelBundle b = make_face_bundle(11, false);
  std::string dir = fresh_dir("bundle-rt");
  save_bundle(dir, b);
  ModelBundle r = load_bundle(dir);
  CHECK(r.num_vertices == b.num_vertices);
  CHECK(r.num_triangles == b.num_triangles);
  CHECK(r.K_s == b.K_s);
  CHECK(r.K_e == b.K_e);
  CHECK(r.K_r == b.K_r);
  CHECK(r.texture_resolution == b.texture_resolution);
  CHECK(r.mean_shape == b.mean_shape);
  CHECK(r.shape_basis == b.shape_basis);
  CHECK(r.expr_basis == b.expr_basis);
  CHECK(r.mean_diffuse == b.mean_diffuse);
  CHECK(r.diffuse_basis == b.diffuse_basis);
  CHECK(r.mean_specular == b.mean_specular);
  CHECK(r.specular_basis == b.specular_basis);
  CHECK(r.prior_var_shape == b.prior_var_shape);
  CHECK(r.prior_var_refl == b.prior_var_refl);
  CHECK(r.triangles == b.triangles);
  CHECK(r.uv == b.uv);
  CHECK(r.landmark_ids == b.landmark_ids);
  CHECK(r.mirror == b.mirror);
  // The atlas is rebuilt on load and must agree.
  CHECK(r.atlas.res == b.atlas.res);
  CHECK(r.atlas.tri == b.atlas.tri);
  std::filesystem::remove_all(dir);
}

TEST_CASE("validation rejects inconsistent bundles") {
  ModelBundle good = make_face_bundle(3, false);

  ModelBundle b = good;
  b.shape_basis.pop_back();  // basis no longer 3N x K_s
  CHECK_THROWS(validate_bundle(b));

  b = good;
  b.uv[0] = 1.5;  // outside the unit square
  CHECK_THROWS(validate_bundle(b));

  b = good;
  b.mirror[0] = b.mirror[1];  // no longer involutive
  CHECK_THROWS(validate_bundle(b));

  b = good;
  b.triangles[0] = b.num_vertices + 4;  // dangling vertex id
  CHECK_THROWS(validate_bundle(b));

  b = good;
  b.landmark_ids[10] = -2;
  CHECK_THROWS(validate_bundle(b));

  b = good;
  b.prior_var_shape[0] = 0.0;  // prior must be positive
  CHECK_THROWS(validate_bundle(b));
}

TEST_CASE("loading a missing directory fails") {
  CHECK_THROWS((void)load_bundle(fresh_dir("bundle-missing")));
}

TEST_CASE("uv atlas covers the chart and reconstructs texel centers") {
  ModelBundle b = make_face_bundle(5, false);
  const UvAtlas& a = b.atlas;
  REQUIRE(a.res == b.texture_resolution);
  int valid = 0;
  for (int y = 0; y < a.res; ++y) {
    for (int x = 0; x < a.res; ++x) {
      if (!a.valid(x, y)) continue;
      ++valid;
      std::size_t idx = std::size_t(y) * a.res + x;
      int tri = a.tri[idx];
      REQUIRE(tri >= 0);
      REQUIRE(tri < b.num_triangles);
      double b0 = a.bary[idx * 3], b1 = a.bary[idx * 3 + 1], b2 = a.bary[idx * 3 + 2];
      CHECK(b0 == doctest::Approx(1.0 - b1 - b2).epsilon(1e-9));
      CHECK(b0 >= -1e-9);
      CHECK(b1 >= -1e-9);
      CHECK(b2 >= -1e-9);
      // Barycentric blend of the triangle's uv corners lands on this texel.
      int v0 = b.triangles[3 * tri], v1 = b.triangles[3 * tri + 1], v2 = b.triangles[3 * tri + 2];
      Vec2 uv = b.vertex_uv(v0) * b0 + b.vertex_uv(v1) * b1 + b.vertex_uv(v2) * b2;
      CHECK(uv.x == doctest::Approx((x + 0.5) / a.res).epsilon(1e-6));
      CHECK(uv.y == doctest::Approx((y + 0.5) / a.res).epsilon(1e-6));
    }
  }
  // The face chart fills most of the unit square.
  CHECK(valid > a.res * a.res * 3 / 4);
}

TEST_CASE("sphere bundle is valid and self-mirrored") {
  ModelBundle b = make_sphere_bundle(80.0, 1.0, 0.0);
  CHECK_NOTHROW(validate_bundle(b));
  // Unit-radius scaling: every mean vertex sits on the sphere (stored at
  // float precision).
  for (int i = 0; i < b.num_vertices; i += 53)
    CHECK(norm(b.vertex_mean(i)) == doctest::Approx(80.0).epsilon(1e-6));
  // Constant albedo at the requested level.
  for (int i = 0; i < b.num_vertices; ++i) {
    CHECK(b.mean_diffuse[3 * i] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.mean_specular[3 * i] == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  }
}

}  // TEST_SUITE
