#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>

#include "facefit/fixture.h"
#include "facefit/rng.h"
#include "facefit/scene.h"

using namespace facefit;

namespace {

DVec3 cvec(double x, double y, double z) { return {DiffValue(x), DiffValue(y), DiffValue(z)}; }

Mat3 rot_values(const Vec3& axis_angle) {
  DMat3 R = rotation_matrix(cvec(axis_angle.x, axis_angle.y, axis_angle.z));
  return {value(R.c0), value(R.c1), value(R.c2)};
}

std::string fresh_dir(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("zero axis-angle is the identity rotation") {
  Mat3 R = rot_values({0, 0, 0});
  CHECK(R.c0.x == 1.0);
  CHECK(R.c1.y == 1.0);
  CHECK(R.c2.z == 1.0);
  CHECK(R.c0.y == 0.0);
  CHECK(R.c1.z == 0.0);
}

TEST_CASE("rotation matrices are orthonormal with determinant one") {
  Rng rng(9);
  for (int t = 0; t < 8; ++t) {
    Vec3 w{rng.next_double() * 2 - 1, rng.next_double() * 2 - 1, rng.next_double() * 2 - 1};
    Mat3 R = rot_values(w);
    CHECK(dot(R.c0, R.c0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dot(R.c1, R.c1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dot(R.c2, R.c2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dot(R.c0, R.c1) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(dot(R.c0, R.c2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(dot(R.c1, R.c2) == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    Vec3 c01 = cross(R.c0, R.c1);  // right-handed
    CHECK(dot(c01, R.c2) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("quarter turn about z maps x to y") {
  Mat3 R = rot_values({0, 0, std::numbers::pi / 2});
  Vec3 y = R.apply({1, 0, 0});
  CHECK(y.x == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(y.y == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(y.z == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
}

TEST_CASE("small rotations act like omega cross v") {
  Vec3 w{0.001, -0.002, 0.0015};
  Vec3 v{3, -1, 2};
  Vec3 approx = v + cross(w, v);
  Vec3 exact = rot_values(w).apply(v);
  CHECK(norm(exact - approx) < 1e-5);
}

TEST_CASE("rotation gradient matches finite differences") {
  Rng rng(15);
  Vec3 w{0.3, -0.2, 0.5};
  Vec3 v{1.5, -2.0, 0.7};
  Tape tape;
  Tape::Scope scope(tape);
  DVec3 wd{DiffValue(w.x, tape.leaf()), DiffValue(w.y, tape.leaf()), DiffValue(w.z, tape.leaf())};
  DVec3 out = rotation_matrix(wd).apply(lift_const(v));
  std::vector<double> adj = tape.backward(out.y.id);
  const double h = 1e-6;
  double g[3] = {adj[wd.x.id], adj[wd.y.id], adj[wd.z.id]};
  for (int a = 0; a < 3; ++a) {
    Vec3 wp = w, wm = w;
    (a == 0 ? wp.x : a == 1 ? wp.y : wp.z) += h;
    (a == 0 ? wm.x : a == 1 ? wm.y : wm.z) -= h;
    double n = (rot_values(wp).apply(v).y - rot_values(wm).apply(v).y) / (2 * h);
    CHECK(g[a] == doctest::Approx(n).scale(1.0).epsilon(1e-6));
  }
}

TEST_CASE("projection follows the pinhole model") {
  CameraIntrinsics k;  // f=460, c=(64,64), 128x128
  Camera cam{Mat3::identity(), {0, 0, -500}, k};
  ProjectedValue c = project(cam, Vec3{0, 0, 0});
  CHECK(c.z == doctest::Approx(500.0).epsilon(1e-12));
  CHECK(c.pixel.x == doctest::Approx(64.0).epsilon(1e-12));
  CHECK(c.pixel.y == doctest::Approx(64.0).epsilon(1e-12));
  ProjectedValue off = project(cam, Vec3{10, -5, 0});
  CHECK(off.pixel.x == doctest::Approx(64.0 + 460.0 * 10 / 500).epsilon(1e-12));
  CHECK(off.pixel.y == doctest::Approx(64.0 - 460.0 * 5 / 500).epsilon(1e-12));
  CHECK_FALSE(off.behind);
  ProjectedValue back = project(cam, Vec3{0, 0, -600});
  CHECK(back.behind);
}

TEST_CASE("differentiable and plain projection agree") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  p.rot = {0.03, -0.02, 0.01};
  p.trans = {5, -4, -800};
  SceneLift lift = lift_const_scene(p);
  CameraIntrinsics k;
  CameraD camd = make_camera(lift, k);
  Camera cam = camera_values(camd);
  Rng rng(33);
  for (int i = 0; i < 10; ++i) {
    Vec3 v{rng.next_double() * 100 - 50, rng.next_double() * 100 - 50, rng.next_double() * 50 - 25};
    Projected pd = project(camd, lift_const(v));
    ProjectedValue pv = project(cam, v);
    CHECK(pd.pixel.x.v == pv.pixel.x);
    CHECK(pd.pixel.y.v == pv.pixel.y);
    CHECK(pd.z.v == pv.z);
    CHECK(pd.behind == pv.behind);
  }
}

TEST_CASE("init_for sizes every block for the bundle") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.42);
  CHECK(int(p.alpha.size()) == b.K_s);
  CHECK(int(p.delta.size()) == b.K_e);
  CHECK(int(p.beta.size()) == b.K_r);
  CHECK(p.roughness == 0.42);
  CHECK(p.medium_diffuse.res == b.texture_resolution);
  CHECK(p.fine_normal.res == b.texture_resolution);
  // Detail normals start as the tangent-space identity (0,0,1).
  CHECK(p.fine_normal.at(3, 5, 0) == 0.0);
  CHECK(p.fine_normal.at(3, 5, 2) == 1.0);
  for (double a : p.alpha) CHECK(a == 0.0);
}

TEST_CASE("geometry at zero coefficients is the mean shape") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  SceneLift lift = lift_const_scene(p);
  MeshD mesh = eval_geometry(b, lift);
  REQUIRE(int(mesh.vertices.size()) == b.num_vertices);
  for (int i = 0; i < b.num_vertices; i += 111) {
    Vec3 m = b.vertex_mean(i);
    CHECK(mesh.vertices[i].x.v == doctest::Approx(m.x).scale(1.0).epsilon(1e-12));
    CHECK(mesh.vertices[i].y.v == doctest::Approx(m.y).scale(1.0).epsilon(1e-12));
    CHECK(mesh.vertices[i].z.v == doctest::Approx(m.z).scale(1.0).epsilon(1e-12));
  }
  for (int i = 0; i < b.num_vertices; i += 59) {
    double n = norm(value(mesh.normals[i]));
    CHECK(n == doctest::Approx(1.0).epsilon(1e-9));
  }
  MeshValues mv = mesh_values(mesh);
  CHECK(mv.scene_scale > 0.0);
  CHECK(mv.vertices[17].x == mesh.vertices[17].x.v);
}

TEST_CASE("shape basis columns add linearly") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  int k = 2;
  p.alpha[k] = 1.0;
  MeshD mesh = eval_geometry(b, lift_const_scene(p));
  for (int i = 0; i < b.num_vertices; i += 301) {
    for (int c = 0; c < 3; ++c) {
      double base = b.mean_shape[3 * i + c];
      double col = b.shape_basis[std::size_t(3 * i + c) * b.K_s + k];
      double got = c == 0 ? mesh.neutral[i].x.v : c == 1 ? mesh.neutral[i].y.v : mesh.neutral[i].z.v;
      CHECK(got == doctest::Approx(base + col).scale(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("statistical albedos at zero beta are the means") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  AlbedosD alb = eval_albedos(b, lift_const_scene(p));
  for (int i = 0; i < b.num_vertices; i += 173) {
    CHECK(alb.diffuse[i].x.v == doctest::Approx(b.mean_diffuse[3 * i]).epsilon(1e-12));
    CHECK(alb.specular[i].y.v == doctest::Approx(b.mean_specular[3 * i + 1]).epsilon(1e-12));
  }
}

TEST_CASE("lift mirrors parameter values and block ids cover the tape leaves") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  Rng rng(21);
  for (double& a : p.alpha) a = rng.next_double() - 0.5;
  p.rot = {0.1, 0.2, 0.3};
  p.light.coeffs[1][7] = 0.8;
  p.medium_diffuse.at(3, 4, 1) = 0.25;

  Tape tape;
  SceneLift lift = lift_scene(tape, p);
  CHECK(lift.alpha[0].v == p.alpha[0]);
  CHECK(lift.rot.z.v == 0.3);
  CHECK(lift.light[1][7].v == 0.8);
  CHECK(lift.medium_diffuse.at(3, 4, 1).v == 0.25);
  CHECK_FALSE(lift.alpha[0].constant());

  // Every named block reports ids, and block_view exposes a span of the
  // same length over the plain parameters.
  for (const char* name : kBlockNames) {
    auto ids = lift.block_ids(name);
    auto view = block_view(p, name);
    CHECK(ids.size() == view.size());
    CHECK(ids.size() > 0);
  }
  // Constant lift carries the same values with no tape nodes.
  SceneLift cl = lift_const_scene(p);
  CHECK(cl.alpha[0].v == p.alpha[0]);
  CHECK(cl.alpha[0].constant());
  CHECK(cl.medium_diffuse.at(3, 4, 1).constant());
}

TEST_CASE("block_view writes through to the parameters") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  auto view = block_view(p, "trans");
  REQUIRE(view.size() == 3);
  view[2] = -777.0;
  CHECK(p.trans.z == -777.0);
  auto maps = block_view(p, "fine_normal");
  CHECK(maps.size() == std::size_t(b.texture_resolution) * b.texture_resolution * 3);
  CHECK_THROWS((void)block_view(p, "unknown_block"));
}

TEST_CASE("scene parameters round-trip through the directory format") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  Rng rng(77);
  for (double& a : p.alpha) a = rng.next_double() - 0.5;
  for (double& d : p.delta) d = rng.next_double() - 0.5;
  for (double& be : p.beta) be = rng.next_double() - 0.5;
  p.rot = {0.02, -0.01, 0.005};
  p.trans = {1, 2, -900};
  for (auto& ch : p.light.coeffs)
    for (double& c : ch) c = rng.next_double() - 0.5;
  p.medium_diffuse.at(5, 6, 2) = 0.125;  // exactly representable in float
  p.fine_normal.at(2, 2, 0) = 0.25;

  std::string dir = fresh_dir("params-rt");
  save_params(dir, p);
  SceneParams r = load_params(dir, b);
  CHECK(r.alpha == p.alpha);
  CHECK(r.delta == p.delta);
  CHECK(r.beta == p.beta);
  CHECK(r.rot.x == p.rot.x);
  CHECK(r.trans.z == p.trans.z);
  CHECK(r.roughness == p.roughness);
  CHECK(r.light.coeffs == p.light.coeffs);
  CHECK(r.medium_diffuse.at(5, 6, 2) == 0.125);
  CHECK(r.fine_normal.at(2, 2, 0) == 0.25);
  CHECK(r.fine_normal.at(9, 9, 2) == 1.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("exported mesh is a parsable wavefront file") {
  ModelBundle b = make_face_bundle(3, false);
  SceneParams p = SceneParams::init_for(b, 0.35);
  MeshValues mv = mesh_values(eval_geometry(b, lift_const_scene(p)));
  std::string dir = fresh_dir("obj-out");
  std::string path = dir + "/mesh.obj";
  write_obj(path, mv, b);
  std::ifstream in(path);
  REQUIRE(in.good());
  int nv = 0, nf = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("v ", 0) == 0) ++nv;
    if (line.rfind("f ", 0) == 0) ++nf;
  }
  CHECK(nv == b.num_vertices);
  CHECK(nf == b.num_triangles);
  std::filesystem::remove_all(dir);
}

}  // TEST_SUITE
