// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nerfcc/camera.hpp"
#include "nerfcc/image.hpp"
#include "nerfcc/manifest.hpp"
#include "nerfcc/oracle.hpp"
#include "nerfcc/scene.hpp"
#include "nerfcc/synth.hpp"
#include "testutil.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <fstream>

using namespace nerfcc;
using nerfcc::test::ScratchDir;
using nerfcc::test::axis_camera;
using nerfcc::test::sphere_scene;

namespace {

template <typename E, typename F>
std::string thrown_message(F&& fn) {
  try {
    fn();
  } catch (const E& e) {
    return e.what();
  }
  FAIL("expected exception was not thrown");
  return {};
}

}  // namespace

TEST_CASE("png byte mapping is exact in both directions") {
  ScratchDir dir("png");
  ImageBuffer im(16, 16);
  for (int k = 0; k < 256; ++k) {
    const double v = k / 255.0;
    im.set_pixel(k % 16, k / 16, Rgb(v, v, v));
  }
  save_image(im, dir.str("bytes.png"));
  const ImageBuffer back = load_image(dir.str("bytes.png"));
  REQUIRE(back.width == 16);
  REQUIRE(back.height == 16);
  for (int k = 0; k < 256; ++k)
    CHECK(back.at(k % 16, k / 16, 0) == k / 255.0);
}

TEST_CASE("png save rounds half up and clamps") {
  ScratchDir dir("png");
  ImageBuffer im(3, 1);
  im.set_pixel(0, 0, Rgb(0.5, 0.0, 1.0));
  im.set_pixel(1, 0, Rgb(-0.2, 1.5, 0.25));
  im.set_pixel(2, 0, Rgb(1.0 / 255.0, 0.9999, 127.49 / 255.0));
  save_image(im, dir.str("round.png"));
  const ImageBuffer back = load_image(dir.str("round.png"));
  CHECK(back.at(0, 0, 0) == 128.0 / 255.0);  // 0.5*255+0.5 = 128.0
  CHECK(back.at(0, 0, 1) == 0.0);
  CHECK(back.at(0, 0, 2) == 1.0);
  CHECK(back.at(1, 0, 0) == 0.0);    // clamped below
  CHECK(back.at(1, 0, 1) == 1.0);    // clamped above
  CHECK(back.at(1, 0, 2) == 64.0 / 255.0);
  CHECK(back.at(2, 0, 0) == 1.0 / 255.0);
  CHECK(back.at(2, 0, 1) == 1.0);
  CHECK(back.at(2, 0, 2) == 127.0 / 255.0);
}

TEST_CASE("png round trip error is at most half a byte step") {
  ScratchDir dir("png");
  RandomStream rng(substream(11, 1));
  ImageBuffer im(32, 8);
  for (size_t i = 0; i < im.data.size(); ++i) im.data[i] = rng.uniform01();
  save_image(im, dir.str("rt.png"));
  const ImageBuffer back = load_image(dir.str("rt.png"));
  for (size_t i = 0; i < im.data.size(); ++i)
    CHECK(std::abs(back.data[i] - im.data[i]) <= 0.5 / 255.0 + 1e-12);
}

TEST_CASE("load_image names the missing path") {
  ScratchDir dir("png");
  const std::string msg =
      thrown_message<DataError>([&] { load_image(dir.str("missing.png")); });
  CHECK(msg.find("missing.png") != std::string::npos);
}

TEST_CASE("perturb_colors applies gain, gamma, bias and clamps") {
  ImageBuffer im(2, 1);
  im.set_pixel(0, 0, Rgb(0.25, 0.25, 0.5));
  im.set_pixel(1, 0, Rgb(0.9, 0.1, 0.0));

  const ImageBuffer id = perturb_colors(im, Rgb::Ones(), Rgb::Zero(), Rgb::Ones());
  for (size_t i = 0; i < im.data.size(); ++i) CHECK(id.data[i] == im.data[i]);

  const ImageBuffer g = perturb_colors(im, Rgb(2.0, 1.0, 1.0), Rgb::Zero(), Rgb(1.0, 0.5, 1.0));
  CHECK(g.at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-15));   // 2 * 0.25
  CHECK(g.at(0, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));   // 0.25^0.5
  CHECK(g.at(1, 0, 0) == 1.0);                                   // 1.8 clamps
  const ImageBuffer b = perturb_colors(im, Rgb::Ones(), Rgb(-0.3, 0.2, 0.0), Rgb::Ones());
  CHECK(b.at(1, 0, 1) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(b.at(1, 0, 2) == 0.0);  // 0 - 0 stays 0
  CHECK(b.at(0, 0, 0) == 0.0);  // 0.25 - 0.3 clamps at 0

  CHECK_THROWS_AS(perturb_colors(im, Rgb(0.0, 1.0, 1.0), Rgb::Zero(), Rgb::Ones()), DataError);
  CHECK_THROWS_AS(perturb_colors(im, Rgb::Ones(), Rgb::Zero(), Rgb(1.0, -2.0, 1.0)), DataError);
}

TEST_CASE("mask io round trips and uses the red channel rule") {
  ScratchDir dir("mask");
  Mask m = make_mask(5, 4);
  m.set(0, 0, true);
  m.set(4, 3, true);
  m.set(2, 1, true);
  CHECK(m.area() == 3);
  save_mask(m, dir.str("m.png"));
  const Mask back = load_mask(dir.str("m.png"));
  REQUIRE(back.width == 5);
  REQUIRE(back.height == 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 5; ++x) CHECK(back.at(x, y) == m.at(x, y));

  ImageBuffer im(2, 1);
  im.set_pixel(0, 0, Rgb(0.6, 0.0, 0.0));
  im.set_pixel(1, 0, Rgb(0.4, 1.0, 1.0));
  save_image(im, dir.str("red.png"));
  const Mask red = load_mask(dir.str("red.png"));
  CHECK(red.at(0, 0));
  CHECK_FALSE(red.at(1, 0));
}

TEST_CASE("generate_ray matches hand-computed directions") {
  const PinholeCamera cam = axis_camera(3, 3, 1.0, Vec3(0.2, -0.3, 0.1), 0.5, 4.0);
  const Ray center = cam.generate_ray(1, 1);
  CHECK(center.direction.isApprox(Vec3(0, 0, 1), 1e-15));
  CHECK(center.origin.isApprox(Vec3(0.2, -0.3, 0.1), 0.0));
  CHECK(center.near == 0.5);
  CHECK(center.far == 4.0);
  CHECK(center.at(2.0).isApprox(Vec3(0.2, -0.3, 2.1), 1e-15));

  const Ray off = cam.generate_ray(2, 1);
  CHECK(off.direction.isApprox(Vec3(1, 0, 1).normalized(), 1e-15));

  PinholeCamera rot = cam;
  rot.rotation = Eigen::AngleAxisd(M_PI / 2.0, Vec3::UnitY()).toRotationMatrix();
  rot.validate();
  CHECK(rot.generate_ray(1, 1).direction.isApprox(Vec3(1, 0, 0), 1e-12));
}

TEST_CASE("generate_ray directions are unit for random cameras") {
  RandomStream rng(substream(7, 2));
  for (int trial = 0; trial < 20; ++trial) {
    PinholeCamera cam = axis_camera(7, 5, rng.uniform(0.5, 3.0), Vec3::Zero(), 0.1, 10.0);
    cam.fy = rng.uniform(0.5, 3.0);
    cam.cx = rng.uniform(0.0, 7.0);
    cam.cy = rng.uniform(0.0, 5.0);
    const Eigen::Quaterniond q(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                               rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    cam.rotation = q.normalized().toRotationMatrix();
    cam.validate();
    for (int py = 0; py < cam.height; ++py)
      for (int px = 0; px < cam.width; ++px)
        CHECK(std::abs(cam.generate_ray(px, py).direction.norm() - 1.0) <= 1e-12);
  }
}

TEST_CASE("generate_ray rejects out-of-range pixel indices") {
  const PinholeCamera cam = axis_camera(4, 3, 2.0, Vec3::Zero(), 0.1, 5.0);
  CHECK_THROWS_AS(cam.generate_ray(-1, 0), DataError);
  CHECK_THROWS_AS(cam.generate_ray(4, 0), DataError);
  CHECK_THROWS_AS(cam.generate_ray(0, -1), DataError);
  CHECK_THROWS_AS(cam.generate_ray(0, 3), DataError);
}

TEST_CASE("camera validate rejects malformed poses") {
  PinholeCamera cam = axis_camera(4, 4, 2.0, Vec3::Zero(), 0.1, 5.0);
  cam.validate();

  PinholeCamera bad = cam;
  bad.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(bad.validate(), DataError);

  bad = cam;
  bad.rotation.col(2) *= -1.0;  // mirror: det -1
  CHECK_THROWS_AS(bad.validate(), DataError);

  bad = cam;
  bad.near = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cam;
  bad.far = bad.near;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = cam;
  bad.fx = 0.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("project inverts generate_ray in pixel-index coordinates") {
  RandomStream rng(substream(7, 3));
  for (int trial = 0; trial < 10; ++trial) {
    PinholeCamera cam = axis_camera(9, 6, rng.uniform(1.0, 3.0), Vec3(0.3, 0.1, -0.2), 0.1, 10.0);
    const Eigen::Quaterniond q(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0),
                               rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    cam.rotation = q.normalized().toRotationMatrix();
    cam.validate();
    for (int py = 0; py < cam.height; py += 2)
      for (int px = 0; px < cam.width; px += 2) {
        const Ray ray = cam.generate_ray(px, py);
        double u = 0.0, v = 0.0;
        REQUIRE(cam.project(ray.at(1.7), u, v));
        CHECK(std::abs(u - px) <= 1e-9);
        CHECK(std::abs(v - py) <= 1e-9);
        CHECK(cam.in_frustum(ray.at(1.7)));
      }
    const Ray ray = cam.generate_ray(4, 3);
    double u = 0.0, v = 0.0;
    CHECK_FALSE(cam.project(ray.at(-2.0), u, v));  // behind the camera
    CHECK_FALSE(cam.in_frustum(ray.at(-2.0)));
  }
}

TEST_CASE("scene json round trips and rejects unknown keys") {
  ScratchDir dir("scene");
  SceneSpec scene = sphere_scene(1.25, 30.0, Rgb(0.8, 0.3, 0.2), Rgb(0.1, 0.2, 0.3));
  Primitive box;
  box.kind = Primitive::Kind::Box;
  box.center = Vec3(0.5, -0.25, 2.0);
  box.size = Vec3(1.0, 2.0, 0.5);
  box.density = 12.0;
  box.albedo = Rgb(0.2, 0.9, 0.4);
  scene.primitives.push_back(box);

  save_scene(scene, dir.str("scene.json"));
  const SceneSpec back = load_scene(dir.str("scene.json"));
  REQUIRE(back.primitives.size() == 2);
  CHECK(back.background.isApprox(scene.background, 0.0));
  CHECK(back.primitives[0].kind == Primitive::Kind::Sphere);
  CHECK(back.primitives[0].size[0] == 1.25);
  CHECK(back.primitives[1].kind == Primitive::Kind::Box);
  CHECK(back.primitives[1].size.isApprox(box.size, 0.0));
  CHECK(back.primitives[1].albedo.isApprox(box.albedo, 0.0));

  std::ofstream bad(dir.str("bad.json"));
  bad << R"({"background":[0,0,0],"prims":[]})";
  bad.close();
  const std::string msg = thrown_message<DataError>([&] { load_scene(dir.str("bad.json")); });
  CHECK(msg.find("prims") != std::string::npos);

  std::ofstream bad2(dir.str("bad2.json"));
  bad2 << R"({"primitives":[{"kind":"sphere","center":[0,0,0],"radius":1,)"
       << R"("density":1,"albedo":[0.5,0.5,0.5],"color":[1,0,0]}]})";
  bad2.close();
  CHECK_THROWS_AS(load_scene(dir.str("bad2.json")), DataError);
}

TEST_CASE("scene queries follow the highest-density-wins rule") {
  SceneSpec scene = sphere_scene(1.0, 5.0, Rgb(1.0, 0.0, 0.0));
  Primitive inner;
  inner.kind = Primitive::Kind::Sphere;
  inner.center = Vec3::Zero();
  inner.size = Vec3(0.5, 0.0, 0.0);
  inner.density = 20.0;
  inner.albedo = Rgb(0.0, 1.0, 0.0);
  scene.primitives.push_back(inner);

  CHECK(scene.density_at(Vec3(0.25, 0.0, 0.0)) == 20.0);
  CHECK(scene.albedo_at(Vec3(0.25, 0.0, 0.0)).isApprox(Rgb(0.0, 1.0, 0.0), 0.0));
  CHECK(scene.density_at(Vec3(0.75, 0.0, 0.0)) == 5.0);
  CHECK(scene.albedo_at(Vec3(0.75, 0.0, 0.0)).isApprox(Rgb(1.0, 0.0, 0.0), 0.0));
  CHECK(scene.density_at(Vec3(2.0, 0.0, 0.0)) == 0.0);
  CHECK(scene.albedo_at(Vec3(2.0, 0.0, 0.0)).isApprox(Rgb::Zero(), 0.0));

  CHECK(scene.normal_at(Vec3(0.9, 0.0, 0.0)).isApprox(Vec3(1, 0, 0), 1e-15));
  CHECK(scene.normal_at(Vec3(0.0, 0.0, -0.8)).isApprox(Vec3(0, 0, -1), 1e-15));

  Primitive box;
  box.kind = Primitive::Kind::Box;
  box.center = Vec3(4.0, 0.0, 0.0);
  box.size = Vec3(2.0, 2.0, 2.0);
  box.density = 1.0;
  box.albedo = Rgb(0.5, 0.5, 0.5);
  SceneSpec boxed;
  boxed.primitives.push_back(box);
  CHECK(boxed.normal_at(Vec3(4.9, 0.1, 0.0)).isApprox(Vec3(1, 0, 0), 0.0));
  CHECK(boxed.normal_at(Vec3(4.0, -0.95, 0.2)).isApprox(Vec3(0, -1, 0), 0.0));
  CHECK(boxed.normal_at(Vec3(3.8, 0.0, 0.99)).isApprox(Vec3(0, 0, 1), 0.0));
}

TEST_CASE("optical depth of a centered chord equals 2 r sigma") {
  const double r = 0.8, sigma = 7.5;
  const SceneSpec scene = sphere_scene(r, sigma, Rgb(0.5, 0.5, 0.5));
  Ray ray;
  ray.origin = Vec3(-5.0, 0.0, 0.0);
  ray.direction = Vec3(1.0, 0.0, 0.0);
  ray.near = 0.5;
  ray.far = 10.0;
  CHECK(scene.optical_depth(ray) == doctest::Approx(2.0 * r * sigma).epsilon(1e-12));
  CHECK(scene.first_hit(ray).has_value());
  CHECK(*scene.first_hit(ray) == doctest::Approx(5.0 - r).epsilon(1e-12));

  Ray miss = ray;
  miss.origin = Vec3(-5.0, 2.0, 0.0);
  CHECK(scene.optical_depth(miss) == 0.0);
  CHECK_FALSE(scene.first_hit(miss).has_value());

  Ray clipped = ray;
  clipped.far = 5.0;  // stops at the center
  CHECK(scene.optical_depth(clipped) == doctest::Approx(r * sigma).epsilon(1e-12));

  Ray inside = ray;
  inside.origin = Vec3::Zero();
  inside.near = 0.1;
  CHECK(*scene.first_hit(inside) == 0.1);  // already in the medium
}

TEST_CASE("scene validate rejects bad primitives") {
  SceneSpec bad = sphere_scene(1.0, -1.0, Rgb(0.5, 0.5, 0.5));
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = sphere_scene(0.0, 1.0, Rgb(0.5, 0.5, 0.5));
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = sphere_scene(1.0, 1.0, Rgb(1.5, 0.5, 0.5));
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = sphere_scene(1.0, 1.0, Rgb(0.5, 0.5, 0.5), Rgb(-0.1, 0.0, 0.0));
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("manifest json round trips") {
  ScratchDir dir("manifest");
  DatasetManifest m;
  m.seed = 42;
  ManifestImage im;
  im.path = "view_000.png";
  im.camera = axis_camera(8, 6, 2.0, Vec3(1.0, 2.0, 3.0), 0.5, 9.0);
  SHLighting light = SHLighting::dc_white();
  light.coeff[2] = Rgb(0.1, 0.2, 0.3);
  im.lighting = light;
  m.images.push_back(im);
  ManifestImage im2 = im;
  im2.path = "view_001.png";
  im2.lighting.reset();
  m.images.push_back(im2);
  m.overlaps.push_back({0, 1, "mask_000_001.png"});

  save_manifest(m, dir.str("manifest.json"));
  const DatasetManifest back = load_manifest(dir.str("manifest.json"));
  REQUIRE(back.images.size() == 2);
  REQUIRE(back.overlaps.size() == 1);
  CHECK(back.seed == 42);
  CHECK(back.images[0].path == "view_000.png");
  CHECK(back.images[0].camera.rotation.isApprox(im.camera.rotation, 0.0));
  CHECK(back.images[0].camera.translation.isApprox(im.camera.translation, 0.0));
  CHECK(back.images[0].camera.fx == 2.0);
  REQUIRE(back.images[0].lighting.has_value());
  CHECK(back.images[0].lighting->coeff[2].isApprox(Rgb(0.1, 0.2, 0.3), 0.0));
  CHECK_FALSE(back.images[1].lighting.has_value());
  CHECK(back.overlaps[0].i == 0);
  CHECK(back.overlaps[0].j == 1);
  CHECK(back.base_dir == dir.str());
  CHECK(back.resolve("view_000.png") == dir.str("view_000.png"));
}

TEST_CASE("manifest rejects unknown keys and malformed poses") {
  ScratchDir dir("manifest");
  std::ofstream out(dir.str("m.json"));
  out << R"({"seed":1,"images":[],"overlaps":[],"extra":5})";
  out.close();
  const std::string msg =
      thrown_message<DataError>([&] { load_manifest(dir.str("m.json")); });
  CHECK(msg.find("extra") != std::string::npos);

  std::ofstream out2(dir.str("m2.json"));
  out2 << R"({"images":[{"path":"a.png","width":2,"height":2,"fx":1,"fy":1,"cx":1,"cy":1,)"
       << R"("near":0.1,"far":1.0,"pose":[1,0,0,0,1,0,0,0,1]}]})";
  out2.close();
  CHECK_THROWS_AS(load_manifest(dir.str("m2.json")), DataError);

  std::ofstream out3(dir.str("m3.json"));
  out3 << R"({"images":[{"path":"a.png","width":2,"height":2,"fx":1,"fy":1,"cx":1,"cy":1,)"
       << R"("near":0.1,"far":1.0,"pose":[1,0,0,0,1,0,0,0,1,0,0,0],"flare":1}]})";
  out3.close();
  CHECK_THROWS_AS(load_manifest(dir.str("m3.json")), DataError);
}

TEST_CASE("lighting flat encoding is coefficient-major with channels inner") {
  SHLighting l = SHLighting::dc_white();
  l.coeff[1] = Rgb(0.5, 0.25, 0.125);
  const std::vector<double> flat = lighting_to_flat(l);
  REQUIRE(flat.size() == 27);
  CHECK(flat[0] == l.coeff[0][0]);
  CHECK(flat[3] == 0.5);
  CHECK(flat[4] == 0.25);
  CHECK(flat[5] == 0.125);
  const SHLighting back = lighting_from_flat(flat);
  for (int k = 0; k < kShCoeffs; ++k) CHECK(back.coeff[k].isApprox(l.coeff[k], 0.0));
  CHECK_THROWS_AS(lighting_from_flat(std::vector<double>(26, 0.0)), DataError);
}

TEST_CASE("oracle renders background exactly for an empty scene") {
  SceneSpec scene;
  scene.background = Rgb(0.2, 0.5, 0.7);
  const PinholeCamera cam = axis_camera(4, 4, 2.0, Vec3::Zero(), 0.5, 3.0);
  const ImageBuffer im = render_oracle(scene, cam, SHLighting::dc_white(), 64);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(im.pixel(x, y).isApprox(scene.background, 0.0));
}

TEST_CASE("oracle converges to albedo for an opaque sphere under flat light") {
  const Rgb albedo(0.8, 0.3, 0.2);
  const SceneSpec scene = sphere_scene(1.0, 500.0, albedo, Rgb::Zero());
  SynthConfig cfg;
  cfg.n_views = 4;
  cfg.width = 16;
  cfg.height = 16;
  const PinholeCamera cam = ring_camera(cfg, 0);
  const ImageBuffer im = render_oracle(scene, cam, SHLighting::dc_white(), 2048);
  const Rgb center = im.pixel(8, 8);
  for (int c = 0; c < 3; ++c) CHECK(std::abs(center[c] - albedo[c]) <= 1e-3);
}

TEST_CASE("oracle limb darkens under a z-gradient lighting") {
  const SceneSpec scene = sphere_scene(1.0, 500.0, Rgb(0.5, 0.5, 0.5));
  // Camera on -z looking at the sphere: the front-face normal is (0,0,-1),
  // limb normals tilt toward +-y, so a -z lighting band dims the limb.
  const PinholeCamera cam = axis_camera(33, 33, 48.0, Vec3(0.0, 0.0, -4.0), 2.0, 6.0);
  SHLighting l = SHLighting::dc_white();
  l.coeff[2] = Rgb::Constant(-0.6);
  const ImageBuffer im = render_oracle(scene, cam, l, 1024);
  const double center = im.pixel(16, 16)[0];
  const double limb = im.pixel(16, 4)[0];
  CHECK(limb > 0.5);  // still brightened relative to flat albedo
  CHECK(center > limb + 0.05);
}

TEST_CASE("oracle render is deterministic") {
  const SceneSpec scene = sphere_scene(1.0, 30.0, Rgb(0.6, 0.4, 0.2), Rgb(0.1, 0.1, 0.1));
  SynthConfig cfg;
  cfg.n_views = 3;
  cfg.width = 12;
  cfg.height = 9;
  const PinholeCamera cam = ring_camera(cfg, 1);
  const ImageBuffer a = render_oracle(scene, cam, SHLighting::dc_white(), 256);
  const ImageBuffer b = render_oracle(scene, cam, SHLighting::dc_white(), 256);
  CHECK(a.data == b.data);
}
