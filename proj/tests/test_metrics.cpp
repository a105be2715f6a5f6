// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "nerfcc/metrics.hpp"
#include "nerfcc/report.hpp"
#include "testutil.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

using namespace nerfcc;
using nerfcc::test::ScratchDir;

namespace {

ImageBuffer random_image(int w, int h, RandomStream& rng) {
  ImageBuffer im(w, h);
  for (double& v : im.data) v = rng.uniform01();
  return im;
}

Mask random_mask(int w, int h, RandomStream& rng, double p = 0.5) {
  Mask m = make_mask(w, h);
  for (auto& v : m.in) v = rng.uniform01() < p ? 1 : 0;
  return m;
}

double brute_force_cd(const std::vector<ImageBuffer>& images,
                      const std::vector<OverlapMask>& overlaps, int n_bins) {
  double area_sum = 0.0;
  for (const OverlapMask& ov : overlaps) area_sum += static_cast<double>(ov.mask.area());
  double cd = 0.0;
  for (const OverlapMask& ov : overlaps) {
    const ColorHistogram hi = color_histogram(images[ov.i], ov.mask, n_bins);
    const ColorHistogram hj = color_histogram(images[ov.j], ov.mask, n_bins);
    const double w = static_cast<double>(ov.mask.area()) / area_sum;
    cd += w * delta_h(hi, hj) / n_bins;
  }
  return cd;
}

double wrap_angle(double d) {
  d = std::abs(d);
  while (d > 2.0 * std::numbers::pi) d -= 2.0 * std::numbers::pi;
  return d > std::numbers::pi ? 2.0 * std::numbers::pi - d : d;
}

double brute_force_gl(const std::vector<ImageBuffer>& inputs,
                      const std::vector<ImageBuffer>& corrected) {
  double total = 0.0;
  for (size_t n = 0; n < inputs.size(); ++n) {
    const GradientDirectionMap a = gradient_direction_map(inputs[n]);
    const GradientDirectionMap b = gradient_direction_map(corrected[n]);
    double acc = 0.0;
    int count = 0;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x)
        if (a.valid_at(x, y) && b.valid_at(x, y)) {
          acc += wrap_angle(a.angle_at(x, y) - b.angle_at(x, y));
          ++count;
        }
    total += count == 0 ? 0.0 : acc / count;
  }
  return total / static_cast<double>(inputs.size());
}

}  // namespace

TEST_CASE("histogram bin placement follows the floor rule") {
  ImageBuffer im(4, 1);
  im.set_pixel(0, 0, Rgb(0.0, 0.0, 0.0));
  im.set_pixel(1, 0, Rgb(1.0, 1.0, 1.0));
  im.set_pixel(2, 0, Rgb(0.5, 0.25, 0.75));
  im.set_pixel(3, 0, Rgb(0.999, 0.001, 0.5));
  const Mask all = make_mask(4, 1, true);

  const ColorHistogram h = color_histogram(im, all, 4);
  CHECK(h.pixel_count == 4);
  // Channel 0: values 0, 1, 0.5, 0.999 -> bins 0, 3, 2, 3.
  CHECK(h.bins[0][0] == 0.25);
  CHECK(h.bins[0][1] == 0.0);
  CHECK(h.bins[0][2] == 0.25);
  CHECK(h.bins[0][3] == 0.5);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0;
    for (double v : h.bins[c]) sum += v;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }

  Mask partial = make_mask(4, 1);
  partial.set(2, 0, true);
  const ColorHistogram hp = color_histogram(im, partial, 4);
  CHECK(hp.pixel_count == 1);
  CHECK(hp.bins[0][2] == 1.0);

  CHECK_THROWS_AS(color_histogram(im, make_mask(4, 1), 4), DataError);

  Mask wrong = make_mask(3, 1, true);
  CHECK_THROWS_AS(color_histogram(im, wrong, 4), DataError);
}

TEST_CASE("delta_h of identical histograms is zero and disjoint is two") {
  ImageBuffer a(8, 2), b(8, 2);
  for (double& v : a.data) v = 0.1;
  for (double& v : b.data) v = 0.9;
  const Mask all = make_mask(8, 2, true);
  const ColorHistogram ha = color_histogram(a, all, 16);
  const ColorHistogram hb = color_histogram(b, all, 16);
  CHECK(delta_h(ha, ha) == 0.0);
  CHECK(delta_h(ha, hb) == doctest::Approx(2.0).epsilon(1e-12));

  RandomStream rng(substream(71, 1));
  const ImageBuffer r1 = random_image(16, 16, rng);
  const ImageBuffer r2 = random_image(16, 16, rng);
  const Mask m = make_mask(16, 16, true);
  const ColorHistogram h1 = color_histogram(r1, m, 32);
  const ColorHistogram h2 = color_histogram(r2, m, 32);
  double want = 0.0;
  for (int c = 0; c < 3; ++c)
    for (int k = 0; k < 32; ++k) want += std::abs(h1.bins[c][k] - h2.bins[c][k]);
  want /= 3.0;
  CHECK(delta_h(h1, h2) == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("compute_cd weights pairs by mask area") {
  RandomStream rng(substream(71, 2));
  std::vector<ImageBuffer> images;
  for (int i = 0; i < 3; ++i) images.push_back(random_image(8, 8, rng));

  // Identical images: CD is exactly zero whatever the masks.
  CHECK(compute_cd({images[0], images[0]}, {{0, 1, make_mask(8, 8, true)}}, 16) == 0.0);

  // Single pair: weight 1, CD = deltaH / n_bins.
  std::vector<OverlapMask> one;
  one.push_back({0, 1, random_mask(8, 8, rng)});
  std::vector<PairContribution> contribs;
  const double cd_one = compute_cd(images, one, 16, &contribs);
  REQUIRE(contribs.size() == 1);
  CHECK(contribs[0].weight == 1.0);
  const ColorHistogram h0 = color_histogram(images[0], one[0].mask, 16);
  const ColorHistogram h1 = color_histogram(images[1], one[0].mask, 16);
  CHECK(cd_one == doctest::Approx(delta_h(h0, h1) / 16.0).epsilon(1e-14));
  CHECK(contribs[0].delta_h == doctest::Approx(delta_h(h0, h1)).epsilon(1e-14));
  CHECK(contribs[0].contribution == doctest::Approx(cd_one).epsilon(1e-14));

  // Multi-pair: matches the brute-force reweighting; order invariant.
  std::vector<OverlapMask> multi;
  multi.push_back({0, 1, random_mask(8, 8, rng, 0.7)});
  multi.push_back({1, 2, random_mask(8, 8, rng, 0.3)});
  multi.push_back({0, 2, random_mask(8, 8, rng, 0.5)});
  const double got = compute_cd(images, multi, 16);
  CHECK(got == doctest::Approx(brute_force_cd(images, multi, 16)).epsilon(1e-12));
  std::vector<OverlapMask> shuffled = {multi[2], multi[0], multi[1]};
  CHECK(compute_cd(images, shuffled, 16) == doctest::Approx(got).epsilon(1e-14));
}

TEST_CASE("gradient direction map on ramps") {
  // Constant image: no gradient anywhere.
  ImageBuffer flat(8, 8, Rgb(0.4, 0.4, 0.4));
  const GradientDirectionMap fm = gradient_direction_map(flat);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK_FALSE(fm.valid_at(x, y));

  // Horizontal ramp: interior gradient along +x, angle 0.
  ImageBuffer ramp(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp.set_pixel(x, y, Rgb::Constant(0.1 * x));
  const GradientDirectionMap rm = gradient_direction_map(ramp);
  for (int y = 0; y < 8; ++y)
    for (int x = 1; x < 7; ++x) {
      REQUIRE(rm.valid_at(x, y));
      CHECK(std::abs(rm.angle_at(x, y)) <= 1e-12);
    }

  // Diagonal ramp: angle pi/4.
  ImageBuffer diag(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) diag.set_pixel(x, y, Rgb::Constant(0.05 * (x + y)));
  const GradientDirectionMap dm = gradient_direction_map(diag);
  for (int y = 1; y < 7; ++y)
    for (int x = 1; x < 7; ++x) {
      REQUIRE(dm.valid_at(x, y));
      CHECK(dm.angle_at(x, y) == doctest::Approx(std::numbers::pi / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("compute_gl is zero under identity and affine recoloring") {
  ImageBuffer ramp(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x)
      ramp.set_pixel(x, y, Rgb(0.08 * x, 0.05 * x + 0.02 * y, 0.03 * y));
  CHECK(compute_gl({ramp}, {ramp}) == 0.0);

  // A positive affine recoloring preserves every gradient direction.
  const ImageBuffer recolored = perturb_colors(ramp, Rgb(0.6, 0.6, 0.6), Rgb(0.05, 0.05, 0.05),
                                               Rgb::Ones());
  CHECK(compute_gl({ramp}, {recolored}) <= 1e-12);

  // Transposing the ramp turns angle 0 into pi/2.
  ImageBuffer h(10, 10), v(10, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 10; ++x) {
      h.set_pixel(x, y, Rgb::Constant(0.1 * x));
      v.set_pixel(x, y, Rgb::Constant(0.1 * y));
    }
  const double gl = compute_gl({h}, {v});
  CHECK(gl == doctest::Approx(std::numbers::pi / 2.0).epsilon(1e-9));

  // No mutually valid pixels: contributes zero, not NaN.
  ImageBuffer flat(10, 10, Rgb(0.5, 0.5, 0.5));
  CHECK(compute_gl({flat}, {flat}) == 0.0);
}

TEST_CASE("compute_gl matches its brute-force definition") {
  RandomStream rng(substream(71, 3));
  std::vector<ImageBuffer> inputs, corrected;
  for (int n = 0; n < 4; ++n) {
    inputs.push_back(random_image(9, 7, rng));
    corrected.push_back(random_image(9, 7, rng));
  }
  CHECK(compute_gl(inputs, corrected) ==
        doctest::Approx(brute_force_gl(inputs, corrected)).epsilon(1e-12));
}

TEST_CASE("psnr basics") {
  ImageBuffer a(4, 4, Rgb(0.3, 0.5, 0.7));
  CHECK(std::isinf(psnr(a, a)));

  ImageBuffer b = a;
  for (double& v : b.data) v += 0.1;
  CHECK(psnr(b, a) == doctest::Approx(20.0).epsilon(1e-12));

  RandomStream rng(substream(71, 4));
  const ImageBuffer r1 = random_image(6, 6, rng);
  const ImageBuffer r2 = random_image(6, 6, rng);
  double mse = 0.0;
  for (size_t i = 0; i < r1.data.size(); ++i) {
    const double d = r1.data[i] - r2.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(r1.data.size());
  CHECK(psnr(r1, r2) == doctest::Approx(10.0 * std::log10(1.0 / mse)).epsilon(1e-12));

  ImageBuffer wrong(3, 3);
  CHECK_THROWS_AS(psnr(a, wrong), DataError);
}

TEST_CASE("gain-bias baseline undoes a consistent affine distortion") {
  RandomStream rng(substream(71, 5));
  // Base image with rich values, second image affinely distorted.
  ImageBuffer base(12, 12);
  for (double& v : base.data) v = rng.uniform(0.05, 0.45);
  ImageBuffer distorted(12, 12);
  for (size_t i = 0; i < base.data.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    const double gain[3] = {2.0, 1.5, 0.8};
    const double bias[3] = {0.05, -0.02, 0.1};
    distorted.data[i] = gain[c] * base.data[i] + bias[c];
  }
  std::vector<OverlapMask> overlaps;
  overlaps.push_back({0, 1, make_mask(12, 12, true)});
  const std::vector<ImageBuffer> out = baseline_gain_bias({base, distorted}, overlaps);
  REQUIRE(out.size() == 2);
  // Image 0 is the anchor: unchanged.
  for (size_t i = 0; i < base.data.size(); ++i)
    CHECK(out[0].data[i] == doctest::Approx(base.data[i]).epsilon(1e-12));
  // Image 1 is mapped back onto image 0 over the overlap.
  for (size_t i = 0; i < base.data.size(); ++i)
    CHECK(out[1].data[i] == doctest::Approx(base.data[i]).epsilon(1e-6));

  // A single image passes through.
  const std::vector<ImageBuffer> solo = baseline_gain_bias({base}, {});
  CHECK(solo.size() == 1);
  CHECK(solo[0].data == base.data);
}

TEST_CASE("gain-bias baseline requires a connected overlap graph") {
  RandomStream rng(substream(71, 6));
  std::vector<ImageBuffer> images;
  for (int i = 0; i < 4; ++i) images.push_back(random_image(4, 4, rng));
  std::vector<OverlapMask> overlaps;
  overlaps.push_back({0, 1, make_mask(4, 4, true)});
  overlaps.push_back({2, 3, make_mask(4, 4, true)});
  try {
    baseline_gain_bias(images, overlaps);
    FAIL("expected a DataError for the disconnected overlap graph");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("disconnected") != std::string::npos);
  }
}

TEST_CASE("report writers produce the pinned formats") {
  ScratchDir dir("report");
  MetricReport r1;
  r1.method = "plain";
  r1.cd = 0.012345;
  r1.gl = 0.5;
  r1.wall_seconds = 1.25;
  r1.pairs.push_back({0, 1, 1.0, 0.1975, 0.01234375});
  MetricReport r2;
  r2.method = "other";
  r2.cd = 0.002;
  r2.gl = 0.1;
  r2.wall_seconds = 0.5;

  const std::string text = format_report_text({r1, r2});
  CHECK(text.find("Method") != std::string::npos);
  CHECK(text.find("CD") != std::string::npos);
  CHECK(text.find("GL") != std::string::npos);
  CHECK(text.find("T(s)") != std::string::npos);
  CHECK(text.find("plain") != std::string::npos);
  CHECK(text.find("other") != std::string::npos);

  write_report_csv({r1, r2}, dir.str("report.csv"));
  std::ifstream csv(dir.str("report.csv"));
  std::string header;
  std::getline(csv, header);
  CHECK(header == "Method,CD,GL,T(s)");
  std::string row1, row2;
  std::getline(csv, row1);
  std::getline(csv, row2);
  CHECK(row1.substr(0, 6) == "plain,");
  CHECK(row2.substr(0, 6) == "other,");
  // Full precision round trip of the CD column.
  const size_t c0 = row1.find(',');
  const size_t c1 = row1.find(',', c0 + 1);
  CHECK(std::stod(row1.substr(c0 + 1, c1 - c0 - 1)) == r1.cd);

  write_pairs_csv({r1, r2}, dir.str("pairs.csv"));
  std::ifstream pairs(dir.str("pairs.csv"));
  std::getline(pairs, header);
  CHECK(header == "Method,i,j,weight,delta_h,contribution");
  std::getline(pairs, row1);
  CHECK(row1.substr(0, 10) == "plain,0,1,");
}
