#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "n2f/imaging.hpp"
#include "n2f/rng.hpp"
#include "support/check.hpp"

using namespace n2f;
namespace fs = std::filesystem;

namespace {

const fs::path kData = N2F_TEST_DATA;

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "n2f_imaging_test") { fs::create_directories(path); }
  ~TempDir() { fs::remove_all(path); }
};

// Closed-form fixture patterns (see tests/oracles/imaging_fixtures.py).
double pattern(SampleFormat f, int s, int c, int y, int x) {
  switch (f) {
    case SampleFormat::u8: return (x * 7 + y * 13 + c * 50 + s * 31) % 256;
    case SampleFormat::u16: return (x * 997 + y * 4099 + c * 12345 + s * 777) % 65536;
    case SampleFormat::f32: return static_cast<float>((x - 3.5) * 1.25 + y * 0.0625 - c * 100.0 + s * 1000.5);
  }
  return 0;
}

void check_fixture(const char* name, SampleFormat format, int channels, int slices) {
  CAPTURE(name);
  const ImageData img = load_image(kData / "tiff" / name);
  REQUIRE(img.width == 13);
  REQUIRE(img.height == 9);
  REQUIRE(img.channels == channels);
  REQUIRE(img.slices == slices);
  CHECK(img.format == format);
  CHECK(img.data_range == nominal_range(format));
  bool all = true;
  for (int s = 0; s < slices; ++s)
    for (int c = 0; c < channels; ++c) {
      const Plane p = img.plane(s, c);
      for (int y = 0; y < 9; ++y)
        for (int x = 0; x < 13; ++x) all = all && p(y, x) == static_cast<Real>(pattern(format, s, c, y, x));
    }
  CHECK(all);
}

ImageData random_image(int w, int h, int c, int s, SampleFormat f, std::uint64_t seed, double lo, double hi) {
  ImageData img(w, h, c, s, f, nominal_range(f));
  Philox rng(seed, 3);
  for (std::size_t k = 0; k < img.samples.size(); ++k) {
    const double v = lo + (hi - lo) * rng.uniform(k);
    img.samples[k] = static_cast<float>(f == SampleFormat::f32 ? v : std::round(v));
  }
  return img;
}

Plane gray(const char* name) { return load_image(kData / name).plane(0, 0); }

}  // namespace

TEST_CASE("TIFF fixtures written by other encoders") {
  check_fixture("gray8_raw.tif", SampleFormat::u8, 1, 1);
  check_fixture("gray8_lzw.tif", SampleFormat::u8, 1, 1);
  check_fixture("gray8_deflate.tif", SampleFormat::u8, 1, 1);
  check_fixture("gray8_packbits.tif", SampleFormat::u8, 1, 1);
  check_fixture("rgb8_lzw.tif", SampleFormat::u8, 3, 1);
  check_fixture("gray16_deflate_pred.tif", SampleFormat::u16, 1, 1);
  check_fixture("rgb16_planar.tif", SampleFormat::u16, 3, 1);
  check_fixture("float_pil.tif", SampleFormat::f32, 1, 1);
  check_fixture("float_lzw.tif", SampleFormat::f32, 1, 1);
  check_fixture("stack8_5.tif", SampleFormat::u8, 1, 5);
  check_fixture("stack8_pil_4.tif", SampleFormat::u8, 1, 4);
  check_fixture("stack_float_3.tif", SampleFormat::f32, 1, 3);
}

TEST_CASE("PNG fixtures") {
  const ImageData cam = load_image(kData / "camera.png");
  CHECK(cam.width == 128);
  CHECK(cam.height == 128);
  CHECK(cam.channels == 1);
  CHECK(cam.format == SampleFormat::u8);
  CHECK(cam.data_range == 255.0);
}

TEST_CASE("float TIFF round trip is bitwise") {
  TempDir tmp;
  ImageData img = random_image(17, 11, 1, 3, SampleFormat::f32, 4, -80.0, 340.0);
  img.samples[5] = -0.0f;
  img.samples[6] = 1e-42f;  // subnormal
  img.data_range = 255.0;
  save_image(img, tmp.path / "f.tif");
  const ImageData back = load_image(tmp.path / "f.tif");
  CHECK(back.same_layout(img));
  CHECK(back.format == SampleFormat::f32);
  CHECK(back.data_range == 255.0);
  CHECK(testing::bitwise_equal(back.samples, img.samples));

  const ImageData rgb = random_image(5, 4, 3, 1, SampleFormat::f32, 5, 0.0, 1.0);
  save_image(rgb, tmp.path / "rgb.tiff");
  CHECK(testing::bitwise_equal(load_image(tmp.path / "rgb.tiff").samples, rgb.samples));
}

TEST_CASE("integer round trips") {
  TempDir tmp;
  for (SampleFormat f : {SampleFormat::u8, SampleFormat::u16}) {
    const double top = nominal_range(f);
    for (int channels : {1, 2, 3, 4}) {
      const ImageData img = random_image(9, 7, channels, 1, f, 10 + channels, 0.0, top);
      for (const char* ext : {".png", ".tif"}) {
        const auto path = tmp.path / (std::string("i") + ext);
        save_image(img, path);
        const ImageData back = load_image(path);
        CAPTURE(ext);
        CAPTURE(channels);
        CHECK(back.format == f);
        CHECK(back.data_range == top);
        CHECK(back.samples == img.samples);
      }
    }
  }
  ImageData one(1, 1, 1, 1, SampleFormat::u8, 255.0);
  one.samples[0] = 200.0f;
  save_image(one, tmp.path / "200.png");
  const ImageData back = load_image(tmp.path / "200.png");
  CHECK(back.samples[0] == 200.0f);
  CHECK(back.data_range == 255.0);
}

TEST_CASE("integer saves clamp and round half away from zero") {
  TempDir tmp;
  ImageData img(6, 1, 1, 1, SampleFormat::u8, 255.0);
  img.samples = {255.7f, -3.0f, 2.5f, 3.5f, 0.49f, 254.5f};
  save_image(img, tmp.path / "q.png");
  CHECK(load_image(tmp.path / "q.png").samples == std::vector<float>{255, 0, 3, 4, 0, 255});
  img.format = SampleFormat::u16;
  img.samples = {70000.0f, -1.0f, 2.5f, 65534.5f, 1.49f, 100.0f};
  save_image(img, tmp.path / "q.tif");
  CHECK(load_image(tmp.path / "q.tif").samples == std::vector<float>{65535, 0, 3, 65535, 1, 100});
}

TEST_CASE("I/O errors") {
  TempDir tmp;
  CHECK_THROWS(load_image(tmp.path / "missing.png"));
  {
    std::ofstream(tmp.path / "junk.png") << "definitely not an image";
  }
  CHECK_THROWS_AS(load_image(tmp.path / "junk.png"), ImageError);
  const ImageData img = random_image(4, 4, 1, 1, SampleFormat::u8, 1, 0, 255);
  CHECK_THROWS_AS(save_image(img, tmp.path / "x.bmp"), ImageError);
  // Truncated TIFF.
  save_image(img, tmp.path / "t.tif");
  fs::resize_file(tmp.path / "t.tif", 20);
  CHECK_THROWS_AS(load_image(tmp.path / "t.tif"), ImageError);
}

TEST_CASE("Gaussian noise statistics") {
  ImageData clean(481, 321, 1, 1, SampleFormat::u8, 255.0);
  for (int y = 0; y < 321; ++y)
    for (int x = 0; x < 481; ++x) clean.samples[y * 481 + x] = static_cast<float>((x + 2 * y) % 256);
  const ImageData noisy = add_gaussian_noise(clean, 25.0, 2024);
  CHECK(noisy.format == SampleFormat::f32);
  CHECK(noisy.data_range == 255.0);
  const double p = psnr(noisy, clean, 255.0);
  CHECK(std::abs(p - 20.172003435238352) <= 0.10);

  const double n = static_cast<double>(clean.samples.size());
  double sum = 0.0, sq = 0.0;
  bool outside = false;
  for (std::size_t k = 0; k < clean.samples.size(); ++k) {
    const double d = static_cast<double>(noisy.samples[k]) - clean.samples[k];
    sum += d;
    sq += d * d;
    outside = outside || noisy.samples[k] < 0.0f || noisy.samples[k] > 255.0f;
  }
  const double mean = sum / n;
  const double var = sq / n - mean * mean;
  CHECK(std::abs(mean) < 3.0 * 25.0 / std::sqrt(n));
  CHECK(std::abs(var / 625.0 - 1.0) < 0.01);
  CHECK(outside);  // not clipped

  CHECK(add_gaussian_noise(clean, 0.0, 1).samples == clean.samples);
  CHECK(add_gaussian_noise(clean, 25.0, 2024).samples == noisy.samples);
  CHECK_FALSE(add_gaussian_noise(clean, 25.0, 2025).samples == noisy.samples);
  CHECK_THROWS_AS(add_gaussian_noise(clean, -1.0, 1), std::invalid_argument);
}

TEST_CASE("normalize") {
  Plane p(1, 3);
  p.pixels = {0.0f, 127.5f, 255.0f};
  const auto n = normalize(p);
  CHECK(n.plane.pixels == std::vector<Real>{0.0f, 0.5f, 1.0f});
  CHECK(n.range.min == 0.0);
  CHECK(n.range.max == 255.0);
  CHECK_FALSE(n.range.degenerate());

  const auto c = normalize(Plane(3, 3, Real(7)));
  CHECK(c.range.degenerate());
  for (Real v : c.plane.pixels) CHECK(v == Real(0.5));

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Plane x = testing::random_plane(8, 9, seed, -500.0, 900.0);
    const auto y = normalize(x);
    for (Real v : y.plane.pixels) REQUIRE((v >= 0 && v <= 1));
    const Plane back = denormalize(y.plane, y.range);
    // Relative to the data range: normalized values are float32, so samples
    // near zero carry an absolute error of about range * 6e-8.
    const double range = y.range.max - y.range.min;
    for (std::size_t k = 0; k < x.size(); ++k)
      REQUIRE(testing::rel_error(back.pixels[k], x.pixels[k], range) <= 1e-5);
  }

  Plane bad(2, 2);
  bad.pixels[1] = std::numeric_limits<Real>::infinity();
  CHECK_THROWS_AS(normalize(bad), std::invalid_argument);

  // Per-channel ImageData version.
  ImageData img(4, 3, 2, 2, SampleFormat::f32, 0.0);
  for (std::size_t k = 0; k < img.samples.size(); ++k) img.samples[k] = static_cast<float>(k * k % 37) - 10.0f;
  const auto [normed, params] = normalize(img);
  REQUIRE(params.channels.size() == 2);
  for (int c = 0; c < 2; ++c) {
    double lo = 1e9, hi = -1e9;
    for (int s = 0; s < 2; ++s)
      for (Real v : img.plane(s, c).pixels) {
        lo = std::min<double>(lo, v);
        hi = std::max<double>(hi, v);
      }
    CHECK(params.channels[c].min == lo);
    CHECK(params.channels[c].max == hi);
  }
  const ImageData back = denormalize(normed, params);
  for (std::size_t k = 0; k < img.samples.size(); ++k)
    CHECK(testing::rel_error(back.samples[k], img.samples[k], 1.0) <= 1e-5);
}

TEST_CASE("PSNR") {
  Plane a = testing::random_plane(8, 8, 1, 0.0, 255.0);
  for (Real& v : a.pixels) v = std::round(v);  // keeps the offsets below exact
  CHECK(psnr(a, a, 255.0) == kPsnrIdentical);
  CHECK(std::isinf(kPsnrIdentical));
  Plane b = a;
  for (Real& v : b.pixels) v += Real(255);
  CHECK(std::abs(psnr(a, b, 255.0)) < 1e-12);
  Plane c = a;
  for (Real& v : c.pixels) v += Real(25);
  // 10 log10(255^2 / 625)
  CHECK(psnr(a, c, 255.0) == doctest::Approx(20.172003435238352).epsilon(1e-12));
  // Strictly decreasing in the error.
  double previous = kPsnrIdentical;
  for (Real step : {0.001f, 0.01f, 0.1f, 1.0f, 10.0f}) {
    Plane d = a;
    d.pixels[3] += step;
    const double now = psnr(a, d, 255.0);
    CHECK(now < previous);
    previous = now;
  }
  CHECK_THROWS(psnr(a, Plane(8, 7), 255.0));
  CHECK_THROWS(psnr(a, a, 0.0));
}

TEST_CASE("SSIM against frozen reference values") {
  const Plane cam = gray("camera.png");
  const Plane coffee = gray("coffee.png");
  CHECK(ssim(cam, cam, 255.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim(cam, coffee, 255.0) == doctest::Approx(0.163735400078717).epsilon(1e-9));
  CHECK(ssim(coffee, cam, 255.0) == doctest::Approx(ssim(cam, coffee, 255.0)).epsilon(1e-14));

  Plane inverted = cam;
  for (Real& v : inverted.pixels) v = Real(255) - v;
  const double inv = ssim(cam, inverted, 255.0);
  CHECK(inv < 0.5);
  CHECK(inv == doctest::Approx(-0.279432735629439).epsilon(1e-9));

  Plane wobble = cam;
  for (int y = 0; y < 128; ++y)
    for (int x = 0; x < 128; ++x) wobble(y, x) += static_cast<Real>((x * 5 + y * 11) % 17 - 8);
  CHECK(ssim(cam, wobble, 255.0) == doctest::Approx(0.898752610935276).epsilon(1e-9));

  CHECK_THROWS_AS(ssim(Plane(10, 20), Plane(10, 20), 1.0), ShapeError);
}

TEST_CASE("split and merge channels") {
  const ImageData rgb = random_image(6, 5, 3, 2, SampleFormat::u8, 9, 0, 255);
  const auto parts = split_channels(rgb);
  REQUIRE(parts.size() == 3);
  for (int c = 0; c < 3; ++c) {
    CHECK(parts[c].channels == 1);
    CHECK(parts[c].slices == 2);
    for (int s = 0; s < 2; ++s) CHECK(parts[c].plane(s, 0) == rgb.plane(s, c));
  }
  const ImageData merged = merge_channels(parts);
  CHECK(merged.same_layout(rgb));
  CHECK(testing::bitwise_equal(merged.samples, rgb.samples));

  const ImageData mono = random_image(6, 5, 1, 1, SampleFormat::f32, 2, 0, 1);
  const auto single = split_channels(mono);
  REQUIRE(single.size() == 1);
  CHECK(single[0].samples == mono.samples);

  auto mismatched = parts;
  mismatched[1] = random_image(6, 4, 1, 2, SampleFormat::u8, 1, 0, 255);
  CHECK_THROWS(merge_channels(mismatched));
}
