#include "n2f/imaging.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "n2f/rng.hpp"

namespace n2f {
namespace {

constexpr std::uint64_t kNoiseStream = 0x6e6f697365ULL;  // "noise"
constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;

void require_same(const Plane& a, const Plane& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(what) + ": shapes differ (" + std::to_string(a.height) + "x" +
                     std::to_string(a.width) + " vs " + std::to_string(b.height) + "x" + std::to_string(b.width) + ")");
  }
}

void require_same(const ImageData& a, const ImageData& b, const char* what) {
  if (!a.same_layout(b)) throw ShapeError(std::string(what) + ": image layouts differ");
}

std::array<double, kSsimWindow> gaussian_taps() {
  std::array<double, kSsimWindow> taps{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    taps[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
    sum += taps[i];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable "valid" Gaussian filtering of a double field.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w) {
  static const auto taps = gaussian_taps();
  const int oh = h - kSsimWindow + 1;
  const int ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * src[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += taps[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

}  // namespace

ImageData::ImageData(int w, int h, int c, int s, SampleFormat fmt, double range)
    : width(w), height(h), channels(c), slices(s), format(fmt), data_range(range) {
  if (w < 1 || h < 1 || c < 1 || s < 1) throw ImageError("image dimensions must be >= 1");
  const std::uint64_t total = static_cast<std::uint64_t>(w) * h * c * s;
  if (total > (std::uint64_t{1} << 34)) throw ImageError("image too large");
  samples.assign(total, 0.0f);
}

void ImageData::check() const {
  if (width < 1 || height < 1 || channels < 1 || slices < 1) throw ImageError("image dimensions must be >= 1");
  if (samples.size() != plane_size() * channels * slices) throw ImageError("image sample count does not match dimensions");
}

Plane ImageData::plane(int slice, int channel) const {
  const auto first = samples.begin() + static_cast<std::ptrdiff_t>(plane_offset(slice, channel));
  return Plane(height, width, std::vector<Real>(first, first + static_cast<std::ptrdiff_t>(plane_size())));
}

void ImageData::set_plane(int slice, int channel, const Plane& p) {
  if (p.height != height || p.width != width) throw ShapeError("set_plane: plane shape does not match image");
  std::transform(p.pixels.begin(), p.pixels.end(), samples.begin() + static_cast<std::ptrdiff_t>(plane_offset(slice, channel)),
                 [](Real v) { return static_cast<float>(v); });
}

double nominal_range(SampleFormat format) {
  switch (format) {
    case SampleFormat::u8: return 255.0;
    case SampleFormat::u16: return 65535.0;
    case SampleFormat::f32: return 0.0;
  }
  return 0.0;
}

ImageData add_gaussian_noise(const ImageData& image, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("add_gaussian_noise: sigma must be >= 0");
  image.check();
  ImageData out = image;
  out.format = SampleFormat::f32;
  if (sigma == 0.0) return out;
  const Philox stream(seed, kNoiseStream);
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    out.samples[k] = static_cast<float>(static_cast<double>(image.samples[k]) + sigma * stream.normal(k));
  }
  return out;
}

NormalizedPlane normalize(const Plane& plane) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (Real v : plane.pixels) {
    if (!std::isfinite(v)) throw std::invalid_argument("normalize: non-finite sample");
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  NormRange range{lo, hi};
  return {normalize_with(plane, range), range};
}

Plane normalize_with(const Plane& plane, const NormRange& range) {
  Plane out(plane.height, plane.width);
  if (range.degenerate()) {
    std::fill(out.pixels.begin(), out.pixels.end(), Real(0.5));
    return out;
  }
  const double scale = 1.0 / (range.max - range.min);
  for (std::size_t k = 0; k < plane.size(); ++k) {
    out.pixels[k] = static_cast<Real>((static_cast<double>(plane.pixels[k]) - range.min) * scale);
  }
  return out;
}

Plane denormalize(const Plane& plane, const NormRange& range) {
  Plane out(plane.height, plane.width);
  if (range.degenerate()) {
    std::fill(out.pixels.begin(), out.pixels.end(), static_cast<Real>(range.min));
    return out;
  }
  const double span = range.max - range.min;
  for (std::size_t k = 0; k < plane.size(); ++k) {
    out.pixels[k] = static_cast<Real>(static_cast<double>(plane.pixels[k]) * span + range.min);
  }
  return out;
}

std::pair<ImageData, NormParams> normalize(const ImageData& image) {
  image.check();
  ImageData out = image;
  NormParams params;
  const std::size_t plane = image.plane_size();
  for (int c = 0; c < image.channels; ++c) {
    NormRange r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (int s = 0; s < image.slices; ++s) {
      const float* p = image.samples.data() + image.plane_offset(s, c);
      for (std::size_t k = 0; k < plane; ++k) {
        if (!std::isfinite(p[k])) throw std::invalid_argument("normalize: non-finite sample");
        r.min = std::min<double>(r.min, p[k]);
        r.max = std::max<double>(r.max, p[k]);
      }
    }
    for (int s = 0; s < image.slices; ++s) out.set_plane(s, c, normalize_with(image.plane(s, c), r));
    params.channels.push_back(r);
  }
  return {std::move(out), std::move(params)};
}

ImageData denormalize(const ImageData& image, const NormParams& params) {
  image.check();
  if (params.channels.size() != static_cast<std::size_t>(image.channels)) {
    throw std::invalid_argument("denormalize: parameter count does not match channels");
  }
  ImageData out = image;
  for (int c = 0; c < image.channels; ++c)
    for (int s = 0; s < image.slices; ++s) out.set_plane(s, c, denormalize(image.plane(s, c), params.channels[c]));
  return out;
}

double mse(const Plane& a, const Plane& b) {
  require_same(a, b, "mse");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = static_cast<double>(a.pixels[k]) - b.pixels[k];
    sum += d * d;
  }
  return sum / static_cast<double>(a.size());
}

namespace {
double psnr_from_mse(double err, double data_range) {
  if (!(data_range > 0.0)) throw std::invalid_argument("psnr: data_range must be > 0");
  if (err == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(data_range * data_range / err);
}
}  // namespace

double psnr(const Plane& a, const Plane& b, double data_range) { return psnr_from_mse(mse(a, b), data_range); }

double psnr(const ImageData& a, const ImageData& b, double data_range) {
  require_same(a, b, "psnr");
  double sum = 0.0;
  for (std::size_t k = 0; k < a.samples.size(); ++k) {
    const double d = static_cast<double>(a.samples[k]) - b.samples[k];
    sum += d * d;
  }
  return psnr_from_mse(sum / static_cast<double>(a.samples.size()), data_range);
}

double ssim(const Plane& a, const Plane& b, double data_range) {
  require_same(a, b, "ssim");
  if (a.height < kSsimWindow || a.width < kSsimWindow) {
    throw ShapeError("ssim: image smaller than the 11x11 window");
  }
  if (!(data_range > 0.0)) throw std::invalid_argument("ssim: data_range must be > 0");
  const int h = a.height;
  const int w = a.width;
  const std::size_t count = a.size();
  std::vector<double> fa(count), fb(count), faa(count), fbb(count), fab(count);
  for (std::size_t k = 0; k < count; ++k) {
    fa[k] = a.pixels[k];
    fb[k] = b.pixels[k];
    faa[k] = fa[k] * fa[k];
    fbb[k] = fb[k] * fb[k];
    fab[k] = fa[k] * fb[k];
  }
  const auto mu_a = filter_valid(fa, h, w);
  const auto mu_b = filter_valid(fb, h, w);
  const auto e_aa = filter_valid(faa, h, w);
  const auto e_bb = filter_valid(fbb, h, w);
  const auto e_ab = filter_valid(fab, h, w);
  const double c1 = (0.01 * data_range) * (0.01 * data_range);
  const double c2 = (0.03 * data_range) * (0.03 * data_range);
  double total = 0.0;
  for (std::size_t k = 0; k < mu_a.size(); ++k) {
    const double ma = mu_a[k];
    const double mb = mu_b[k];
    const double va = e_aa[k] - ma * ma;
    const double vb = e_bb[k] - mb * mb;
    const double cov = e_ab[k] - ma * mb;
    total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

double ssim(const ImageData& a, const ImageData& b, double data_range) {
  require_same(a, b, "ssim");
  double total = 0.0;
  for (int s = 0; s < a.slices; ++s)
    for (int c = 0; c < a.channels; ++c) total += ssim(a.plane(s, c), b.plane(s, c), data_range);
  return total / (a.slices * a.channels);
}

std::vector<ImageData> split_channels(const ImageData& image) {
  image.check();
  std::vector<ImageData> out;
  for (int c = 0; c < image.channels; ++c) {
    ImageData single(image.width, image.height, 1, image.slices, image.format, image.data_range);
    for (int s = 0; s < image.slices; ++s) {
      const auto first = image.samples.begin() + static_cast<std::ptrdiff_t>(image.plane_offset(s, c));
      std::copy(first, first + static_cast<std::ptrdiff_t>(image.plane_size()),
                single.samples.begin() + static_cast<std::ptrdiff_t>(single.plane_offset(s, 0)));
    }
    out.push_back(std::move(single));
  }
  return out;
}

ImageData merge_channels(const std::vector<ImageData>& channels) {
  if (channels.empty()) throw ImageError("merge_channels: no channels");
  const ImageData& first = channels.front();
  for (const auto& ch : channels) {
    ch.check();
    if (ch.channels != 1 || ch.width != first.width || ch.height != first.height || ch.slices != first.slices) {
      throw ShapeError("merge_channels: inconsistent channel images");
    }
  }
  ImageData out(first.width, first.height, static_cast<int>(channels.size()), first.slices, first.format, first.data_range);
  for (int c = 0; c < out.channels; ++c)
    for (int s = 0; s < out.slices; ++s) {
      const auto src = channels[c].samples.begin() + static_cast<std::ptrdiff_t>(channels[c].plane_offset(s, 0));
      std::copy(src, src + static_cast<std::ptrdiff_t>(out.plane_size()),
                out.samples.begin() + static_cast<std::ptrdiff_t>(out.plane_offset(s, c)));
    }
  return out;
}

}  // namespace n2f
