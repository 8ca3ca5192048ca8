#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include "n2f/plane.hpp"

namespace n2f {

enum class SampleFormat { u8, u16, f32 };

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Decoded image or image stack. Samples are planar: [slice][channel][y][x].
struct ImageData {
  int width = 0;
  int height = 0;
  int channels = 1;
  int slices = 1;
  SampleFormat format = SampleFormat::f32;
  // Nominal value range of the source (255 for 8-bit, 65535 for 16-bit).
  // 0 means unknown, which is the usual case for float data.
  double data_range = 0.0;
  std::vector<float> samples;

  ImageData() = default;
  ImageData(int w, int h, int c, int s, SampleFormat fmt, double range);

  std::size_t plane_size() const { return static_cast<std::size_t>(width) * height; }
  std::size_t plane_offset(int slice, int channel) const {
    return (static_cast<std::size_t>(slice) * channels + channel) * plane_size();
  }
  Plane plane(int slice, int channel) const;
  void set_plane(int slice, int channel, const Plane& p);
  bool same_layout(const ImageData& o) const {
    return width == o.width && height == o.height && channels == o.channels && slices == o.slices;
  }
  // Throws ImageError if the invariants do not hold.
  void check() const;
};

/// Nominal range implied by a sample format (255, 65535, or 0 for float).
double nominal_range(SampleFormat format);

/// PNG (8/16-bit gray, gray+alpha, RGB, RGBA) and TIFF (8/16-bit unsigned,
/// 32-bit float, chunky or planar, multi-page). Format chosen by content.
ImageData load_image(const std::filesystem::path& path);

/// Format chosen by extension (.png, .tif, .tiff). Integer containers clamp
/// to [0, nominal max] and round half away from zero.
void save_image(const ImageData& image, const std::filesystem::path& path);

/// Adds i.i.d. N(0, sigma^2) noise to every sample, unclipped; the result is
/// a float image keeping the source data range.
ImageData add_gaussian_noise(const ImageData& image, double sigma, std::uint64_t seed);

struct NormRange {
  double min = 0.0;
  double max = 1.0;
  bool degenerate() const { return !(max > min); }
};

struct NormParams {
  std::vector<NormRange> channels;
};

struct NormalizedPlane {
  Plane plane;
  NormRange range;
};

/// (x - min) / (max - min); a constant plane maps to 0.5 and is flagged degenerate.
NormalizedPlane normalize(const Plane& plane);
/// Same affine map with a given range (e.g. to bring a clean reference onto the noisy scale).
Plane normalize_with(const Plane& plane, const NormRange& range);
Plane denormalize(const Plane& plane, const NormRange& range);

/// Per-channel normalization over all slices.
std::pair<ImageData, NormParams> normalize(const ImageData& image);
ImageData denormalize(const ImageData& image, const NormParams& params);

inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

double mse(const Plane& a, const Plane& b);
double psnr(const Plane& a, const Plane& b, double data_range);
double psnr(const ImageData& a, const ImageData& b, double data_range);

/// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5, K1 0.01, K2 0.03).
double ssim(const Plane& a, const Plane& b, double data_range);
/// Mean of per-plane SSIM over channels and slices.
double ssim(const ImageData& a, const ImageData& b, double data_range);

std::vector<ImageData> split_channels(const ImageData& image);
ImageData merge_channels(const std::vector<ImageData>& channels);

}  // namespace n2f
