#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "n2f/imaging.hpp"
#include "n2f/trainer.hpp"

namespace n2f::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `n2f` tool. Subcommands: denoise, add-noise, benchmark, ablate.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Seed of the noise realization for one file, shared by add-noise,
/// benchmark and ablate so that they corrupt a given image identically.
std::uint64_t noise_seed(std::uint64_t seed, const std::string& stem);

/// Range used for PSNR/SSIM against `clean`: its nominal range when known
/// (255 for 8-bit), otherwise max - min of the clean samples.
double metric_range(const ImageData& clean);

struct ImageScores {
  double psnr_noisy = 0.0;
  double psnr_denoised = 0.0;
  double ssim_noisy = 0.0;
  double ssim_denoised = 0.0;
  double epochs = 0.0;  // mean over the per-channel runs
  double seconds = 0.0;
  ImageData denoised;
};

/// Denoises `noisy` and scores it against `clean`.
ImageScores evaluate(const ImageData& clean, const ImageData& noisy, const TrainConfig& config, int threads);

/// Image files (.png, .tif, .tiff) and other regular files of a directory, sorted by name;
/// a regular file path yields itself.
std::vector<std::filesystem::path> discover(const std::filesystem::path& input);
bool is_image_path(const std::filesystem::path& path);

}  // namespace n2f::cli
