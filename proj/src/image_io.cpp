#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>

#include "codecs.hpp"

namespace n2f {
namespace detail {
namespace {

struct PngSource {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;
};

void png_read_bytes(png_structp png, png_bytep out, png_size_t count) {
  auto* src = static_cast<PngSource*>(png_get_io_ptr(png));
  if (src->pos + count > src->bytes.size()) png_error(png, "unexpected end of PNG data");
  std::memcpy(out, src->bytes.data() + src->pos, count);
  src->pos += count;
}

void png_write_bytes(png_structp png, png_bytep data, png_size_t count) {
  auto* dst = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  dst->insert(dst->end(), data, data + count);
}

void png_flush(png_structp) {}

void png_silent_warning(png_structp, png_const_charp) {}

}  // namespace

bool is_png(std::span<const std::uint8_t> bytes) {
  return bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0;
}

ImageData decode_png(std::span<const std::uint8_t> bytes) {
  if (!is_png(bytes)) throw ImageError("not a PNG file");
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) throw ImageError("PNG: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageError("PNG: out of memory");
  }
  // Heap-owned so nothing on this frame changes between setjmp and a longjmp.
  const auto source = std::make_unique<PngSource>(PngSource{bytes, 0});
  const auto pixels = std::make_unique<std::vector<std::uint8_t>>();
  const auto rows = std::make_unique<std::vector<png_bytep>>();

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageError("PNG: corrupt or unsupported file");
  }
  png_set_read_fn(png, source.get(), png_read_bytes);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);
  png_read_update_info(png, info);

  const png_uint_32 width = png_get_image_width(png, info);
  const png_uint_32 height = png_get_image_height(png, info);
  const int channels = png_get_channels(png, info);
  const int out_depth = png_get_bit_depth(png, info);
  if (width == 0 || height == 0 || width > (1u << 20) || height > (1u << 20)) png_error(png, "bad dimensions");
  const std::size_t row_bytes = png_get_rowbytes(png, info);
  pixels->resize(row_bytes * height);
  rows->resize(height);
  for (png_uint_32 y = 0; y < height; ++y) (*rows)[y] = pixels->data() + y * row_bytes;
  png_read_image(png, rows->data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  const SampleFormat format = out_depth == 16 ? SampleFormat::u16 : SampleFormat::u8;
  ImageData out(static_cast<int>(width), static_cast<int>(height), channels, 1, format, nominal_range(format));
  for (png_uint_32 y = 0; y < height; ++y) {
    const std::uint8_t* row = (*pixels).data() + y * row_bytes;
    for (png_uint_32 x = 0; x < width; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = static_cast<std::size_t>(x) * channels + c;
        const float v = out_depth == 16 ? static_cast<float>(row[2 * k] | (row[2 * k + 1] << 8)) : static_cast<float>(row[k]);
        out.samples[out.plane_offset(0, c) + static_cast<std::size_t>(y) * width + x] = v;
      }
  }
  return out;
}

std::vector<std::uint8_t> encode_png(const ImageData& image) {
  image.check();
  if (image.slices != 1) throw ImageError("PNG holds a single image; use TIFF for stacks");
  if (image.channels > 4) throw ImageError("PNG: at most 4 channels");
  const bool wide = image.format == SampleFormat::u16;
  const double max = wide ? 65535.0 : 255.0;
  const int channels = image.channels;
  const std::size_t row_bytes = static_cast<std::size_t>(image.width) * channels * (wide ? 2 : 1);

  const auto pixels = std::make_unique<std::vector<std::uint8_t>>(row_bytes * image.height);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < channels; ++c) {
        const std::uint16_t q = quantize(image.samples[image.plane_offset(0, c) + static_cast<std::size_t>(y) * image.width + x], max);
        const std::size_t k = static_cast<std::size_t>(y) * row_bytes + (static_cast<std::size_t>(x) * channels + c) * (wide ? 2 : 1);
        if (wide) {
          (*pixels)[k] = static_cast<std::uint8_t>(q >> 8);
          (*pixels)[k + 1] = static_cast<std::uint8_t>(q);
        } else {
          (*pixels)[k] = static_cast<std::uint8_t>(q);
        }
      }
  const auto rows = std::make_unique<std::vector<png_bytep>>(image.height);
  for (int y = 0; y < image.height; ++y) (*rows)[y] = pixels->data() + static_cast<std::size_t>(y) * row_bytes;
  const auto encoded = std::make_unique<std::vector<std::uint8_t>>();

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, png_silent_warning);
  if (!png) throw ImageError("PNG: out of memory");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw ImageError("PNG: out of memory");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageError("PNG: encoding failed");
  }
  static constexpr int kColor[] = {PNG_COLOR_TYPE_GRAY, PNG_COLOR_TYPE_GRAY_ALPHA, PNG_COLOR_TYPE_RGB,
                                   PNG_COLOR_TYPE_RGB_ALPHA};
  png_set_write_fn(png, encoded.get(), png_write_bytes, png_flush);
  png_set_IHDR(png, info, image.width, image.height, wide ? 16 : 8, kColor[channels - 1], PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows->data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return std::move(*encoded);
}

}  // namespace detail

namespace {

std::string lower_extension(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return ext;
}

}  // namespace

ImageData load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image: " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    if (detail::is_png(bytes)) return detail::decode_png(bytes);
    if (detail::is_tiff(bytes)) return detail::decode_tiff(bytes);
  } catch (const ImageError& e) {
    throw ImageError(path.string() + ": " + e.what());
  }
  throw ImageError(path.string() + ": unsupported image format (expected PNG or TIFF)");
}

void save_image(const ImageData& image, const std::filesystem::path& path) {
  const std::string ext = lower_extension(path);
  std::vector<std::uint8_t> bytes;
  if (ext == ".png") {
    bytes = detail::encode_png(image);
  } else if (ext == ".tif" || ext == ".tiff") {
    bytes = detail::encode_tiff(image);
  } else {
    throw ImageError("unsupported output extension '" + ext + "' (use .png, .tif or .tiff)");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write image: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("failed writing image: " + path.string());
}

}  // namespace n2f
