#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <map>
#include <set>
#include <string>

#include "codecs.hpp"

namespace n2f::detail {
namespace {

enum Tag : std::uint16_t {
  kNewSubfileType = 254,
  kImageWidth = 256,
  kImageLength = 257,
  kBitsPerSample = 258,
  kCompression = 259,
  kPhotometric = 262,
  kImageDescription = 270,
  kStripOffsets = 273,
  kSamplesPerPixel = 277,
  kRowsPerStrip = 278,
  kStripByteCounts = 279,
  kPlanarConfig = 284,
  kPredictor = 317,
  kTileWidth = 322,
  kExtraSamples = 338,
  kSampleFormat = 339,
};

enum Compression : std::uint32_t {
  kNone = 1,
  kLzw = 5,
  kDeflateAdobe = 8,
  kPackBits = 32773,
  kDeflate = 32946,
};

constexpr const char* kRangeKey = "n2f:data_range=";

class Reader {
 public:
  Reader(std::span<const std::uint8_t> bytes, bool big_endian) : bytes_(bytes), big_(big_endian) {}

  std::uint64_t uint(std::size_t offset, int width) const {
    if (offset + width > bytes_.size()) throw ImageError("TIFF: read past end of file");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      const std::uint64_t b = bytes_[offset + i];
      v |= big_ ? (b << (8 * (width - 1 - i))) : (b << (8 * i));
    }
    return v;
  }
  std::span<const std::uint8_t> slice(std::uint64_t offset, std::uint64_t count) const {
    if (offset > bytes_.size() || count > bytes_.size() - offset) throw ImageError("TIFF: data extends past end of file");
    return bytes_.subspan(offset, count);
  }
  bool big_endian() const { return big_; }

 private:
  std::span<const std::uint8_t> bytes_;
  bool big_;
};

struct Entry {
  std::vector<std::uint64_t> values;
  std::string text;
};

int type_size(std::uint16_t type) {
  switch (type) {
    case 1: case 2: case 6: case 7: return 1;
    case 3: case 8: return 2;
    case 4: case 9: case 11: return 4;
    case 5: case 10: case 12: return 8;
    default: return 0;
  }
}

std::map<std::uint16_t, Entry> read_ifd(const Reader& r, std::uint64_t offset, std::uint64_t& next) {
  const auto count = r.uint(offset, 2);
  std::map<std::uint16_t, Entry> entries;
  for (std::uint64_t e = 0; e < count; ++e) {
    const std::size_t base = offset + 2 + 12 * e;
    const auto tag = static_cast<std::uint16_t>(r.uint(base, 2));
    const auto type = static_cast<std::uint16_t>(r.uint(base + 2, 2));
    const auto n = r.uint(base + 4, 4);
    const int size = type_size(type);
    if (size == 0) continue;  // unknown type: ignore the tag
    if (n > (std::uint64_t{1} << 28)) throw ImageError("TIFF: implausible tag count");
    const std::uint64_t total = n * size;
    const std::uint64_t data = total <= 4 ? base + 8 : r.uint(base + 8, 4);
    Entry entry;
    if (type == 2) {
      auto raw = r.slice(data, total);
      entry.text.assign(raw.begin(), raw.end());
      entry.text = entry.text.c_str();  // drop the NUL terminator
    } else if (type == 1 || type == 3 || type == 4 || type == 7) {
      entry.values.reserve(n);
      for (std::uint64_t i = 0; i < n; ++i) entry.values.push_back(r.uint(data + i * size, size));
    }
    entries[tag] = std::move(entry);
  }
  next = r.uint(offset + 2 + 12 * count, 4);
  return entries;
}

std::uint64_t scalar(const std::map<std::uint16_t, Entry>& ifd, std::uint16_t tag, std::uint64_t fallback) {
  auto it = ifd.find(tag);
  if (it == ifd.end() || it->second.values.empty()) return fallback;
  return it->second.values.front();
}

std::vector<std::uint8_t> lzw_decode(std::span<const std::uint8_t> in, std::size_t expected) {
  constexpr int kClear = 256;
  constexpr int kEoi = 257;
  constexpr int kMaxCodes = 4096;
  std::vector<std::uint16_t> prefix(kMaxCodes);
  std::vector<std::uint8_t> suffix(kMaxCodes);
  std::vector<std::uint8_t> first(kMaxCodes);
  std::vector<std::uint16_t> length(kMaxCodes);
  for (int i = 0; i < 256; ++i) {
    suffix[i] = first[i] = static_cast<std::uint8_t>(i);
    length[i] = 1;
  }
  std::vector<std::uint8_t> out;
  out.reserve(expected);
  std::vector<std::uint8_t> scratch;

  std::size_t bitpos = 0;
  const std::size_t total_bits = in.size() * 8;
  int width = 9;
  int next = 258;
  int prev = -1;

  auto read_code = [&]() -> int {
    if (bitpos + width > total_bits) return kEoi;
    int code = 0;
    for (int b = 0; b < width; ++b, ++bitpos) {
      code = (code << 1) | ((in[bitpos >> 3] >> (7 - (bitpos & 7))) & 1);
    }
    return code;
  };
  auto emit = [&](int code) {
    scratch.resize(length[code]);
    for (int c = code, i = length[code] - 1; i >= 0; --i) {
      scratch[i] = suffix[c];
      c = prefix[c];
    }
    out.insert(out.end(), scratch.begin(), scratch.end());
  };

  while (out.size() < expected) {
    const int code = read_code();
    if (code == kEoi) break;
    if (code == kClear) {
      width = 9;
      next = 258;
      prev = -1;
      continue;
    }
    if (prev < 0) {
      if (code > 255) throw ImageError("TIFF: corrupt LZW stream");
      emit(code);
      prev = code;
      continue;
    }
    std::uint8_t head;
    if (code < next) {
      head = first[code];
    } else if (code == next) {
      head = first[prev];
    } else {
      throw ImageError("TIFF: corrupt LZW stream");
    }
    if (next < kMaxCodes) {
      prefix[next] = static_cast<std::uint16_t>(prev);
      suffix[next] = head;
      first[next] = first[prev];
      length[next] = static_cast<std::uint16_t>(length[prev] + 1);
      ++next;
    }
    emit(code);
    prev = code;
    if (next >= (1 << width) - 1 && width < 12) ++width;
  }
  return out;
}

std::vector<std::uint8_t> inflate_all(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out(expected);
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) throw ImageError("TIFF: zlib init failed");
  zs.next_in = const_cast<Bytef*>(in.data());
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = out.data();
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = expected - zs.avail_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END && rc != Z_OK && rc != Z_BUF_ERROR) throw ImageError("TIFF: corrupt Deflate stream");
  out.resize(produced);
  return out;
}

std::vector<std::uint8_t> packbits_decode(std::span<const std::uint8_t> in, std::size_t expected) {
  std::vector<std::uint8_t> out;
  out.reserve(expected);
  std::size_t i = 0;
  while (i < in.size() && out.size() < expected) {
    const auto n = static_cast<std::int8_t>(in[i++]);
    if (n >= 0) {
      const std::size_t count = static_cast<std::size_t>(n) + 1;
      if (i + count > in.size()) throw ImageError("TIFF: corrupt PackBits stream");
      out.insert(out.end(), in.begin() + i, in.begin() + i + count);
      i += count;
    } else if (n != -128) {
      if (i >= in.size()) throw ImageError("TIFF: corrupt PackBits stream");
      out.insert(out.end(), static_cast<std::size_t>(1 - n), in[i++]);
    }
  }
  return out;
}

struct PageLayout {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  int spp = 1;
  int bits = 8;
  int sample_format = 1;
  bool operator==(const PageLayout&) const = default;
};

// Decodes one page into planar float samples appended to `out`.
void decode_page(const Reader& r, const std::map<std::uint16_t, Entry>& ifd, const PageLayout& page,
                 std::vector<float>& out) {
  if (ifd.count(kTileWidth)) throw ImageError("TIFF: tiled images are not supported");
  const auto compression = scalar(ifd, kCompression, kNone);
  const auto predictor = scalar(ifd, kPredictor, 1);
  const auto photometric = scalar(ifd, kPhotometric, 1);
  const bool planar = scalar(ifd, kPlanarConfig, 1) == 2;
  const std::uint64_t rows_per_strip = std::min<std::uint64_t>(scalar(ifd, kRowsPerStrip, page.height), page.height);
  if (rows_per_strip == 0) throw ImageError("TIFF: RowsPerStrip is zero");
  if (photometric > 2) throw ImageError("TIFF: unsupported photometric interpretation " + std::to_string(photometric));
  if (predictor != 1 && predictor != 2) throw ImageError("TIFF: unsupported predictor " + std::to_string(predictor));
  if (predictor == 2 && page.sample_format == 3) throw ImageError("TIFF: horizontal predictor on float data");

  const auto offsets_it = ifd.find(kStripOffsets);
  const auto counts_it = ifd.find(kStripByteCounts);
  if (offsets_it == ifd.end()) throw ImageError("TIFF: missing StripOffsets");
  const auto& offsets = offsets_it->second.values;
  const int bytes_per_sample = page.bits / 8;
  const int samples_per_row = planar ? 1 : page.spp;
  const std::size_t row_bytes = static_cast<std::size_t>(page.width) * samples_per_row * bytes_per_sample;
  const std::size_t strips_per_plane = (page.height + rows_per_strip - 1) / rows_per_strip;
  const std::size_t planes = planar ? page.spp : 1;
  if (offsets.size() < strips_per_plane * planes) throw ImageError("TIFF: too few strips");
  if (counts_it == ifd.end() && compression != kNone) throw ImageError("TIFF: missing StripByteCounts");

  const std::size_t plane_size = static_cast<std::size_t>(page.width) * page.height;
  const std::size_t base = out.size();
  out.resize(base + plane_size * page.spp);

  for (std::size_t pl = 0; pl < planes; ++pl) {
    for (std::size_t s = 0; s < strips_per_plane; ++s) {
      const std::size_t index = pl * strips_per_plane + s;
      const std::uint64_t y0 = s * rows_per_strip;
      const std::uint64_t rows = std::min<std::uint64_t>(rows_per_strip, page.height - y0);
      const std::size_t expected = rows * row_bytes;
      const std::uint64_t stored =
          counts_it != ifd.end() && index < counts_it->second.values.size() ? counts_it->second.values[index] : expected;
      const auto raw = r.slice(offsets[index], compression == kNone ? expected : stored);
      std::vector<std::uint8_t> buf;
      switch (compression) {
        case kNone: buf.assign(raw.begin(), raw.end()); break;
        case kLzw: buf = lzw_decode(raw, expected); break;
        case kDeflate:
        case kDeflateAdobe: buf = inflate_all(raw, expected); break;
        case kPackBits: buf = packbits_decode(raw, expected); break;
        default: throw ImageError("TIFF: unsupported compression " + std::to_string(compression));
      }
      if (buf.size() < expected) throw ImageError("TIFF: strip decodes to fewer bytes than expected");

      for (std::uint64_t y = 0; y < rows; ++y) {
        const std::uint8_t* row = buf.data() + y * row_bytes;
        std::vector<std::uint64_t> values(static_cast<std::size_t>(page.width) * samples_per_row);
        for (std::size_t k = 0; k < values.size(); ++k) {
          std::uint64_t v = 0;
          for (int b = 0; b < bytes_per_sample; ++b) {
            const std::uint64_t byte = row[k * bytes_per_sample + b];
            v |= r.big_endian() ? byte << (8 * (bytes_per_sample - 1 - b)) : byte << (8 * b);
          }
          values[k] = v;
        }
        if (predictor == 2) {
          const std::uint64_t mask = bytes_per_sample == 4 ? 0xffffffffULL : (std::uint64_t{1} << page.bits) - 1;
          for (std::size_t k = samples_per_row; k < values.size(); ++k) {
            values[k] = (values[k] + values[k - samples_per_row]) & mask;
          }
        }
        for (std::uint32_t x = 0; x < page.width; ++x) {
          for (int c = 0; c < samples_per_row; ++c) {
            const std::uint64_t v = values[static_cast<std::size_t>(x) * samples_per_row + c];
            const int channel = planar ? static_cast<int>(pl) : c;
            float f;
            if (page.sample_format == 3) {
              f = std::bit_cast<float>(static_cast<std::uint32_t>(v));
            } else {
              const double max = static_cast<double>((std::uint64_t{1} << page.bits) - 1);
              f = static_cast<float>(photometric == 0 ? max - static_cast<double>(v) : static_cast<double>(v));
            }
            out[base + channel * plane_size + (y0 + y) * page.width + x] = f;
          }
        }
      }
    }
  }
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void patch32(std::vector<std::uint8_t>& out, std::size_t at, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

struct OutEntry {
  std::uint16_t tag;
  std::uint16_t type;  // 2 ASCII, 3 SHORT, 4 LONG
  std::vector<std::uint32_t> values;
  std::string text;
};

std::string format_range(double range) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s%.17g", kRangeKey, range);
  return buf;
}

}  // namespace

bool is_tiff(std::span<const std::uint8_t> b) {
  return b.size() >= 4 && ((b[0] == 'I' && b[1] == 'I' && b[2] == 42 && b[3] == 0) ||
                           (b[0] == 'M' && b[1] == 'M' && b[2] == 0 && b[3] == 42));
}

std::uint16_t quantize(float value, double max_value) {
  if (!(value > 0.0f)) return 0;
  const double clamped = std::min(static_cast<double>(value), max_value);
  return static_cast<std::uint16_t>(std::round(clamped));
}

ImageData decode_tiff(std::span<const std::uint8_t> bytes) {
  if (!is_tiff(bytes)) throw ImageError("not a TIFF file");
  const Reader r(bytes, bytes[0] == 'M');
  std::uint64_t offset = r.uint(4, 4);
  std::set<std::uint64_t> seen;
  ImageData image;
  PageLayout layout;
  std::string description;
  int pages = 0;
  while (offset != 0) {
    if (!seen.insert(offset).second) throw ImageError("TIFF: IFD chain loops");
    std::uint64_t next = 0;
    const auto ifd = read_ifd(r, offset, next);
    offset = next;
    if (scalar(ifd, kNewSubfileType, 0) & 1) continue;  // reduced-resolution copy

    PageLayout page;
    page.width = static_cast<std::uint32_t>(scalar(ifd, kImageWidth, 0));
    page.height = static_cast<std::uint32_t>(scalar(ifd, kImageLength, 0));
    page.spp = static_cast<int>(scalar(ifd, kSamplesPerPixel, 1));
    page.bits = static_cast<int>(scalar(ifd, kBitsPerSample, 1));
    page.sample_format = static_cast<int>(scalar(ifd, kSampleFormat, 1));
    if (auto it = ifd.find(kBitsPerSample); it != ifd.end()) {
      for (auto b : it->second.values)
        if (static_cast<int>(b) != page.bits) throw ImageError("TIFF: mixed bits per sample");
    }
    if (page.width == 0 || page.height == 0 || page.width > (1u << 20) || page.height > (1u << 20)) {
      throw ImageError("TIFF: invalid image dimensions");
    }
    if (page.spp < 1 || page.spp > 4) throw ImageError("TIFF: unsupported samples per pixel " + std::to_string(page.spp));
    const bool ok_int = page.sample_format == 1 && (page.bits == 8 || page.bits == 16);
    const bool ok_float = page.sample_format == 3 && page.bits == 32;
    if (!ok_int && !ok_float) {
      throw ImageError("TIFF: unsupported sample type (" + std::to_string(page.bits) + "-bit, format " +
                       std::to_string(page.sample_format) + ")");
    }
    if (pages == 0) {
      layout = page;
      if (auto it = ifd.find(kImageDescription); it != ifd.end()) description = it->second.text;
    } else if (!(page == layout)) {
      throw ImageError("TIFF: pages differ in size or sample layout");
    }
    decode_page(r, ifd, page, image.samples);
    ++pages;
  }
  if (pages == 0) throw ImageError("TIFF: no full-resolution image");

  image.width = static_cast<int>(layout.width);
  image.height = static_cast<int>(layout.height);
  image.channels = layout.spp;
  image.slices = pages;
  image.format = layout.sample_format == 3 ? SampleFormat::f32 : (layout.bits == 8 ? SampleFormat::u8 : SampleFormat::u16);
  image.data_range = nominal_range(image.format);
  if (auto pos = description.find(kRangeKey); pos != std::string::npos) {
    image.data_range = std::strtod(description.c_str() + pos + std::strlen(kRangeKey), nullptr);
  }
  image.check();
  return image;
}

std::vector<std::uint8_t> encode_tiff(const ImageData& image) {
  image.check();
  if (image.channels > 4) throw ImageError("TIFF: at most 4 channels");
  const int bytes_per_sample = image.format == SampleFormat::u8 ? 1 : (image.format == SampleFormat::u16 ? 2 : 4);
  const std::uint16_t bits = static_cast<std::uint16_t>(bytes_per_sample * 8);
  const std::uint16_t sample_format = image.format == SampleFormat::f32 ? 3 : 1;
  const std::uint64_t page_bytes = image.plane_size() * image.channels * bytes_per_sample;
  if (page_bytes > 0xffffffffULL / 2) throw ImageError("TIFF: page too large for classic TIFF");

  std::vector<std::uint8_t> out = {'I', 'I', 42, 0};
  std::size_t next_link = out.size();
  put32(out, 0);

  for (int s = 0; s < image.slices; ++s) {
    const std::uint32_t data_offset = static_cast<std::uint32_t>(out.size());
    for (std::size_t p = 0; p < image.plane_size(); ++p) {
      for (int c = 0; c < image.channels; ++c) {
        const float v = image.samples[image.plane_offset(s, c) + p];
        switch (image.format) {
          case SampleFormat::u8: out.push_back(static_cast<std::uint8_t>(quantize(v, 255.0))); break;
          case SampleFormat::u16: put16(out, quantize(v, 65535.0)); break;
          case SampleFormat::f32: put32(out, std::bit_cast<std::uint32_t>(v)); break;
        }
      }
    }
    if (out.size() % 2) out.push_back(0);

    std::vector<OutEntry> entries;
    entries.push_back({kImageWidth, 4, {static_cast<std::uint32_t>(image.width)}, {}});
    entries.push_back({kImageLength, 4, {static_cast<std::uint32_t>(image.height)}, {}});
    entries.push_back({kBitsPerSample, 3, std::vector<std::uint32_t>(image.channels, bits), {}});
    entries.push_back({kCompression, 3, {kNone}, {}});
    entries.push_back({kPhotometric, 3, {image.channels >= 3 ? 2u : 1u}, {}});
    if (s == 0 && image.data_range > 0.0) entries.push_back({kImageDescription, 2, {}, format_range(image.data_range)});
    entries.push_back({kStripOffsets, 4, {data_offset}, {}});
    entries.push_back({kSamplesPerPixel, 3, {static_cast<std::uint32_t>(image.channels)}, {}});
    entries.push_back({kRowsPerStrip, 4, {static_cast<std::uint32_t>(image.height)}, {}});
    entries.push_back({kStripByteCounts, 4, {static_cast<std::uint32_t>(page_bytes)}, {}});
    entries.push_back({kPlanarConfig, 3, {1}, {}});
    if (image.channels == 2 || image.channels == 4) entries.push_back({kExtraSamples, 3, {2}, {}});
    entries.push_back({kSampleFormat, 3, std::vector<std::uint32_t>(image.channels, sample_format), {}});

    const std::uint32_t ifd_offset = static_cast<std::uint32_t>(out.size());
    patch32(out, next_link, ifd_offset);
    const std::size_t ifd_size = 2 + 12 * entries.size() + 4;
    std::vector<std::uint8_t> extra;
    std::uint32_t extra_offset = static_cast<std::uint32_t>(ifd_offset + ifd_size);
    put16(out, static_cast<std::uint16_t>(entries.size()));
    for (const auto& e : entries) {
      std::vector<std::uint8_t> payload;
      std::uint32_t count;
      if (e.type == 2) {
        payload.assign(e.text.begin(), e.text.end());
        payload.push_back(0);
        count = static_cast<std::uint32_t>(payload.size());
      } else {
        for (auto v : e.values) {
          if (e.type == 3) put16(payload, static_cast<std::uint16_t>(v));
          else put32(payload, v);
        }
        count = static_cast<std::uint32_t>(e.values.size());
      }
      put16(out, e.tag);
      put16(out, e.type);
      put32(out, count);
      if (payload.size() <= 4) {
        payload.resize(4, 0);
        out.insert(out.end(), payload.begin(), payload.end());
      } else {
        put32(out, extra_offset + static_cast<std::uint32_t>(extra.size()));
        extra.insert(extra.end(), payload.begin(), payload.end());
        if (extra.size() % 2) extra.push_back(0);
      }
    }
    next_link = out.size();
    put32(out, 0);
    out.insert(out.end(), extra.begin(), extra.end());
  }
  return out;
}

}  // namespace n2f::detail
