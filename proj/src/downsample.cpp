#include "n2f/downsample.hpp"

#include <string>

namespace n2f {
namespace {

void require_even(const Plane& image, const char* what) {
  if (image.height < 2 || image.width < 2 || image.height % 2 != 0 || image.width % 2 != 0) {
    throw ShapeError(std::string(what) + ": needs even dimensions >= 2, got " + std::to_string(image.height) +
                     "x" + std::to_string(image.width));
  }
}

Plane subtract_offset(const Plane& target, const Plane& s_dst, const Plane& s_src) {
  Plane out = target;
  // In double the offset is exact, so a constant clean image leaves the
  // target untouched and a noise-free target reproduces s_src exactly.
  for (std::size_t k = 0; k < out.size(); ++k) {
    const double offset = static_cast<double>(s_dst.pixels[k]) - s_src.pixels[k];
    out.pixels[k] = static_cast<Real>(target.pixels[k] - offset);
  }
  return out;
}

}  // namespace

CheckerboardHalves checkerboard_down(const Plane& x) {
  require_even(x, "checkerboard_down");
  const int m = x.height;
  const int n = x.width;
  CheckerboardHalves out{Plane(m, n / 2), Plane(m, n / 2), Plane(m / 2, n), Plane(m / 2, n)};
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n / 2; ++j) {
      out.even_up(i, j) = x(i, 2 * j + (i % 2));
      out.odd_up(i, j) = x(i, 2 * j + ((i + 1) % 2));
    }
  }
  for (int i = 0; i < m / 2; ++i) {
    for (int j = 0; j < n; ++j) {
      out.even_left(i, j) = x(2 * i + (j % 2), j);
      out.odd_left(i, j) = x(2 * i + ((j + 1) % 2), j);
    }
  }
  return out;
}

Plane checkerboard_recombine(const Plane& even, const Plane& odd, Orientation orientation) {
  if (!even.same_shape(odd)) throw ShapeError("checkerboard_recombine: halves differ in shape");
  if (orientation == Orientation::up) {
    const int m = even.height;
    const int n = even.width * 2;
    if (m % 2 != 0) throw ShapeError("checkerboard_recombine: up halves need an even row count");
    Plane x(m, n);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < even.width; ++j) {
        x(i, 2 * j + (i % 2)) = even(i, j);
        x(i, 2 * j + ((i + 1) % 2)) = odd(i, j);
      }
    }
    return x;
  }
  const int m = even.height * 2;
  const int n = even.width;
  if (n % 2 != 0) throw ShapeError("checkerboard_recombine: left halves need an even column count");
  Plane x(m, n);
  for (int i = 0; i < even.height; ++i) {
    for (int j = 0; j < n; ++j) {
      x(2 * i + (j % 2), j) = even(i, j);
      x(2 * i + ((j + 1) % 2), j) = odd(i, j);
    }
  }
  return x;
}

Quadrants quad_down(const Plane& x) {
  require_even(x, "quad_down");
  const int h = x.height / 2;
  const int w = x.width / 2;
  Quadrants q{Plane(h, w), Plane(h, w), Plane(h, w), Plane(h, w)};
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      q.tl(i, j) = x(2 * i, 2 * j);
      q.tr(i, j) = x(2 * i, 2 * j + 1);
      q.bl(i, j) = x(2 * i + 1, 2 * j);
      q.br(i, j) = x(2 * i + 1, 2 * j + 1);
    }
  }
  return q;
}

Plane crop_even(const Plane& image) {
  const int h = image.height - image.height % 2;
  const int w = image.width - image.width % 2;
  if (h < 2 || w < 2) throw ShapeError("crop_even: image smaller than 2x2");
  if (h == image.height && w == image.width) return image;
  Plane out(h, w);
  for (int i = 0; i < h; ++i)
    for (int j = 0; j < w; ++j) out(i, j) = image(i, j);
  return out;
}

std::vector<DownsamplePair> make_training_pairs(const Plane& image, Scheme scheme) {
  if (image.height < 2 || image.width < 2) throw ShapeError("make_training_pairs: image smaller than 2x2");
  const Plane x = crop_even(image);
  std::vector<DownsamplePair> pairs;
  pairs.reserve(4);
  switch (scheme) {
    case Scheme::checkerboard:
    case Scheme::exact: {
      auto h = checkerboard_down(x);
      pairs.push_back({h.even_up, h.odd_up, Orientation::up, PairTag::even_to_odd});
      pairs.push_back({h.odd_up, h.even_up, Orientation::up, PairTag::odd_to_even});
      pairs.push_back({h.even_left, h.odd_left, Orientation::left, PairTag::even_to_odd});
      pairs.push_back({h.odd_left, h.even_left, Orientation::left, PairTag::odd_to_even});
      break;
    }
    case Scheme::quad: {
      auto q = quad_down(x);
      pairs.push_back({q.tl, q.tr, Orientation::up, PairTag::tl_to_tr});
      pairs.push_back({q.tr, q.tl, Orientation::up, PairTag::tr_to_tl});
      pairs.push_back({q.tl, q.bl, Orientation::left, PairTag::tl_to_bl});
      pairs.push_back({q.bl, q.tl, Orientation::left, PairTag::bl_to_tl});
      break;
    }
  }
  return pairs;
}

std::vector<DownsamplePair> make_exact_pairs(const Plane& noisy, const Plane& clean) {
  if (!noisy.same_shape(clean)) throw ShapeError("make_exact_pairs: noisy and clean differ in shape");
  auto pairs = make_training_pairs(noisy, Scheme::checkerboard);
  const auto s = checkerboard_down(crop_even(clean));
  // The pair order matches make_training_pairs.
  pairs[0].target = subtract_offset(pairs[0].target, s.odd_up, s.even_up);
  pairs[1].target = subtract_offset(pairs[1].target, s.even_up, s.odd_up);
  pairs[2].target = subtract_offset(pairs[2].target, s.odd_left, s.even_left);
  pairs[3].target = subtract_offset(pairs[3].target, s.even_left, s.odd_left);
  return pairs;
}

}  // namespace n2f
