#pragma once

#include <array>
#include <vector>

#include "n2f/plane.hpp"

namespace n2f {

enum class Scheme { checkerboard, quad, exact };
enum class Orientation { up, left };

/// Which pixel class a pair maps from and to.
enum class PairTag { even_to_odd, odd_to_even, tl_to_tr, tr_to_tl, tl_to_bl, bl_to_tl };

struct DownsamplePair {
  Plane input;
  Plane target;
  Orientation orientation = Orientation::up;  // meaningless for quad pairs
  PairTag tag = PairTag::even_to_odd;
};

/// The two checkerboard classes of an image ((i + j) even / odd), compacted.
struct CheckerboardHalves {
  Plane even_up, odd_up;      // m x n/2, pixels shifted along rows
  Plane even_left, odd_left;  // m/2 x n, pixels shifted along columns
};

/// Requires even height and width.
CheckerboardHalves checkerboard_down(const Plane& image);

/// Exact inverse of checkerboard_down for one orientation.
Plane checkerboard_recombine(const Plane& even, const Plane& odd, Orientation orientation);

struct Quadrants {
  Plane tl, tr, bl, br;
};

/// Phase sub-images of the 2x2 blocks. Requires even height and width.
Quadrants quad_down(const Plane& image);

/// Drops the last row and/or column so both dimensions are even.
Plane crop_even(const Plane& image);

/// Four training pairs in fixed order. Checkerboard: even_up->odd_up,
/// odd_up->even_up, even_left->odd_left, odd_left->even_left.
/// Quad: TL->TR, TR->TL, TL->BL, BL->TL. The image is cropped to even size first.
std::vector<DownsamplePair> make_training_pairs(const Plane& image, Scheme scheme);

/// Checkerboard pairs whose targets have the ground-truth neighbour offset
/// removed: target = x_dst - (s_dst - s_src).
std::vector<DownsamplePair> make_exact_pairs(const Plane& noisy, const Plane& clean);

}  // namespace n2f
