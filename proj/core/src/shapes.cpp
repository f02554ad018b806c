#include "peanoseg/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iterator>
#include <numbers>

#include "peanoseg/chain.hpp"
#include "peanoseg/error.hpp"

namespace peanoseg::shapes {

namespace {

LabelImage blank(unsigned order) {
  LabelImage img;
  img.shape = GridShape::of_order(order);
  img.classes = 2;
  img.labels.assign(img.shape.n_pixels, 1);
  return img;
}

void paint_disc(LabelImage& img, long row, long col, long radius, std::uint32_t label) {
  const long side = static_cast<long>(img.shape.side);
  for (long r = row - radius; r <= row + radius; ++r) {
    for (long c = col - radius; c <= col + radius; ++c) {
      if (r < 0 || c < 0 || r >= side || c >= side) continue;
      if ((r - row) * (r - row) + (c - col) * (c - col) > radius * radius) continue;
      img.labels[static_cast<std::size_t>(r * side + c)] = label;
    }
  }
}

}  // namespace

LabelImage stripes(unsigned order) {
  LabelImage img = blank(order);
  const long side = static_cast<long>(img.shape.side);
  const double scale = static_cast<double>(side) / 128.0;
  const long split = side * 3 / 4;
  for (long r = 0; r < side; ++r) {
    // Bars bend with the row and widen from left to right.
    const double shift = 6.0 * scale * std::sin(2.0 * std::numbers::pi * static_cast<double>(r) / (41.0 * scale));
    for (long c = 0; c < split; ++c) {
      const double x = static_cast<double>(c) + shift + 20.0 * scale;
      const double width = (2.0 + 4.0 * static_cast<double>(c) / static_cast<double>(side)) * scale;
      if (std::fmod(x, 13.0 * scale) < width) img.labels[static_cast<std::size_t>(r * side + c)] = 2;
    }
    if (r > side / 5 && r < side * 4 / 5) {
      for (long c = split; c < side; ++c) img.labels[static_cast<std::size_t>(r * side + c)] = 2;
    }
  }
  return img;
}

LabelImage rings(unsigned order) {
  LabelImage img = blank(order);
  const long side = static_cast<long>(img.shape.side);
  // Ring boundaries in units of a 128-pixel image; off-center on purpose.
  constexpr double kBounds[] = {3, 4, 9, 11, 17, 20, 28, 29, 40, 46, 58, 60};
  const double cr = static_cast<double>(side) * 0.47;
  const double cc = static_cast<double>(side) * 0.53;
  for (long r = 0; r < side; ++r) {
    for (long c = 0; c < side; ++c) {
      const double d = std::hypot(static_cast<double>(r) - cr, static_cast<double>(c) - cc) * 128.0 /
                       static_cast<double>(side);
      const auto k = std::upper_bound(std::begin(kBounds), std::end(kBounds), d) - std::begin(kBounds);
      img.labels[static_cast<std::size_t>(r * side + c)] = k % 2 == 0 ? 2 : 1;
    }
  }
  return img;
}

LabelImage random_walk(unsigned order, std::uint64_t seed) {
  LabelImage img = blank(order);
  const long side = static_cast<long>(img.shape.side);
  Rng rng(seed);
  auto pick = [&](long lo, long hi) {
    return lo + static_cast<long>(uniform01(rng) * static_cast<double>(hi - lo + 1));
  };
  constexpr long kDirs[4][2] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};

  auto walk = [&](long steps, long radius) {
    long r = pick(0, side - 1);
    long c = pick(0, side - 1);
    for (long s = 0; s < steps; ++s) {
      paint_disc(img, r, c, radius, 2);
      const auto& d = kDirs[pick(0, 3)];
      r = std::clamp(r + d[0], 0L, side - 1);
      c = std::clamp(c + d[1], 0L, side - 1);
    }
  };
  const long scale = std::max(1L, side / 128);
  for (int b = 0; b < 3; ++b) walk(side * 6, 5 * scale);
  for (int t = 0; t < 6; ++t) walk(side * 3, 0);
  return img;
}

LabelImage stripes_blocks(unsigned order) {
  LabelImage img = blank(order);
  const long side = static_cast<long>(img.shape.side);
  const long scale = std::max(1L, side / 128);
  const long band = side * 3 / 10;
  // Horizontal stripes of widths 1..5 on top.
  long row = 3 * scale;
  long width = 1;
  std::uint32_t label = 2;
  while (row < band) {
    for (long r = row; r < std::min(row + width * scale, band); ++r) {
      for (long c = 0; c < side; ++c) img.labels[static_cast<std::size_t>(r * side + c)] = label;
    }
    row += width * scale;
    label = label == 1 ? 2 : 1;
    if (label == 2) width = width % 5 + 1;
  }
  // Checkerboard below, with blocks that do not line up with the scan's
  // dyadic sub-squares.
  const long block = 11 * scale;
  const long offset = 5 * scale;
  for (long r = band; r < side; ++r) {
    for (long c = 0; c < side; ++c) {
      const long parity = (r - band + offset) / block + (c + offset) / block;
      img.labels[static_cast<std::size_t>(r * side + c)] = parity % 2 == 0 ? 1 : 2;
    }
  }
  return img;
}

std::vector<std::string> names() { return {"stripes", "rings", "walk", "stripes-blocks"}; }

LabelImage by_name(std::string_view name, unsigned order, std::uint64_t seed) {
  if (name == "stripes") return stripes(order);
  if (name == "rings") return rings(order);
  if (name == "walk") return random_walk(order, seed);
  if (name == "stripes-blocks") return stripes_blocks(order);
  throw Error(ErrorCode::kInvalidArgument, "unknown shape '" + std::string(name) + "'");
}

}  // namespace peanoseg::shapes
