#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "peanoseg/imaging.hpp"

namespace peanoseg::shapes {

// Two-class test pictures that mix large homogeneous areas with features
// one or two pixels wide. All are 2^order square. None of them is aligned
// with the dyadic sub-squares the scan visits one at a time; aligned edges
// fall almost entirely on context links, which no real picture does.

// Wavy vertical bars, 2 to 6 pixels wide, over three quarters of the
// width; a solid block on the right.
LabelImage stripes(unsigned order);

// Off-center concentric rings of widths 1 to 12 pixels.
LabelImage rings(unsigned order);

// A few thick random-walk blobs plus thin random-walk trails.
LabelImage random_walk(unsigned order, std::uint64_t seed);

// Horizontal stripes 1 to 5 pixels wide on top, a checkerboard of 11x11
// blocks below.
LabelImage stripes_blocks(unsigned order);

std::vector<std::string> names();
// Throws Error(kInvalidArgument) for unknown names.
LabelImage by_name(std::string_view name, unsigned order, std::uint64_t seed = 1);

}  // namespace peanoseg::shapes
