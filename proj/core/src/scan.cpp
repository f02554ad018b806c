#include "peanoseg/scan.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

#include "peanoseg/error.hpp"

namespace peanoseg {

GridShape GridShape::of_order(unsigned k) {
  if (k > kMaxOrder) {
    throw Error(ErrorCode::kCapacity,
                "scan order " + std::to_string(k) + " exceeds " + std::to_string(kMaxOrder));
  }
  GridShape s;
  s.order = k;
  s.side = std::size_t{1} << k;
  s.n_pixels = s.side * s.side;
  return s;
}

std::optional<GridShape> GridShape::from_side(std::size_t side) {
  if (side == 0 || (side & (side - 1)) != 0) return std::nullopt;
  unsigned k = 0;
  while ((std::size_t{1} << k) < side) ++k;
  return of_order(k);
}

Orientation orientation_between(Pixel a, Pixel b) {
  return a.row == b.row ? Orientation::kHorizontal : Orientation::kVertical;
}

namespace {

// Classic Hilbert index -> (x, y) conversion with x the column and y the
// row; this visits (0,0) first and (side-1, 0) last.
Pixel hilbert_pixel(std::size_t side, std::size_t d) {
  std::size_t x = 0;
  std::size_t y = 0;
  for (std::size_t s = 1; s < side; s <<= 1) {
    const std::size_t rx = 1 & (d >> 1);
    const std::size_t ry = 1 & (d ^ rx);
    if (ry == 0) {
      if (rx == 1) {
        x = s - 1 - x;
        y = s - 1 - y;
      }
      std::swap(x, y);
    }
    x += s * rx;
    y += s * ry;
    d >>= 2;
  }
  return {static_cast<std::uint32_t>(y), static_cast<std::uint32_t>(x)};
}

bool adjacent(Pixel a, Pixel b) {
  const long dr = std::labs(static_cast<long>(a.row) - static_cast<long>(b.row));
  const long dc = std::labs(static_cast<long>(a.col) - static_cast<long>(b.col));
  return dr + dc == 1;
}

}  // namespace

ScanLayout build_scan(unsigned order) {
  ScanLayout layout;
  layout.shape_ = GridShape::of_order(order);
  const std::size_t n = layout.shape_.n_pixels;
  const std::size_t side = layout.shape_.side;

  layout.pixels_.resize(n);
  layout.position_of_.resize(n);
  for (std::size_t d = 0; d < n; ++d) {
    const Pixel p = hilbert_pixel(side, d);
    layout.pixels_[d] = p;
    layout.position_of_[p.row * side + p.col] = static_cast<std::uint32_t>(d);
  }

  layout.steps_.reserve(n > 0 ? n - 1 : 0);
  for (std::size_t d = 0; d + 1 < n; ++d) {
    const Pixel a = layout.pixels_[d];
    const Pixel b = layout.pixels_[d + 1];
    if (!adjacent(a, b)) throw std::logic_error("build_scan: non-adjacent scan step");
    layout.steps_.push_back(orientation_between(a, b));
  }
  return layout;
}

ContextMap ContextMap::none(std::size_t n_positions) {
  ContextMap map;
  map.entries_.resize(n_positions);
  map.counts_.assign(n_positions, 0);
  return map;
}

ContextMap ContextMap::from_lists(const std::vector<std::vector<ContextEntry>>& lists) {
  ContextMap map = none(lists.size());
  for (std::size_t n = 0; n < lists.size(); ++n) {
    if (lists[n].size() > 2) {
      throw Error(ErrorCode::kInvalidArgument, "at most two context extras per position");
    }
    for (const ContextEntry& e : lists[n]) {
      if (e.position >= lists.size()) {
        throw Error(ErrorCode::kInvalidArgument, "context extra points outside the chain");
      }
      map.entries_[n][map.counts_[n]++] = e;
    }
  }
  return map;
}

std::size_t ContextMap::total_extras() const noexcept {
  std::size_t total = 0;
  for (auto c : counts_) total += c;
  return total;
}

ContextMap build_context(const ScanLayout& layout) {
  ContextMap map = ContextMap::none(layout.size());
  const auto side = static_cast<long>(layout.shape().side);
  constexpr long kOffsets[4][2] = {{-1, 0}, {0, -1}, {0, 1}, {1, 0}};

  for (std::size_t n = 0; n < layout.size(); ++n) {
    const Pixel p = layout.at(n);
    for (const auto& off : kOffsets) {
      const long r = static_cast<long>(p.row) + off[0];
      const long c = static_cast<long>(p.col) + off[1];
      if (r < 0 || c < 0 || r >= side || c >= side) continue;
      const Pixel q{static_cast<std::uint32_t>(r), static_cast<std::uint32_t>(c)};
      const std::size_t m = layout.position(q);
      if (m + 1 == n || n + 1 == m) continue;
      auto& count = map.counts_[n];
      if (count == 2) throw std::logic_error("build_context: more than two off-scan neighbors");
      map.entries_[n][count++] = ContextEntry{q, m, orientation_between(p, q)};
    }
  }
  return map;
}

}  // namespace peanoseg
