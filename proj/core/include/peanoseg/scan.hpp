#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace peanoseg {

// Square 2^k x 2^k pixel grid.
struct GridShape {
  unsigned order = 0;
  std::size_t side = 1;
  std::size_t n_pixels = 1;

  static GridShape of_order(unsigned k);
  // nullopt unless `side` is a power of two.
  static std::optional<GridShape> from_side(std::size_t side);

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

inline constexpr unsigned kMaxOrder = 15;

struct Pixel {
  std::uint32_t row = 0;
  std::uint32_t col = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

enum class Orientation : std::uint8_t { kHorizontal, kVertical };

// Orientation of two 4-adjacent pixels.
Orientation orientation_between(Pixel a, Pixel b);

// Hilbert-type Peano scan of a square grid. Public ranks are 1-based;
// positions (0..N-1) are the same ranks shifted by one and are what the
// inference code indexes with.
class ScanLayout {
 public:
  ScanLayout() = default;

  const GridShape& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return pixels_.size(); }

  // 1-based rank of a pixel, and its inverse.
  std::size_t rank(Pixel p) const { return position(p) + 1; }
  Pixel pixel(std::size_t rank) const { return at(rank - 1); }

  std::size_t position(Pixel p) const {
    return position_of_[p.row * shape_.side + p.col];
  }
  Pixel at(std::size_t pos) const { return pixels_[pos]; }

  // Row-major index of the pixel visited at scan position `pos`.
  std::size_t raster_index(std::size_t pos) const {
    return pixels_[pos].row * shape_.side + pixels_[pos].col;
  }

  // step_orientations()[n] describes the step from position n to n+1.
  std::span<const Orientation> step_orientations() const noexcept { return steps_; }
  Orientation step(std::size_t pos) const { return steps_[pos]; }

  // Gathers a row-major image into scan order.
  template <typename T>
  std::vector<T> to_scan_order(std::span<const T> raster) const {
    std::vector<T> out(size());
    for (std::size_t n = 0; n < size(); ++n) out[n] = raster[raster_index(n)];
    return out;
  }

  // Scatters scan-ordered values back to row-major order.
  template <typename T>
  std::vector<T> to_raster_order(std::span<const T> scan) const {
    std::vector<T> out(size());
    for (std::size_t n = 0; n < size(); ++n) out[raster_index(n)] = scan[n];
    return out;
  }

 private:
  friend ScanLayout build_scan(unsigned order);

  GridShape shape_;
  std::vector<Pixel> pixels_;
  std::vector<std::uint32_t> position_of_;
  std::vector<Orientation> steps_;
};

// Hilbert recursion starting at the upper-left pixel and ending at the
// upper-right one. Throws Error(kCapacity) above kMaxOrder.
ScanLayout build_scan(unsigned order);

// An off-scan 4-neighbor attached to a scan point.
struct ContextEntry {
  Pixel pixel;
  std::size_t position = 0;  // scan position of `pixel`
  Orientation orientation = Orientation::kHorizontal;

  friend bool operator==(const ContextEntry&, const ContextEntry&) = default;
};

// For every scan position, the 4-neighbors of its pixel that are not its
// predecessor or successor on the scan (zero, one or two of them).
class ContextMap {
 public:
  ContextMap() = default;

  // A map with no extras anywhere; turns every contextual model back into
  // its plain-scan counterpart.
  static ContextMap none(std::size_t n_positions);
  // Explicit extras per position, at most two each. Throws
  // Error(kInvalidArgument) otherwise or when a position is out of range.
  static ContextMap from_lists(const std::vector<std::vector<ContextEntry>>& lists);

  std::size_t size() const noexcept { return counts_.size(); }
  std::span<const ContextEntry> extras(std::size_t pos) const {
    return {entries_[pos].data(), counts_[pos]};
  }
  std::size_t total_extras() const noexcept;

 private:
  friend ContextMap build_context(const ScanLayout& layout);

  std::vector<std::array<ContextEntry, 2>> entries_;
  std::vector<std::uint8_t> counts_;
};

ContextMap build_context(const ScanLayout& layout);

}  // namespace peanoseg
