#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "peanoseg/scan.hpp"

namespace peanoseg {

// Observed intensities, row-major.
struct ObservedImage {
  GridShape shape;
  std::vector<double> values;
};

// Class labels in 1..K, row-major.
struct LabelImage {
  GridShape shape;
  std::size_t classes = 1;
  std::vector<std::uint32_t> labels;

  void validate() const;
};

// Raw decoded grayscale raster of any size.
struct GrayRaster {
  std::size_t width = 0;
  std::size_t height = 0;
  double maxval = 255.0;  // 0 for float maps
  std::vector<double> pixels;
};

// Reads P2/P5 PGM (maxval up to 65535) and grayscale PFM ("Pf").
// Throws Error(kBadFormat) for unreadable or malformed files.
GrayRaster read_raster(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const std::uint8_t> pixels);
// Little-endian grayscale PFM; rows are stored bottom-up as the format requires.
void write_pfm(const std::filesystem::path& path, std::size_t width, std::size_t height,
               std::span<const float> pixels);

// PGM intensities are rescaled to [0, 255]; PFM values are kept. Without
// `crop` the image must be a 2^k square (Error kBadShape otherwise); with
// it, the largest centered 2^k square is taken.
ObservedImage load_grayscale(const std::filesystem::path& path, bool crop = false);

// Distinct intensities map to classes 1..K in ascending order.
// Throws Error(kTooManyLevels) when there are more than K of them.
LabelImage load_labels(const std::filesystem::path& path, std::size_t classes);

// Writes class i as round(255 (i-1) / (K-1)); K = 1 renders 0.
void save_segmentation(const LabelImage& labels, const std::filesystem::path& path);

// Observed image as PFM (".pfm") or, for any other extension, as a PGM
// min-max rescaled to 0..255.
void save_observation(const ObservedImage& image, const std::filesystem::path& path);

// y_s ~ N(mean[x_s], var[x_s]), independently per pixel. Variances below
// 1e-6 are raised to it.
ObservedImage synth_noise(const LabelImage& truth, std::span<const double> means,
                          std::span<const double> variances, std::uint64_t seed);

inline constexpr std::size_t kMaxScoredClasses = 8;

// Mismatch fraction minimized over relabelings of `predicted`.
// Throws Error(kTooManyClasses) above kMaxScoredClasses.
double error_rate(const LabelImage& truth, const LabelImage& predicted);

}  // namespace peanoseg
