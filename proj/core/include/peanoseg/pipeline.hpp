#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "peanoseg/estimation.hpp"
#include "peanoseg/imaging.hpp"
#include "peanoseg/models.hpp"
#include "peanoseg/scan.hpp"

namespace peanoseg {

enum class Method { kHmcPs, kHmcCps, kHemcCps };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

// Scan and context for one grid size, built once and reused.
struct ScanGeometry {
  ScanLayout layout;
  ContextMap context;

  static ScanGeometry of_order(unsigned order);
};

// Per-site class posteriors p(x_n | y), scan order, N x K.
std::vector<double> class_posteriors(const HmcParams& params, std::span<const double> y_scan,
                                     const ScanGeometry& geometry, Method method);
std::vector<double> class_posteriors(const EvidentialParams& params,
                                     std::span<const double> y_scan,
                                     const ScanGeometry& geometry);

// MPM labels (1..K) back in raster order.
LabelImage mpm_labels(std::span<const double> class_marginals, std::size_t classes,
                      const ScanGeometry& geometry);

struct SegmentationRun {
  LabelImage labels;
  std::optional<HmcParams> hmc;
  std::optional<EvidentialParams> evidential;
  std::size_t iterations = 0;
  bool converged = false;
  double seconds = 0.0;
  // SEM iterates, starting with the k-means initialization.
  std::vector<HmcParams> hmc_trace;
  std::vector<EvidentialParams> evidential_trace;
};

// k-means initialization, SEM for the method's model, then MPM.
SegmentationRun segment(const ObservedImage& image, const ScanGeometry& geometry, Method method,
                        std::size_t classes, const SemConfig& config);

// MPM with known parameters (no estimation).
LabelImage segment_supervised(const ObservedImage& image, const ScanGeometry& geometry,
                              Method method, const HmcParams& params);

}  // namespace peanoseg
