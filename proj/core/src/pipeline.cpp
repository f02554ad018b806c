#include "peanoseg/pipeline.hpp"

#include <chrono>

#include "peanoseg/chain.hpp"
#include "peanoseg/error.hpp"

namespace peanoseg {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kHmcPs: return "hmc-ps";
    case Method::kHmcCps: return "hmc-cps";
    case Method::kHemcCps: return "hemc-cps";
  }
  return "?";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : {Method::kHmcPs, Method::kHmcCps, Method::kHemcCps}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

ScanGeometry ScanGeometry::of_order(unsigned order) {
  ScanGeometry g;
  g.layout = build_scan(order);
  g.context = build_context(g.layout);
  return g;
}

std::vector<double> class_posteriors(const HmcParams& params, std::span<const double> y_scan,
                                     const ScanGeometry& geometry, Method method) {
  if (method == Method::kHemcCps) {
    throw Error(ErrorCode::kInvalidArgument, "hemc-cps needs evidential parameters");
  }
  const PotentialChain chain = method == Method::kHmcPs
                                   ? build_hmc_ps(params, y_scan, geometry.layout)
                                   : build_hmc_cps(params, y_scan, geometry.layout, geometry.context);
  const PosteriorChain post = chain_from_potentials(chain);
  return {post.marginals().begin(), post.marginals().end()};
}

std::vector<double> class_posteriors(const EvidentialParams& params,
                                     std::span<const double> y_scan,
                                     const ScanGeometry& geometry) {
  const PosteriorChain post = chain_from_potentials(
      build_hemc_cps(params, y_scan, geometry.layout, geometry.context));
  return marginalize_evidential(post.marginals(), evidential_states(params.classes));
}

LabelImage mpm_labels(std::span<const double> class_marginals, std::size_t classes,
                      const ScanGeometry& geometry) {
  const auto decoded = mpm_decode(class_marginals, classes);
  LabelImage out;
  out.shape = geometry.layout.shape();
  out.classes = classes;
  out.labels = geometry.layout.to_raster_order<std::uint32_t>(decoded);
  for (auto& l : out.labels) ++l;
  return out;
}

SegmentationRun segment(const ObservedImage& image, const ScanGeometry& geometry, Method method,
                        std::size_t classes, const SemConfig& config) {
  if (image.shape != geometry.layout.shape()) {
    throw Error(ErrorCode::kBadShape, "image does not match the scan geometry");
  }
  const auto start = std::chrono::steady_clock::now();
  const std::vector<double> y = geometry.layout.to_scan_order<double>(image.values);
  const ContextMap* context = method == Method::kHmcPs ? nullptr : &geometry.context;

  SegmentationRun run;
  std::vector<double> marginals;
  if (method == Method::kHemcCps) {
    const EvidentialParams init =
        kmeans_init_evidential(y, classes, geometry.layout, kDefaultOmegaMass, config.variance_floor);
    auto sem = sem_run(init, y, geometry.layout, context, config);
    marginals = class_posteriors(sem.params, y, geometry);
    run.iterations = sem.iterations;
    run.converged = sem.converged;
    run.evidential = std::move(sem.params);
    run.evidential_trace = std::move(sem.trace);
  } else {
    const HmcParams init = kmeans_init(y, classes, geometry.layout, config.variance_floor);
    auto sem = sem_run(init, y, geometry.layout, context, config);
    marginals = class_posteriors(sem.params, y, geometry, method);
    run.iterations = sem.iterations;
    run.converged = sem.converged;
    run.hmc = std::move(sem.params);
    run.hmc_trace = std::move(sem.trace);
  }
  run.labels = mpm_labels(marginals, classes, geometry);
  run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return run;
}

LabelImage segment_supervised(const ObservedImage& image, const ScanGeometry& geometry,
                              Method method, const HmcParams& params) {
  const std::vector<double> y = geometry.layout.to_scan_order<double>(image.values);
  if (method == Method::kHemcCps) {
    return mpm_labels(class_posteriors(embed_in_evidential(params), y, geometry), params.classes,
                      geometry);
  }
  return mpm_labels(class_posteriors(params, y, geometry, method), params.classes, geometry);
}

}  // namespace peanoseg
