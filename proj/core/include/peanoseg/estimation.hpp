#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "peanoseg/chain.hpp"
#include "peanoseg/models.hpp"
#include "peanoseg/scan.hpp"

namespace peanoseg {

struct SemConfig {
  std::size_t max_iters = 100;
  double tol = 1e-4;
  std::uint64_t seed = 0;
  double variance_floor = kVarianceFloor;
  // Sample from the plain-scan posterior instead of the contextual one.
  bool approx = false;

  void validate() const;
};

// Lloyd's algorithm on scalars; centers start at the i/(K+1) quantiles.
struct KMeans1d {
  std::vector<double> centers;
  std::vector<std::uint32_t> labels;
  std::size_t sweeps = 0;
};

KMeans1d kmeans_1d(std::span<const double> values, std::size_t classes,
                   std::size_t max_sweeps = 100);

// Initial parameters from k-means labels. `y_scan` is in scan order; the
// joints count label pairs over horizontal and vertical scan steps.
// Throws Error(kInsufficientData) with fewer than K distinct values.
HmcParams kmeans_init(std::span<const double> y_scan, std::size_t classes,
                      const ScanLayout& layout, double variance_floor = kVarianceFloor);

inline constexpr double kDefaultOmegaMass = 0.1;

// Embeds HMC joints into the evidential alphabet, scaling them by
// (1 - omega_mass) and spreading omega_mass uniformly over the entries
// that involve Omega.
EvidentialParams embed_with_omega(const HmcParams& params, double omega_mass);

EvidentialParams kmeans_init_evidential(std::span<const double> y_scan, std::size_t classes,
                                        const ScanLayout& layout,
                                        double omega_mass = kDefaultOmegaMass,
                                        double variance_floor = kVarianceFloor);

// Complete-data estimates from one sampled labelling; these are the SEM
// updates. Empty classes and empty joint rows keep their previous values.
HmcParams hmc_update_from_path(const HmcParams& previous, std::span<const double> y_scan,
                               const ScanLayout& layout, std::span<const std::uint32_t> labels,
                               double variance_floor = kVarianceFloor);
// `states` indexes evidential_states(K).
EvidentialParams evidential_update_from_path(const EvidentialParams& previous,
                                             std::span<const double> y_scan,
                                             const ScanLayout& layout,
                                             std::span<const std::uint32_t> states,
                                             double variance_floor = kVarianceFloor);

// One SEM iteration. A null context samples from the plain-scan posterior.
HmcParams sem_step_hmc(const HmcParams& params, std::span<const double> y_scan,
                       const ScanLayout& layout, const ContextMap* context, Rng& rng,
                       double variance_floor = kVarianceFloor);
EvidentialParams sem_step_evidential(const EvidentialParams& params,
                                     std::span<const double> y_scan, const ScanLayout& layout,
                                     const ContextMap* context, Rng& rng,
                                     double variance_floor = kVarianceFloor);

template <typename Params>
struct SemResult {
  Params params;
  std::vector<Params> trace;  // trace[0] is the initial value
  std::size_t iterations = 0;
  bool converged = false;
};

double max_parameter_change(const HmcParams& a, const HmcParams& b);
double max_parameter_change(const EvidentialParams& a, const EvidentialParams& b);

SemResult<HmcParams> sem_run(const HmcParams& init, std::span<const double> y_scan,
                             const ScanLayout& layout, const ContextMap* context,
                             const SemConfig& config);
SemResult<EvidentialParams> sem_run(const EvidentialParams& init, std::span<const double> y_scan,
                                    const ScanLayout& layout, const ContextMap* context,
                                    const SemConfig& config);

// CSV with header "iteration,parameter,value"; one row per scalar.
void write_trace_csv(std::ostream& out, std::span<const HmcParams> trace);
void write_trace_csv(std::ostream& out, std::span<const EvidentialParams> trace);

}  // namespace peanoseg
