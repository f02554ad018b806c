#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "peanoseg/chain.hpp"
#include "peanoseg/matrix.hpp"
#include "peanoseg/scan.hpp"

namespace peanoseg {

inline constexpr double kVarianceFloor = 1e-6;

// Classic / contextual HMC parameters. joint_h(i, j) is the probability of
// classes (i, j) on a scan step joining two horizontal neighbors; joint_v
// likewise for vertical steps. Classes are 0-based.
struct HmcParams {
  std::size_t classes = 0;
  Matrix joint_h;
  Matrix joint_v;
  std::vector<double> means;
  std::vector<double> variances;

  const Matrix& joint(Orientation o) const {
    return o == Orientation::kHorizontal ? joint_h : joint_v;
  }
  Matrix& joint(Orientation o) { return o == Orientation::kHorizontal ? joint_h : joint_v; }

  // Throws Error(kInvalidArgument) when an invariant does not hold.
  void validate(double variance_floor = kVarianceFloor) const;
};

// Evidential parameters over the alphabet {1}, ..., {K}, Omega; index K is
// Omega. Emissions are per class, as in HmcParams.
struct EvidentialParams {
  std::size_t classes = 0;
  Matrix joint_h;
  Matrix joint_v;
  std::vector<double> means;
  std::vector<double> variances;

  std::size_t focal_count() const noexcept { return classes + 1; }
  std::size_t omega() const noexcept { return classes; }

  const Matrix& joint(Orientation o) const {
    return o == Orientation::kHorizontal ? joint_h : joint_v;
  }
  Matrix& joint(Orientation o) { return o == Orientation::kHorizontal ? joint_h : joint_v; }

  void validate(double variance_floor = kVarianceFloor) const;
};

// Evidential parameters with no mass on Omega; the HMC embedded in the HEMC.
EvidentialParams embed_in_evidential(const HmcParams& params);

// Compound hidden states z = (x, u) with x in u, in the order
// (i, {i}) for every class, then (i, Omega) for every class.
struct EvidentialState {
  std::size_t cls = 0;
  std::size_t focal = 0;  // index into {1}, ..., {K}, Omega
  double weight = 1.0;    // p(x | u) = 1 / |u|
};

struct EvidentialStateSpace {
  std::size_t classes = 0;
  std::vector<EvidentialState> states;

  std::size_t size() const noexcept { return states.size(); }
};

EvidentialStateSpace evidential_states(std::size_t classes);

// Cardinality of focal element `focal` (K for Omega).
inline std::size_t focal_size(std::size_t focal, std::size_t classes) {
  return focal == classes ? classes : 1;
}

double gaussian_density(double y, double mean, double variance);
double log_gaussian_density(double y, double mean, double variance);
double gaussian_density(double y, std::size_t cls, const HmcParams& params);

// Row-normalizes a joint matrix. Throws Error(kZeroRow) on a zero row.
Matrix row_conditional(const Matrix& joint);

// Density of a neighbor's observation given the class at the current site,
// mixed through the orientation's conditional p(. | cls).
double contextual_likelihood(double y_extra, Orientation orientation, std::size_t cls,
                             const HmcParams& params);

// Emission of scan position `pos` in the contextual model: its own density
// times one contextual factor per off-scan neighbor. `y_scan` is in scan
// order.
double site_emission_cps(std::size_t pos, std::span<const double> y_scan,
                         const ContextMap& context, std::size_t cls, const HmcParams& params);

// Potential chains whose normalization is p(hidden | observations). All
// observation spans are in scan order (see ScanLayout::to_scan_order).
PotentialChain build_hmc_ps(const HmcParams& params, std::span<const double> y_scan,
                            const ScanLayout& layout);
PotentialChain build_hmc_cps(const HmcParams& params, std::span<const double> y_scan,
                             const ScanLayout& layout, const ContextMap& context);
// Alphabet is evidential_states(K); pass ContextMap::none for the plain HEMC.
PotentialChain build_hemc_cps(const EvidentialParams& params, std::span<const double> y_scan,
                              const ScanLayout& layout, const ContextMap& context);

// Same constructions on an arbitrary chain described by its step
// orientations (steps.size() == y.size() - 1).
PotentialChain build_hmc_ps(const HmcParams& params, std::span<const double> y,
                            std::span<const Orientation> steps);
PotentialChain build_hmc_cps(const HmcParams& params, std::span<const double> y,
                             std::span<const Orientation> steps, const ContextMap& context);
PotentialChain build_hemc_cps(const EvidentialParams& params, std::span<const double> y,
                              std::span<const Orientation> steps, const ContextMap& context);

// Sums compound marginals (N x 2K) over the focal element: N x K.
std::vector<double> marginalize_evidential(std::span<const double> compound_marginals,
                                           const EvidentialStateSpace& space);

// Basic belief assignment restricted to singletons and Omega.
struct Bba {
  std::size_t classes = 0;
  std::vector<double> init;  // m(u_1), size K+1
  Matrix trans;              // m(u_{n+1} | u_n), (K+1) x (K+1)

  void validate() const;
};

// Evidential Markov chain obtained by normalizing the bba product.
struct EvidentialChain {
  std::size_t classes = 0;
  Matrix initial;                  // p(x_1, u_1): K x (K+1)
  std::vector<double> initial_focal;  // p(u_1)
  Matrix class_given_focal;        // p(x | u): (K+1) x K
  std::vector<Matrix> transitions; // p(u_{n+1} | u_n), N-1 of them
};

EvidentialChain emc_from_bba(const Bba& bba, std::size_t length);

}  // namespace peanoseg
