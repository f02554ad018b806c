#include "peanoseg/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "peanoseg/error.hpp"

namespace peanoseg {

namespace {

std::size_t orient_index(Orientation o) { return o == Orientation::kHorizontal ? 0 : 1; }

double quantile_of_sorted(const std::vector<double>& sorted, double q) {
  const auto idx = static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1));
  return sorted[idx];
}

// Per-class sample moments over a labelling; classes with no members keep
// the previous values.
template <typename Params>
void update_emissions(Params& next, std::span<const double> y,
                      std::span<const std::uint32_t> classes_of_sites, double floor) {
  const std::size_t k = next.classes;
  std::vector<double> sum(k, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    sum[classes_of_sites[n]] += y[n];
    ++count[classes_of_sites[n]];
  }
  std::vector<double> means(k);
  for (std::size_t i = 0; i < k; ++i) {
    means[i] = count[i] > 0 ? sum[i] / static_cast<double>(count[i]) : 0.0;
  }
  std::vector<double> sq(k, 0.0);
  for (std::size_t n = 0; n < y.size(); ++n) {
    const double d = y[n] - means[classes_of_sites[n]];
    sq[classes_of_sites[n]] += d * d;
  }
  for (std::size_t i = 0; i < k; ++i) {
    if (count[i] == 0) continue;
    next.means[i] = means[i];
    next.variances[i] = std::max(floor, sq[i] / static_cast<double>(count[i]));
  }
}

// Normalized pair counts per orientation. A zero row takes the previous
// row and the matrix is renormalized; an orientation without steps keeps
// its previous matrix.
void update_joints(Matrix (&joints)[2], const Matrix (&previous)[2], const ScanLayout& layout,
                   std::span<const std::uint32_t> symbols, std::size_t alphabet) {
  Matrix counts[2] = {Matrix(alphabet, alphabet), Matrix(alphabet, alphabet)};
  double totals[2] = {0.0, 0.0};
  for (std::size_t s = 0; s + 1 < symbols.size(); ++s) {
    const std::size_t o = orient_index(layout.step(s));
    counts[o](symbols[s], symbols[s + 1]) += 1.0;
    totals[o] += 1.0;
  }
  for (std::size_t o = 0; o < 2; ++o) {
    if (totals[o] == 0.0) {
      joints[o] = previous[o];
      continue;
    }
    Matrix& j = counts[o];
    j *= 1.0 / totals[o];
    bool repaired = false;
    for (std::size_t r = 0; r < alphabet; ++r) {
      if (j.row_sum(r) > 0.0) continue;
      auto prev = previous[o].row(r);
      std::copy(prev.begin(), prev.end(), j.row(r).begin());
      repaired = repaired || previous[o].row_sum(r) > 0.0;
    }
    if (repaired) j *= 1.0 / j.sum();
    joints[o] = std::move(j);
  }
}

template <typename Params>
void update_joints(Params& next, const Params& previous, const ScanLayout& layout,
                   std::span<const std::uint32_t> symbols, std::size_t alphabet) {
  Matrix joints[2];
  const Matrix prev[2] = {previous.joint_h, previous.joint_v};
  update_joints(joints, prev, layout, symbols, alphabet);
  next.joint_h = std::move(joints[0]);
  next.joint_v = std::move(joints[1]);
}

double max_change(const Matrix& a, const Matrix& b) { return max_abs_diff(a, b); }

double max_change(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

template <typename Params>
double params_change(const Params& a, const Params& b) {
  return std::max({max_change(a.joint_h, b.joint_h), max_change(a.joint_v, b.joint_v),
                   max_change(a.means, b.means), max_change(a.variances, b.variances)});
}

template <typename Params, typename Step>
SemResult<Params> run_sem(const Params& init, const SemConfig& config, Step step) {
  config.validate();
  init.validate(config.variance_floor);
  SemResult<Params> result;
  result.params = init;
  result.trace.push_back(init);
  Rng rng(config.seed);
  for (std::size_t q = 0; q < config.max_iters; ++q) {
    Params next = step(result.params, rng);
    const double change = params_change(next, result.params);
    result.params = std::move(next);
    result.trace.push_back(result.params);
    result.iterations = q + 1;
    if (change < config.tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

template <typename Params, typename NameJoint>
void write_trace(std::ostream& out, std::span<const Params> trace, NameJoint focal_name) {
  out << "iteration,parameter,value\n";
  const auto old_precision = out.precision(17);
  for (std::size_t q = 0; q < trace.size(); ++q) {
    const Params& p = trace[q];
    for (const auto& [name, joint] : {std::pair{"joint_h", &p.joint_h}, std::pair{"joint_v", &p.joint_v}}) {
      for (std::size_t i = 0; i < joint->rows(); ++i) {
        for (std::size_t j = 0; j < joint->cols(); ++j) {
          out << q << ',' << name << '[' << focal_name(i) << ';' << focal_name(j) << "],"
              << (*joint)(i, j) << '\n';
        }
      }
    }
    for (std::size_t i = 0; i < p.classes; ++i) out << q << ",mean[" << i + 1 << "]," << p.means[i] << '\n';
    for (std::size_t i = 0; i < p.classes; ++i) out << q << ",var[" << i + 1 << "]," << p.variances[i] << '\n';
  }
  out.precision(old_precision);
}

}  // namespace

void SemConfig::validate() const {
  if (max_iters < 1) throw Error(ErrorCode::kInvalidArgument, "SEM needs max_iters >= 1");
  if (!(tol >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "SEM tolerance must be >= 0");
  if (!(variance_floor > 0.0)) throw Error(ErrorCode::kInvalidArgument, "variance floor must be > 0");
}

KMeans1d kmeans_1d(std::span<const double> values, std::size_t classes, std::size_t max_sweeps) {
  if (classes == 0) throw Error(ErrorCode::kInvalidArgument, "k-means needs K >= 1");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() < classes) {
    throw Error(ErrorCode::kInsufficientData, "fewer distinct values than classes");
  }

  KMeans1d km;
  const double denom = static_cast<double>(classes + 1);
  for (std::size_t i = 1; i <= classes; ++i) {
    km.centers.push_back(quantile_of_sorted(sorted, static_cast<double>(i) / denom));
  }
  // Heavily tied data can put two quantiles on one value.
  if (std::adjacent_find(km.centers.begin(), km.centers.end()) != km.centers.end()) {
    for (std::size_t i = 1; i <= classes; ++i) {
      km.centers[i - 1] = quantile_of_sorted(distinct, static_cast<double>(i) / denom);
    }
  }

  km.labels.assign(values.size(), 0);
  std::vector<double> sum(classes);
  std::vector<std::size_t> count(classes);
  for (km.sweeps = 0; km.sweeps < max_sweeps;) {
    ++km.sweeps;
    bool changed = false;
    for (std::size_t n = 0; n < values.size(); ++n) {
      std::uint32_t best = 0;
      double best_d = std::abs(values[n] - km.centers[0]);
      for (std::size_t i = 1; i < classes; ++i) {
        const double d = std::abs(values[n] - km.centers[i]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<std::uint32_t>(i);
        }
      }
      changed = changed || best != km.labels[n];
      km.labels[n] = best;
    }
    if (!changed && km.sweeps > 1) break;
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t n = 0; n < values.size(); ++n) {
      sum[km.labels[n]] += values[n];
      ++count[km.labels[n]];
    }
    for (std::size_t i = 0; i < classes; ++i) {
      if (count[i] > 0) km.centers[i] = sum[i] / static_cast<double>(count[i]);
    }
  }
  return km;
}

HmcParams kmeans_init(std::span<const double> y_scan, std::size_t classes,
                      const ScanLayout& layout, double variance_floor) {
  if (y_scan.size() != layout.size()) {
    throw Error(ErrorCode::kInvalidArgument, "observation count does not match the scan");
  }
  KMeans1d km = kmeans_1d(y_scan, classes);

  // Relabel so that classes come in ascending order of their means.
  std::vector<std::uint32_t> order(classes);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return km.centers[a] < km.centers[b]; });
  std::vector<std::uint32_t> rank(classes);
  for (std::size_t r = 0; r < classes; ++r) rank[order[r]] = static_cast<std::uint32_t>(r);
  for (auto& l : km.labels) l = rank[l];

  HmcParams params;
  params.classes = classes;
  params.means.assign(classes, 0.0);
  params.variances.assign(classes, variance_floor);
  update_emissions(params, y_scan, km.labels, variance_floor);

  // Joints from label co-occurrence along the scan. A class that never
  // starts a step of some orientation gets one pseudo-count per successor
  // so its conditional row is defined.
  for (Orientation o : {Orientation::kHorizontal, Orientation::kVertical}) {
    Matrix counts(classes, classes);
    for (std::size_t s = 0; s + 1 < km.labels.size(); ++s) {
      if (layout.step(s) == o) counts(km.labels[s], km.labels[s + 1]) += 1.0;
    }
    for (std::size_t i = 0; i < classes; ++i) {
      if (counts.row_sum(i) > 0.0) continue;
      for (std::size_t j = 0; j < classes; ++j) counts(i, j) = 1.0 / static_cast<double>(classes);
    }
    counts *= 1.0 / counts.sum();
    params.joint(o) = std::move(counts);
  }
  return params;
}

EvidentialParams embed_with_omega(const HmcParams& params, double omega_mass) {
  if (!(omega_mass >= 0.0 && omega_mass < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Omega mass must lie in [0, 1)");
  }
  EvidentialParams out = embed_in_evidential(params);
  const std::size_t k = params.classes;
  const double share = omega_mass / static_cast<double>(2 * k + 1);
  for (Matrix* joint : {&out.joint_h, &out.joint_v}) {
    for (std::size_t i = 0; i < k; ++i) {
      for (std::size_t j = 0; j < k; ++j) (*joint)(i, j) *= 1.0 - omega_mass;
    }
    for (std::size_t i = 0; i <= k; ++i) {
      (*joint)(i, k) = share;
      (*joint)(k, i) = share;
    }
  }
  return out;
}

EvidentialParams kmeans_init_evidential(std::span<const double> y_scan, std::size_t classes,
                                        const ScanLayout& layout, double omega_mass,
                                        double variance_floor) {
  return embed_with_omega(kmeans_init(y_scan, classes, layout, variance_floor), omega_mass);
}

HmcParams hmc_update_from_path(const HmcParams& previous, std::span<const double> y_scan,
                               const ScanLayout& layout, std::span<const std::uint32_t> labels,
                               double variance_floor) {
  if (labels.size() != y_scan.size() || y_scan.size() != layout.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labelling does not match the observations");
  }
  HmcParams next = previous;
  update_joints(next, previous, layout, labels, previous.classes);
  update_emissions(next, y_scan, labels, variance_floor);
  return next;
}

EvidentialParams evidential_update_from_path(const EvidentialParams& previous,
                                             std::span<const double> y_scan,
                                             const ScanLayout& layout,
                                             std::span<const std::uint32_t> states,
                                             double variance_floor) {
  if (states.size() != y_scan.size() || y_scan.size() != layout.size()) {
    throw Error(ErrorCode::kInvalidArgument, "labelling does not match the observations");
  }
  const EvidentialStateSpace space = evidential_states(previous.classes);
  std::vector<std::uint32_t> focal(states.size());
  std::vector<std::uint32_t> cls(states.size());
  for (std::size_t n = 0; n < states.size(); ++n) {
    const auto& z = space.states.at(states[n]);
    focal[n] = static_cast<std::uint32_t>(z.focal);
    cls[n] = static_cast<std::uint32_t>(z.cls);
  }
  EvidentialParams next = previous;
  update_joints(next, previous, layout, focal, previous.focal_count());
  update_emissions(next, y_scan, cls, variance_floor);
  return next;
}

HmcParams sem_step_hmc(const HmcParams& params, std::span<const double> y_scan,
                       const ScanLayout& layout, const ContextMap* context, Rng& rng,
                       double variance_floor) {
  const PotentialChain chain = context != nullptr
                                   ? build_hmc_cps(params, y_scan, layout, *context)
                                   : build_hmc_ps(params, y_scan, layout);
  const auto path = sample_path(chain_from_potentials(chain), rng);
  return hmc_update_from_path(params, y_scan, layout, path, variance_floor);
}

EvidentialParams sem_step_evidential(const EvidentialParams& params,
                                     std::span<const double> y_scan, const ScanLayout& layout,
                                     const ContextMap* context, Rng& rng,
                                     double variance_floor) {
  const ContextMap empty = context != nullptr ? ContextMap() : ContextMap::none(layout.size());
  const PotentialChain chain =
      build_hemc_cps(params, y_scan, layout, context != nullptr ? *context : empty);
  const auto path = sample_path(chain_from_potentials(chain), rng);
  return evidential_update_from_path(params, y_scan, layout, path, variance_floor);
}

double max_parameter_change(const HmcParams& a, const HmcParams& b) { return params_change(a, b); }

double max_parameter_change(const EvidentialParams& a, const EvidentialParams& b) {
  return params_change(a, b);
}

SemResult<HmcParams> sem_run(const HmcParams& init, std::span<const double> y_scan,
                             const ScanLayout& layout, const ContextMap* context,
                             const SemConfig& config) {
  const ContextMap* sampling_context = config.approx ? nullptr : context;
  return run_sem(init, config, [&](const HmcParams& p, Rng& rng) {
    return sem_step_hmc(p, y_scan, layout, sampling_context, rng, config.variance_floor);
  });
}

SemResult<EvidentialParams> sem_run(const EvidentialParams& init, std::span<const double> y_scan,
                                    const ScanLayout& layout, const ContextMap* context,
                                    const SemConfig& config) {
  const ContextMap* sampling_context = config.approx ? nullptr : context;
  return run_sem(init, config, [&](const EvidentialParams& p, Rng& rng) {
    return sem_step_evidential(p, y_scan, layout, sampling_context, rng, config.variance_floor);
  });
}

void write_trace_csv(std::ostream& out, std::span<const HmcParams> trace) {
  write_trace(out, trace, [](std::size_t i) { return std::to_string(i + 1); });
}

void write_trace_csv(std::ostream& out, std::span<const EvidentialParams> trace) {
  const std::size_t k = trace.empty() ? 0 : trace.front().classes;
  write_trace(out, trace, [k](std::size_t i) {
    return i == k ? std::string("Omega") : std::to_string(i + 1);
  });
}

}  // namespace peanoseg
