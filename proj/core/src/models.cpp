#include "peanoseg/models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "peanoseg/error.hpp"

namespace peanoseg {

namespace {

constexpr double kSumTolerance = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_joint(const Matrix& joint, std::size_t size, const char* name) {
  if (joint.rows() != size || joint.cols() != size) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " has the wrong shape");
  }
  for (double v : joint.values()) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidArgument, std::string(name) + " has a negative entry");
    }
  }
  if (std::abs(joint.sum() - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::kInvalidArgument, std::string(name) + " does not sum to 1");
  }
}

void check_emissions(std::size_t classes, const std::vector<double>& means,
                     const std::vector<double>& variances, double floor) {
  if (classes == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  if (means.size() != classes || variances.size() != classes) {
    throw Error(ErrorCode::kInvalidArgument, "means/variances must have one entry per class");
  }
  for (std::size_t i = 0; i < classes; ++i) {
    if (!std::isfinite(means[i]) || !std::isfinite(variances[i])) {
      throw Error(ErrorCode::kInvalidArgument, "non-finite emission parameter");
    }
    if (variances[i] < floor) {
      throw Error(ErrorCode::kInvalidArgument, "variance below the floor");
    }
  }
}

double log_sum_exp(std::span<const double> terms) {
  double peak = kNegInf;
  for (double t : terms) peak = std::max(peak, t);
  if (peak == kNegInf) return kNegInf;
  double acc = 0.0;
  for (double t : terms) acc += std::exp(t - peak);
  return peak + std::log(acc);
}

// A state is absent when it carries no mass in either joint matrix, as a
// predecessor or as a successor. Absent states get a zero conditional row
// and can never appear on a positive-probability path; any other zero row
// is an error.
std::vector<bool> absent_states(const Matrix& joint_h, const Matrix& joint_v) {
  std::vector<bool> absent(joint_h.rows());
  for (std::size_t i = 0; i < absent.size(); ++i) {
    absent[i] = joint_h.row_sum(i) == 0.0 && joint_h.col_sum(i) == 0.0 &&
                joint_v.row_sum(i) == 0.0 && joint_v.col_sum(i) == 0.0;
  }
  return absent;
}

Matrix conditional_allowing_absent(const Matrix& joint, const std::vector<bool>& absent) {
  Matrix cond(joint.rows(), joint.cols());
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    const double total = joint.row_sum(i);
    if (total > 0.0) {
      for (std::size_t j = 0; j < joint.cols(); ++j) cond(i, j) = joint(i, j) / total;
    } else if (!absent[i]) {
      throw Error(ErrorCode::kZeroRow, "joint row " + std::to_string(i + 1) +
                                           " is zero but the state is reachable");
    }
  }
  return cond;
}

// Everything the generic potential builder needs: a hidden alphabet of M
// states, each tied to an emission class, with per-orientation first-step
// joints and step conditionals over that alphabet.
struct HiddenModel {
  std::size_t states = 0;
  std::vector<std::size_t> class_of;  // per state
  Matrix first_joint[2];
  Matrix step_cond[2];
  std::vector<double> means;
  std::vector<double> variances;
};

std::size_t orient_index(Orientation o) { return o == Orientation::kHorizontal ? 0 : 1; }

// log of the site emission of every (position, state): the central density
// plus one log-mixture per context extra. Row-major N x M.
std::vector<double> log_emissions(const HiddenModel& model, std::span<const double> y,
                                  const ContextMap* context) {
  const std::size_t n = y.size();
  const std::size_t m = model.states;
  const std::size_t k = model.means.size();

  std::vector<double> class_log(n * k);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      class_log[t * k + i] = log_gaussian_density(y[t], model.means[i], model.variances[i]);
    }
  }

  std::vector<double> out(n * m);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t z = 0; z < m; ++z) out[t * m + z] = class_log[t * k + model.class_of[z]];
  }
  if (context == nullptr) return out;

  // Mixtures are evaluated in linear space against the neighbor's densities
  // scaled to max 1; log-sum-exp is the fallback when that underflows.
  std::vector<double> scaled(k);
  std::vector<double> terms(m);
  for (std::size_t t = 0; t < n; ++t) {
    for (const ContextEntry& extra : context->extras(t)) {
      const Matrix& cond = model.step_cond[orient_index(extra.orientation)];
      const double* neighbor = class_log.data() + extra.position * k;
      const double peak = *std::max_element(neighbor, neighbor + k);
      for (std::size_t i = 0; i < k; ++i) scaled[i] = std::exp(neighbor[i] - peak);
      for (std::size_t z = 0; z < m; ++z) {
        double acc = 0.0;
        for (std::size_t w = 0; w < m; ++w) acc += cond(z, w) * scaled[model.class_of[w]];
        if (acc > 1e-280) {
          out[t * m + z] += std::log(acc) + peak;
          continue;
        }
        for (std::size_t w = 0; w < m; ++w) {
          const double p = cond(z, w);
          terms[w] = p > 0.0 ? std::log(p) + neighbor[model.class_of[w]] : kNegInf;
        }
        out[t * m + z] += log_sum_exp(terms);
      }
    }
  }
  return out;
}

// exp(log_emission - site max); a rescaling the chain engine is invariant to.
std::vector<double> scaled_emissions(const std::vector<double>& log_em, std::size_t m) {
  std::vector<double> out(log_em.size());
  const std::size_t n = log_em.size() / m;
  for (std::size_t t = 0; t < n; ++t) {
    const double* row = log_em.data() + t * m;
    const double peak = *std::max_element(row, row + m);
    if (peak == kNegInf) {
      throw Error(ErrorCode::kDegenerateChain,
                  "every hidden state has zero emission at site " + std::to_string(t + 1));
    }
    for (std::size_t z = 0; z < m; ++z) out[t * m + z] = std::exp(row[z] - peak);
  }
  return out;
}

PotentialChain build_potentials(const HiddenModel& model, std::span<const double> y,
                                std::span<const Orientation> steps, const ContextMap* context) {
  if (y.empty() || steps.size() + 1 != y.size()) {
    throw Error(ErrorCode::kInvalidArgument, "observation count does not match the scan");
  }
  if (context != nullptr && context->size() != y.size()) {
    throw Error(ErrorCode::kInvalidArgument, "context map does not match the scan");
  }
  const std::size_t m = model.states;
  const std::vector<double> em = scaled_emissions(log_emissions(model, y, context), m);

  PotentialChain chain(m, y.size());
  for (std::size_t s = 0; s < chain.steps(); ++s) {
    const std::size_t o = orient_index(steps[s]);
    const double* next = em.data() + (s + 1) * m;
    auto block = chain.step_block(s);
    if (s == 0) {
      const Matrix& joint = model.first_joint[o];
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) block[i * m + j] = joint(i, j) * em[i] * next[j];
      }
    } else {
      const Matrix& cond = model.step_cond[o];
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) block[i * m + j] = cond(i, j) * next[j];
      }
    }
  }
  return chain;
}

HiddenModel hmc_hidden_model(const HmcParams& params) {
  params.validate();
  HiddenModel model;
  model.states = params.classes;
  model.class_of.resize(params.classes);
  for (std::size_t i = 0; i < params.classes; ++i) model.class_of[i] = i;
  const auto absent = absent_states(params.joint_h, params.joint_v);
  model.first_joint[0] = params.joint_h;
  model.first_joint[1] = params.joint_v;
  model.step_cond[0] = conditional_allowing_absent(params.joint_h, absent);
  model.step_cond[1] = conditional_allowing_absent(params.joint_v, absent);
  model.means = params.means;
  model.variances = params.variances;
  return model;
}

HiddenModel hemc_hidden_model(const EvidentialParams& params) {
  params.validate();
  const EvidentialStateSpace space = evidential_states(params.classes);
  const std::size_t m = space.size();
  const auto absent = absent_states(params.joint_h, params.joint_v);

  HiddenModel model;
  model.states = m;
  model.means = params.means;
  model.variances = params.variances;
  for (const auto& s : space.states) model.class_of.push_back(s.cls);

  for (Orientation o : {Orientation::kHorizontal, Orientation::kVertical}) {
    const Matrix& joint = params.joint(o);
    const Matrix focal_cond = conditional_allowing_absent(joint, absent);
    Matrix first(m, m);
    Matrix cond(m, m);
    for (std::size_t a = 0; a < m; ++a) {
      const auto& za = space.states[a];
      for (std::size_t b = 0; b < m; ++b) {
        const auto& zb = space.states[b];
        first(a, b) = joint(za.focal, zb.focal) * za.weight * zb.weight;
        cond(a, b) = focal_cond(za.focal, zb.focal) * zb.weight;
      }
    }
    model.first_joint[orient_index(o)] = std::move(first);
    model.step_cond[orient_index(o)] = std::move(cond);
  }
  return model;
}

}  // namespace

void HmcParams::validate(double variance_floor) const {
  check_emissions(classes, means, variances, variance_floor);
  check_joint(joint_h, classes, "joint_h");
  check_joint(joint_v, classes, "joint_v");
}

void EvidentialParams::validate(double variance_floor) const {
  check_emissions(classes, means, variances, variance_floor);
  check_joint(joint_h, classes + 1, "joint_h");
  check_joint(joint_v, classes + 1, "joint_v");
}

EvidentialParams embed_in_evidential(const HmcParams& params) {
  EvidentialParams out;
  out.classes = params.classes;
  out.means = params.means;
  out.variances = params.variances;
  out.joint_h = Matrix(params.classes + 1, params.classes + 1);
  out.joint_v = Matrix(params.classes + 1, params.classes + 1);
  for (std::size_t i = 0; i < params.classes; ++i) {
    for (std::size_t j = 0; j < params.classes; ++j) {
      out.joint_h(i, j) = params.joint_h(i, j);
      out.joint_v(i, j) = params.joint_v(i, j);
    }
  }
  return out;
}

EvidentialStateSpace evidential_states(std::size_t classes) {
  if (classes == 0) throw Error(ErrorCode::kInvalidArgument, "need at least one class");
  EvidentialStateSpace space;
  space.classes = classes;
  for (std::size_t i = 0; i < classes; ++i) space.states.push_back({i, i, 1.0});
  for (std::size_t i = 0; i < classes; ++i) {
    space.states.push_back({i, classes, 1.0 / static_cast<double>(classes)});
  }
  return space;
}

double log_gaussian_density(double y, double mean, double variance) {
  const double d = y - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * variance) - d * d / (2.0 * variance);
}

double gaussian_density(double y, double mean, double variance) {
  return std::exp(log_gaussian_density(y, mean, variance));
}

double gaussian_density(double y, std::size_t cls, const HmcParams& params) {
  return gaussian_density(y, params.means.at(cls), params.variances.at(cls));
}

Matrix row_conditional(const Matrix& joint) {
  Matrix cond(joint.rows(), joint.cols());
  for (std::size_t i = 0; i < joint.rows(); ++i) {
    const double total = joint.row_sum(i);
    if (!(total > 0.0)) {
      throw Error(ErrorCode::kZeroRow, "joint row " + std::to_string(i + 1) + " sums to zero");
    }
    for (std::size_t j = 0; j < joint.cols(); ++j) cond(i, j) = joint(i, j) / total;
  }
  return cond;
}

double contextual_likelihood(double y_extra, Orientation orientation, std::size_t cls,
                             const HmcParams& params) {
  const Matrix& joint = params.joint(orientation);
  const double total = joint.row_sum(cls);
  if (!(total > 0.0)) {
    throw Error(ErrorCode::kZeroRow, "joint row " + std::to_string(cls + 1) + " sums to zero");
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < params.classes; ++j) {
    acc += joint(cls, j) / total * gaussian_density(y_extra, j, params);
  }
  return acc;
}

double site_emission_cps(std::size_t pos, std::span<const double> y_scan,
                         const ContextMap& context, std::size_t cls, const HmcParams& params) {
  double value = gaussian_density(y_scan[pos], cls, params);
  for (const ContextEntry& extra : context.extras(pos)) {
    value *= contextual_likelihood(y_scan[extra.position], extra.orientation, cls, params);
  }
  return value;
}

PotentialChain build_hmc_ps(const HmcParams& params, std::span<const double> y,
                            std::span<const Orientation> steps) {
  return build_potentials(hmc_hidden_model(params), y, steps, nullptr);
}

PotentialChain build_hmc_cps(const HmcParams& params, std::span<const double> y,
                             std::span<const Orientation> steps, const ContextMap& context) {
  return build_potentials(hmc_hidden_model(params), y, steps, &context);
}

PotentialChain build_hemc_cps(const EvidentialParams& params, std::span<const double> y,
                              std::span<const Orientation> steps, const ContextMap& context) {
  return build_potentials(hemc_hidden_model(params), y, steps, &context);
}

PotentialChain build_hmc_ps(const HmcParams& params, std::span<const double> y_scan,
                            const ScanLayout& layout) {
  return build_hmc_ps(params, y_scan, layout.step_orientations());
}

PotentialChain build_hmc_cps(const HmcParams& params, std::span<const double> y_scan,
                             const ScanLayout& layout, const ContextMap& context) {
  return build_hmc_cps(params, y_scan, layout.step_orientations(), context);
}

PotentialChain build_hemc_cps(const EvidentialParams& params, std::span<const double> y_scan,
                              const ScanLayout& layout, const ContextMap& context) {
  return build_hemc_cps(params, y_scan, layout.step_orientations(), context);
}

std::vector<double> marginalize_evidential(std::span<const double> compound_marginals,
                                           const EvidentialStateSpace& space) {
  const std::size_t m = space.size();
  const std::size_t k = space.classes;
  if (m == 0 || compound_marginals.size() % m != 0) {
    throw Error(ErrorCode::kInvalidArgument, "compound marginals do not match the state space");
  }
  const std::size_t n = compound_marginals.size() / m;
  std::vector<double> out(n * k, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double total = 0.0;
    for (std::size_t z = 0; z < m; ++z) {
      const double p = compound_marginals[t * m + z];
      out[t * k + space.states[z].cls] += p;
      total += p;
    }
    if (total > 0.0) {
      for (std::size_t i = 0; i < k; ++i) out[t * k + i] /= total;
    }
  }
  return out;
}

void Bba::validate() const {
  const std::size_t f = classes + 1;
  if (classes == 0 || init.size() != f || trans.rows() != f || trans.cols() != f) {
    throw Error(ErrorCode::kInvalidArgument, "bba has the wrong shape");
  }
  double total = 0.0;
  for (double v : init) {
    if (!(v >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "bba mass must be nonnegative");
    total += v;
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw Error(ErrorCode::kInvalidArgument, "initial bba does not sum to 1");
  }
  for (std::size_t u = 0; u < f; ++u) {
    for (double v : trans.row(u)) {
      if (!(v >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "bba mass must be nonnegative");
    }
    if (std::abs(trans.row_sum(u) - 1.0) > kSumTolerance) {
      throw Error(ErrorCode::kInvalidArgument, "bba transition row does not sum to 1");
    }
  }
}

EvidentialChain emc_from_bba(const Bba& bba, std::size_t length) {
  bba.validate();
  if (length < 2) throw Error(ErrorCode::kInvalidArgument, "evidential chain needs N >= 2");
  const std::size_t k = bba.classes;
  const std::size_t f = k + 1;
  std::vector<double> card(f);
  for (std::size_t u = 0; u < f; ++u) card[u] = static_cast<double>(focal_size(u, k));

  // beta*[n](u) for sites 2..N (index n-1); summing the indicator over
  // x_{n+1} turns each term into |u_{n+1}| m(u_{n+1} | u_n).
  std::vector<std::vector<double>> beta(length, std::vector<double>(f, 1.0));
  for (std::size_t site = length - 1; site-- > 1;) {
    double peak = 0.0;
    for (std::size_t u = 0; u < f; ++u) {
      double acc = 0.0;
      for (std::size_t v = 0; v < f; ++v) acc += card[v] * bba.trans(u, v) * beta[site + 1][v];
      beta[site][u] = acc;
      peak = std::max(peak, acc);
    }
    if (!(peak > 1e-300)) {
      throw Error(ErrorCode::kDegenerateChain, "evidential backward message vanished");
    }
    for (double& b : beta[site]) b /= peak;
  }

  EvidentialChain out;
  out.classes = k;
  out.transitions.reserve(length - 1);
  for (std::size_t site = 0; site + 1 < length; ++site) {
    Matrix t(f, f);
    for (std::size_t u = 0; u < f; ++u) {
      double total = 0.0;
      for (std::size_t v = 0; v < f; ++v) {
        t(u, v) = card[v] * bba.trans(u, v) * beta[site + 1][v];
        total += t(u, v);
      }
      for (std::size_t v = 0; v < f; ++v) {
        t(u, v) = total > 0.0 ? t(u, v) / total : 1.0 / static_cast<double>(f);
      }
    }
    out.transitions.push_back(std::move(t));
  }

  // p(u_1) is proportional to |u_1| m(u_1) times the normalizer of the
  // first transition row.
  out.initial_focal.assign(f, 0.0);
  double total = 0.0;
  for (std::size_t u = 0; u < f; ++u) {
    double row = 0.0;
    for (std::size_t v = 0; v < f; ++v) row += card[v] * bba.trans(u, v) * beta[1][v];
    out.initial_focal[u] = card[u] * bba.init[u] * row;
    total += out.initial_focal[u];
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kDegenerateChain, "evidential chain has no mass");
  for (double& p : out.initial_focal) p /= total;

  out.class_given_focal = Matrix(f, k);
  for (std::size_t u = 0; u < f; ++u) {
    for (std::size_t x = 0; x < k; ++x) {
      if (u == k || u == x) out.class_given_focal(u, x) = 1.0 / card[u];
    }
  }
  out.initial = Matrix(k, f);
  for (std::size_t x = 0; x < k; ++x) {
    for (std::size_t u = 0; u < f; ++u) {
      out.initial(x, u) = out.initial_focal[u] * out.class_given_focal(u, x);
    }
  }
  return out;
}

}  // namespace peanoseg
