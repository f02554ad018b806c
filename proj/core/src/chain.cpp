#include "peanoseg/chain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "peanoseg/error.hpp"

namespace peanoseg {

namespace {

// A beta vector with max entry below this is treated as identically zero.
constexpr double kZeroBeta = 1e-300;

std::uint32_t draw_categorical(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::uint32_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = static_cast<std::uint32_t>(i);
    if (u < acc) return last_positive;
  }
  // Rounding left the cumulative sum just short of u.
  return last_positive;
}

}  // namespace

PotentialChain::PotentialChain(std::size_t alphabet_size, std::size_t length)
    : m_(alphabet_size), n_(length) {
  if (alphabet_size == 0 || length == 0) {
    throw Error(ErrorCode::kInvalidArgument, "potential chain needs M >= 1 and N >= 1");
  }
  data_.assign((length - 1) * alphabet_size * alphabet_size, 0.0);
}

Matrix PotentialChain::potential(std::size_t step) const {
  auto block = step_block(step);
  return Matrix(m_, m_, std::vector<double>(block.begin(), block.end()));
}

void PotentialChain::set_potential(std::size_t step, const Matrix& phi) {
  if (phi.rows() != m_ || phi.cols() != m_) {
    throw Error(ErrorCode::kInvalidArgument, "potential shape does not match alphabet");
  }
  std::copy(phi.values().begin(), phi.values().end(), step_block(step).begin());
}

void PotentialChain::validate() const {
  for (std::size_t s = 0; s < steps(); ++s) {
    bool any_positive = false;
    for (double v : step_block(s)) {
      if (!std::isfinite(v) || v < 0.0) {
        throw Error(ErrorCode::kInvalidArgument,
                    "potential " + std::to_string(s + 1) + " has a negative or non-finite entry");
      }
      any_positive = any_positive || v > 0.0;
    }
    if (!any_positive) {
      throw Error(ErrorCode::kDegenerateChain,
                  "potential " + std::to_string(s + 1) + " is identically zero");
    }
  }
}

BackwardMessages backward_pass(const PotentialChain& chain) {
  chain.validate();
  const std::size_t m = chain.alphabet_size();
  const std::size_t n = chain.length();

  BackwardMessages out;
  out.alphabet_size = m;
  out.beta.assign(n * m, 0.0);
  out.log_scale.assign(n, 0.0);
  std::fill_n(out.beta.begin() + static_cast<std::ptrdiff_t>((n - 1) * m), m, 1.0);

  for (std::size_t site = n - 1; site-- > 0;) {
    const double* next = out.beta.data() + (site + 1) * m;
    double* cur = out.beta.data() + site * m;
    auto phi = chain.step_block(site);
    double peak = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m; ++j) acc += phi[i * m + j] * next[j];
      cur[i] = acc;
      peak = std::max(peak, acc);
    }
    if (!(peak >= kZeroBeta) || !std::isfinite(peak)) {
      throw Error(ErrorCode::kDegenerateChain,
                  "backward message vanished at site " + std::to_string(site + 1));
    }
    for (std::size_t i = 0; i < m; ++i) cur[i] /= peak;
    out.log_scale[site] = std::log(peak);
  }
  return out;
}

PosteriorChain chain_from_potentials(const PotentialChain& chain) {
  const BackwardMessages bw = backward_pass(chain);
  const std::size_t m = chain.alphabet_size();
  const std::size_t n = chain.length();

  PosteriorChain post;
  post.m_ = m;
  post.n_ = n;
  post.log_scale_ = bw.log_scale;

  auto beta1 = bw.at(0);
  const double z1 = std::accumulate(beta1.begin(), beta1.end(), 0.0);
  post.initial_.resize(m);
  for (std::size_t i = 0; i < m; ++i) post.initial_[i] = beta1[i] / z1;
  post.log_normalizer_ =
      std::log(z1) + std::accumulate(bw.log_scale.begin(), bw.log_scale.end(), 0.0);

  // Row z of step n is phi_n(z, .) beta_{n+1}(.) normalized; its sum is
  // beta_n(z) up to the rescaling of beta_{n+1}, so the ratio is unchanged.
  post.transitions_.assign(chain.steps() * m * m, 0.0);
  for (std::size_t s = 0; s < chain.steps(); ++s) {
    auto phi = chain.step_block(s);
    auto next = bw.at(s + 1);
    double* block = post.transitions_.data() + s * m * m;
    for (std::size_t i = 0; i < m; ++i) {
      double* row = block + i * m;
      double total = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        row[j] = phi[i * m + j] * next[j];
        total += row[j];
      }
      if (total > 0.0) {
        for (std::size_t j = 0; j < m; ++j) row[j] /= total;
      } else {
        std::fill_n(row, m, 1.0 / static_cast<double>(m));
      }
    }
  }

  post.marginals_.assign(n * m, 0.0);
  std::copy(post.initial_.begin(), post.initial_.end(), post.marginals_.begin());
  for (std::size_t s = 0; s + 1 < n; ++s) {
    const double* prev = post.marginals_.data() + s * m;
    double* cur = post.marginals_.data() + (s + 1) * m;
    const double* block = post.transitions_.data() + s * m * m;
    for (std::size_t i = 0; i < m; ++i) {
      if (prev[i] == 0.0) continue;
      for (std::size_t j = 0; j < m; ++j) cur[j] += prev[i] * block[i * m + j];
    }
    const double total = std::accumulate(cur, cur + m, 0.0);
    for (std::size_t j = 0; j < m; ++j) cur[j] /= total;
  }
  return post;
}

std::vector<std::uint32_t> sample_path(const PosteriorChain& posterior, Rng& rng) {
  const std::size_t m = posterior.alphabet_size();
  std::vector<std::uint32_t> path(posterior.length());
  if (path.empty()) return path;
  path[0] = draw_categorical(posterior.initial(), rng);
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    auto row = posterior.transition(s).subspan(path[s] * m, m);
    path[s + 1] = draw_categorical(row, rng);
  }
  return path;
}

std::vector<std::uint32_t> sample_path(const PosteriorChain& posterior, std::uint64_t seed) {
  Rng rng(seed);
  return sample_path(posterior, rng);
}

std::vector<std::uint32_t> mpm_decode(std::span<const double> marginals, std::size_t alphabet_size) {
  if (alphabet_size == 0 || marginals.size() % alphabet_size != 0) {
    throw Error(ErrorCode::kInvalidArgument, "marginal array is not a multiple of the alphabet");
  }
  std::vector<std::uint32_t> labels(marginals.size() / alphabet_size);
  for (std::size_t n = 0; n < labels.size(); ++n) {
    auto site = marginals.subspan(n * alphabet_size, alphabet_size);
    // max_element returns the first maximum, which is the tie rule we want.
    labels[n] = static_cast<std::uint32_t>(std::max_element(site.begin(), site.end()) - site.begin());
  }
  return labels;
}

std::vector<std::uint32_t> mpm_decode(const PosteriorChain& posterior) {
  return mpm_decode(posterior.marginals(), posterior.alphabet_size());
}

}  // namespace peanoseg
