#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "peanoseg/matrix.hpp"

namespace peanoseg {

using Rng = std::mt19937_64;

// Uniform double in [0, 1) built from the top 53 bits of one engine draw,
// so sampled paths do not depend on the standard library's distributions.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// A Markov chain over M states and N sites known only up to a constant:
// p(z_1..z_N) is proportional to the product of phi_n(z_n, z_{n+1}).
// Potentials are stored contiguously, one M x M row-major block per step.
class PotentialChain {
 public:
  PotentialChain() = default;
  PotentialChain(std::size_t alphabet_size, std::size_t length);

  std::size_t alphabet_size() const noexcept { return m_; }
  std::size_t length() const noexcept { return n_; }
  std::size_t steps() const noexcept { return n_ > 0 ? n_ - 1 : 0; }

  double& at(std::size_t step, std::size_t from, std::size_t to) {
    return data_[(step * m_ + from) * m_ + to];
  }
  double at(std::size_t step, std::size_t from, std::size_t to) const {
    return data_[(step * m_ + from) * m_ + to];
  }

  std::span<double> step_block(std::size_t step) { return {data_.data() + step * m_ * m_, m_ * m_}; }
  std::span<const double> step_block(std::size_t step) const {
    return {data_.data() + step * m_ * m_, m_ * m_};
  }

  Matrix potential(std::size_t step) const;
  void set_potential(std::size_t step, const Matrix& phi);

  // Throws Error(kInvalidArgument) on negative or non-finite entries and
  // Error(kDegenerateChain) on an all-zero step matrix.
  void validate() const;

 private:
  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::vector<double> data_;
};

// Backward messages, each rescaled to max entry 1. log_scale[n] is the log
// of the factor divided out at site n (zero at the last site).
struct BackwardMessages {
  std::size_t alphabet_size = 0;
  std::vector<double> beta;  // N x M, row-major
  std::vector<double> log_scale;

  std::span<const double> at(std::size_t site) const {
    return {beta.data() + site * alphabet_size, alphabet_size};
  }
};

BackwardMessages backward_pass(const PotentialChain& chain);

// The normalized Markov chain defined by a PotentialChain.
class PosteriorChain {
 public:
  std::size_t alphabet_size() const noexcept { return m_; }
  std::size_t length() const noexcept { return n_; }

  std::span<const double> initial() const noexcept { return initial_; }
  // Row-stochastic M x M block for the step from site n to n+1.
  std::span<const double> transition(std::size_t step) const {
    return {transitions_.data() + step * m_ * m_, m_ * m_};
  }
  double transition(std::size_t step, std::size_t from, std::size_t to) const {
    return transitions_[(step * m_ + from) * m_ + to];
  }
  std::span<const double> marginal(std::size_t site) const {
    return {marginals_.data() + site * m_, m_};
  }
  std::span<const double> marginals() const noexcept { return marginals_; }
  std::span<const double> log_scale() const noexcept { return log_scale_; }

  // log of the sum over all paths of the product of potentials.
  double log_normalizer() const noexcept { return log_normalizer_; }

 private:
  friend PosteriorChain chain_from_potentials(const PotentialChain& chain);

  std::size_t m_ = 0;
  std::size_t n_ = 0;
  std::vector<double> initial_;
  std::vector<double> transitions_;
  std::vector<double> marginals_;
  std::vector<double> log_scale_;
  double log_normalizer_ = 0.0;
};

PosteriorChain chain_from_potentials(const PotentialChain& chain);

// Draws z_1 from the initial law and each z_{n+1} from the transition row
// of z_n. States are 0-based.
std::vector<std::uint32_t> sample_path(const PosteriorChain& posterior, Rng& rng);
std::vector<std::uint32_t> sample_path(const PosteriorChain& posterior, std::uint64_t seed);

// Per-site argmax of the marginals; ties go to the smallest state.
std::vector<std::uint32_t> mpm_decode(std::span<const double> marginals, std::size_t alphabet_size);
std::vector<std::uint32_t> mpm_decode(const PosteriorChain& posterior);

}  // namespace peanoseg
