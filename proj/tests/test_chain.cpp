#include <gtest/gtest.h>

#include <chrono>
#include <numeric>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "peanoseg/chain.hpp"
#include "peanoseg/error.hpp"

namespace peanoseg {
namespace {

std::vector<Matrix> random_potentials(std::size_t m, std::size_t n, std::mt19937_64& rng,
                                      double lo = 0.05, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Matrix> phis;
  for (std::size_t s = 0; s + 1 < n; ++s) {
    Matrix phi(m, m);
    for (double& v : phi.values()) v = u(rng);
    phis.push_back(std::move(phi));
  }
  return phis;
}

PotentialChain to_chain(const std::vector<Matrix>& phis, std::size_t m) {
  PotentialChain chain(m, phis.size() + 1);
  for (std::size_t s = 0; s < phis.size(); ++s) chain.set_potential(s, phis[s]);
  return chain;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

TEST(BackwardPass, UniformPotential) {
  PotentialChain chain(2, 2);
  chain.set_potential(0, Matrix(2, 2, 1.0));
  const auto bw = backward_pass(chain);
  EXPECT_DOUBLE_EQ(bw.at(1)[0], 1.0);
  EXPECT_DOUBLE_EQ(bw.at(1)[1], 1.0);
  EXPECT_DOUBLE_EQ(bw.at(0)[0], bw.at(0)[1]);
}

TEST(BackwardPass, MatchesSuffixSums) {
  std::mt19937_64 rng(7);
  const auto phis = random_potentials(2, 3, rng);
  const auto bw = backward_pass(to_chain(phis, 2));
  for (std::size_t site = 0; site < 3; ++site) {
    // Rescaling only changes the vectors by a positive factor.
    const double ratio_ref = oracle::suffix_sum(phis, site, 0) / oracle::suffix_sum(phis, site, 1);
    EXPECT_NEAR(bw.at(site)[0] / bw.at(site)[1], ratio_ref, 1e-12);
    // Undo the recorded scales to recover the raw sums.
    double scale = 0.0;
    for (std::size_t s = site; s < 3; ++s) scale += bw.log_scale[s];
    EXPECT_NEAR(bw.at(site)[0] * std::exp(scale), oracle::suffix_sum(phis, site, 0), 1e-12);
  }
}

TEST(BackwardPass, AllZeroPotentialIsDegenerate) {
  PotentialChain chain(2, 2);
  try {
    backward_pass(chain);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateChain);
  }
}

TEST(BackwardPass, ContradictoryPotentialsAreDegenerate) {
  // Step 1 only allows state 0 -> 1, step 2 only allows leaving state 0.
  PotentialChain chain(2, 3);
  chain.set_potential(0, Matrix(2, 2, {0, 1, 0, 0}));
  chain.set_potential(1, Matrix(2, 2, {1, 1, 0, 0}));
  EXPECT_THROW(chain_from_potentials(chain), Error);
}

TEST(BackwardPass, RejectsNegativeEntries) {
  PotentialChain chain(2, 2);
  chain.set_potential(0, Matrix(2, 2, {1, -1, 1, 1}));
  EXPECT_THROW(backward_pass(chain), Error);
}

TEST(ChainFromPotentials, UniformEverywhere) {
  PotentialChain chain(3, 5);
  for (std::size_t s = 0; s < 4; ++s) chain.set_potential(s, Matrix(3, 3, 2.5));
  const auto post = chain_from_potentials(chain);
  for (double p : post.initial()) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
  for (std::size_t s = 0; s < 4; ++s) {
    for (double p : post.transition(s)) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
  }
  for (double p : post.marginals()) EXPECT_NEAR(p, 1.0 / 3, 1e-15);
}

TEST(ChainFromPotentials, MatchesEnumerationSmall) {
  std::mt19937_64 rng(11);
  const auto phis = random_potentials(2, 3, rng);
  const auto post = chain_from_potentials(to_chain(phis, 2));
  const auto law = oracle::enumerate(2, 3, oracle::product_weight(phis));
  for (std::size_t n = 0; n < 3; ++n) {
    for (std::size_t z = 0; z < 2; ++z) EXPECT_LE(rel_err(post.marginal(n)[z], law.marginal(n, z)), 1e-12);
  }
}

TEST(ChainFromPotentials, RecoversAGenuineMarkovChain) {
  const Matrix joint(2, 2, {0.3, 0.2, 0.1, 0.4});  // p(z1, z2)
  const Matrix t2(2, 2, {0.9, 0.1, 0.25, 0.75});
  const Matrix t3(2, 2, {0.5, 0.5, 0.6, 0.4});
  PotentialChain chain(2, 4);
  chain.set_potential(0, joint);
  chain.set_potential(1, t2);
  chain.set_potential(2, t3);
  const auto post = chain_from_potentials(chain);
  EXPECT_NEAR(post.initial()[0], 0.5, 1e-12);
  EXPECT_NEAR(post.initial()[1], 0.5, 1e-12);
  EXPECT_NEAR(post.transition(0, 0, 0), 0.6, 1e-12);
  EXPECT_NEAR(post.transition(0, 1, 1), 0.8, 1e-12);
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      EXPECT_NEAR(post.transition(1, i, j), t2(i, j), 1e-12);
      EXPECT_NEAR(post.transition(2, i, j), t3(i, j), 1e-12);
    }
  }
}

TEST(ChainFromPotentials, OracleEquivalenceProperty) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t m = 1 + rng() % 3;
    const std::size_t n = 2 + rng() % 7;
    const auto phis = random_potentials(m, n, rng);
    const auto post = chain_from_potentials(to_chain(phis, m));
    const auto law = oracle::enumerate(m, n, oracle::product_weight(phis));
    for (std::size_t site = 0; site < n; ++site) {
      for (std::size_t z = 0; z < m; ++z) {
        ASSERT_LE(rel_err(post.marginal(site)[z], law.marginal(site, z)), 1e-10);
      }
    }
    for (std::size_t s = 0; s + 1 < n; ++s) {
      for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = 0; b < m; ++b) {
          ASSERT_LE(rel_err(post.transition(s, a, b), law.transition(s, a, b)), 1e-10);
        }
      }
    }
  }
}

TEST(ChainFromPotentials, NormalizationAndConsistency) {
  std::mt19937_64 rng(5);
  const std::size_t m = 3, n = 40;
  const auto post = chain_from_potentials(to_chain(random_potentials(m, n, rng, 0.0, 1.0), m));
  auto sum = [](std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); };
  EXPECT_NEAR(sum(post.initial()), 1.0, 1e-12);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    for (std::size_t a = 0; a < m; ++a) EXPECT_NEAR(sum(post.transition(s).subspan(a * m, m)), 1.0, 1e-12);
    for (std::size_t b = 0; b < m; ++b) {
      double propagated = 0.0;
      for (std::size_t a = 0; a < m; ++a) propagated += post.marginal(s)[a] * post.transition(s, a, b);
      EXPECT_NEAR(post.marginal(s + 1)[b], propagated, 1e-10);
    }
  }
  for (std::size_t site = 0; site < n; ++site) {
    EXPECT_NEAR(sum(post.marginal(site)), 1.0, 1e-12);
    for (double p : post.marginal(site)) EXPECT_GE(p, 0.0);
  }
}

TEST(ChainFromPotentials, RescalingInvariance) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> scale(1e-3, 1e3);
  const std::size_t m = 3, n = 30;
  const auto phis = random_potentials(m, n, rng);
  auto scaled = phis;
  for (auto& phi : scaled) phi *= scale(rng);
  const auto a = chain_from_potentials(to_chain(phis, m));
  const auto b = chain_from_potentials(to_chain(scaled, m));
  for (std::size_t i = 0; i < a.marginals().size(); ++i) EXPECT_NEAR(a.marginals()[i], b.marginals()[i], 1e-12);
  for (std::size_t s = 0; s + 1 < n; ++s) {
    for (std::size_t i = 0; i < m * m; ++i) EXPECT_NEAR(a.transition(s)[i], b.transition(s)[i], 1e-12);
  }
  EXPECT_EQ(mpm_decode(a), mpm_decode(b));
}

TEST(ChainFromPotentials, LongChainsDoNotUnderflow) {
  const std::size_t n = 200000;
  PotentialChain chain(2, n);
  for (std::size_t s = 0; s + 1 < n; ++s) chain.set_potential(s, Matrix(2, 2, {1e-3, 2e-3, 3e-3, 1e-3}));
  const auto post = chain_from_potentials(chain);
  EXPECT_TRUE(std::isfinite(post.log_normalizer()));
  EXPECT_NEAR(post.marginal(n / 2)[0] + post.marginal(n / 2)[1], 1.0, 1e-12);
}

TEST(ChainFromPotentials, LogNormalizerMatchesEnumeration) {
  std::mt19937_64 rng(3);
  const auto phis = random_potentials(3, 6, rng);
  double total = 0.0;
  for (std::uint32_t z = 0; z < 3; ++z) total += oracle::suffix_sum(phis, 0, z);
  EXPECT_NEAR(chain_from_potentials(to_chain(phis, 3)).log_normalizer(), std::log(total), 1e-12);
}

TEST(ChainFromPotentials, ZeroMassRowsAreUniform) {
  // State 1 can never occur at site 1.
  PotentialChain chain(2, 3);
  chain.set_potential(0, Matrix(2, 2, {1, 1, 0, 0}));
  chain.set_potential(1, Matrix(2, 2, {1, 0, 0, 0}));
  const auto post = chain_from_potentials(chain);
  EXPECT_DOUBLE_EQ(post.transition(1, 1, 0), 0.5);
  EXPECT_DOUBLE_EQ(post.transition(1, 1, 1), 0.5);
  EXPECT_DOUBLE_EQ(post.marginal(1)[1], 0.0);
}

TEST(SamplePath, DeterministicChain) {
  PotentialChain chain(2, 6);
  chain.set_potential(0, Matrix(2, 2, {1, 0, 0, 0}));
  for (std::size_t s = 1; s < 5; ++s) chain.set_potential(s, Matrix::identity(2));
  const auto path = sample_path(chain_from_potentials(chain), std::uint64_t{42});
  EXPECT_EQ(path, std::vector<std::uint32_t>(6, 0));
}

TEST(SamplePath, FixedSeedIsReproducible) {
  std::mt19937_64 rng(8);
  const auto post = chain_from_potentials(to_chain(random_potentials(3, 50, rng), 3));
  EXPECT_EQ(sample_path(post, std::uint64_t{17}), sample_path(post, std::uint64_t{17}));
  EXPECT_NE(sample_path(post, std::uint64_t{17}), sample_path(post, std::uint64_t{18}));
}

TEST(SamplePath, FirstStateFrequenciesWithinBinomialBounds) {
  const std::size_t m = 3;
  PotentialChain chain(m, 2);
  chain.set_potential(0, Matrix(m, m, 1.0));
  const auto post = chain_from_potentials(chain);
  Rng rng(123);
  const int draws = 100000;
  std::vector<int> counts(m, 0);
  for (int i = 0; i < draws; ++i) ++counts[sample_path(post, rng)[0]];
  const double p = 1.0 / m;
  const double sigma = std::sqrt(draws * p * (1 - p));
  for (int c : counts) EXPECT_LE(std::abs(c - draws * p), 3 * sigma);
}

TEST(MpmDecode, ArgmaxAndTieBreak) {
  const std::vector<double> marg = {0.7, 0.3, 0.5, 0.5, 0.2, 0.8};
  EXPECT_EQ(mpm_decode(marg, 2), (std::vector<std::uint32_t>{0, 0, 1}));
}

TEST(MpmDecode, MatchesEnumeratedPosterior) {
  std::mt19937_64 rng(31);
  const auto phis = random_potentials(2, 4, rng);
  const auto law = oracle::enumerate(2, 4, oracle::product_weight(phis));
  const auto decoded = mpm_decode(chain_from_potentials(to_chain(phis, 2)));
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_EQ(decoded[n], law.marginal(n, 1) > law.marginal(n, 0) ? 1u : 0u);
  }
}

TEST(ChainFromPotentials, LinearInLength) {
  std::mt19937_64 rng(1);
  const std::size_t m = 4;
  const std::size_t n = 1 << 19;
  PotentialChain small(m, n), big(m, 2 * n);
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (std::size_t s = 0; s < small.steps(); ++s) for (double& v : small.step_block(s)) v = u(rng);
  for (std::size_t s = 0; s < big.steps(); ++s) for (double& v : big.step_block(s)) v = u(rng);
  auto best_time = [](const PotentialChain& c) {
    double best = 1e9;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto post = chain_from_potentials(c);
      const auto t1 = std::chrono::steady_clock::now();
      EXPECT_GT(post.length(), 0u);
      best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
  };
  best_time(small);  // warm-up
  const double ratio = best_time(big) / best_time(small);
  EXPECT_GE(ratio, 1.5);
  EXPECT_LE(ratio, 3.0);
}

}  // namespace
}  // namespace peanoseg
