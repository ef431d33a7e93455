#pragma once

// Hand-built ensembles with known structure, for analysis tests that should
// not depend on training.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "rmpm/experiments/config.hpp"
#include "rmpm/experiments/run.hpp"

namespace rmpm::testing {

inline linalg::Matrix random_orthogonal(std::size_t n, std::mt19937_64& gen) {
  std::normal_distribution<double> dist;
  std::vector<std::vector<double>> q;
  while (q.size() < n) {
    std::vector<double> v(n);
    for (double& x : v) x = dist(gen);
    for (const auto& u : q) {
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) d += u[i] * v[i];
      for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (double& x : v) x /= norm;
    q.push_back(v);
  }
  linalg::Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m(i, j) = q[i][j];
  return m;
}

struct ConstructedSpec {
  std::size_t strategies = 4;
  std::size_t variants = 3;
  std::size_t samples = 400;
  std::size_t agreed = 100;   // leading samples on which every variant predicts identically
  std::size_t classes = 3;
  std::size_t neurons = 10;
  double disagreement = 0.06;  // strategy i: (i + 1) * disagreement on the other samples
  double perturbation = 0.25;  // strategy i: (i + 1) * perturbation activation noise
  std::uint64_t seed = 11;
};

// Strategy i has full-set PM growing with i, zero PM on the agreed samples,
// and "fc1" activations Q_k * Z + noise_i with a per-variant rotation Q_k, so
// representations differ internally while outputs on the agreed samples match.
inline std::vector<experiments::EnsembleRun> constructed_runs(const ConstructedSpec& s) {
  std::mt19937_64 gen(s.seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  constexpr std::uint64_t kFingerprint = 0xfeedu;

  linalg::Matrix base(s.samples, s.classes);
  for (std::size_t n = 0; n < s.samples; ++n) {
    double sum = 0.0;
    for (std::size_t c = 0; c < s.classes; ++c) sum += base(n, c) = 0.2 + unit(gen);
    for (std::size_t c = 0; c < s.classes; ++c) base(n, c) /= sum;
  }
  linalg::Matrix z(s.neurons, s.samples);
  for (double& v : z.values()) v = normal(gen);

  std::vector<experiments::EnsembleRun> runs;
  for (std::size_t i = 0; i < s.strategies; ++i) {
    experiments::EnsembleRun run;
    run.strategy.name = "s" + std::to_string(i);
    run.strategy.learning_rate = 1e-3 / static_cast<double>(i + 1);
    run.strategy.seeds.clear();
    run.test_fingerprint = kFingerprint;
    run.order = i;
    const double d = s.disagreement * static_cast<double>(i + 1);
    const double sigma = s.perturbation * static_cast<double>(i + 1);
    for (std::size_t k = 0; k < s.variants; ++k) {
      experiments::VariantRecord v;
      v.seed = k + 1;
      run.strategy.seeds.push_back(v.seed);
      v.accuracy = 0.8;
      v.probs_iid = base;
      for (std::size_t n = s.agreed; n < s.samples; ++n) {
        // Move mass d between two classes, in a variant-dependent direction.
        const std::size_t a = (n + k) % s.classes, b = (n + k + 1) % s.classes;
        const double shift = std::min(d, v.probs_iid(n, b));
        v.probs_iid(n, a) += shift;
        v.probs_iid(n, b) -= shift;
      }
      const auto q = random_orthogonal(s.neurons, gen);
      linalg::Matrix act(s.neurons, s.samples);
      for (std::size_t r = 0; r < s.neurons; ++r)
        for (std::size_t n = 0; n < s.samples; ++n) {
          double acc = 0.0;
          for (std::size_t j = 0; j < s.neurons; ++j) acc += q(r, j) * z(j, n);
          act(r, n) = acc + sigma * normal(gen);
        }
      v.taps["fc1"] = svcca::ActivationMatrix{"fc1", kFingerprint, act};
      run.variants.push_back(std::move(v));
    }
    runs.push_back(std::move(run));
  }
  return runs;
}

}  // namespace rmpm::testing
