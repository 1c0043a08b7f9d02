#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bubbletower/configuration.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

inline constexpr const char* kCertificateCaveat =
    "consistency evidence, not a proof: corrections phi are set to zero, so the kernel "
    "functions are built from the approximate solution U_*";

// Largest relative |T(v)| over the sample for the Kelvin invariant, y1-even
// functions v = U and v = U - sum of the ring-2 bubbles, with
// T(v) = (|y|^2 - 1) d1 v - 2 y1 ((n-2)/2 v + grad v . y).
double kelvin_identity_residual(const TowerConfiguration& cfg, const std::vector<Point>& sample);

struct NondegeneracyReport {
  int n = 0, k = 0, h = 0;
  double delta = 0.0, eps = 0.0, mu = 0.0, lambda = 0.0;
  QuadratureScheme scheme;
  std::uint64_t seed = 0;

  int N0 = 0;
  int script_N = 0;
  bool maximal = false;

  int gram_rank = 0;
  double min_singular_ratio = 0.0;
  std::vector<double> singular_values;
  std::vector<double> rank_thresholds;
  std::vector<int> rank_at_threshold;
  bool gram_converged = false;

  std::vector<double> decomposition_residuals;  // per beta
  double decomposition_max_residual = 0.0;
  double kelvin_identity_residual = 0.0;

  std::vector<double> L_residual_table;  // ||L bold z_beta||_** per beta
  bool L_residual_converged = false;

  // directions 0..4: kernel vectors of the first block system; 5..n: row-sum relation
  std::vector<double> circulant_kernel_residuals;
  double interaction_noise = 0.0;

  std::string caveat = kCertificateCaveat;
  std::vector<std::string> failures;
  bool pass = false;

  nlohmann::ordered_json to_json() const;
};

NondegeneracyReport certify(const TowerConfiguration& cfg, const QuadratureScheme& scheme, std::uint64_t seed = 1);

}  // namespace bt
