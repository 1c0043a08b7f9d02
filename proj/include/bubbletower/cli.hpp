#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bubbletower/quadrature.hpp"

namespace bt {

// Fully resolved parameters of one command.
struct RunConfig {
  std::string command;
  int n = 4;
  std::vector<int> k{8};  // error-scan takes a list, other commands the first entry
  int h = 0;              // 0: same as k
  std::optional<double> delta, eps;
  QuadratureScheme quad = QuadratureScheme::defaults(4);
  std::string out = ".";
  std::uint64_t seed = 1;

  int ring2(int k_value) const { return h > 0 ? h : k_value; }
  void validate() const;
  nlohmann::ordered_json to_json() const;
};

// Keys: command, n, k (integer or list), h, delta, eps, q, alpha_bar, alpha_hat,
// rel_tol, radial_nodes, angular_degree, max_refine, out, seed. Unknown keys throw ConfigError.
RunConfig run_config_from_json(const nlohmann::json& j);

// Exit codes: 0 success, 1 failed check or numerical failure, 2 configuration error.
int run_cli(int argc, char** argv);

}  // namespace bt
