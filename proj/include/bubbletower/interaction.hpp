#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bubbletower/circulant.hpp"
#include "bubbletower/configuration.hpp"
#include "bubbletower/quadrature.hpp"

namespace bt {

// Interaction integrals int L(Pi_i) Pi_j of all site fields, with the
// block views used by the coupled ring systems.
class InteractionBlocks {
 public:
  InteractionBlocks(const TowerConfiguration& cfg, Eigen::MatrixXd linearized, double noise, bool converged);

  const TowerConfiguration& config() const { return cfg_; }
  const Eigen::MatrixXd& full() const { return m_; }
  double noise() const { return noise_; }  // max entry change between the last two levels
  bool converged() const { return converged_; }

  // Rows L(field a1) over the sites of `rows`, columns field a2 over `cols`.
  // Site groups: 0 center, 1 ring 1, 2 ring 2.
  Eigen::MatrixXd sub(int a1, int rows, int a2, int cols) const;
  // int L(ring-1 field a1 at the first site) * ring-2 field a2 at the first site.
  double beta(int a1, int a2) const;
  // (1+k+h)^2 block of direction alpha, ordered center, ring 1, ring 2.
  Eigen::MatrixXd htilde(int alpha) const;
  // Directions 0..4 stacked, 5(1+k+h) square.
  Eigen::MatrixXd m1() const;

  // Cosine and sine of the ring angles read from the site positions.
  Eigen::VectorXd ring_cos(int ring) const;
  Eigen::VectorXd ring_sin(int ring) const;

 private:
  TowerConfiguration cfg_;
  Eigen::MatrixXd m_;
  double noise_;
  bool converged_;
};

InteractionBlocks assemble_interaction(const TowerConfiguration& cfg, const QuadratureScheme& scheme);

// beta_{a1 a2}, a1, a2 = 0..4.
Eigen::Matrix<double, 5, 5> beta_table(const InteractionBlocks& b);

// Largest |row_1 - sum of the other rows| relative to the largest entry.
double row_sum_residual(const Eigen::MatrixXd& htilde);

// The five vectors of ker(M1) generated by dilation and the four in-plane translations.
std::vector<Eigen::VectorXd> m1_kernel_vectors(const InteractionBlocks& b);
// |w^T M1|_inf / (max |M1| * |w|_1) for each kernel vector.
std::vector<double> m1_kernel_residuals(const InteractionBlocks& b);

// Deviation of a square block from its circulant fit, relative to the largest entry.
double circulant_deviation(const Eigen::MatrixXd& block);

struct BlockCheck {
  std::string name;
  double deviation = 0.0;  // absolute
  double scale = 0.0;      // largest entry of the blocks compared
};

// Ring-1 x ring-2 blocks (A1, B1, ..., P1) against the angle forms built
// from the beta table by rotating both sites to the first ones.
std::vector<BlockCheck> factored_form_checks(const InteractionBlocks& b);
// Fhat = Jhat and Mbar = Pbar, entrywise.
std::vector<BlockCheck> block_identity_checks(const InteractionBlocks& b);
// Diagonal ring blocks of each direction 0..4 against their circulant fits.
std::vector<BlockCheck> circulant_property_checks(const InteractionBlocks& b);

struct OrthogonalityReport {
  std::vector<std::string> names;
  std::vector<double> values;  // relative magnitudes
};

// The seven solvability conditions for seeded ring-2 vectors (with the
// ring-2 direction 1, 2 parts orthogonal to cos, sin), and the five
// block-sum identities (A1 + B2^T, B1 + F1, ...).
OrthogonalityReport check_orthogonality_conditions(const InteractionBlocks& b, std::uint64_t seed);

// Ring-1 / ring-2 diagonal blocks of direction alpha with coupling
// beta_{alpha alpha}, a seeded right-hand side orthogonal to cos and sin.
BlockInteractionSystem block_system(const InteractionBlocks& b, int alpha, std::uint64_t seed);

}  // namespace bt
