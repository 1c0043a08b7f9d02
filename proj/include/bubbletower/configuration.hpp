#pragma once

#include <tuple>
#include <vector>

#include "bubbletower/bubble.hpp"

namespace bt {

// Admissible box for the balancing parameters (delta, eps).
constexpr double kBoxLo = 0.1;
constexpr double kBoxHi = 10.0;

enum class SiteKind { Center, Ring1, Ring2 };

// One bubble of the approximate solution: center, scale and sign in U_*.
struct Site {
  SiteKind kind = SiteKind::Center;
  int index = 0;  // 0-based within its ring
  Point c{};
  double scale = 1.0;
  double sign = 1.0;
};

struct TowerConfiguration {
  int n = 4;
  int k = 0;
  int h = 0;
  double delta = 1.0;
  double eps = 1.0;
  double mu = 0.0;
  double lambda = 0.0;
  std::vector<Point> xi;
  std::vector<Point> eta;
  std::vector<double> theta_bar;
  std::vector<double> theta_hat;
  // Set when k or h is below the size where the asymptotics are meaningful.
  bool small_ring_warning = false;
  bool in_admissible_box = true;

  double xi_norm() const { return std::sqrt(1.0 - mu * mu); }
  double eta_norm() const { return std::sqrt(1.0 - lambda * lambda); }
  int num_sites() const { return 1 + k + h; }
  // Site 0 is the central bubble, then ring 1, then ring 2.
  Site site(int s) const;
  std::vector<Site> sites() const;
  BubbleParams bubble_params(int s) const;
  bool has_rings() const { return k > 0 && h > 0; }

  // Central bubble only; used by tests where E vanishes identically.
  static TowerConfiguration single_bubble(int n);
};

// Rings smaller than this still work but are flagged.
constexpr int kSmallRing = 6;

TowerConfiguration make_configuration(int n, int k, int h, double delta, double eps);

// Reflection mask bits: bit i flips coordinate i (0-based). Only coordinates
// 1, 3, 4, ..., n-1 (i.e. y_2, y_4, y_5, ...) are admissible.
unsigned reflection_mask_all(int n);
Point symmetry_orbit(const TowerConfiguration& cfg, const Point& y, int j, int l, unsigned signs);

// (ring-1 spacing, ring-2 spacing, cross-ring distance)
std::tuple<double, double, double> min_separation(const TowerConfiguration& cfg);

}  // namespace bt
