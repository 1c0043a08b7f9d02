#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bubbletower/bubble.hpp"
#include "bubbletower/configuration.hpp"

namespace bt {

struct Rule1D {
  std::vector<double> x;
  std::vector<double> w;
};

// Gauss-Legendre nodes and weights on [-1, 1], cached per order.
const Rule1D& gauss_legendre(int m);
// Composite Gauss-Legendre rule with m nodes on each panel [breaks[i], breaks[i+1]].
Rule1D composite_gl(const std::vector<double>& breaks, int m);

struct QuadratureScheme {
  double q = 3.0;
  double alpha_bar = 1.0;
  double alpha_hat = 1.0;
  double rel_tol = 1e-6;
  int radial_nodes = 6;
  int angular_degree = 12;
  int max_refine = 2;

  // q defaults to the midpoint of (n/2, n).
  static QuadratureScheme defaults(int n);
  void validate(int n) const;
  int radial_at(int level) const { return radial_nodes + 2 * level; }
  int angular_at(int level) const { return angular_degree + 4 * level; }
};

// ---------------------------------------------------------------------------
// Scalar fields with declared symmetries

enum SymmetryTag : unsigned {
  kRing1Invariant = 1u << 0,
  kRing2Invariant = 1u << 1,
  kKelvinEven = 1u << 2,
  kKelvinOdd = 1u << 3,
};

class ScalarField {
 public:
  // even_mask: coordinate bits (0-based) under whose reflection f is even.
  // kelvin_weight w: the Kelvin tags mean |y|^{-w} f(y/|y|^2) = +-f(y).
  // Declared tags are spot-checked on 32 seeded points against cfg.
  ScalarField(Field f, const TowerConfiguration& cfg, unsigned tags = 0, unsigned even_mask = 0,
              double decay_exponent = std::numeric_limits<double>::infinity(),
              double kelvin_weight = -1.0);

  double operator()(const Point& y) const { return f_(y); }
  const Field& evaluator() const { return f_; }
  unsigned tags() const { return tags_; }
  unsigned even_mask() const { return even_mask_; }
  double decay_exponent() const { return decay_; }
  int n() const { return n_; }

 private:
  Field f_;
  int n_;
  unsigned tags_;
  unsigned even_mask_;
  double decay_;
};

// ---------------------------------------------------------------------------
// Geometry of the partition of unity around the ring sites.

struct PatchGeometry {
  double ball1 = 0.0, ball2 = 0.0;  // region balls alpha_bar/k, alpha_hat/h
  double rp1 = 0.0, rq1 = 0.0;      // ring-1 plateau and outer radius
  double rp2 = 0.0, rq2 = 0.0;      // ring-2 plateau and outer radius
  double grade1 = 0.25, grade2 = 0.25;  // feature length scales of the remainder grid
  double chi(SiteKind ring, double r) const;
};

PatchGeometry make_patch_geometry(const TowerConfiguration& cfg, const QuadratureScheme& scheme);
// 1 - sum of all ring cutoffs at y.
double remainder_weight(const TowerConfiguration& cfg, const PatchGeometry& g, const Point& y);

// ---------------------------------------------------------------------------
// Node sets. Each set is a list of blocks; a block is generated on demand.

struct QNode {
  Point y;
  double w;
};

class NodeSet {
 public:
  virtual ~NodeSet() = default;
  virtual std::size_t blocks() const = 0;
  virtual void block(std::size_t b, std::vector<QNode>& out) const = 0;
  std::size_t count_nodes() const;
};

struct DirectionRule {
  std::vector<Point> dirs;
  std::vector<double> w;
};

// Product rule on S^{n-1}: two circles (y1,y2) and (y3,y4) with n1 and n2
// trapezoid nodes, the mixing angle by Gauss-Legendre, and for n > 4 an
// extra polar angle times a rule on S^{n-5}.
DirectionRule direction_rule(int n, int n_mix, int n1, int n2, int n_extra);

// Rule on S^m as unit vectors of length m+1; circles get 2*nodes points.
void sphere_rule(int m, int nodes, std::vector<std::vector<double>>& dirs, std::vector<double>& w);

// Radial rule on [r0, r1] in the variable asinh(r/scale). Physical breaks are
// kept as panel ends. Panel counts are taken from ref_scale so that nodes move
// continuously when scale changes.
Rule1D radial_rule(double r0, double r1, double scale, double ref_scale, std::vector<double> breaks, int m);

class PatchNodes : public NodeSet {
 public:
  enum class Cutoff { None, Partition };
  PatchNodes(int n, const Point& center, Rule1D radial, DirectionRule dirs, Cutoff cutoff = Cutoff::None,
             const PatchGeometry* geom = nullptr, SiteKind ring = SiteKind::Ring1);
  std::size_t blocks() const override { return radial_.x.size(); }
  void block(std::size_t b, std::vector<QNode>& out) const override;

 private:
  int n_;
  Point center_;
  Rule1D radial_;
  DirectionRule dirs_;
  Cutoff cutoff_;
  PatchGeometry geom_;
  SiteKind ring_;
};

// The complement of the ring patches, weighted by 1 - sum(chi). Angles a, b
// are the (y1,y2) and (y3,y4) polar angles; the range is a union of half
// cells [m*pi/K, (m+1)*pi/K]. The |y| > 1 part is reached through the
// Kelvin map with Jacobian |x|^{-2n}.
class RemainderNodes : public NodeSet {
 public:
  RemainderNodes(const TowerConfiguration& cfg, const PatchGeometry& geom, const QuadratureScheme& scheme,
                 int level, std::vector<int> a_cells, std::vector<int> b_cells, bool kelvin_part);
  std::size_t blocks() const override { return rho_.x.size() * t_.x.size(); }
  void block(std::size_t b, std::vector<QNode>& out) const override;
  int a_half_cells() const { return ka_ * 2; }
  int b_half_cells() const { return kb_ * 2; }

 private:
  const TowerConfiguration* cfg_;
  PatchGeometry geom_;
  bool kelvin_;
  int ka_, kb_;
  Rule1D rho_, t_, a_, b_, phi_;
  DirectionRule tail_;  // rule on S^{n-5} (n > 4)
};

// Number of half cells used for the a and b angles of a configuration.
int angular_cells(int ring_size);

// ---------------------------------------------------------------------------
// Summation drivers (deterministic: fixed block order, pairwise reduction).

double sum_nodes(const NodeSet& nodes, const Field& f);

using OuterEval = std::function<void(const Point& y, double* a, double* b)>;
// Accumulates sum_i w_i a(y_i) b(y_i)^T.
Eigen::MatrixXd sum_outer(const NodeSet& nodes, int rows, int cols, const OuterEval& eval);

double pairwise_sum(const std::vector<double>& v);

// ---------------------------------------------------------------------------
// Integration over R^n

struct IntegrationResult {
  double value = 0.0;
  double err_est = 0.0;
  bool converged = false;
  int level = 0;
};

// Runs level-indexed evaluations until two consecutive levels agree to
// rel_tol (relative to max(|value|, abs_floor)) or max_refine is reached.
IntegrationResult refine(const std::function<double(int)>& at_level, const QuadratureScheme& scheme,
                         double abs_floor = 0.0);

// Patches around ring sites plus the remainder; reductions are taken from
// the symmetry tags of f.
double integrate_level(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                       int level);
IntegrationResult integrate(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme);

// Integral of f over the shell r0 <= |y - center| <= r1 (no cutoff), with the
// radial grid graded on `scale` and the patch direction rule of cfg.
double integrate_ball_level(const Field& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                            int level, const Point& center, double r0, double r1, double scale,
                            double ref_scale, const std::vector<double>& breaks);
IntegrationResult integrate_ball(const Field& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                                 const Point& center, double r0, double r1, double scale, double ref_scale,
                                 const std::vector<double>& breaks = {});
DirectionRule patch_directions(const TowerConfiguration& cfg, const QuadratureScheme& scheme, int level);

// ---------------------------------------------------------------------------
// Weighted norms

struct SupResult {
  double value = 0.0;
  Point argmax{};
  int samples = 0;
};

SupResult norm_star(const ScalarField& f, const TowerConfiguration& cfg);

enum class RegionKind { All, Exterior, Ring1Ball, Ring2Ball };
struct Region {
  RegionKind kind = RegionKind::All;
  int index = 0;
};

double starstar_weight(const Point& y, int n, double q);
void validate_q(int n, double q);

// Integral of |weight*f|^q over the region (no q-th root).
IntegrationResult starstar_power(const ScalarField& f, const TowerConfiguration& cfg,
                                 const QuadratureScheme& scheme, Region region = {});
double norm_starstar(const ScalarField& f, const TowerConfiguration& cfg, const QuadratureScheme& scheme,
                     Region region = {});

}  // namespace bt
