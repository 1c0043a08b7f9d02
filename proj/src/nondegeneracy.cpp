#include "bubbletower/nondegeneracy.hpp"

#include <cmath>
#include <sstream>

#include "bubbletower/bubble.hpp"
#include "bubbletower/interaction.hpp"
#include "bubbletower/kernel_basis.hpp"
#include "bubbletower/symmetry.hpp"

namespace bt {

namespace {

double relative_T(const Point& y, double v, const Point& grad, int n) {
  double radial = 0.0;
  for (int i = 0; i < n; ++i) radial += grad[i] * y[i];
  const double scale = std::abs((norm2(y, n) - 1.0) * grad[0]) + std::abs(2.0 * y[0] * (0.5 * (n - 2) * v + radial));
  const double t = kelvin_T(y, v, grad, n);
  return scale > 0.0 ? std::abs(t) / scale : std::abs(t);
}

}  // namespace

double kelvin_identity_residual(const TowerConfiguration& cfg, const std::vector<Point>& sample) {
  const int n = cfg.n;
  double worst = 0.0;
  for (const auto& y : sample) {
    const BubbleJet c = scaled_bubble_jet(y, cfg.bubble_params(0));
    worst = std::max(worst, relative_T(y, c.value, c.grad, n));
    double v = c.value;
    Point g = c.grad;
    for (int l = 0; l < cfg.h; ++l) {
      const BubbleJet b = scaled_bubble_jet(y, cfg.bubble_params(1 + cfg.k + l));
      v -= b.value;
      for (int i = 0; i < n; ++i) g[i] -= b.grad[i];
    }
    worst = std::max(worst, relative_T(y, v, g, n));
  }
  return worst;
}

nlohmann::ordered_json NondegeneracyReport::to_json() const {
  nlohmann::ordered_json j;
  j["config"] = {{"n", n}, {"k", k}, {"h", h}, {"delta", delta}, {"eps", eps}, {"mu", mu}, {"lambda", lambda}};
  j["scheme"] = {{"q", scheme.q},
                 {"alpha_bar", scheme.alpha_bar},
                 {"alpha_hat", scheme.alpha_hat},
                 {"rel_tol", scheme.rel_tol},
                 {"radial_nodes", scheme.radial_nodes},
                 {"angular_degree", scheme.angular_degree},
                 {"max_refine", scheme.max_refine}};
  j["seed"] = seed;
  j["N0"] = N0;
  j["script_N"] = script_N;
  j["maximal"] = maximal;
  j["gram_rank"] = gram_rank;
  j["min_singular_ratio"] = min_singular_ratio;
  j["singular_values"] = singular_values;
  j["rank_thresholds"] = rank_thresholds;
  j["rank_at_threshold"] = rank_at_threshold;
  j["gram_converged"] = gram_converged;
  j["decomposition_residuals"] = decomposition_residuals;
  j["decomposition_max_residual"] = decomposition_max_residual;
  j["kelvin_identity_residual"] = kelvin_identity_residual;
  j["L_residual_table"] = L_residual_table;
  j["L_residual_converged"] = L_residual_converged;
  j["circulant_kernel_residuals"] = circulant_kernel_residuals;
  j["interaction_noise"] = interaction_noise;
  j["caveat"] = caveat;
  j["failures"] = failures;
  j["pass"] = pass;
  return j;
}

NondegeneracyReport certify(const TowerConfiguration& cfg, const QuadratureScheme& scheme, std::uint64_t seed) {
  if (!cfg.has_rings()) throw ConfigError("certificate needs both rings (k >= 1 and h >= 1)");
  scheme.validate(cfg.n);
  NondegeneracyReport r;
  r.n = cfg.n;
  r.k = cfg.k;
  r.h = cfg.h;
  r.delta = cfg.delta;
  r.eps = cfg.eps;
  r.mu = cfg.mu;
  r.lambda = cfg.lambda;
  r.scheme = scheme;
  r.seed = seed;
  r.N0 = kernel_count(cfg.n);
  r.script_N = invariance_dimension(cfg.n);
  r.maximal = r.N0 == r.script_N;

  const std::vector<Point> sample = kernel_sample_points(cfg, 100, seed);
  for (int beta = 0; beta < r.N0; ++beta) {
    r.decomposition_residuals.push_back(decomposition_residual(beta, cfg, sample));
    r.decomposition_max_residual = std::max(r.decomposition_max_residual, r.decomposition_residuals.back());
  }
  r.kelvin_identity_residual = kelvin_identity_residual(cfg, sample);

  try {
    const FieldIntegrals fi = field_integrals(cfg, scheme);
    const GramResult g = gram_from_fields(fi.weighted, cfg, fi.err_est, fi.converged);
    r.gram_rank = g.rank;
    r.min_singular_ratio = g.min_singular_ratio;
    r.singular_values.assign(g.singular_values.data(), g.singular_values.data() + g.singular_values.size());
    r.rank_thresholds = g.thresholds;
    r.rank_at_threshold = g.rank_at_threshold;
    r.gram_converged = g.converged;

    const InteractionBlocks blocks(cfg, fi.linearized, fi.err_est, fi.converged);
    r.interaction_noise = blocks.noise();
    r.circulant_kernel_residuals = m1_kernel_residuals(blocks);
    for (int alpha = 5; alpha <= cfg.n; ++alpha) r.circulant_kernel_residuals.push_back(row_sum_residual(blocks.htilde(alpha)));
  } catch (const NumericalError& e) {
    r.failures.push_back(std::string("field integrals: ") + e.what());
  }

  try {
    const ResidualNorms norms = linearized_residual_norms(cfg, scheme);
    r.L_residual_table = norms.values;
    r.L_residual_converged = norms.converged;
  } catch (const NumericalError& e) {
    r.failures.push_back(std::string("residual norms: ") + e.what());
  }

  if (r.gram_rank != r.N0) {
    std::ostringstream os;
    os << "gram rank " << r.gram_rank << " differs from N0 = " << r.N0;
    r.failures.push_back(os.str());
  }
  if (!(r.decomposition_max_residual <= 1e-8)) {
    std::ostringstream os;
    os << "decomposition residual " << r.decomposition_max_residual << " above 1e-8";
    r.failures.push_back(os.str());
  }
  r.pass = r.failures.empty();
  return r;
}

}  // namespace bt
