#include "bubbletower/interaction.hpp"

#include <cmath>
#include <random>

#include "bubbletower/kernel_basis.hpp"
#include "bubbletower/symmetry.hpp"

namespace bt {

namespace {

struct Range {
  int first, count;
};

Range group_range(const TowerConfiguration& cfg, int group) {
  switch (group) {
    case 0: return {0, 1};
    case 1: return {1, cfg.k};
    case 2: return {1 + cfg.k, cfg.h};
    default: throw ConfigError("site group must be 0, 1 or 2");
  }
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

Eigen::VectorXd seeded_vector(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) v[i] = u(rng);
  return v;
}

void project_out(Eigen::VectorXd& v, const std::vector<Eigen::VectorXd>& dirs) {
  for (const auto& d : dirs) v -= d * (d.dot(v) / d.squaredNorm());
}

}  // namespace

InteractionBlocks::InteractionBlocks(const TowerConfiguration& cfg, Eigen::MatrixXd linearized, double noise,
                                     bool converged)
    : cfg_(cfg), m_(std::move(linearized)), noise_(noise), converged_(converged) {
  if (m_.rows() != field_count(cfg_) || m_.cols() != field_count(cfg_))
    throw ConfigError("interaction matrix size does not match the configuration");
}

Eigen::MatrixXd InteractionBlocks::sub(int a1, int rows, int a2, int cols) const {
  if (a1 < 0 || a1 > cfg_.n || a2 < 0 || a2 > cfg_.n) throw ConfigError("field direction out of range");
  const Range r = group_range(cfg_, rows), c = group_range(cfg_, cols);
  return m_.block(field_index(cfg_, a1, r.first), field_index(cfg_, a2, c.first), r.count, c.count);
}

double InteractionBlocks::beta(int a1, int a2) const {
  return m_(field_index(cfg_, a1, 1), field_index(cfg_, a2, 1 + cfg_.k));
}

Eigen::MatrixXd InteractionBlocks::htilde(int alpha) const {
  const int s = cfg_.num_sites();
  return m_.block(field_index(cfg_, alpha, 0), field_index(cfg_, alpha, 0), s, s);
}

Eigen::MatrixXd InteractionBlocks::m1() const {
  const int d = 5 * cfg_.num_sites();
  return m_.topLeftCorner(d, d);
}

Eigen::VectorXd InteractionBlocks::ring_cos(int ring) const {
  const Range r = group_range(cfg_, ring);
  const int axis = ring == 1 ? 0 : 2;
  const double len = ring == 1 ? cfg_.xi_norm() : cfg_.eta_norm();
  Eigen::VectorXd v(r.count);
  for (int i = 0; i < r.count; ++i) v[i] = cfg_.site(r.first + i).c[axis] / len;
  return v;
}

Eigen::VectorXd InteractionBlocks::ring_sin(int ring) const {
  const Range r = group_range(cfg_, ring);
  const int axis = ring == 1 ? 1 : 3;
  const double len = ring == 1 ? cfg_.xi_norm() : cfg_.eta_norm();
  Eigen::VectorXd v(r.count);
  for (int i = 0; i < r.count; ++i) v[i] = cfg_.site(r.first + i).c[axis] / len;
  return v;
}

InteractionBlocks assemble_interaction(const TowerConfiguration& cfg, const QuadratureScheme& scheme) {
  if (!cfg.has_rings()) throw ConfigError("interaction blocks need k >= 1 and h >= 1");
  FieldIntegrals fi = field_integrals(cfg, scheme);
  return InteractionBlocks(cfg, std::move(fi.linearized), fi.err_est, fi.converged);
}

Eigen::Matrix<double, 5, 5> beta_table(const InteractionBlocks& b) {
  Eigen::Matrix<double, 5, 5> t;
  for (int a1 = 0; a1 < 5; ++a1)
    for (int a2 = 0; a2 < 5; ++a2) t(a1, a2) = b.beta(a1, a2);
  return t;
}

double row_sum_residual(const Eigen::MatrixXd& htilde) {
  if (htilde.rows() < 2) throw ConfigError("row-sum relation needs at least two rows");
  const Eigen::RowVectorXd r = htilde.row(0) - htilde.bottomRows(htilde.rows() - 1).colwise().sum();
  return r.cwiseAbs().maxCoeff() / std::max(max_abs(htilde), 1e-300);
}

std::vector<Eigen::VectorXd> m1_kernel_vectors(const InteractionBlocks& b) {
  const TowerConfiguration& cfg = b.config();
  const int s = cfg.num_sites();
  const Eigen::VectorXd cb = b.ring_cos(1), sb = b.ring_sin(1), ch = b.ring_cos(2), sh = b.ring_sin(2);
  const double xi = cfg.xi_norm(), eta = cfg.eta_norm();
  auto at = [&](Eigen::VectorXd& w, int alpha, int group) {
    return w.segment(alpha * s + group_range(cfg, group).first, group_range(cfg, group).count);
  };
  std::vector<Eigen::VectorXd> out(5, Eigen::VectorXd::Zero(5 * s));
  // dilation about the origin
  out[0][0] = 1.0;
  at(out[0], 0, 1).setConstant(-1.0);
  at(out[0], 0, 2).setConstant(-1.0);
  at(out[0], 1, 1).setConstant(-1.0);
  at(out[0], 3, 2).setConstant(-1.0);
  // translations along y1, y2
  out[1][1 * s] = 1.0;
  at(out[1], 1, 1) = -cb / xi;
  at(out[1], 1, 2).setConstant(-1.0);
  at(out[1], 2, 1) = sb / xi;
  out[2][2 * s] = 1.0;
  at(out[2], 1, 1) = -sb / xi;
  at(out[2], 2, 1) = -cb / xi;
  at(out[2], 2, 2).setConstant(-1.0);
  // translations along y3, y4
  out[3][3 * s] = 1.0;
  at(out[3], 3, 1).setConstant(-1.0);
  at(out[3], 3, 2) = -ch / eta;
  at(out[3], 4, 2) = sh / eta;
  out[4][4 * s] = 1.0;
  at(out[4], 3, 2) = -sh / eta;
  at(out[4], 4, 1).setConstant(-1.0);
  at(out[4], 4, 2) = -ch / eta;
  return out;
}

std::vector<double> m1_kernel_residuals(const InteractionBlocks& b) {
  const Eigen::MatrixXd m = b.m1();
  const double scale = std::max(max_abs(m), 1e-300);
  std::vector<double> out;
  for (const auto& w : m1_kernel_vectors(b))
    out.push_back((w.transpose() * m).cwiseAbs().maxCoeff() / (scale * w.lpNorm<1>()));
  return out;
}

double circulant_deviation(const Eigen::MatrixXd& block) {
  double dev = 0.0;
  circulant_fit(block, &dev);
  return dev / std::max(max_abs(block), 1e-300);
}

std::vector<BlockCheck> factored_form_checks(const InteractionBlocks& b) {
  const TowerConfiguration& cfg = b.config();
  const Eigen::VectorXd cb = b.ring_cos(1), sb = b.ring_sin(1), ch = b.ring_cos(2), sh = b.ring_sin(2);
  const auto beta = beta_table(b);
  // Rotating ring-2 site l to the first one turns ring-1 direction 3, 4 fields
  // into combinations of both; rotating ring-1 site j does the same to ring-2
  // directions 1, 2. Entry (j, l) = u_a(l)^T beta v_b(j).
  auto ring1_coeffs = [&](int a, int l) {
    Eigen::Matrix<double, 5, 1> u = Eigen::Matrix<double, 5, 1>::Zero();
    if (a == 3) {
      u[3] = ch[l];
      u[4] = -sh[l];
    } else if (a == 4) {
      u[3] = sh[l];
      u[4] = ch[l];
    } else {
      u[a] = 1.0;
    }
    return u;
  };
  auto ring2_coeffs = [&](int c, int j) {
    Eigen::Matrix<double, 5, 1> v = Eigen::Matrix<double, 5, 1>::Zero();
    if (c == 1) {
      v[1] = cb[j];
      v[2] = -sb[j];
    } else if (c == 2) {
      v[1] = sb[j];
      v[2] = cb[j];
    } else {
      v[c] = 1.0;
    }
    return v;
  };
  const char* letters = "ABCDEFGHIJKLMNP";
  std::vector<BlockCheck> out;
  int idx = 0;
  for (int a = 0; a <= 4; ++a) {
    for (int c = a; c <= 4; ++c, ++idx) {
      const Eigen::MatrixXd actual = b.sub(a, 1, c, 2);
      Eigen::MatrixXd expected(cfg.k, cfg.h);
      for (int j = 0; j < cfg.k; ++j)
        for (int l = 0; l < cfg.h; ++l) expected(j, l) = ring1_coeffs(a, l).dot(beta * ring2_coeffs(c, j));
      out.push_back({std::string(1, letters[idx]) + "1", max_abs(actual - expected),
                     std::max(max_abs(actual), max_abs(expected))});
    }
  }
  return out;
}

std::vector<BlockCheck> block_identity_checks(const InteractionBlocks& b) {
  const Eigen::MatrixXd fhat = b.sub(1, 2, 1, 2), jhat = b.sub(2, 2, 2, 2);
  const Eigen::MatrixXd mbar = b.sub(3, 1, 3, 1), pbar = b.sub(4, 1, 4, 1);
  return {{"Fhat=Jhat", max_abs(fhat - jhat), std::max(max_abs(fhat), max_abs(jhat))},
          {"Mbar=Pbar", max_abs(mbar - pbar), std::max(max_abs(mbar), max_abs(pbar))}};
}

std::vector<BlockCheck> circulant_property_checks(const InteractionBlocks& b) {
  std::vector<BlockCheck> out;
  for (int alpha = 0; alpha <= 4; ++alpha) {
    for (int ring = 1; ring <= 2; ++ring) {
      const Eigen::MatrixXd blk = b.sub(alpha, ring, alpha, ring);
      double dev = 0.0;
      circulant_fit(blk, &dev);
      out.push_back({std::string(ring == 1 ? "bar" : "hat") + std::to_string(alpha), dev, max_abs(blk)});
    }
  }
  return out;
}

OrthogonalityReport check_orthogonality_conditions(const InteractionBlocks& b, std::uint64_t seed) {
  const TowerConfiguration& cfg = b.config();
  std::mt19937_64 rng(seed);
  const Eigen::VectorXd cb = b.ring_cos(1), sb = b.ring_sin(1), ch = b.ring_cos(2), sh = b.ring_sin(2);
  const Eigen::VectorXd one_b = Eigen::VectorXd::Ones(cfg.k);
  std::array<Eigen::VectorXd, 5> c;
  for (auto& v : c) v = seeded_vector(cfg.h, rng);
  project_out(c[1], {ch, sh});
  project_out(c[2], {ch, sh});
  // X1 = rows ring 1, cols ring 2; X2 = rows ring 2, cols ring 1
  auto x1 = [&](int a1, int a2) { return b.sub(a1, 1, a2, 2); };
  auto x2t = [&](int a1, int a2) { return Eigen::MatrixXd(b.sub(a1, 2, a2, 1).transpose()); };

  const Eigen::VectorXd v1 = x2t(0, 2) * c[0] + x2t(1, 2) * c[1] + x1(2, 2) * c[2] + x1(2, 3) * c[3] + x1(2, 4) * c[4];
  const Eigen::VectorXd v2 = x1(0, 0) * c[0] + x1(0, 1) * c[1] + x1(0, 2) * c[2] + x1(0, 3) * c[3] +
                             x1(0, 4) * c[4] + x2t(0, 1) * c[0] + x1(1, 1) * c[1] + x1(1, 2) * c[2] +
                             x1(1, 3) * c[3] + x1(1, 4) * c[4];
  const Eigen::VectorXd v4 = x2t(0, 3) * c[0] + x2t(1, 3) * c[1] + x2t(2, 3) * c[2] + x1(3, 3) * c[3] + x1(3, 4) * c[4];
  const Eigen::VectorXd v6 = x2t(0, 4) * c[0] + x2t(1, 4) * c[1] + x2t(2, 4) * c[2] + x2t(3, 4) * c[3] + x1(4, 4) * c[4];

  double cnorm = 0.0;
  for (const auto& v : c) cnorm += v.squaredNorm();
  cnorm = std::sqrt(cnorm);
  const double scale = std::max(max_abs(b.full()) * cnorm * std::sqrt(double(cfg.k * cfg.h)), 1e-300);

  OrthogonalityReport r;
  auto add = [&](const std::string& name, double v) {
    r.names.push_back(name);
    r.values.push_back(std::abs(v) / scale);
  };
  add("cond1", v1.dot(one_b));
  add("cond2", v2.dot(cb));
  add("cond3", v2.dot(sb));
  add("cond4", v4.dot(cb));
  add("cond5", v4.dot(sb));
  add("cond6", v6.dot(cb));
  add("cond7", v6.dot(sb));

  // (X1 + Y2^T)_{jl} = int L(ring-2 field a at l) (Zbar_0j + Zbar_1j)
  const double mscale = std::max(max_abs(b.full()), 1e-300);
  const char* names[] = {"A1+B2^T", "B1+F1", "C1+G1", "D1+H1", "E1+I1"};
  for (int a = 0; a <= 4; ++a) {
    const Eigen::MatrixXd s = b.sub(a, 2, 0, 1) + b.sub(a, 2, 1, 1);
    r.names.push_back(names[a]);
    r.values.push_back(max_abs(s) / mscale);
  }
  return r;
}

BlockInteractionSystem block_system(const InteractionBlocks& b, int alpha, std::uint64_t seed) {
  const TowerConfiguration& cfg = b.config();
  if (alpha < 0 || alpha > cfg.n) throw ConfigError("field direction out of range");
  BlockInteractionSystem sys;
  double dev = 0.0;
  sys.hbar = circulant_fit(b.sub(alpha, 1, alpha, 1), &dev);
  sys.hhat = circulant_fit(b.sub(alpha, 2, alpha, 2), &dev);
  sys.gamma = b.beta(alpha, alpha);
  sys.deflation_bar = cos_sin_vectors(cfg.k);
  sys.deflation_hat = cos_sin_vectors(cfg.h);
  std::mt19937_64 rng(seed);
  sys.rbar = seeded_vector(cfg.k, rng);
  sys.rhat = seeded_vector(cfg.h, rng);
  project_out(sys.rbar, sys.deflation_bar);
  project_out(sys.rhat, sys.deflation_hat);
  return sys;
}

}  // namespace bt
