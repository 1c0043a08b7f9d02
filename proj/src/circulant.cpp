#include "bubbletower/circulant.hpp"

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <sstream>

#include <unsupported/Eigen/FFT>

namespace bt {

namespace {

// Eigen's kissfft backend faults on length 1, where the transform is the identity.
Eigen::VectorXcd fft(const Eigen::VectorXd& x) {
  if (x.size() == 1) return x.cast<std::complex<double>>();
  Eigen::FFT<double> f;
  Eigen::VectorXcd out;
  f.fwd(out, x);
  return out;
}

Eigen::VectorXd ifft_real(const Eigen::VectorXcd& x) {
  if (x.size() == 1) return x.real();
  Eigen::FFT<double> f;
  Eigen::VectorXcd out;
  f.inv(out, x);
  return out.real();
}

void require_size(const CirculantMatrix& c, Eigen::Index m) {
  if (c.size() == 0) throw ConfigError("empty circulant matrix");
  if (m != c.size()) throw ConfigError("vector length does not match the circulant size");
}

}  // namespace

Eigen::MatrixXd CirculantMatrix::dense() const {
  const int m = size();
  Eigen::MatrixXd d(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) d(i, j) = first_row[((j - i) % m + m) % m];
  return d;
}

Eigen::VectorXcd circ_eigenvalues(const CirculantMatrix& c) {
  require_size(c, c.size());
  return fft(c.first_row).conjugate();
}

Eigen::VectorXd circ_matvec(const CirculantMatrix& c, const Eigen::VectorXd& x) {
  require_size(c, x.size());
  const Eigen::VectorXcd lam = circ_eigenvalues(c);
  return ifft_real(lam.cwiseProduct(fft(x)));
}

CirculantMatrix circulant_fit(const Eigen::MatrixXd& a, double* deviation) {
  if (a.rows() != a.cols() || a.rows() == 0) throw ConfigError("circulant fit needs a square matrix");
  const int m = static_cast<int>(a.rows());
  CirculantMatrix c;
  c.first_row = Eigen::VectorXd::Zero(m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) c.first_row[((j - i) % m + m) % m] += a(i, j) / m;
  if (deviation) *deviation = (a - c.dense()).cwiseAbs().maxCoeff();
  return c;
}

std::vector<Eigen::VectorXd> cos_sin_vectors(int m) {
  Eigen::VectorXd c(m), s(m);
  for (int j = 0; j < m; ++j) {
    const double t = 2.0 * std::numbers::pi * j / m;
    c[j] = std::cos(t);
    s[j] = std::sin(t);
  }
  return {c, s};
}

std::vector<int> deflated_modes(int m, const std::vector<Eigen::VectorXd>& deflation) {
  if (deflation.empty()) return {};
  std::vector<bool> used(m, false);
  for (const auto& v : deflation) {
    if (v.size() != m) throw ConfigError("deflation vector length does not match the circulant size");
    const Eigen::VectorXcd f = fft(v);
    const double scale = f.cwiseAbs().maxCoeff();
    if (scale == 0.0) throw ConfigError("zero deflation vector");
    for (int t = 0; t < m; ++t)
      if (std::abs(f[t]) > 1e-10 * scale) used[t] = true;
  }
  std::vector<int> modes;
  for (int t = 0; t < m; ++t)
    if (used[t]) modes.push_back(t);
  // real vectors fill conjugate pairs; the span must be exactly those modes
  Eigen::MatrixXd basis(m, deflation.size());
  for (std::size_t i = 0; i < deflation.size(); ++i) basis.col(i) = deflation[i];
  const Eigen::Index rank = basis.fullPivLu().rank();
  if (rank != static_cast<Eigen::Index>(modes.size()))
    throw ConfigError("deflation vectors do not span a set of Fourier modes");
  return modes;
}

Eigen::VectorXd circ_solve_deflated(const CirculantMatrix& c, const Eigen::VectorXd& rhs,
                                    const std::vector<Eigen::VectorXd>& deflation, double tol) {
  require_size(c, rhs.size());
  const int m = c.size();
  const std::vector<int> modes = deflated_modes(m, deflation);
  std::vector<double> products;
  bool bad = false;
  for (const auto& v : deflation) {
    const double ip = rhs.dot(v);
    products.push_back(ip);
    if (std::abs(ip) > tol * std::max(rhs.norm(), 1e-300) * v.norm()) bad = true;
  }
  if (bad) {
    std::ostringstream os;
    os << "right-hand side not orthogonal to the deflation vectors:";
    for (double p : products) os << ' ' << p;
    throw ConsistencyError(os.str(), products);
  }
  const Eigen::VectorXcd lam = circ_eigenvalues(c);
  Eigen::VectorXcd x = fft(rhs);
  std::vector<bool> drop(m, false);
  for (int t : modes) drop[t] = true;
  const double top = lam.cwiseAbs().maxCoeff();
  for (int t = 0; t < m; ++t) {
    if (drop[t]) {
      x[t] = 0.0;
      continue;
    }
    if (std::abs(lam[t]) <= 1e-14 * top) throw NumericalError("circulant matrix singular off the deflated modes");
    x[t] /= lam[t];
  }
  return ifft_real(x);
}

double circ_inverse_norm(const CirculantMatrix& c, const std::vector<int>& deflated) {
  const Eigen::VectorXcd lam = circ_eigenvalues(c);
  std::vector<bool> drop(c.size(), false);
  for (int t : deflated) drop[t] = true;
  double smallest = std::numeric_limits<double>::infinity();
  for (int t = 0; t < c.size(); ++t)
    if (!drop[t]) smallest = std::min(smallest, std::abs(lam[t]));
  return 1.0 / smallest;
}

Eigen::MatrixXd BlockInteractionSystem::dense() const {
  const int k = hbar.size(), h = hhat.size();
  Eigen::MatrixXd s(k + h, k + h);
  s.topLeftCorner(k, k) = hbar.dense();
  s.bottomRightCorner(h, h) = hhat.dense();
  s.topRightCorner(k, h).setConstant(gamma);
  s.bottomLeftCorner(h, k).setConstant(gamma);
  return s;
}

ContractionResult solve_block_contraction(const BlockInteractionSystem& sys, double tol, int max_iter) {
  const int k = sys.hbar.size(), h = sys.hhat.size();
  if (sys.rbar.size() != k || sys.rhat.size() != h) throw ConfigError("right-hand side sizes do not match the blocks");
  ContractionResult out;
  out.factor = sys.gamma * sys.gamma * circ_inverse_norm(sys.hbar, deflated_modes(k, sys.deflation_bar)) *
               circ_inverse_norm(sys.hhat, deflated_modes(h, sys.deflation_hat)) * k * h;
  {
    const double l0 = std::abs(circ_eigenvalues(sys.hbar)[0] * circ_eigenvalues(sys.hhat)[0]);
    out.sweep_rate = l0 > 0.0 ? sys.gamma * sys.gamma * k * h / l0 : std::numeric_limits<double>::infinity();
  }
  const Eigen::VectorXd ones_bar = Eigen::VectorXd::Ones(k), ones_hat = Eigen::VectorXd::Ones(h);
  Eigen::VectorXd wbar = Eigen::VectorXd::Zero(k), what = Eigen::VectorXd::Zero(h);
  const double scale = std::max(sys.rbar.norm() + sys.rhat.norm(), 1e-300);
  for (int it = 1; it <= max_iter; ++it) {
    const double old_sum = what.sum();
    wbar = circ_solve_deflated(sys.hbar, sys.rbar - sys.gamma * old_sum * ones_bar, sys.deflation_bar);
    what = circ_solve_deflated(sys.hhat, sys.rhat - sys.gamma * wbar.sum() * ones_hat, sys.deflation_hat);
    out.iterations = it;
    // the second block is solved exactly; the first lags by the change in sum(what)
    const double residual = std::abs(sys.gamma * (what.sum() - old_sum)) * std::sqrt(double(k));
    if (residual <= tol * scale) {
      out.converged = true;
      break;
    }
  }
  out.wbar = wbar;
  out.what = what;
  out.bound_ratio = wbar.norm() / std::max(sys.rbar.norm(), 1e-300);
  if (!out.converged) {
    std::ostringstream os;
    os << "block contraction did not converge in " << max_iter << " sweeps; factor estimate " << out.factor;
    throw NumericalError(os.str());
  }
  return out;
}

Eigen::VectorXd dense_block_solve(const BlockInteractionSystem& sys) {
  const int k = sys.hbar.size(), h = sys.hhat.size();
  const int m = k + h;
  Eigen::MatrixXd defl(m, sys.deflation_bar.size() + sys.deflation_hat.size());
  defl.setZero();
  int col = 0;
  for (const auto& v : sys.deflation_bar) defl.col(col++).head(k) = v;
  for (const auto& v : sys.deflation_hat) defl.col(col++).tail(h) = v;
  // orthonormal complement from a full QR of the deflation block
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(defl);
  const Eigen::MatrixXd full_q = qr.householderQ() * Eigen::MatrixXd::Identity(m, m);
  const Eigen::Index r = defl.fullPivLu().rank();
  const Eigen::MatrixXd q = full_q.rightCols(m - r);
  Eigen::VectorXd rhs(m);
  rhs << sys.rbar, sys.rhat;
  const Eigen::MatrixXd reduced = q.transpose() * sys.dense() * q;
  const Eigen::VectorXd y = reduced.colPivHouseholderQr().solve(q.transpose() * rhs);
  return q * y;
}

}  // namespace bt
