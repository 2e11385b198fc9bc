#pragma once

// Objective of partial functional map matching and its analytic gradients.
//
//   E(C, v) = |C A - B(eta(v))|_{2,1}
//           + mu3 |C o W|_F^2 + mu45 |C^T C - diag(d)|_F^2            (map prior)
//           + mu1 (area(N) - int eta(v))^2 + mu2 int xi(v) |grad v|  (part prior)
//
// with B(eta) = Psi^T S_M diag(eta) G.

#include "pfm/mesh.hpp"

namespace pfm {

struct EnergyParams {
  double mu1 = 1.0;    ///< area
  double mu2 = 100.0;  ///< Mumford-Shah
  double mu3 = 1.0;    ///< slant
  double mu4_5 = 1e3;  ///< orthogonality
  double sigma_w = 0.03;
  double sigma_xi = 0.5;
  double ms_smoothing = 1e-2; ///< D_j is smoothed below ms_smoothing * (local edge length) of variation
  Index k = 100;

  void validate() const {
    if (!(mu1 >= 0 && mu2 >= 0 && mu3 >= 0 && mu4_5 >= 0)) throw InputError("energy weights must be non-negative");
    if (!(sigma_w >= 0)) throw InputError("sigma_w must be non-negative");
    if (!(sigma_xi > 0)) throw InputError("sigma_xi must be positive");
    if (!(ms_smoothing >= 0)) throw InputError("ms_smoothing must be non-negative");
    if (k < 2) throw InputError("k must be at least 2");
  }
};

struct EnergyBreakdown {
  double data = 0.0;
  double area = 0.0;
  double mumford_shah = 0.0;
  double slant = 0.0;
  double orthogonality = 0.0;
  double total = 0.0; ///< weighted sum
};

/// eta(t) = (tanh(2t - 1) + 1) / 2.
inline double eta(double t) { return 0.5 * (std::tanh(2.0 * t - 1.0) + 1.0); }

/// d eta / dt = 1 - tanh^2(2t - 1).
inline double eta_prime(double t) {
  const double th = std::tanh(2.0 * t - 1.0);
  return 1.0 - th * th;
}

/// Bump around the level set eta = 1/2: xi(t) = exp(-tanh^2(2t - 1) / (4 sigma^2)).
inline double xi(double t, double sigma) {
  const double th = std::tanh(2.0 * t - 1.0);
  return std::exp(-th * th / (4.0 * sigma * sigma));
}

inline double xi_prime(double t, double sigma) {
  const double th = std::tanh(2.0 * t - 1.0);
  return -xi(t, sigma) * th * (1.0 - th * th) / (sigma * sigma);
}

inline Vector eta(const Vector& v) { return v.unaryExpr([](double t) { return eta(t); }); }
inline Vector eta_prime(const Vector& v) { return v.unaryExpr([](double t) { return eta_prime(t); }); }

/// L2,1 data term |C A - B(eta(v))|_{2,1}. Column norms are smoothed as
/// sqrt(|h|^2 + eps^2) - eps; eps is fixed at construction from B(1).
class DataTerm {
public:
  DataTerm() = default;

  /// A: k x q (partial shape), Psi: n x k, mass: n, G: n x q (full shape).
  DataTerm(Matrix A, Matrix Psi, const Vector& mass, const Matrix& G)
      : A_(std::move(A)), Psi_(std::move(Psi)), mass_(mass), G_(G) {
    if (A_.cols() != G_.cols()) throw InputError("data term: descriptor counts differ");
    if (Psi_.rows() != G_.rows() || mass_.size() != G_.rows()) throw InputError("data term: full-shape sizes differ");
    if (A_.rows() != Psi_.cols()) throw InputError("data term: basis sizes differ");
    const Matrix B1 = Psi_.transpose() * (mass_.asDiagonal() * G_);
    epsilon_ = 1e-9 * B1.norm() / std::sqrt(static_cast<double>(std::max<Index>(1, A_.cols())));
    if (!(epsilon_ > 0.0)) epsilon_ = 1e-12;
  }

  [[nodiscard]] double epsilon() const { return epsilon_; }
  [[nodiscard]] const Matrix& A() const { return A_; }
  [[nodiscard]] Index k() const { return A_.rows(); }
  [[nodiscard]] Index num_vertices() const { return Psi_.rows(); }

  /// B(eta) for a given saturated indicator.
  [[nodiscard]] Matrix B(const Vector& eta_values) const {
    return Psi_.transpose() * (mass_.cwiseProduct(eta_values).asDiagonal() * G_);
  }

  /// Value at fixed B (used by the C-step, where B does not change).
  double value_fixed_B(const Matrix& C, const Matrix& B, Matrix* grad_C) const {
    const Matrix H = C * A_ - B;
    const Vector norms = (H.colwise().squaredNorm().array() + epsilon_ * epsilon_).sqrt().matrix().transpose();
    if (grad_C) *grad_C = H * norms.cwiseInverse().asDiagonal() * A_.transpose();
    return (norms.array() - epsilon_).sum();
  }

  double operator()(const Matrix& C, const Vector& v, Matrix* grad_C, Vector* grad_v) const {
    const Matrix H = C * A_ - B(eta(v));
    const Vector norms = (H.colwise().squaredNorm().array() + epsilon_ * epsilon_).sqrt().matrix().transpose();
    const Matrix Hn = H * norms.cwiseInverse().asDiagonal();
    if (grad_C) *grad_C = Hn * A_.transpose();
    if (grad_v) {
      const Matrix PH = Psi_ * Hn; // n x q
      *grad_v = -(mass_.cwiseProduct(eta_prime(v))).cwiseProduct(PH.cwiseProduct(G_).rowwise().sum());
    }
    return (norms.array() - epsilon_).sum();
  }

private:
  Matrix A_;
  Matrix Psi_;
  Vector mass_;
  Matrix G_;
  double epsilon_ = 1e-12;
};

/// (area_part - sum_i S_i eta(v_i))^2.
inline double area_term(const Vector& v, double area_part, const Vector& mass, Vector* grad_v) {
  if (!(area_part > 0.0)) throw InputError("area_term: part area must be positive");
  const double gap = area_part - mass.dot(eta(v));
  if (grad_v) *grad_v = -2.0 * gap * mass.cwiseProduct(eta_prime(v));
  return gap * gap;
}

/// Per-triangle metric coefficients E, F, G of the linear chart, and the
/// smoothing floor delta_j of the gradient-norm term.
struct TriangleMetric {
  TriangleMatrix triangles;
  Vector E, F, G;
  Vector delta;

  TriangleMetric() = default;
  explicit TriangleMetric(const TriangleMesh& mesh, double smoothing = 0.0) : triangles(mesh.triangles()) {
    const Index m = mesh.num_triangles();
    E.resize(m);
    F.resize(m);
    G.resize(m);
    delta.resize(m);
    for (Index j = 0; j < m; ++j) {
      const auto [a, b, c] = mesh.triangle(j);
      const Vec3 u = mesh.position(b) - mesh.position(a);
      const Vec3 w = mesh.position(c) - mesh.position(a);
      E[j] = u.squaredNorm();
      F[j] = u.dot(w);
      G[j] = w.squaredNorm();
      // D_j ~ |jump of v| * edge length; edge length ~ det(g)^(1/4)
      delta[j] = smoothing * std::pow(std::max(E[j] * G[j] - F[j] * F[j], 0.0), 0.25);
    }
  }
};

/// (1/6) sum_j D_j (xi_1 + xi_2 + xi_3), D_j^2 = va^2 G - 2 va vb F + vb^2 E.
/// With a positive smoothing floor D_j is replaced by sqrt(D_j^2 + delta_j^2) - delta_j,
/// which keeps the term differentiable where v is constant on a triangle.
inline double mumford_shah(const Vector& v, const TriangleMetric& metric, double sigma_xi, Vector* grad_v) {
  if (grad_v) *grad_v = Vector::Zero(v.size());
  const Vector xv = v.unaryExpr([sigma_xi](double t) { return xi(t, sigma_xi); });
  double total = 0.0;
  for (Index j = 0; j < metric.triangles.rows(); ++j) {
    const Index a = metric.triangles(j, 0), b = metric.triangles(j, 1), c = metric.triangles(j, 2);
    const double va = v[b] - v[a];
    const double vb = v[c] - v[a];
    const double D2 = va * va * metric.G[j] - 2.0 * va * vb * metric.F[j] + vb * vb * metric.E[j];
    if (!(D2 > 0.0)) continue; // flat triangle: D = 0, gradient taken as 0
    const double delta = metric.delta.size() ? metric.delta[j] : 0.0;
    const double root = std::sqrt(D2 + delta * delta);
    const double D = root - delta;
    const double xs = xv[a] + xv[b] + xv[c];
    total += D * xs / 6.0;
    if (grad_v) {
      // dD/dv = (dD^2/dv) / (2 root)
      const double db = (va * metric.G[j] - vb * metric.F[j]) / root;
      const double dc = (vb * metric.E[j] - va * metric.F[j]) / root;
      auto& g = *grad_v;
      g[a] += (xs * (-db - dc) + D * xi_prime(v[a], sigma_xi)) / 6.0;
      g[b] += (xs * db + D * xi_prime(v[b], sigma_xi)) / 6.0;
      g[c] += (xs * dc + D * xi_prime(v[c], sigma_xi)) / 6.0;
    }
  }
  return total;
}

/// |C o W|_F^2, gradient 2 C o W o W.
inline double slant_term(const Matrix& C, const Matrix& W, Matrix* grad_C) {
  const Matrix CW = C.cwiseProduct(W);
  if (grad_C) *grad_C = 2.0 * CW.cwiseProduct(W);
  return CW.squaredNorm();
}

/// |C^T C|_F^2 - sum_i (C^T C)_ii^2 + sum_i ((C^T C)_ii - d_i)^2 = |C^T C - diag(d)|_F^2.
inline double orthogonality_term(const Matrix& C, const Vector& d, Matrix* grad_C) {
  Matrix R = C.transpose() * C;
  R.diagonal() -= d;
  if (grad_C) *grad_C = 4.0 * C * R;
  return R.squaredNorm();
}

/// Everything the objective needs, fixed for one match job.
class MatchEnergy {
public:
  MatchEnergy(DataTerm data, TriangleMetric metric, Vector mass_full, double area_part, Matrix W, Vector d,
              EnergyParams params)
      : data_(std::move(data)), metric_(std::move(metric)), mass_(std::move(mass_full)), area_part_(area_part),
        W_(std::move(W)), d_(std::move(d)), params_(params) {
    params_.validate();
    if (W_.rows() != data_.k() || W_.cols() != data_.k() || d_.size() != data_.k())
      throw InputError("match energy: W and d must match the basis size");
  }

  [[nodiscard]] const DataTerm& data() const { return data_; }
  [[nodiscard]] const EnergyParams& params() const { return params_; }
  [[nodiscard]] const Matrix& W() const { return W_; }
  [[nodiscard]] const Vector& d() const { return d_; }
  [[nodiscard]] const Vector& mass() const { return mass_; }
  [[nodiscard]] double area_part() const { return area_part_; }

  EnergyBreakdown evaluate(const Matrix& C, const Vector& v, Matrix* grad_C = nullptr, Vector* grad_v = nullptr) const {
    EnergyBreakdown e;
    Matrix gd, gs, go;
    Vector vd, va, vm;
    e.data = data_(C, v, grad_C ? &gd : nullptr, grad_v ? &vd : nullptr);
    e.area = area_term(v, area_part_, mass_, grad_v ? &va : nullptr);
    e.mumford_shah = mumford_shah(v, metric_, params_.sigma_xi, grad_v ? &vm : nullptr);
    e.slant = slant_term(C, W_, grad_C ? &gs : nullptr);
    e.orthogonality = orthogonality_term(C, d_, grad_C ? &go : nullptr);
    e.total = e.data + params_.mu1 * e.area + params_.mu2 * e.mumford_shah + params_.mu3 * e.slant +
              params_.mu4_5 * e.orthogonality;
    if (grad_C) *grad_C = gd + params_.mu3 * gs + params_.mu4_5 * go;
    if (grad_v) *grad_v = vd + params_.mu1 * va + params_.mu2 * vm;
    return e;
  }

  /// C-step objective at fixed B.
  double c_objective(const Matrix& C, const Matrix& B, Matrix* grad_C) const {
    Matrix gd, gs, go;
    const bool g = grad_C != nullptr;
    const double value = data_.value_fixed_B(C, B, g ? &gd : nullptr) +
                         params_.mu3 * slant_term(C, W_, g ? &gs : nullptr) +
                         params_.mu4_5 * orthogonality_term(C, d_, g ? &go : nullptr);
    if (g) *grad_C = gd + params_.mu3 * gs + params_.mu4_5 * go;
    return value;
  }

  /// V-step objective at fixed C.
  double v_objective(const Matrix& C, const Vector& v, Vector* grad_v) const {
    Vector vd, va, vm;
    const bool g = grad_v != nullptr;
    const double value = data_(C, v, nullptr, g ? &vd : nullptr) +
                         params_.mu1 * area_term(v, area_part_, mass_, g ? &va : nullptr) +
                         params_.mu2 * mumford_shah(v, metric_, params_.sigma_xi, g ? &vm : nullptr);
    if (g) *grad_v = vd + params_.mu1 * va + params_.mu2 * vm;
    return value;
  }

private:
  DataTerm data_;
  TriangleMetric metric_;
  Vector mass_;
  double area_part_;
  Matrix W_;
  Vector d_;
  EnergyParams params_;
};

} // namespace pfm
