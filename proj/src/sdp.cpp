#include "staris/sdp.hpp"

#include <cmath>
#include <istream>
#include <ostream>

namespace staris {

namespace {

constexpr double kSqrt2 = 1.4142135623730951;

// Isometric vectorization of Hermitian matrices: diagonal first, then
// sqrt(2)-scaled real/imaginary parts of the upper triangle, so that
// dot(svec(A), svec(B)) = tr(AB).
int svec_dim(int n) { return n * n; }

void svec(const Mat& a, double* out) {
  const int n = static_cast<int>(a.rows());
  int idx = 0;
  for (int i = 0; i < n; ++i) out[idx++] = std::real(a(i, i));
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      out[idx++] = kSqrt2 * std::real(a(i, j));
      out[idx++] = kSqrt2 * std::imag(a(i, j));
    }
}

Mat unsvec(const double* v, int n) {
  Mat a(n, n);
  int idx = 0;
  for (int i = 0; i < n; ++i) a(i, i) = v[idx++];
  for (int j = 1; j < n; ++j)
    for (int i = 0; i < j; ++i) {
      const double re = v[idx++] / kSqrt2;
      const double im = v[idx++] / kSqrt2;
      a(i, j) = Complex(re, im);
      a(j, i) = Complex(re, -im);
    }
  return a;
}

// Internal standard form: min <c, x> s.t. M x = b, x in PSD(n) (+) R+^n_slack.
struct Standardized {
  int n{0};
  int n_ineq{0};
  int dim{0};  // svec_dim(n) + n_ineq
  Eigen::MatrixXd m;  // rows = constraints
  RealVec b;
  RealVec c;
  RealVec row_scale;  // applied scale per row (for dual recovery)
  double c_scale{1.0};
};

Standardized standardize(const SdpProblem& p) {
  Standardized s;
  s.n = p.n;
  for (const auto& con : p.constraints)
    if (con.sense != ConstraintSense::eq) ++s.n_ineq;
  const int sd = svec_dim(p.n);
  s.dim = sd + s.n_ineq;
  const int m = static_cast<int>(p.constraints.size());
  s.m = Eigen::MatrixXd::Zero(m, s.dim);
  s.b.resize(m);
  s.row_scale.resize(m);
  int slack = 0;
  RealVec row(sd);
  for (int i = 0; i < m; ++i) {
    const auto& con = p.constraints[i];
    const double sign = con.sense == ConstraintSense::ge ? -1.0 : 1.0;
    svec(Mat(sign * con.a), row.data());
    // Normalize by the matrix part only; the slack is rescaled with the row
    // so inequality rows keep O(1) coupling to the PSD block.
    const double norm = std::max(row.norm(), 1e-12);
    s.m.row(i).head(sd) = row / norm;
    s.b[i] = sign * con.b / norm;
    if (con.sense != ConstraintSense::eq)
      s.m(i, sd + slack++) = 1.0;  // slack turns <= into =
    s.row_scale[i] = norm;
  }
  s.c = RealVec::Zero(s.dim);
  svec(p.c, s.c.data());
  s.c_scale = std::max(s.c.norm(), 1e-12);
  s.c /= s.c_scale;
  return s;
}

// Projection onto PSD(n) x R+^n_ineq in the vectorized space.
void project_cone(const Standardized& st, const RealVec& v, RealVec& out,
                  double* min_eig = nullptr) {
  const int sd = svec_dim(st.n);
  const Mat a = unsvec(v.data(), st.n);
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (min_eig) *min_eig = es.eigenvalues().minCoeff();
  const RealVec lam = es.eigenvalues().cwiseMax(0.0);
  Mat proj = es.eigenvectors() * lam.asDiagonal() *
             es.eigenvectors().adjoint();
  out.resize(st.dim);
  svec(proj, out.data());
  for (int i = sd; i < st.dim; ++i) out[i] = std::max(v[i], 0.0);
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opt) {
  const Standardized st = standardize(p);
  const int m = static_cast<int>(p.constraints.size());
  const int sd = svec_dim(st.n);
  SdpSolution sol;

  if (m == 0) {
    // Unconstrained: minimizer over the cone is the projection direction of
    // -C; bounded only when C is PSD, in which case X = 0.
    sol.x = Mat::Zero(st.n, st.n);
    sol.objective = 0.0;
    sol.status = SdpStatus::optimal;
    sol.dual_y = RealVec::Zero(0);
    project_cone(st, RealVec(st.c), sol.dual_s, nullptr);
    sol.mult_x = RealVec::Zero(st.dim);
    return sol;
  }

  Eigen::MatrixXd gram = st.m * st.m.transpose();

  // Consistency pre-check of the affine part; contradictory rows can never
  // be satisfied regardless of the cone.
  {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
    const RealVec z = cod.solve(st.b);
    if ((gram * z - st.b).norm() > 1e-8 * std::max(1.0, st.b.norm())) {
      sol.status = SdpStatus::infeasible;
      sol.x = Mat::Zero(st.n, st.n);
      return sol;
    }
  }
  gram.diagonal().array() += 1e-12;
  const Eigen::LDLT<Eigen::MatrixXd> gram_ldlt(gram);

  double mu = opt.penalty_init;
  RealVec x = RealVec::Zero(st.dim);
  RealVec s_vec;
  project_cone(st, RealVec(st.c), s_vec, nullptr);
  RealVec y = RealVec::Zero(m);
  if (opt.warm && opt.warm->dual_y.size() == m &&
      opt.warm->dual_s.size() == st.dim) {
    y = opt.warm->dual_y;
    s_vec = opt.warm->dual_s;
    x = opt.warm->mult_x;
    mu = opt.warm->penalty;
  }

  const double b_ref = 1.0 + st.b.norm();
  const double c_ref = 1.0 + st.c.norm();
  double pr = 0, dr = 0, gap = 0;
  int it = 0;
  double alpha = opt.alpha;
  double best_err = std::numeric_limits<double>::infinity();
  int last_progress = 0;
  RealVec u_prev = st.c - s_vec;  // running estimate of M^T y
  for (it = 1; it <= opt.max_iter; ++it) {
    // Multiplier block: (M M^T) y = b/mu - M (s - c + x/mu).
    const RealVec rhs =
        st.b / mu - st.m * (s_vec - st.c + x / mu);
    y = gram_ldlt.solve(rhs);

    // Cone block with over-relaxation on the affine estimate.
    const RealVec u = st.m.transpose() * y;
    const RealVec u_hat = alpha * u + (1.0 - alpha) * u_prev;
    const RealVec v = st.c - u_hat - x / mu;
    project_cone(st, v, s_vec, nullptr);
    x = mu * (s_vec - v);
    u_prev = st.c - s_vec;

    if (it % 25 == 0 || it == opt.max_iter) {
      pr = (st.m * x - st.b).norm() / b_ref;
      dr = (st.m.transpose() * y + s_vec - st.c).norm() / c_ref;
      const double pobj = st.c.dot(x);
      const double dobj = st.b.dot(y);
      gap = std::abs(pobj - dobj) /
            (1.0 + std::abs(pobj) + std::abs(dobj));
      if (pr < opt.tol && dr < opt.tol && gap < opt.tol) {
        sol.status = SdpStatus::optimal;
        break;
      }
      if (dr > 5.0 * pr)
        mu = std::min(mu * 2.0, 1e8);
      else if (pr > 5.0 * dr)
        mu = std::max(mu * 0.5, 1e-8);
      // Over-relaxation can lock the adaptive-penalty iteration into a
      // limit cycle; drop it once the residuals stop improving.
      const double err = std::max(pr, std::max(dr, gap));
      if (err < 0.9 * best_err) {
        best_err = err;
        last_progress = it;
      } else if (it - last_progress >= 1000 && alpha != 1.0) {
        alpha = 1.0;
        last_progress = it;
      }
    }
  }

  sol.iterations = std::min(it, opt.max_iter);
  sol.x = unsvec(x.data(), st.n);
  // Clean tiny asymmetries and negative eigenvalues out of the report.
  Eigen::SelfAdjointEigenSolver<Mat> es(sol.x);
  sol.min_eig = es.eigenvalues().minCoeff();
  sol.objective = std::real((p.c * sol.x).trace());
  sol.dual_objective = st.b.dot(y) * st.c_scale;
  sol.primal_residual = pr;
  sol.dual_residual = dr;
  sol.gap = gap;
  sol.dual_y = y;
  sol.dual_s = s_vec;
  sol.mult_x = x;
  sol.penalty = mu;
  (void)sd;
  return sol;
}

KktReport verify_kkt(const SdpProblem& p, const SdpSolution& sol) {
  KktReport r;
  double obj_scale = 1.0 + std::abs(sol.objective);
  for (const auto& con : p.constraints) {
    const double lhs = std::real((con.a * sol.x).trace());
    const double ref = 1.0 + std::abs(con.b);
    switch (con.sense) {
      case ConstraintSense::eq:
        r.primal_eq = std::max(r.primal_eq, std::abs(lhs - con.b) / ref);
        break;
      case ConstraintSense::le:
        r.primal_ineq = std::max(r.primal_ineq, (lhs - con.b) / ref);
        break;
      case ConstraintSense::ge:
        r.primal_ineq = std::max(r.primal_ineq, (con.b - lhs) / ref);
        break;
    }
  }
  r.psd_violation = std::max(0.0, -sol.min_eig);

  if (sol.dual_y.size() == static_cast<Eigen::Index>(p.constraints.size())) {
    const Standardized st = standardize(p);
    r.stationarity =
        (st.m.transpose() * sol.dual_y + sol.dual_s - st.c).norm() /
        (1.0 + st.c.norm());
    r.comp_slack = std::abs(sol.mult_x.dot(sol.dual_s)) /
                   (1.0 + sol.mult_x.norm() * sol.dual_s.norm());
    const double dobj = st.b.dot(sol.dual_y) * st.c_scale;
    r.duality_gap = std::abs(sol.objective - dobj) / obj_scale;
  }
  return r;
}

void dump_sdp(const SdpProblem& p, std::ostream& os) {
  os.precision(17);
  os << p.n << ' ' << p.constraints.size() << '\n';
  auto put = [&](const Mat& a) {
    for (int i = 0; i < p.n; ++i)
      for (int j = 0; j < p.n; ++j)
        os << std::real(a(i, j)) << ' ' << std::imag(a(i, j)) << '\n';
  };
  put(p.c);
  for (const auto& con : p.constraints) {
    const char s = con.sense == ConstraintSense::eq
                       ? '='
                       : (con.sense == ConstraintSense::le ? '<' : '>');
    os << s << ' ' << con.b << '\n';
    put(con.a);
  }
}

SdpProblem load_sdp(std::istream& is) {
  SdpProblem p;
  std::size_t m = 0;
  is >> p.n >> m;
  auto get = [&] {
    Mat a(p.n, p.n);
    for (int i = 0; i < p.n; ++i)
      for (int j = 0; j < p.n; ++j) {
        double re, im;
        is >> re >> im;
        a(i, j) = Complex(re, im);
      }
    return a;
  };
  p.c = get();
  for (std::size_t i = 0; i < m; ++i) {
    SdpConstraint con;
    char s;
    is >> s >> con.b;
    con.sense = s == '=' ? ConstraintSense::eq
                         : (s == '<' ? ConstraintSense::le
                                     : ConstraintSense::ge);
    con.a = get();
    p.constraints.push_back(std::move(con));
  }
  return p;
}

}  // namespace staris
