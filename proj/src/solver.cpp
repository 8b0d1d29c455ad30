#include "uavsec/solver.hpp"

#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <cstdio>
#include <cstdlib>

// Homogeneous self-dual embedding with Nesterov-Todd scaling and Mehrotra
// predictor-corrector, in the style of the ECOS family of solvers. The KKT
// system carries the second-order-cone scaling blocks in expanded form (two
// extra rows per cone) so the sparsity pattern is fixed across iterations.

namespace uavsec {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::primal_infeasible: return "primal_infeasible";
    case SolveStatus::dual_infeasible: return "dual_infeasible";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

namespace {

using Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

struct FixedSettings {
  double gamma = 0.99;        // step scaling
  double deltastat = 7e-8;    // static regularization
  int nitref = 9;             // max iterative-refinement steps
  double irerrfact = 6.0;     // stop refining when error shrinks slower than this
  double linsysacc = 1e-14;   // refinement target
  double sigmamin = 1e-4;
  double sigmamax = 1.0;
  double stepmin = 1e-6;
  double stepmax = 0.999;
  double safeguard = 500.0;   // bail when pres grows by this factor
  int equil_iters = 3;
  double feastol_inacc = 1e-4;
  double abstol_inacc = 5e-5;
  double reltol_inacc = 5e-5;
};

struct SOCone {
  int dim = 0;
  VectorXd skbar, zkbar, q;
  double eta = 0.0, eta_square = 1.0;
  double a = 0.0, w = 0.0, d1 = 1.0, u0 = 0.0, u1 = 0.0, v1 = 0.0;
};

struct Info {
  double gap = 0.0, mu = 0.0, kapovert = 0.0, pcost = 0.0, dcost = 0.0;
  double pres = 0.0, dres = 0.0;
  std::optional<double> relgap, pinfres, dinfres;
  int iter = 0;
  double step = 0.0, sigma = 0.0;

  bool isBetterThan(const Info& o) const {
    if (pinfres.has_value() && kapovert > 1.0) {
      return gap > 0.0 && o.gap > 0.0 && gap < o.gap &&
             pinfres.value() > 0.0 && pinfres.value() < o.pres &&
             mu > 0.0 && mu < o.mu;
    }
    return gap > 0.0 && o.gap > 0.0 && gap < o.gap &&
           pres > 0.0 && pres < o.pres &&
           dres > 0.0 && dres < o.dres &&
           kapovert > 0.0 && kapovert < o.kapovert &&
           mu > 0.0 && mu < o.mu;
  }
};

struct Iterate {
  VectorXd x, y, z, s, lambda;
  double tau = 1.0, kap = 1.0;
  double cx = 0.0, by = 0.0, hz = 0.0;
  Info i;
};

enum class InnerCode { not_converged, optimal, close_to_optimal, pinf, dinf, maxit, numerics };

class Ipm {
 public:
  Ipm(const ConicProgram& p, const SolverSettings& st) : user(st) {
    G = p.cone_mat;
    if (G.rows() > 0 && G.cols() == 0) G.resize(p.cone_rhs.size(), p.num_vars());
    A = p.eq_mat;
    if (A.cols() == 0) A.resize(p.num_eq(), p.num_vars());
    c = p.c;
    h = p.cone_rhs;
    b = p.eq_rhs;
    n = p.num_vars();
    peq = p.num_eq();
    m = p.num_cone_rows();
    l = p.cones.orthant;
    so_cones.resize(p.cones.soc.size());
    for (size_t i = 0; i < so_cones.size(); i++) so_cones[i].dim = p.cones.soc[i];
    nsoc = static_cast<int>(so_cones.size());
    dim_K = n + peq + m + 2 * nsoc;
    use_dense = dim_K < 500;

    w.x.resize(n);
    w.y.resize(peq);
    w.s.resize(m);
    w.z.resize(m);
    w.lambda.resize(m);
    lp_v.resize(l);
    lp_w.resize(l);
    for (SOCone& sc : so_cones) {
      sc.q.resize(sc.dim - 1);
      sc.skbar.resize(sc.dim);
      sc.zkbar.resize(sc.dim);
    }
    rx.resize(n);
    ry.resize(peq);
    rz.resize(m);
    rhs1.resize(dim_K);
    rhs2.resize(dim_K);
    W_times_dzaff.resize(m);
    dsaff_by_W.resize(m);
    dsaff.resize(m);

    equilibrate();
    Gt = G.transpose();
    At = A.transpose();
    setupKKT();
  }

  SolveResult run();

 private:
  SolverSettings user;
  FixedSettings fs;

  SpMat G, A, Gt, At;
  VectorXd c, h, b;
  int n = 0, peq = 0, m = 0, l = 0, nsoc = 0, dim_K = 0;
  bool use_dense = false;

  VectorXd x_equil, A_equil, G_equil;

  std::vector<SOCone> so_cones;
  VectorXd lp_v, lp_w;

  SpMat K;
  std::vector<double*> kkt_v_ptr;  // scaling-block entries, updated each iteration
  Eigen::SimplicialLDLT<SpMat, Eigen::Upper> ldlt;
  Eigen::PartialPivLU<Eigen::MatrixXd> lu;
  bool pattern_analyzed = false;

  Iterate w, w_best;
  VectorXd rx, ry, rz;
  double hresx = 0.0, hresy = 0.0, hresz = 0.0, rt = 0.0;
  double nx = 0.0, ny = 0.0, nz = 0.0, ns = 0.0;
  double resx0 = 1.0, resy0 = 1.0, resz0 = 1.0;
  VectorXd rhs1, rhs2, W_times_dzaff, dsaff_by_W, dsaff;

  void equilibrate();
  void setupKKT();
  void setKKTScalingsIdentity();
  void updateKKTScalings();
  bool factorize();
  int solveKKT(const VectorXd& rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz, bool initialize);
  bool updateScalings(const VectorXd& s, const VectorXd& z, VectorXd& lambda);
  void scale(const VectorXd& z, VectorXd& lambda) const;
  void scale2add(const VectorXd& x, VectorXd& y) const;
  double conicProduct(const VectorXd& u, const VectorXd& v, VectorXd& out) const;
  void conicDivision(const VectorXd& u, const VectorXd& ww, VectorXd& v) const;
  void bringToCone(const VectorXd& r, VectorXd& s) const;
  double lineSearch(const VectorXd& lambda, const VectorXd& ds, const VectorXd& dz, double tau,
                    double dtau, double kap, double dkap) const;
  void computeResiduals();
  void updateStatistics();
  InnerCode checkExit(bool reduced) const;
  void RHSaffine();
  void RHScombined(double sigma, double mu);
  void backscale();
};

void maxRowsOf(VectorXd& e, const SpMat& mat) {
  for (int j = 0; j < mat.outerSize(); j++)
    for (SpMat::InnerIterator it(mat, j); it; ++it)
      e(it.row()) = std::max(std::abs(it.value()), e(it.row()));
}
void maxColsOf(VectorXd& e, const SpMat& mat) {
  for (int j = 0; j < mat.outerSize(); j++)
    for (SpMat::InnerIterator it(mat, j); it; ++it) e(j) = std::max(std::abs(it.value()), e(j));
}
void divRows(const VectorXd& e, SpMat& mat) {
  for (int j = 0; j < mat.outerSize(); j++)
    for (SpMat::InnerIterator it(mat, j); it; ++it) it.valueRef() /= e(it.row());
}
void divCols(const VectorXd& e, SpMat& mat) {
  for (int j = 0; j < mat.outerSize(); j++)
    for (SpMat::InnerIterator it(mat, j); it; ++it) it.valueRef() /= e(j);
}

void Ipm::equilibrate() {
  x_equil = VectorXd::Ones(n);
  A_equil = VectorXd::Ones(peq);
  G_equil = VectorXd::Ones(m);
  VectorXd x_tmp(n), A_tmp(peq), G_tmp(m);
  for (int iter = 0; iter < fs.equil_iters; iter++) {
    x_tmp.setZero();
    A_tmp.setZero();
    G_tmp.setZero();
    maxColsOf(x_tmp, A);
    maxColsOf(x_tmp, G);
    maxRowsOf(A_tmp, A);
    maxRowsOf(G_tmp, G);
    // keep SOC rows uniformly scaled within each cone
    int ind = l;
    for (const SOCone& sc : so_cones) {
      const double total = G_tmp.segment(ind, sc.dim).sum();
      G_tmp.segment(ind, sc.dim).setConstant(total);
      ind += sc.dim;
    }
    auto sqrt_op = [](double a) { return std::abs(a) < 1e-6 ? 1.0 : std::sqrt(a); };
    x_tmp = x_tmp.unaryExpr(sqrt_op);
    A_tmp = A_tmp.unaryExpr(sqrt_op);
    G_tmp = G_tmp.unaryExpr(sqrt_op);
    divRows(A_tmp, A);
    divRows(G_tmp, G);
    divCols(x_tmp, A);
    divCols(x_tmp, G);
    x_equil = x_equil.cwiseProduct(x_tmp);
    A_equil = A_equil.cwiseProduct(A_tmp);
    G_equil = G_equil.cwiseProduct(G_tmp);
  }
  c = c.cwiseQuotient(x_equil);
  b = b.cwiseQuotient(A_equil);
  h = h.cwiseQuotient(G_equil);
}

void Ipm::setupKKT() {
  //      [ dI  A'  G' ]
  //  K = [ A  -dI  0  ]
  //      [ G   0  -V  ]   (upper triangle stored; V holds the cone scalings)
  K.resize(dim_K, dim_K);
  std::vector<Eigen::Triplet<double>> ts;
  for (int k = 0; k < n; k++) ts.emplace_back(k, k, fs.deltastat);
  for (int k = n; k < n + peq; k++) ts.emplace_back(k, k, -fs.deltastat);
  // A' block
  for (int col = 0; col < At.outerSize(); col++)
    for (SpMat::InnerIterator it(At, col); it; ++it) ts.emplace_back(it.row(), n + col, it.value());
  // G' block, with two skipped columns after each SOC
  int col_K = n + peq;
  {
    int col_Gt = 0;
    for (int col = 0; col < l; col++, col_Gt++, col_K++)
      for (SpMat::InnerIterator it(Gt, col_Gt); it; ++it) ts.emplace_back(it.row(), col_K, it.value());
    for (const SOCone& sc : so_cones) {
      for (int col = 0; col < sc.dim; col++, col_Gt++, col_K++)
        for (SpMat::InnerIterator it(Gt, col_Gt); it; ++it) ts.emplace_back(it.row(), col_K, it.value());
      col_K += 2;
    }
  }
  // -V block placeholders
  {
    int d = n + peq;
    for (int k = 0; k < l; k++, d++) ts.emplace_back(d, d, -1.0);
    for (const SOCone& sc : so_cones) {
      for (int k = 0; k < sc.dim; k++, d++) ts.emplace_back(d, d, -1.0);
      ts.emplace_back(d, d, -1.0);
      for (int k = 1; k < sc.dim; k++) ts.emplace_back(d - sc.dim + k, d, 0.0);
      d++;
      ts.emplace_back(d, d, 1.0);
      for (int k = 0; k < sc.dim; k++) ts.emplace_back(d - sc.dim - 1 + k, d, 0.0);
      d++;
    }
  }
  K.setFromTriplets(ts.begin(), ts.end());
  K.makeCompressed();

  // cache pointers to the scaling entries in storage order
  kkt_v_ptr.clear();
  int d = n + peq;
  for (int k = 0; k < l; k++, d++) kkt_v_ptr.push_back(&K.coeffRef(d, d));
  for (const SOCone& sc : so_cones) {
    for (int k = 0; k < sc.dim; k++, d++) kkt_v_ptr.push_back(&K.coeffRef(d, d));
    kkt_v_ptr.push_back(&K.coeffRef(d, d));
    for (int k = 1; k < sc.dim; k++) kkt_v_ptr.push_back(&K.coeffRef(d - sc.dim + k, d));
    d++;
    kkt_v_ptr.push_back(&K.coeffRef(d, d));
    kkt_v_ptr.push_back(&K.coeffRef(d - sc.dim - 1, d));
    for (int k = 1; k < sc.dim; k++) kkt_v_ptr.push_back(&K.coeffRef(d - sc.dim - 1 + k, d));
    d++;
  }
}

void Ipm::setKKTScalingsIdentity() {
  size_t p_i = 0;
  for (int k = 0; k < l; k++) *kkt_v_ptr[p_i++] = -1.0;
  for (const SOCone& sc : so_cones) {
    for (int k = 0; k < sc.dim; k++) *kkt_v_ptr[p_i++] = -1.0;
    *kkt_v_ptr[p_i++] = -1.0;
    for (int k = 1; k < sc.dim; k++) *kkt_v_ptr[p_i++] = 0.0;
    *kkt_v_ptr[p_i++] = 1.0;
    *kkt_v_ptr[p_i++] = 0.0;
    for (int k = 1; k < sc.dim; k++) *kkt_v_ptr[p_i++] = 0.0;
  }
}

void Ipm::updateKKTScalings() {
  size_t p_i = 0;
  for (int k = 0; k < l; k++) *kkt_v_ptr[p_i++] = -lp_v(k) - fs.deltastat;
  for (const SOCone& sc : so_cones) {
    *kkt_v_ptr[p_i++] = -sc.eta_square * sc.d1 - fs.deltastat;
    for (int k = 1; k < sc.dim; k++) *kkt_v_ptr[p_i++] = -sc.eta_square - fs.deltastat;
    *kkt_v_ptr[p_i++] = -sc.eta_square;
    for (int k = 1; k < sc.dim; k++) *kkt_v_ptr[p_i++] = -sc.eta_square * sc.v1 * sc.q(k - 1);
    *kkt_v_ptr[p_i++] = sc.eta_square + fs.deltastat;
    *kkt_v_ptr[p_i++] = -sc.eta_square * sc.u0;
    for (int k = 1; k < sc.dim; k++) *kkt_v_ptr[p_i++] = -sc.eta_square * sc.u1 * sc.q(k - 1);
  }
}

bool Ipm::factorize() {
  if (use_dense) {
    Eigen::MatrixXd Kd = Eigen::MatrixXd(K);
    Kd = Kd.selfadjointView<Eigen::Upper>();
    lu.compute(Kd);
    return true;
  }
  if (!pattern_analyzed) {
    ldlt.analyzePattern(K);
    pattern_analyzed = true;
  }
  ldlt.factorize(K);
  return ldlt.info() == Eigen::Success;
}

bool Ipm::updateScalings(const VectorXd& s, const VectorXd& z, VectorXd& lambda) {
  lp_v = s.head(l).cwiseQuotient(z.head(l));
  lp_w = lp_v.cwiseSqrt();
  int cs = l;
  for (SOCone& sc : so_cones) {
    const double sres = s(cs) * s(cs) - s.segment(cs + 1, sc.dim - 1).squaredNorm();
    const double zres = z(cs) * z(cs) - z.segment(cs + 1, sc.dim - 1).squaredNorm();
    if (sres <= 0 || zres <= 0) return false;
    const double snorm = std::sqrt(sres), znorm = std::sqrt(zres);
    sc.skbar = s.segment(cs, sc.dim) / snorm;
    sc.zkbar = z.segment(cs, sc.dim) / znorm;
    sc.eta_square = snorm / znorm;
    sc.eta = std::sqrt(sc.eta_square);
    double gamma = std::sqrt(0.5 * (1.0 + sc.skbar.dot(sc.zkbar)));
    const double a = (0.5 / gamma) * (sc.skbar(0) + sc.zkbar(0));
    sc.q = (0.5 / gamma) * (sc.skbar.tail(sc.dim - 1) - sc.zkbar.tail(sc.dim - 1));
    const double wq = sc.q.squaredNorm();
    const double cc = (1.0 + a) + wq / (1.0 + a);
    const double dd = 1.0 + 2.0 / (1.0 + a) + wq / ((1.0 + a) * (1.0 + a));
    const double d1 = std::max(0.0, 0.5 * (a * a + wq * (1.0 - cc * cc / (1.0 + wq * dd))));
    const double u0sq = a * a + wq - d1;
    const double c2byu02 = cc * cc / u0sq;
    if (c2byu02 - dd <= 0) return false;
    sc.d1 = d1;
    sc.u0 = std::sqrt(u0sq);
    sc.u1 = std::sqrt(c2byu02);
    sc.v1 = std::sqrt(c2byu02 - dd);
    sc.a = a;
    sc.w = wq;
    cs += sc.dim;
  }
  scale(z, lambda);
  return true;
}

void Ipm::scale(const VectorXd& z, VectorXd& lambda) const {
  lambda.head(l) = lp_w.cwiseProduct(z.head(l));
  int cs = l;
  for (const SOCone& sc : so_cones) {
    const double zeta = sc.q.dot(z.segment(cs + 1, sc.dim - 1));
    const double factor = z(cs) + zeta / (1.0 + sc.a);
    lambda(cs) = sc.eta * (sc.a * z(cs) + zeta);
    lambda.segment(cs + 1, sc.dim - 1) = sc.eta * (z.segment(cs + 1, sc.dim - 1) + factor * sc.q);
    cs += sc.dim;
  }
}

void Ipm::scale2add(const VectorXd& xv, VectorXd& yv) const {
  yv.head(l) += lp_v.cwiseProduct(xv.head(l));
  int cs = l;
  for (const SOCone& sc : so_cones) {
    const int i1 = cs, i2 = i1 + 1, i3 = i2 + sc.dim - 1, i4 = i3 + 1;
    yv(i1) += sc.eta_square * (sc.d1 * xv(i1) + sc.u0 * xv(i4));
    const double v1x3_plus_u1x4 = sc.v1 * xv(i3) + sc.u1 * xv(i4);
    yv.segment(i2, sc.dim - 1) +=
        sc.eta_square * (xv.segment(i2, sc.dim - 1) + v1x3_plus_u1x4 * sc.q);
    const double qtx2 = sc.q.dot(xv.segment(i2, sc.dim - 1));
    yv(i3) += sc.eta_square * (sc.v1 * qtx2 + xv(i3));
    yv(i4) = sc.eta_square * (sc.u0 * xv(i1) + sc.u1 * qtx2 - xv(i4));
    cs += sc.dim + 2;
  }
}

double Ipm::conicProduct(const VectorXd& u, const VectorXd& v, VectorXd& out) const {
  out.head(l) = u.head(l).cwiseProduct(v.head(l));
  double mu = out.head(l).lpNorm<1>();
  int cs = l;
  for (const SOCone& sc : so_cones) {
    const double u0 = u(cs), v0 = v(cs);
    out(cs) = u.segment(cs, sc.dim).dot(v.segment(cs, sc.dim));
    mu += std::abs(out(cs));
    out.segment(cs + 1, sc.dim - 1) =
        u0 * v.segment(cs + 1, sc.dim - 1) + v0 * u.segment(cs + 1, sc.dim - 1);
    cs += sc.dim;
  }
  return mu;
}

void Ipm::conicDivision(const VectorXd& u, const VectorXd& ww, VectorXd& v) const {
  v.head(l) = ww.head(l).cwiseQuotient(u.head(l));
  int cs = l;
  for (const SOCone& sc : so_cones) {
    const double u0 = u(cs), w0 = ww(cs);
    const double rho = u0 * u0 - u.segment(cs + 1, sc.dim - 1).squaredNorm();
    const double zeta = u.segment(cs + 1, sc.dim - 1).dot(ww.segment(cs + 1, sc.dim - 1));
    const double factor = (zeta / u0 - w0) / rho;
    v(cs) = (u0 * w0 - zeta) / rho;
    v.segment(cs + 1, sc.dim - 1) =
        factor * u.segment(cs + 1, sc.dim - 1) + ww.segment(cs + 1, sc.dim - 1) / u0;
    cs += sc.dim;
  }
}

void Ipm::bringToCone(const VectorXd& r, VectorXd& s) const {
  double alpha = -fs.gamma;
  for (int i = 0; i < l; i++)
    if (r(i) <= 0 && -r(i) > alpha) alpha = -r(i);
  int cs = l;
  for (const SOCone& sc : so_cones) {
    const double cres = r(cs) - r.segment(cs + 1, sc.dim - 1).norm();
    cs += sc.dim;
    if (cres <= 0 && -cres > alpha) alpha = -cres;
  }
  alpha += 1.0;
  s = r;
  s.head(l).array() += alpha;
  cs = l;
  for (const SOCone& sc : so_cones) {
    s(cs) += alpha;
    cs += sc.dim;
  }
}

double Ipm::lineSearch(const VectorXd& lambda, const VectorXd& ds, const VectorXd& dz, double tau,
                       double dtau, double kap, double dkap) const {
  double alpha;
  if (l > 0) {
    const double rhomin = (ds.head(l).cwiseQuotient(lambda.head(l))).minCoeff();
    const double sigmamin = (dz.head(l).cwiseQuotient(lambda.head(l))).minCoeff();
    const double eps = 1e-13;
    if (-sigmamin > -rhomin)
      alpha = sigmamin < 0.0 ? 1.0 / (-sigmamin) : 1.0 / eps;
    else
      alpha = rhomin < 0.0 ? 1.0 / (-rhomin) : 1.0 / eps;
  } else {
    alpha = 10.0;
  }
  const double mtbd = -tau / dtau;
  const double mkbd = -kap / dkap;
  if (mtbd > 0.0 && mtbd < alpha) alpha = mtbd;
  if (mkbd > 0.0 && mkbd < alpha) alpha = mkbd;

  int cs = l;
  for (const SOCone& sc : so_cones) {
    const double lknorm2 =
        lambda(cs) * lambda(cs) - lambda.segment(cs + 1, sc.dim - 1).squaredNorm();
    if (lknorm2 <= 0.0) {
      cs += sc.dim;
      continue;
    }
    const double lknorm = std::sqrt(lknorm2);
    const VectorXd lkbar = lambda.segment(cs, sc.dim) / lknorm;
    const double lknorminv = 1.0 / lknorm;
    const double lk_ds = lkbar(0) * ds(cs) - lkbar.tail(sc.dim - 1).dot(ds.segment(cs + 1, sc.dim - 1));
    const double lk_dz = lkbar(0) * dz(cs) - lkbar.tail(sc.dim - 1).dot(dz.segment(cs + 1, sc.dim - 1));
    double factor = (lk_ds + ds(cs)) / (lkbar(0) + 1.0);
    const double rho0 = lknorminv * lk_ds;
    const double rhonorm =
        (lknorminv * (ds.segment(cs + 1, sc.dim - 1) - factor * lkbar.tail(sc.dim - 1))).norm() - rho0;
    factor = (lk_dz + dz(cs)) / (lkbar(0) + 1.0);
    const double sig0 = lknorminv * lk_dz;
    const double signorm =
        (lknorminv * (dz.segment(cs + 1, sc.dim - 1) - factor * lkbar.tail(sc.dim - 1))).norm() - sig0;
    const double conic_step = std::max({0.0, signorm, rhonorm});
    if (conic_step != 0.0) alpha = std::min(1.0 / conic_step, alpha);
    cs += sc.dim;
  }
  return std::clamp(alpha, fs.stepmin, fs.stepmax);
}

int Ipm::solveKKT(const VectorXd& rhs, VectorXd& dx, VectorXd& dy, VectorXd& dz, bool initialize) {
  VectorXd xsol = use_dense ? VectorXd(lu.solve(rhs)) : VectorXd(ldlt.solve(rhs));
  const double error_threshold = (1.0 + rhs.lpNorm<Eigen::Infinity>()) * fs.linsysacc;
  double nerr_prev = std::numeric_limits<double>::max();
  VectorXd dx_ref(dim_K);
  const int mtilde = m + 2 * nsoc;
  const VectorXd& bx = rhs.head(n);
  const VectorXd by_v = rhs.segment(n, peq);
  const VectorXd bz_v = rhs.tail(mtilde);

  int k_ref;
  for (k_ref = 0; k_ref <= fs.nitref; k_ref++) {
    const auto dx_cur = xsol.head(n);
    const auto dy_cur = xsol.segment(n, peq);
    dz.head(l) = xsol.segment(n + peq, l);
    {
      int dzi = l, xi = n + peq + l;
      for (const SOCone& sc : so_cones) {
        dz.segment(dzi, sc.dim) = xsol.segment(xi, sc.dim);
        dzi += sc.dim;
        xi += sc.dim + 2;
      }
    }

    VectorXd ex = bx - Gt * dz;
    if (peq > 0) ex -= At * dy_cur;
    ex -= fs.deltastat * dx_cur;
    const double nex = ex.lpNorm<Eigen::Infinity>();

    VectorXd ey = by_v;
    if (peq > 0) {
      ey -= A * dx_cur;
      ey += fs.deltastat * dy_cur;
    }
    const double ney = peq > 0 ? ey.lpNorm<Eigen::Infinity>() : 0.0;

    VectorXd Gdx = G * dx_cur;
    VectorXd ez(mtilde);
    ez.head(l) = bz_v.head(l) - Gdx.head(l) + fs.deltastat * dz.head(l);
    {
      int ezi = l, dzi = l;
      for (const SOCone& sc : so_cones) {
        ez.segment(ezi, sc.dim) = bz_v.segment(ezi, sc.dim) - Gdx.segment(dzi, sc.dim);
        ez.segment(ezi, sc.dim - 1) += fs.deltastat * dz.segment(dzi, sc.dim - 1);
        dzi += sc.dim;
        ezi += sc.dim;
        ez(ezi - 1) -= fs.deltastat * dz(dzi - 1);
        ez(ezi++) = 0.0;
        ez(ezi++) = 0.0;
      }
    }
    const VectorXd dz_true = xsol.tail(mtilde);
    if (initialize)
      ez += dz_true;
    else
      scale2add(dz_true, ez);
    const double nez = ez.lpNorm<Eigen::Infinity>();

    double nerr = std::max(nex, nez);
    if (peq > 0) nerr = std::max(nerr, ney);

    if (k_ref > 0 && nerr > nerr_prev) {
      xsol -= dx_ref;
      k_ref--;
      break;
    }
    if (k_ref == fs.nitref || nerr < error_threshold ||
        (k_ref > 0 && nerr_prev < fs.irerrfact * nerr)) {
      break;
    }
    nerr_prev = nerr;

    VectorXd e(dim_K);
    e << ex, ey, ez;
    dx_ref = use_dense ? VectorXd(lu.solve(e)) : VectorXd(ldlt.solve(e));
    xsol += dx_ref;
  }

  dx = xsol.head(n);
  dy = xsol.segment(n, peq);
  dz.head(l) = xsol.segment(n + peq, l);
  {
    int dzi = l, xi = n + peq + l;
    for (const SOCone& sc : so_cones) {
      dz.segment(dzi, sc.dim) = xsol.segment(xi, sc.dim);
      dzi += sc.dim;
      xi += sc.dim + 2;
    }
  }
  return k_ref;
}

void Ipm::computeResiduals() {
  rx = -Gt * w.z;
  if (peq > 0) rx -= At * w.y;
  hresx = rx.norm();
  rx -= w.tau * c;

  if (peq > 0) {
    ry = A * w.x;
    hresy = ry.norm();
    ry -= w.tau * b;
  } else {
    hresy = 0.0;
  }

  rz = w.s + G * w.x;
  hresz = rz.norm();
  rz -= w.tau * h;

  w.cx = c.dot(w.x);
  w.by = peq > 0 ? b.dot(w.y) : 0.0;
  w.hz = h.dot(w.z);
  rt = w.kap + w.cx + w.by + w.hz;

  nx = w.x.norm();
  ny = w.y.norm();
  nz = w.z.norm();
  ns = w.s.norm();
}

void Ipm::updateStatistics() {
  w.i.gap = w.s.dot(w.z);
  w.i.mu = (w.i.gap + w.kap * w.tau) / (l + nsoc + 1);
  w.i.kapovert = w.kap / w.tau;
  w.i.pcost = w.cx / w.tau;
  w.i.dcost = -(w.hz + w.by) / w.tau;

  if (w.i.pcost < 0.0)
    w.i.relgap = w.i.gap / (-w.i.pcost);
  else if (w.i.dcost > 0.0)
    w.i.relgap = w.i.gap / w.i.dcost;
  else
    w.i.relgap = std::nullopt;

  const double nry = peq > 0 ? ry.norm() / std::max(resy0 + nx, 1.0) : 0.0;
  const double nrz = rz.norm() / std::max(resz0 + nx + ns, 1.0);
  w.i.pres = std::max(nry, nrz) / w.tau;
  w.i.dres = rx.norm() / std::max(resx0 + ny + nz, 1.0) / w.tau;

  w.i.pinfres.reset();
  w.i.dinfres.reset();
  if ((w.hz + w.by) / std::max(ny + nz, 1.0) < -user.rel_gap_tol)
    w.i.pinfres = hresx / std::max(ny + nz, 1.0);
  if (w.cx / std::max(nx, 1.0) < -user.rel_gap_tol)
    w.i.dinfres = std::max(hresy / std::max(nx, 1.0), hresz / std::max(nx + ns, 1.0));
}

InnerCode Ipm::checkExit(bool reduced) const {
  const double feastol = reduced ? fs.feastol_inacc : user.feas_tol;
  const double abstol = reduced ? fs.abstol_inacc : user.abs_gap_tol;
  const double reltol = reduced ? fs.reltol_inacc : user.rel_gap_tol;

  if ((-w.cx > 0.0 || -w.by - w.hz >= -abstol) && (w.i.pres < feastol && w.i.dres < feastol) &&
      (w.i.gap < abstol || (w.i.relgap.has_value() && w.i.relgap.value() < reltol))) {
    return reduced ? InnerCode::close_to_optimal : InnerCode::optimal;
  }
  if (w.i.dinfres.has_value() && w.i.dinfres.value() < feastol && w.tau < w.kap)
    return InnerCode::dinf;
  if ((w.i.pinfres.has_value() && w.i.pinfres.value() < feastol && w.tau < w.kap) ||
      (w.tau < feastol && w.kap < feastol && w.i.pinfres.has_value() &&
       w.i.pinfres.value() < feastol)) {
    return InnerCode::pinf;
  }
  return InnerCode::not_converged;
}

void Ipm::RHSaffine() {
  rhs2.head(n) = rx;
  rhs2.segment(n, peq) = -ry;
  rhs2.segment(n + peq, l) = w.s.head(l) - rz.head(l);
  int ri = n + peq + l, zi = l;
  for (const SOCone& sc : so_cones) {
    rhs2.segment(ri, sc.dim) = w.s.segment(zi, sc.dim) - rz.segment(zi, sc.dim);
    zi += sc.dim;
    ri += sc.dim;
    rhs2.segment(ri, 2).setZero();
    ri += 2;
  }
}

void Ipm::RHScombined(double sigma, double mu) {
  VectorXd ds1(m), ds2(m);
  conicProduct(w.lambda, w.lambda, ds1);
  conicProduct(dsaff_by_W, W_times_dzaff, ds2);
  const double sigmamu = sigma * mu;
  ds1.head(l) += ds2.head(l);
  ds1.head(l).array() -= sigmamu;
  int k = l;
  for (const SOCone& sc : so_cones) {
    ds1(k) -= sigmamu;
    ds1.segment(k, sc.dim) += ds2.segment(k, sc.dim);
    k += sc.dim;
  }
  conicDivision(w.lambda, ds1, dsaff_by_W);
  scale(dsaff_by_W, ds1);

  const double oms = 1.0 - sigma;
  rhs2.head(n + peq) *= oms;
  rhs2.segment(n + peq, l) = -oms * rz.head(l) + ds1.head(l);
  int ri = n + peq + l;
  k = l;
  for (const SOCone& sc : so_cones) {
    rhs2.segment(ri, sc.dim) = -oms * rz.segment(k, sc.dim) + ds1.segment(k, sc.dim);
    k += sc.dim;
    ri += sc.dim;
    rhs2(ri++) = 0.0;
    rhs2(ri++) = 0.0;
  }
}

void Ipm::backscale() {
  w.x = w.x.cwiseQuotient(x_equil * w.tau);
  w.y = w.y.cwiseQuotient(A_equil * w.tau);
  w.z = w.z.cwiseQuotient(G_equil * w.tau);
  w.s = w.s.cwiseProduct(G_equil / w.tau);
}

SolveResult Ipm::run() {
  SolveResult result;
  InnerCode code = InnerCode::numerics;

  setKKTScalingsIdentity();

  rhs1.setZero();
  rhs1.segment(n, peq) = b;
  rhs1.segment(n + peq, l) = h.head(l);
  {
    int hi = l, ri = n + peq + l;
    for (const SOCone& sc : so_cones) {
      rhs1.segment(ri, sc.dim) = h.segment(hi, sc.dim);
      hi += sc.dim;
      ri += sc.dim + 2;
    }
  }
  rhs2.setZero();
  rhs2.head(n) = -c;

  resx0 = std::max(1.0, c.norm());
  resy0 = std::max(1.0, peq > 0 ? b.norm() : 0.0);
  resz0 = std::max(1.0, h.norm());

  if (!factorize()) {
    result.status = SolveStatus::numerical_failure;
    return result;
  }

  VectorXd dx1(n), dy1(peq), dz1(m), dx2(n), dy2(peq), dz2(m);

  // init: primal from min ||Gx-h|| s.t. Ax=b, dual from min ||z|| s.t. G'z+A'y+c=0
  solveKKT(rhs1, dx1, dy1, dz1, true);
  w.x = dx1;
  bringToCone(-dz1, w.s);
  solveKKT(rhs2, dx2, dy2, dz2, true);
  w.y = dy2;
  bringToCone(dz2, w.z);

  rhs1.head(n) = -c;
  w.kap = 1.0;
  w.tau = 1.0;
  double pres_prev = std::numeric_limits<double>::max();

  const int iter_max = user.max_iterations;
  for (w.i.iter = 0; w.i.iter <= iter_max; w.i.iter++) {
    computeResiduals();
    updateStatistics();
    if (std::getenv("UAVSEC_IPM_DEBUG")) {
      std::fprintf(stderr,
                   "it=%2d pres=%.3e dres=%.3e gap=%.3e mu=%.3e tau=%.3e kap=%.3e step=%.3e "
                   "pinfres=%s hz+by=%.3e\n",
                   w.i.iter, w.i.pres, w.i.dres, w.i.gap, w.i.mu, w.tau, w.kap, w.i.step,
                   w.i.pinfres ? std::to_string(*w.i.pinfres).c_str() : "-", w.hz + w.by);
    }

    if (w.i.iter > 0 && (w.i.pres > fs.safeguard * pres_prev || w.i.gap < 0.0)) {
      w = w_best;
      code = checkExit(true);
      if (code == InnerCode::not_converged) code = InnerCode::numerics;
      break;
    }
    pres_prev = w.i.pres;

    code = checkExit(false);
    if (code != InnerCode::not_converged) break;

    if (w.i.iter > 0 && w.i.step == fs.stepmin * fs.gamma) {
      w = w_best;
      code = checkExit(true);
      if (code == InnerCode::not_converged) code = InnerCode::numerics;
      break;
    }
    if (w.i.iter == iter_max) {
      if (!w.i.isBetterThan(w_best.i)) w = w_best;
      code = checkExit(true);
      if (code == InnerCode::not_converged) code = InnerCode::maxit;
      break;
    }
    if (std::isnan(w.i.pcost)) {
      if (w.i.iter > 0 && !w.i.isBetterThan(w_best.i)) {
        w = w_best;
        code = checkExit(true);
        if (code == InnerCode::not_converged) code = InnerCode::numerics;
      } else {
        code = InnerCode::numerics;
      }
      break;
    }

    if (w.i.iter == 0 || w.i.isBetterThan(w_best.i)) w_best = w;

    if (!updateScalings(w.s, w.z, w.lambda)) {
      w = w_best;
      code = checkExit(true);
      if (code == InnerCode::not_converged) code = InnerCode::numerics;
      break;
    }
    updateKKTScalings();
    if (!factorize()) {
      w = w_best;
      code = InnerCode::numerics;
      break;
    }

    solveKKT(rhs1, dx1, dy1, dz1, false);

    // predictor
    RHSaffine();
    solveKKT(rhs2, dx2, dy2, dz2, false);

    const double dtau_denom =
        w.kap / w.tau - c.dot(dx1) - (peq > 0 ? b.dot(dy1) : 0.0) - h.dot(dz1);
    const double dtauaff =
        (rt - w.kap + c.dot(dx2) + (peq > 0 ? b.dot(dy2) : 0.0) + h.dot(dz2)) / dtau_denom;

    dz2 += dtauaff * dz1;
    scale(dz2, W_times_dzaff);
    dsaff_by_W = -W_times_dzaff - w.lambda;
    const double dkapaff = -w.kap - w.kap / w.tau * dtauaff;

    const double step_aff =
        lineSearch(w.lambda, dsaff_by_W, W_times_dzaff, w.tau, dtauaff, w.kap, dkapaff);

    const double sigma =
        std::clamp(std::pow(1.0 - step_aff, 3.0), fs.sigmamin, fs.sigmamax);
    w.i.sigma = sigma;

    // corrector
    RHScombined(sigma, w.i.mu);
    solveKKT(rhs2, dx2, dy2, dz2, false);

    const double bkap = w.kap * w.tau + dkapaff * dtauaff - sigma * w.i.mu;
    const double dtau = ((1.0 - sigma) * rt - bkap / w.tau + c.dot(dx2) +
                         (peq > 0 ? b.dot(dy2) : 0.0) + h.dot(dz2)) /
                        dtau_denom;
    dx2 += dtau * dx1;
    dy2 += dtau * dy1;
    dz2 += dtau * dz1;

    scale(dz2, W_times_dzaff);
    dsaff_by_W = -(dsaff_by_W + W_times_dzaff);
    const double dkap = -(bkap + w.kap * dtau) / w.tau;

    w.i.step = fs.gamma * lineSearch(w.lambda, dsaff_by_W, W_times_dzaff, w.tau, dtau, w.kap, dkap);
    scale(dsaff_by_W, dsaff);

    w.x += w.i.step * dx2;
    w.y += w.i.step * dy2;
    w.z += w.i.step * dz2;
    w.s += w.i.step * dsaff;
    w.kap += w.i.step * dkap;
    w.tau += w.i.step * dtau;
  }

  backscale();

  result.x = w.x;
  result.y = w.y;
  result.z = w.z;
  result.s = w.s;
  result.objective = result.x.size() > 0 ? c.cwiseProduct(x_equil).dot(result.x) : 0.0;
  result.iterations = w.i.iter;
  result.residuals.primal = w.i.pres;
  result.residuals.dual = w.i.dres;
  result.residuals.gap = w.i.gap;
  result.residuals.rel_gap = w.i.relgap.value_or(w.i.gap);

  switch (code) {
    case InnerCode::optimal:
      result.status = SolveStatus::optimal;
      break;
    case InnerCode::pinf:
      result.status = SolveStatus::primal_infeasible;
      break;
    case InnerCode::dinf:
      result.status = SolveStatus::dual_infeasible;
      break;
    case InnerCode::maxit:
      result.status = SolveStatus::iteration_limit;
      break;
    case InnerCode::close_to_optimal:
    case InnerCode::numerics:
    case InnerCode::not_converged:
      result.status = SolveStatus::numerical_failure;
      break;
  }
  return result;
}

double cone_distance(const ConeLayout& cones, const VectorXd& s) {
  double worst = 0.0;
  for (int i = 0; i < cones.orthant; i++) worst = std::max(worst, -s(i));
  int cs = cones.orthant;
  for (int d : cones.soc) {
    worst = std::max(worst, s.segment(cs + 1, d - 1).norm() - s(cs));
    cs += d;
  }
  return worst;
}

}  // namespace

SolveResult solve(const ConicProgram& p, const SolverSettings& settings) {
  auto errs = p.check();
  if (!errs.empty()) throw std::invalid_argument("solve: " + errs.front());
  Ipm ipm(p, settings);
  return ipm.run();
}

ResidualReport check_certificate(const ConicProgram& p, const SolveResult& r) {
  ResidualReport rep;
  const Eigen::SparseMatrix<double>& A = p.eq_mat;
  const Eigen::SparseMatrix<double>& G = p.cone_mat;
  const int peq = p.num_eq();

  if (r.status == SolveStatus::primal_infeasible) {
    // Farkas certificate: A'y + G'z = 0, z in K*, b'y + h'z < 0
    Eigen::VectorXd v = G.transpose() * r.z;
    if (peq > 0) v += A.transpose() * r.y;
    const double scale = std::max(1.0, r.y.norm() + r.z.norm());
    rep.dual = v.norm() / scale;
    rep.gap = ((peq > 0 ? p.eq_rhs.dot(r.y) : 0.0) + p.cone_rhs.dot(r.z)) / scale;
    rep.cone_violation = cone_distance(p.cones, r.z);
    return rep;
  }
  if (r.status == SolveStatus::dual_infeasible) {
    // unboundedness certificate: Ax = 0, -Gx in K, c'x < 0
    const double scale = std::max(1.0, r.x.norm());
    rep.primal = (peq > 0 ? (A * r.x).norm() : 0.0) / scale;
    Eigen::VectorXd gs = -(G * r.x);
    rep.cone_violation = cone_distance(p.cones, gs);
    rep.gap = p.c.dot(r.x) / scale;
    return rep;
  }

  Eigen::VectorXd s_check = p.cone_rhs - G * r.x;
  double pres = 0.0;
  if (peq > 0) pres = (A * r.x - p.eq_rhs).norm() / std::max(1.0, p.eq_rhs.norm());
  rep.primal = std::max(pres, (s_check - r.s).norm() / std::max(1.0, p.cone_rhs.norm()));
  rep.cone_violation = std::max(cone_distance(p.cones, s_check), cone_distance(p.cones, r.z));

  Eigen::VectorXd dres_v = p.c + G.transpose() * r.z;
  if (peq > 0) dres_v += A.transpose() * r.y;
  rep.dual = dres_v.norm() / std::max(1.0, p.c.norm());

  rep.gap = std::abs(s_check.dot(r.z));
  const double pobj = p.c.dot(r.x);
  const double dobj = -((peq > 0 ? p.eq_rhs.dot(r.y) : 0.0) + p.cone_rhs.dot(r.z));
  rep.rel_gap = std::abs(pobj - dobj) / std::max(1.0, std::abs(pobj));
  return rep;
}

}  // namespace uavsec
