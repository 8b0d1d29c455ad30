#include "uavsec/conic.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace uavsec {

std::vector<std::string> ConicProgram::check() const {
  std::vector<std::string> errs;
  const int n = num_vars();
  if (n < 1) errs.push_back("program has no variables");
  if (cones.orthant < 0) errs.push_back("negative orthant size");
  for (size_t i = 0; i < cones.soc.size(); i++)
    if (cones.soc[i] < 1) errs.push_back("soc cone " + std::to_string(i) + " is empty");
  if (cones.total_rows() != num_cone_rows())
    errs.push_back("cone layout rows do not match cone_rhs size");
  if (cone_mat.rows() != cone_rhs.size() || (cone_mat.cols() != 0 && cone_mat.cols() != n))
    errs.push_back("cone_mat dimensions inconsistent");
  if (eq_mat.rows() != eq_rhs.size() || (eq_mat.cols() != 0 && eq_rhs.size() > 0 && eq_mat.cols() != n))
    errs.push_back("eq_mat dimensions inconsistent");
  if (num_cone_rows() < 1) errs.push_back("program has no conic rows");
  auto finite = [](const Eigen::VectorXd& v) { return v.allFinite(); };
  if (!finite(c)) errs.push_back("objective has non-finite entries");
  if (eq_rhs.size() > 0 && !finite(eq_rhs)) errs.push_back("eq_rhs has non-finite entries");
  if (!finite(cone_rhs)) errs.push_back("cone_rhs has non-finite entries");
  for (int k = 0; k < eq_mat.outerSize(); k++)
    for (Eigen::SparseMatrix<double>::InnerIterator it(eq_mat, k); it; ++it)
      if (!std::isfinite(it.value())) errs.push_back("eq_mat has non-finite entries");
  for (int k = 0; k < cone_mat.outerSize(); k++)
    for (Eigen::SparseMatrix<double>::InnerIterator it(cone_mat, k); it; ++it)
      if (!std::isfinite(it.value())) errs.push_back("cone_mat has non-finite entries");
  return errs;
}

namespace {

std::string num(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void dump_vector(std::ostringstream& out, const char* tag, const Eigen::VectorXd& v) {
  out << tag << " " << v.size() << "\n";
  for (Eigen::Index i = 0; i < v.size(); i++) out << num(v(i)) << "\n";
}

void dump_matrix(std::ostringstream& out, const char* tag, const Eigen::SparseMatrix<double>& m) {
  out << tag << " " << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
  for (int k = 0; k < m.outerSize(); k++)
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
      out << it.row() << " " << it.col() << " " << num(it.value()) << "\n";
}

}  // namespace

std::string dump_program(const ConicProgram& p) {
  std::ostringstream out;
  out << "conicprogram 1\n";
  out << "vars " << p.num_vars() << "\n";
  out << "orthant " << p.cones.orthant << "\n";
  out << "soc " << p.cones.soc.size();
  for (int d : p.cones.soc) out << " " << d;
  out << "\n";
  dump_vector(out, "minimize", p.c);
  dump_matrix(out, "eqmat", p.eq_mat);
  dump_vector(out, "eqrhs", p.eq_rhs);
  dump_matrix(out, "conemat", p.cone_mat);
  dump_vector(out, "conerhs", p.cone_rhs);
  return out.str();
}

ConicProgram parse_program(const std::string& text) {
  std::istringstream in(text);
  auto fail = [](const std::string& why) -> std::runtime_error {
    return std::runtime_error("conic program parse error: " + why);
  };
  std::string tag;
  int version = 0;
  if (!(in >> tag >> version) || tag != "conicprogram" || version != 1)
    throw fail("bad header");
  ConicProgram p;
  int n = 0;
  size_t nsoc = 0;
  if (!(in >> tag >> n) || tag != "vars") throw fail("expected vars");
  if (!(in >> tag >> p.cones.orthant) || tag != "orthant") throw fail("expected orthant");
  if (!(in >> tag >> nsoc) || tag != "soc") throw fail("expected soc");
  p.cones.soc.resize(nsoc);
  for (size_t i = 0; i < nsoc; i++)
    if (!(in >> p.cones.soc[i])) throw fail("truncated soc list");

  auto read_vector = [&](const char* want) {
    Eigen::Index len = 0;
    if (!(in >> tag >> len) || tag != want) throw fail(std::string("expected ") + want);
    Eigen::VectorXd v(len);
    for (Eigen::Index i = 0; i < len; i++)
      if (!(in >> v(i))) throw fail(std::string("truncated ") + want);
    return v;
  };
  auto read_matrix = [&](const char* want) {
    Eigen::Index rows = 0, cols = 0, nnz = 0;
    if (!(in >> tag >> rows >> cols >> nnz) || tag != want) throw fail(std::string("expected ") + want);
    std::vector<Eigen::Triplet<double>> ts;
    ts.reserve(nnz);
    for (Eigen::Index i = 0; i < nnz; i++) {
      Eigen::Index r, col;
      double v;
      if (!(in >> r >> col >> v)) throw fail(std::string("truncated ") + want);
      ts.emplace_back(r, col, v);
    }
    Eigen::SparseMatrix<double> m(rows, cols);
    m.setFromTriplets(ts.begin(), ts.end());
    return m;
  };

  p.c = read_vector("minimize");
  if (p.c.size() != n) throw fail("objective length mismatch");
  p.eq_mat = read_matrix("eqmat");
  p.eq_rhs = read_vector("eqrhs");
  p.cone_mat = read_matrix("conemat");
  p.cone_rhs = read_vector("conerhs");
  auto errs = p.check();
  if (!errs.empty()) throw fail(errs.front());
  return p;
}

}  // namespace uavsec
