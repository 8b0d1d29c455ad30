#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <string>
#include <vector>

namespace uavsec {

/// Order of the conic rows in the cone matrix: first `orthant` nonnegative
/// rows, then one block per second-order cone with the listed dimension.
struct ConeLayout {
  int orthant = 0;
  std::vector<int> soc;

  int total_rows() const {
    int t = orthant;
    for (int d : soc) t += d;
    return t;
  }
};

/// Standard-form conic program:
///   minimize    c'x
///   subject to  eq_mat * x == eq_rhs
///               cone_rhs - cone_mat * x in K
/// where K is the product cone described by `cones`.
struct ConicProgram {
  Eigen::VectorXd c;
  Eigen::SparseMatrix<double> eq_mat;
  Eigen::VectorXd eq_rhs;
  Eigen::SparseMatrix<double> cone_mat;
  Eigen::VectorXd cone_rhs;
  ConeLayout cones;

  int num_vars() const { return static_cast<int>(c.size()); }
  int num_eq() const { return static_cast<int>(eq_rhs.size()); }
  int num_cone_rows() const { return static_cast<int>(cone_rhs.size()); }

  /// Returns one message per structural problem (dimension mismatches,
  /// non-finite data, empty cones).
  std::vector<std::string> check() const;
};

/// Plain-text serialization of a conic program (objective, triplet matrices,
/// cone layout), round-trips through parse_program().
std::string dump_program(const ConicProgram& p);
ConicProgram parse_program(const std::string& text);

}  // namespace uavsec
