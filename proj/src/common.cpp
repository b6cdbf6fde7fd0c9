#include "dipm/common.hpp"

namespace dipm {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input:
      return "input";
    case ErrorKind::infeasible:
      return "infeasible";
    case ErrorKind::numerical:
      return "numerical";
    case ErrorKind::internal:
      return "internal";
  }
  return "unknown";
}

int numerical_rank(const Matrix& m, double rel_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    if (s(k) > rel_tol * s(0)) ++rank;
  }
  return rank;
}

}  // namespace dipm
