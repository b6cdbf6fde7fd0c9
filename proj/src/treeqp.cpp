#include "dipm/treeqp.hpp"

#include <cmath>
#include <cstdio>
#include <map>

namespace dipm::treeqp {

bool nullspace_condition(const Matrix& H, const Matrix& A) {
  const Eigen::Index n = H.cols();
  if (n == 0) return true;
  Matrix stacked(H.rows() + A.rows(), n);
  stacked << H, A;
  return numerical_rank(stacked, kRankTolerance) == n;
}

namespace {

Matrix sub(const Matrix& M, const std::vector<int>& rows, const std::vector<int>& cols) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) out(r, c) = M(rows[r], cols[c]);
  }
  return out;
}

Matrix cols_of(const Matrix& M, const std::vector<int>& cols) {
  Matrix out(M.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) out.col(c) = M.col(cols[c]);
  return out;
}

Vector entries(const Vector& v, const std::vector<int>& idx) {
  Vector out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(k) = v(idx[k]);
  return out;
}

std::string clique_tag(int id) { return "clique " + std::to_string(id); }

}  // namespace

Elimination eliminate(int clique_id, const IndexSet& clique, const CliqueQpData& d,
                      std::span<const QuadraticMessage> child_msgs, const IndexSet& sep) {
  const Eigen::Index w = static_cast<Eigen::Index>(clique.size());
  const Eigen::Index p = d.A.rows();
  if (d.H.rows() != w || d.H.cols() != w || d.r.size() != w || d.beta.size() != p ||
      (p > 0 && d.A.cols() != w)) {
    throw InputError(clique_tag(clique_id) + ": QP data dimensions do not match the clique");
  }

  Matrix Q = d.H;
  Vector q = d.r;
  double c = 0.0;
  for (const QuadraticMessage& m : child_msgs) {
    const auto pos = clique.positions_of(m.separator);
    for (std::size_t a = 0; a < pos.size(); ++a) {
      q(pos[a]) += m.q(static_cast<Eigen::Index>(a));
      for (std::size_t b = 0; b < pos.size(); ++b) {
        Q(pos[a], pos[b]) += m.Q(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
    c += m.c;
  }

  EliminationRecord rec;
  rec.clique = clique_id;
  rec.kept = sep;
  rec.y_pos = clique.positions_of(sep);
  for (Eigen::Index k = 0; k < w; ++k) {
    if (!sep.contains(clique[k])) rec.z_pos.push_back(static_cast<int>(k));
  }
  std::vector<int> zvars;
  for (int k : rec.z_pos) zvars.push_back(clique[k]);
  rec.eliminated = IndexSet(std::move(zvars));

  const Eigen::Index nz = static_cast<Eigen::Index>(rec.z_pos.size());
  const Eigen::Index ny = static_cast<Eigen::Index>(rec.y_pos.size());
  const Matrix Qzz = sub(Q, rec.z_pos, rec.z_pos);
  const Matrix Qzy = sub(Q, rec.z_pos, rec.y_pos);
  const Matrix Qyy = sub(Q, rec.y_pos, rec.y_pos);
  const Vector qz = entries(q, rec.z_pos);
  const Vector qy = entries(q, rec.y_pos);
  const Matrix Az = cols_of(d.A, rec.z_pos);
  const Matrix Ay = cols_of(d.A, rec.y_pos);

  if (p > 0 && numerical_rank(Az, kRankTolerance) < p) {
    throw InputError(clique_tag(clique_id) +
                     ": local equality block is rank deficient; preprocessing required");
  }

  const Eigen::Index dim = nz + p;
  rec.O = Matrix::Zero(dim, dim);
  rec.O.topLeftCorner(nz, nz) = Qzz;
  rec.O.topRightCorner(nz, p) = Az.transpose();
  rec.O.bottomLeftCorner(p, nz) = Az;

  Matrix rhs_mat(dim, ny);
  rhs_mat << -Qzy, -Ay;
  Vector rhs_vec(dim);
  rhs_vec << -qz, d.beta;

  Matrix X(dim, ny);
  Vector xv(dim);
  if (dim > 0) {
    // Symmetric Ruiz equilibration. One row-max sweep is not enough for
    // saddle-point blocks like [[a, 1], [1, 0]] with a ≫ 1; the iteration
    // drives every row's max towards 1 (here D → diag(a^-½, a^½)).
    Vector D = Vector::Ones(dim);
    Matrix Os = rec.O;
    for (int sweep = 0; sweep < 60; ++sweep) {
      Vector step(dim);
      double worst = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) {
        const double mx = Os.row(k).cwiseAbs().maxCoeff();
        if (!(mx > 0.0) || !std::isfinite(mx)) {
          throw NumericalError("Lemma 2 violation: rank condition failed at " +
                               clique_tag(clique_id) + " (zero or non-finite row)");
        }
        step(k) = 1.0 / std::sqrt(mx);
        worst = std::max(worst, std::abs(1.0 - mx));
      }
      if (worst < 1e-3) break;
      Os = step.asDiagonal() * Os * step.asDiagonal();
      D = D.cwiseProduct(step);
    }
    Eigen::PartialPivLU<Matrix> lu(Os);
    if (!(lu.rcond() >= kSingularRcond)) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3g", lu.rcond());
      throw NumericalError("Lemma 2 violation: rank condition failed at " +
                           clique_tag(clique_id) + " (rcond " + buf + ")");
    }
    X = D.asDiagonal() * lu.solve(D.asDiagonal() * rhs_mat);
    xv = D.asDiagonal() * lu.solve(D.asDiagonal() * rhs_vec);
  }
  rec.H1 = X.topRows(nz);
  rec.H2 = X.bottomRows(p);
  rec.h1 = xv.head(nz);
  rec.h2 = xv.tail(p);

  QuadraticMessage msg;
  msg.separator = sep;
  const Matrix QzzH1 = Qzz * rec.H1;
  Matrix Qm = rec.H1.transpose() * QzzH1 + rec.H1.transpose() * Qzy + Qzy.transpose() * rec.H1 + Qyy;
  msg.Q = 0.5 * (Qm + Qm.transpose());
  msg.q = rec.H1.transpose() * (Qzz * rec.h1) + Qzy.transpose() * rec.h1 +
          rec.H1.transpose() * qz + qy;
  msg.c = 0.5 * rec.h1.dot(Qzz * rec.h1) + qz.dot(rec.h1) + c;
  return {std::move(msg), std::move(rec)};
}

UpwardResult upward_pass(const CliqueTree& t, std::span<const CliqueQpData> data) {
  if (!t.rooted()) throw InputError("upward pass requires a rooted clique tree");
  if (static_cast<int>(data.size()) != t.size()) {
    throw InputError("upward pass: one QP block per clique required");
  }
  UpwardResult out;
  out.messages.resize(t.size());
  out.records.resize(t.size());
  for (int i : t.postorder()) {
    std::vector<QuadraticMessage> inbox;
    for (int k : t.children[i]) inbox.push_back(out.messages[k]);
    auto e = eliminate(i, t.cliques[i], data[i], inbox, t.parent_separator(i));
    out.messages[i] = std::move(e.message);
    out.records[i] = std::move(e.record);
  }
  return out;
}

CliqueSolution recover(const EliminationRecord& rec, const Vector& y) {
  const Eigen::Index w = static_cast<Eigen::Index>(rec.z_pos.size() + rec.y_pos.size());
  if (y.size() != static_cast<Eigen::Index>(rec.y_pos.size())) {
    throw InputError(clique_tag(rec.clique) + ": separator values have wrong length");
  }
  CliqueSolution s;
  s.dx.resize(w);
  const Vector z = rec.H1 * y + rec.h1;
  for (std::size_t k = 0; k < rec.z_pos.size(); ++k) s.dx(rec.z_pos[k]) = z(k);
  for (std::size_t k = 0; k < rec.y_pos.size(); ++k) s.dx(rec.y_pos[k]) = y(k);
  s.dv = rec.H2 * y + rec.h2;
  return s;
}

Vector gather(const IndexSet& clique, const Vector& values, const IndexSet& sep) {
  return entries(values, clique.positions_of(sep));
}

std::vector<CliqueSolution> downward_pass(const CliqueTree& t,
                                          std::span<const EliminationRecord> records) {
  if (!t.rooted()) throw InputError("downward pass requires a rooted clique tree");
  std::vector<CliqueSolution> out(t.size());
  for (const auto& level : t.levels()) {
    for (int i : level) {
      Vector y(0);
      if (t.parent[i] >= 0) {
        const int par = t.parent[i];
        y = gather(t.cliques[par], out[par].dx, records[i].kept);
      }
      out[i] = recover(records[i], y);
    }
  }
  return out;
}

double block_ldl_check(const CliqueTree& t, std::span<const EliminationRecord> records,
                       std::span<const CliqueQpData> data) {
  // Permuted position of every primal variable and dual row.
  std::map<int, Eigen::Index> var_pos;
  std::vector<Eigen::Index> block_start(t.size()), dual_start(t.size());
  Eigen::Index next = 0;
  const auto order = t.postorder();
  for (int i : order) {
    block_start[i] = next;
    for (int v : records[i].eliminated) var_pos[v] = next++;
    dual_start[i] = next;
    next += data[i].A.rows();
  }
  const Eigen::Index N = next;

  Matrix K = Matrix::Zero(N, N);
  for (int i = 0; i < t.size(); ++i) {
    const IndexSet& C = t.cliques[i];
    std::vector<Eigen::Index> g(C.size());
    for (std::size_t a = 0; a < C.size(); ++a) g[a] = var_pos.at(C[a]);
    for (std::size_t a = 0; a < C.size(); ++a) {
      for (std::size_t b = 0; b < C.size(); ++b) {
        K(g[a], g[b]) += data[i].H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      }
    }
    for (Eigen::Index r = 0; r < data[i].A.rows(); ++r) {
      for (std::size_t a = 0; a < C.size(); ++a) {
        const double v = data[i].A(r, static_cast<Eigen::Index>(a));
        K(dual_start[i] + r, g[a]) += v;
        K(g[a], dual_start[i] + r) += v;
      }
    }
  }

  Matrix M = K;
  Matrix D = Matrix::Zero(N, N);
  for (int i : order) {
    const EliminationRecord& rec = records[i];
    const Eigen::Index b0 = block_start[i];
    const Eigen::Index bs = rec.O.rows();
    D.block(b0, b0, bs, bs) = rec.O;
    if (rec.kept.empty()) continue;
    Matrix G(bs, static_cast<Eigen::Index>(rec.kept.size()));
    G << rec.H1, rec.H2;
    std::vector<Eigen::Index> ypos;
    for (int v : rec.kept) ypos.push_back(var_pos.at(v));
    // Rows then columns: M ← T M Tᵀ with T = I + (rows y) Gᵀ (cols block).
    const Matrix block_rows = M.middleRows(b0, bs);
    for (std::size_t a = 0; a < ypos.size(); ++a) {
      M.row(ypos[a]) += G.col(static_cast<Eigen::Index>(a)).transpose() * block_rows;
    }
    const Matrix block_cols = M.middleCols(b0, bs);
    for (std::size_t a = 0; a < ypos.size(); ++a) {
      M.col(ypos[a]) += block_cols * G.col(static_cast<Eigen::Index>(a));
    }
  }
  const double denom = K.norm();
  if (denom == 0.0) return (M - D).norm();
  return (M - D).norm() / denom;
}

}  // namespace dipm::treeqp
