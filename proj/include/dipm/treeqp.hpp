#pragma once

// Equality-constrained QP over a clique tree solved by quadratic message
// passing:
//
//   minimize  Σ_i ½ΔxᵀHⁱΔx + rⁱᵀΔx   subject to  AⁱΔx = βⁱ
//
// with every term living on clique C_i. The upward pass eliminates
// C_i \ S_{i,parent}; the downward pass recovers (Δx, Δv) from the records.

#include <span>
#include <vector>

#include "dipm/chordal.hpp"
#include "dipm/common.hpp"

namespace dipm::treeqp {

using chordal::CliqueTree;
using chordal::IndexSet;

struct CliqueQpData {
  Matrix H;     // |C| × |C|
  Vector r;     // |C|
  Matrix A;     // p × |C|
  Vector beta;  // p
};

/// m(y) = ½yᵀQy + qᵀy + c over the separator variables.
struct QuadraticMessage {
  Matrix Q;
  Vector q;
  double c = 0.0;
  IndexSet separator;

  double operator()(const Vector& y) const { return 0.5 * y.dot(Q * y) + q.dot(y) + c; }
};

struct EliminationRecord {
  int clique = -1;
  IndexSet eliminated;         // C \ S_parent
  IndexSet kept;               // S_parent
  std::vector<int> z_pos;      // positions of `eliminated` inside C
  std::vector<int> y_pos;      // positions of `kept` inside C
  Matrix H1, H2;               // z = H1·y + h1,  v = H2·y + h2
  Vector h1, h2;
  Matrix O;                    // [[Q_zz, A_zᵀ], [A_z, 0]]
};

/// rank([H; A]) == column count.
bool nullspace_condition(const Matrix& H, const Matrix& A);

/// Reciprocal condition estimate below which O counts as singular. Barrier
/// curvature near the boundary legitimately pushes cond(O) past 1e12, so the
/// cutoff sits a little above machine epsilon rather than at a conditioning
/// budget; structural rank loss in A_z is caught separately.
inline constexpr double kSingularRcond = 1e-14;

struct Elimination {
  QuadraticMessage message;
  EliminationRecord record;
};

/// Eliminates C \ sep from the clique's data plus its children's messages.
/// Child messages are added in the order given.
Elimination eliminate(int clique_id, const IndexSet& clique, const CliqueQpData& d,
                      std::span<const QuadraticMessage> child_msgs, const IndexSet& sep);

struct UpwardResult {
  /// messages[k]: message from clique k to its parent (scalar at the root).
  std::vector<QuadraticMessage> messages;
  std::vector<EliminationRecord> records;
};

UpwardResult upward_pass(const CliqueTree& t, std::span<const CliqueQpData> data);

struct CliqueSolution {
  Vector dx;  // |C|, clique order
  Vector dv;  // p
};

/// Applies one record given the parent's values on S_parent.
CliqueSolution recover(const EliminationRecord& rec, const Vector& y);

/// Values of `sep` read out of a clique-ordered vector.
Vector gather(const IndexSet& clique, const Vector& values, const IndexSet& sep);

std::vector<CliqueSolution> downward_pass(const CliqueTree& t,
                                          std::span<const EliminationRecord> records);

/// ‖T·K·Tᵀ − blockdiag(O)‖_F / ‖K‖_F for the KKT matrix K permuted into
/// elimination order and the transforms T implied by the records.
double block_ldl_check(const CliqueTree& t, std::span<const EliminationRecord> records,
                       std::span<const CliqueQpData> data);

}  // namespace dipm::treeqp
