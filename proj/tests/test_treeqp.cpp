#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "dipm/chordal.hpp"
#include "dipm/oracle.hpp"
#include "dipm/treeqp.hpp"
#include "support.hpp"

using namespace dipm;
using namespace dipm::treeqp;
using chordal::IndexSet;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  const auto r = static_cast<Eigen::Index>(rows.size());
  const auto c = r == 0 ? 0 : static_cast<Eigen::Index>(rows.begin()->size());
  Matrix m(r, c);
  Eigen::Index i = 0;
  for (const auto& row : rows) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

Vector vec(std::initializer_list<double> v) {
  return Eigen::Map<const Vector>(v.begin(), static_cast<Eigen::Index>(v.size()));
}

CliqueQpData random_clique_data(testing::Rng& rng, Eigen::Index width, Eigen::Index rows) {
  std::normal_distribution<double> nd;
  CliqueQpData d;
  Matrix B(width, width);
  for (Eigen::Index i = 0; i < width; ++i) {
    for (Eigen::Index j = 0; j < width; ++j) B(i, j) = nd(rng);
  }
  d.H = B * B.transpose() / static_cast<double>(width) + 0.1 * Matrix::Identity(width, width);
  d.r.resize(width);
  for (Eigen::Index i = 0; i < width; ++i) d.r(i) = nd(rng);
  d.A.resize(rows, width);
  d.beta.resize(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    d.beta(i) = nd(rng);
    for (Eigen::Index j = 0; j < width; ++j) d.A(i, j) = nd(rng);
  }
  return d;
}

// Stacked KKT system over all variables and rows of the tree.
struct Assembled {
  Matrix K;
  Vector rhs;
  Eigen::Index n = 0;
};

Assembled assemble(const CliqueTree& t, const std::vector<CliqueQpData>& data, int n) {
  Eigen::Index p = 0;
  for (const auto& d : data) p += d.A.rows();
  Assembled a;
  a.n = n;
  a.K = Matrix::Zero(n + p, n + p);
  a.rhs = Vector::Zero(n + p);
  Eigen::Index row = n;
  for (int c = 0; c < t.size(); ++c) {
    const auto& C = t.cliques[c];
    const auto& d = data[c];
    for (std::size_t i = 0; i < C.size(); ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      a.rhs(C[i]) -= d.r(ii);
      for (std::size_t j = 0; j < C.size(); ++j) a.K(C[i], C[j]) += d.H(ii, static_cast<Eigen::Index>(j));
    }
    for (Eigen::Index r = 0; r < d.A.rows(); ++r, ++row) {
      for (std::size_t j = 0; j < C.size(); ++j) {
        a.K(row, C[j]) = d.A(r, static_cast<Eigen::Index>(j));
        a.K(C[j], row) = d.A(r, static_cast<Eigen::Index>(j));
      }
      a.rhs(row) = d.beta(r);
    }
  }
  return a;
}

Vector stack_solution(const CliqueTree& t, const std::vector<CliqueSolution>& sol, int n,
                      const std::vector<CliqueQpData>& data) {
  Eigen::Index p = 0;
  for (const auto& d : data) p += d.A.rows();
  Vector z(n + p);
  std::vector<bool> seen(n, false);
  Eigen::Index row = n;
  for (int c = 0; c < t.size(); ++c) {
    for (std::size_t i = 0; i < t.cliques[c].size(); ++i) {
      const int v = t.cliques[c][i];
      const double val = sol[c].dx(static_cast<Eigen::Index>(i));
      if (seen[v]) {
        CHECK(z(v) == val);  // separator copies agree exactly
      }
      z(v) = val;
      seen[v] = true;
    }
    z.segment(row, sol[c].dv.size()) = sol[c].dv;
    row += sol[c].dv.size();
  }
  return z;
}

double kkt_residual(const Assembled& a, const Vector& z) {
  return (a.K * z - a.rhs).lpNorm<Eigen::Infinity>() / (1.0 + a.rhs.lpNorm<Eigen::Infinity>());
}

CliqueTree chain_tree(int cliques) {
  std::vector<IndexSet> cl;
  for (int k = 0; k < cliques; ++k) cl.push_back(IndexSet{2 * k, 2 * k + 1, 2 * k + 2});
  return chordal::root_min_height(chordal::mwst_clique_tree(cl));
}

}  // namespace

TEST_CASE("nullspace condition") {
  CHECK(nullspace_condition(Matrix::Identity(2, 2), Matrix(0, 2)));
  CHECK(nullspace_condition(mat({{1, 0}, {0, 0}}), mat({{0, 1}})));
  CHECK(!nullspace_condition(mat({{1, 0}, {0, 0}}), mat({{1, 0}})));
  CHECK(!nullspace_condition(Matrix::Zero(3, 3), mat({{1, 0, 0}, {0, 1, 0}})));
}

TEST_CASE("eliminating z with a zero Schur complement") {
  // ½(z² + y²) + zy over z leaves Q_yy − Q_zy²/Q_zz = 0.
  CliqueQpData d{mat({{1, 1}, {1, 1}}), vec({0, 0}), Matrix(0, 2), Vector(0)};
  const auto e = eliminate(0, IndexSet{0, 1}, d, {}, IndexSet{1});
  CHECK(e.message.Q.rows() == 1);
  CHECK(e.message.Q(0, 0) == doctest::Approx(0.0));
  CHECK(e.message.q(0) == doctest::Approx(0.0));
  CHECK(e.record.H1(0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("equality-only elimination") {
  // min ½z² s.t. z + y = 1 gives m(y) = ½(1 − y)², z = −y + 1.
  CliqueQpData d{mat({{1, 0}, {0, 0}}), vec({0, 0}), mat({{1, 1}}), vec({1})};
  const auto e = eliminate(0, IndexSet{0, 1}, d, {}, IndexSet{1});
  CHECK(e.message.Q(0, 0) == doctest::Approx(1.0));
  CHECK(e.message.q(0) == doctest::Approx(-1.0));
  CHECK(e.message.c == doctest::Approx(0.5));
  CHECK(e.record.H1(0, 0) == doctest::Approx(-1.0));
  CHECK(e.record.h1(0) == doctest::Approx(1.0));
  for (double y : {-2.0, 0.0, 0.7, 3.0}) {
    CHECK(e.message(vec({y})) == doctest::Approx(0.5 * (1 - y) * (1 - y)));
  }
}

TEST_CASE("root elimination yields the optimal value") {
  // min ½‖x‖² + rᵀx: optimum −½‖r‖² at x = −r.
  const Vector r = vec({1, -2, 0.5});
  CliqueQpData d{Matrix::Identity(3, 3), r, Matrix(0, 3), Vector(0)};
  const auto e = eliminate(0, IndexSet{0, 1, 2}, d, {}, IndexSet{});
  CHECK(e.message.Q.size() == 0);
  CHECK(e.message.c == doctest::Approx(-0.5 * r.squaredNorm()));
  CHECK(e.record.H1.cols() == 0);
  CHECK((e.record.h1 + r).norm() == doctest::Approx(0.0));
}

TEST_CASE("single clique: downward pass is the root solve") {
  const Vector r = vec({1, -2});
  std::vector<CliqueQpData> data{{Matrix::Identity(2, 2), r, Matrix(0, 2), Vector(0)}};
  const auto t = chordal::root_min_height(chordal::mwst_clique_tree(std::vector<IndexSet>{{0, 1}}));
  const auto up = upward_pass(t, data);
  const auto sol = downward_pass(t, up.records);
  CHECK((sol[0].dx + r).lpNorm<Eigen::Infinity>() == 0.0);
  const auto a = assemble(t, data, 2);
  CHECK(kkt_residual(a, stack_solution(t, sol, 2, data)) == 0.0);
}

TEST_CASE("decoupled cliques are solved independently") {
  testing::Rng rng(5);
  // Two cliques sharing only variable 1; variable 1 gets no curvature or
  // constraints in the child so the blocks decouple.
  std::vector<IndexSet> cl = {{0, 1}, {1, 2}};
  const auto t = chordal::root_min_height(chordal::mwst_clique_tree(cl));
  std::vector<CliqueQpData> data = {random_clique_data(rng, 2, 1), random_clique_data(rng, 2, 0)};
  const int child = t.children[t.root][0];
  data[child].H = mat({{0, 0}, {0, 2}});
  data[child].r = vec({0, 3});
  if (t.cliques[child] == IndexSet{0, 1}) {
    data[child].H = mat({{2, 0}, {0, 0}});
    data[child].r = vec({3, 0});
    data[child].A = Matrix(0, 2);
    data[child].beta = Vector(0);
  }
  const auto up = upward_pass(t, data);
  CHECK(up.messages[child].Q.isZero());
  CHECK(up.messages[child].q.isZero());
  CHECK(up.messages[child].c == doctest::Approx(-9.0 / 4.0));
  const auto sol = downward_pass(t, up.records);
  const auto a = assemble(t, data, 3);
  CHECK(kkt_residual(a, stack_solution(t, sol, 3, data)) <= 1e-12);
}

TEST_CASE("property: chain of three cliques satisfies the assembled KKT system") {
  testing::Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = chain_tree(3);
    std::vector<CliqueQpData> data;
    for (int c = 0; c < 3; ++c) data.push_back(random_clique_data(rng, 3, trial % 3 == 0 ? 0 : 1));
    const auto up = upward_pass(t, data);
    const auto sol = downward_pass(t, up.records);
    const auto a = assemble(t, data, 7);
    const Vector z = stack_solution(t, sol, 7, data);
    CHECK(kkt_residual(a, z) <= 1e-9);

    // The root message is the optimal value of the whole QP.
    const Vector dx = z.head(7);
    const double val = 0.5 * dx.dot(a.K.topLeftCorner(7, 7) * dx) - a.rhs.head(7).dot(dx);
    CHECK(up.messages[t.root].c == doctest::Approx(val).epsilon(1e-9));
    CHECK(block_ldl_check(t, up.records, data) <= 1e-10);
  }
}

TEST_CASE("property: two eliminations in sequence equal one parametric minimization") {
  testing::Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    // Child {0,1,2} eliminates 0 keeping {1,2}; parent {1,2,3} eliminates 1 keeping {2,3}.
    auto child = random_clique_data(rng, 3, trial % 2);
    auto parent = random_clique_data(rng, 3, 0);
    const auto e1 = eliminate(0, IndexSet{0, 1, 2}, child, {}, IndexSet{1, 2});
    const auto e2 = eliminate(1, IndexSet{1, 2, 3}, parent,
                              std::vector<QuadraticMessage>{e1.message}, IndexSet{2, 3});

    Matrix Q = Matrix::Zero(4, 4);
    Vector q = Vector::Zero(4);
    Q.topLeftCorner(3, 3) += child.H;
    Q.bottomRightCorner(3, 3) += parent.H;
    q.head(3) += child.r;
    q.tail(3) += parent.r;
    Matrix A = Matrix::Zero(child.A.rows(), 4);
    A.leftCols(3) = child.A;
    const auto ref = oracle::parametric_min_oracle(Q, q, 0.0, A, child.beta, {2, 3});
    CHECK(testing::rel_inf(e2.message.Q, ref.Q) <= 1e-10);
    CHECK(testing::rel_inf(e2.message.q, ref.q) <= 1e-10);
    CHECK(std::abs(e2.message.c - ref.c) <= 1e-10 * std::max(1.0, std::abs(ref.c)));
  }
}

TEST_CASE("parametric oracle edge cases") {
  testing::Rng rng(3);
  const auto d = random_clique_data(rng, 3, 0);
  const auto all = oracle::parametric_min_oracle(d.H, d.r, 0.25, Matrix(0, 3), Vector(0), {0, 1, 2});
  CHECK(testing::rel_inf(all.Q, d.H) <= 1e-15);
  CHECK(all.q == d.r);
  CHECK(all.c == 0.25);
  const auto none = oracle::parametric_min_oracle(d.H, d.r, 0.0, Matrix(0, 3), Vector(0), {});
  const Vector x = d.H.ldlt().solve(-d.r);
  CHECK(none.c == doctest::Approx(0.5 * x.dot(d.H * x) + d.r.dot(x)));
}

TEST_CASE("rank-deficient local equality block is reported") {
  CliqueQpData d{Matrix::Identity(2, 2), vec({0, 0}), mat({{1, 0}, {2, 0}}), vec({1, 2})};
  CHECK_THROWS_AS(eliminate(0, IndexSet{0, 1}, d, {}, IndexSet{1}), InputError);
}

TEST_CASE("singular local block is a numerical error") {
  // Q_zz = 0 with no equalities on z.
  CliqueQpData d{Matrix::Zero(2, 2), vec({1, 0}), Matrix(0, 2), Vector(0)};
  CHECK_THROWS_WITH_AS(eliminate(3, IndexSet{0, 1}, d, {}, IndexSet{1}),
                       doctest::Contains("Lemma 2"), NumericalError);
}

TEST_CASE("well-conditioned but badly scaled blocks are accepted") {
  // [[a, 1], [1, 0]] with a ≫ 1 needs two-sided scaling.
  CliqueQpData d{mat({{1.4e12, 0}, {0, 0}}), vec({0, 0}), mat({{1, 1}}), vec({1})};
  CHECK_NOTHROW(eliminate(0, IndexSet{0, 1}, d, {}, IndexSet{1}));
}

TEST_CASE("identity curvature without constraints gives dx = -r") {
  const Vector r = vec({0.5, -1, 2, 4});
  std::vector<CliqueQpData> data{{Matrix::Identity(4, 4), r, Matrix(0, 4), Vector(0)}};
  const auto t =
      chordal::root_min_height(chordal::mwst_clique_tree(std::vector<IndexSet>{{0, 1, 2, 3}}));
  const auto sol = downward_pass(t, upward_pass(t, data).records);
  CHECK((sol[0].dx + r).lpNorm<Eigen::Infinity>() <= 1e-15);
}
