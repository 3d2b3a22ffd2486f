#include <cmath>

#include "catch_amalgamated.hpp"
#include "sparsefactor/metrics.hpp"

using Catch::Matchers::WithinAbs;
using sfm::Matrix;
using sfm::Vector;

TEST_CASE("orthonormalize leaves orthonormal input alone") {
  srand(1);
  const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Random(5, 3)).householderQ() * Matrix::Identity(5, 3);
  CHECK((sfm::orthonormalize(q).columns - q).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("hand Gram-Schmidt in the plane") {
  Matrix u(2, 2);
  u << 1, 1, 0, 1;
  const auto b = sfm::orthonormalize(u);
  CHECK((b.columns - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("dependent columns are named") {
  Matrix u(3, 2);
  u << 1, 2, 2, 4, 3, 6;
  try {
    sfm::orthonormalize(u);
    FAIL("expected RankDeficient");
  } catch (const sfm::RankDeficient& e) {
    CHECK(e.columns() == std::vector<std::size_t>{1});
    CHECK(std::string(e.what()).find("column 2") != std::string::npos);
  }
  CHECK_THROWS_AS(sfm::orthonormalize(Matrix::Zero(3, 2)), sfm::RankDeficient);
  CHECK_THROWS_AS(sfm::orthonormalize(Matrix(3, 0)), sfm::InvalidArgument);
}

TEST_CASE("orthonormalize preserves the span") {
  srand(2);
  for (int k = 0; k < 10; ++k) {
    const Matrix u = Matrix::Random(8, 3);
    const Matrix h = sfm::orthonormalize(u).columns;
    CHECK((h.transpose() * h - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(sfm::subspace_distance(h, u) <= 1e-7);
  }
}

TEST_CASE("subspace distance closed forms") {
  srand(3);
  const Matrix u = Matrix::Random(6, 2);
  CHECK(sfm::subspace_distance(u, u) <= 1e-7);
  CHECK_THAT(sfm::subspace_distance(Vector::Unit(2, 0), Vector::Unit(2, 1)), WithinAbs(1.0, 1e-15));
  Vector diag(2);
  diag << 1, 1;
  CHECK_THAT(sfm::subspace_distance(diag / std::sqrt(2.0), Vector::Unit(2, 0)), WithinAbs(std::sqrt(0.5), 1e-12));
  CHECK_THAT(sfm::subspace_distance(diag, Vector::Unit(2, 0)), WithinAbs(0.7071067811865476, 1e-12));
}

TEST_CASE("subspace distance is symmetric, bounded and basis invariant") {
  srand(4);
  for (int k = 0; k < 25; ++k) {
    const Matrix a = Matrix::Random(10, 3), b = Matrix::Random(10, 3);
    const Matrix mix = Matrix::Random(3, 3) + 3.0 * Matrix::Identity(3, 3);
    const Matrix rot = Eigen::HouseholderQR<Matrix>(Matrix::Random(3, 3)).householderQ();
    const double d = sfm::subspace_distance(a, b);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK_THAT(sfm::subspace_distance(b, a), WithinAbs(d, 1e-12));
    CHECK_THAT(sfm::subspace_distance(a * mix, b), WithinAbs(d, 1e-10));
    CHECK_THAT(sfm::subspace_distance(a, b * mix), WithinAbs(d, 1e-10));
    CHECK(sfm::subspace_distance(a, a * rot) <= 1e-7);
  }
}

TEST_CASE("subspace distance rejects mismatched shapes and rank deficiency") {
  CHECK_THROWS_AS(sfm::subspace_distance(Matrix::Identity(3, 2), Matrix::Identity(3, 1)), sfm::InvalidArgument);
  CHECK_THROWS_AS(sfm::subspace_distance(Matrix::Identity(3, 2), Matrix::Identity(4, 2)), sfm::InvalidArgument);
  Matrix dup = Matrix::Ones(3, 2);
  CHECK_THROWS_AS(sfm::subspace_distance(dup, Matrix::Identity(3, 2)), sfm::RankDeficient);
}

TEST_CASE("support error counts nonzeros") {
  Matrix truth = Matrix::Zero(4, 2);
  truth(0, 0) = 1;
  truth(1, 0) = 2;
  truth(3, 1) = -1;
  CHECK(sfm::support_error(truth, truth).abs_diff == 0);
  const auto dense = sfm::support_error(Matrix::Ones(4, 2), truth);
  CHECK(dense.m_hat == 8);
  CHECK(dense.m_true == 3);
  CHECK(dense.abs_diff == 5);
  CHECK(sfm::support_error(Matrix::Zero(4, 2), truth).abs_diff == 3);
  CHECK(dense.truth[0] == std::vector<Eigen::Index>{0, 1});
  CHECK_THROWS_AS(sfm::support_error(Matrix::Zero(4, 1), truth), sfm::InvalidArgument);
}

TEST_CASE("alignment undoes swaps and sign flips") {
  srand(5);
  const Matrix truth = Matrix::Random(6, 2);
  Matrix swapped(6, 2);
  swapped << truth.col(1), truth.col(0);
  const auto a = sfm::align_columns(swapped, truth);
  CHECK(a.permutation == std::vector<Eigen::Index>{1, 0});
  CHECK((a.aligned - truth).cwiseAbs().maxCoeff() == 0.0);

  const auto neg = sfm::align_columns(-truth, truth);
  CHECK(neg.signs == std::vector<double>{-1.0, -1.0});
  CHECK((neg.aligned - truth).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("alignment of unrelated columns reports small cosines") {
  const Matrix truth = Matrix::Identity(4, 2);
  Matrix other = Matrix::Zero(4, 2);
  other(2, 0) = 1;
  other(3, 1) = 1;
  const auto a = sfm::align_columns(other, truth);
  for (double c : a.cosines) CHECK(c <= 1e-12);
  CHECK_THROWS_AS(sfm::align_columns(Matrix::Identity(10, 9), Matrix::Identity(10, 9)), sfm::InvalidArgument);
}
