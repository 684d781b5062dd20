#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include "kktscale/matrix_market.hpp"
#include "kktscale/sparse_matrix.hpp"
#include "oracles.hpp"

using namespace kktscale;

namespace {

SymSparseMatrix ones2() { return {2, {{0, 0, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}}}; }

std::multiset<std::tuple<Index, Index, double>> entry_set(const SymSparseMatrix& a) {
    std::multiset<std::tuple<Index, Index, double>> s;
    a.for_each([&](Index i, Index j, double v) { s.insert({i, j, v}); });
    return s;
}

}  // namespace

TEST(SymSparseMatrix, SumsDuplicatesAndKeepsExplicitZeros) {
    SymSparseMatrix a(3, {{1, 0, 2.0}, {1, 0, 3.0}, {2, 2, 0.0}});
    EXPECT_EQ(a.nnz(), 2u);
    EXPECT_DOUBLE_EQ(a.coeff(1, 0), 5.0);
    EXPECT_DOUBLE_EQ(a.coeff(0, 1), 5.0);
    EXPECT_EQ(a.entries().back().row, 2);
}

TEST(SymSparseMatrix, RejectsUpperOutOfRangeAndNonFinite) {
    EXPECT_THROW(SymSparseMatrix(2, {{0, 1, 1.0}}), std::invalid_argument);
    EXPECT_THROW(SymSparseMatrix(2, {{2, 0, 1.0}}), std::out_of_range);
    EXPECT_THROW(SymSparseMatrix(2, {{1, 1, std::nan("")}}), std::invalid_argument);
    EXPECT_THROW(SymSparseMatrix(2, {{1, 1, INFINITY}}), std::invalid_argument);
}

TEST(ScalingVector, RejectsNonPositive) {
    EXPECT_THROW(ScalingVector({1.0, 0.0}), std::invalid_argument);
    EXPECT_THROW(ScalingVector({-1.0}), std::invalid_argument);
    EXPECT_THROW(ScalingVector({INFINITY}), std::invalid_argument);
}

TEST(ApplySymmetricScaling, IdentityLeavesMatrixUnchanged) {
    const auto a = ones2();
    EXPECT_EQ(apply_symmetric_scaling(a, ScalingVector::identity(2)), a);
}

TEST(ApplySymmetricScaling, HandExample) {
    const auto b = apply_symmetric_scaling(ones2(), ScalingVector({2.0, 1.0}));
    EXPECT_DOUBLE_EQ(b.coeff(0, 0), 4.0);
    EXPECT_DOUBLE_EQ(b.coeff(1, 0), 2.0);
    EXPECT_DOUBLE_EQ(b.coeff(1, 1), 1.0);
}

TEST(ApplySymmetricScaling, RoundTripWithReciprocal) {
    std::mt19937 rng(3);
    const auto a = oracle::random_symmetric(12, 0.4, 3.0, rng);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    std::vector<double> s(12);
    for (double& v : s) v = std::pow(10.0, u(rng));
    const ScalingVector sv(s);
    const auto back = apply_symmetric_scaling(apply_symmetric_scaling(a, sv), sv.reciprocal());
    a.for_each([&](Index i, Index j, double v) { EXPECT_NEAR(back.coeff(i, j), v, 1e-15 * 4 * std::abs(v)); });
}

TEST(ApplySymmetricScaling, PreservesInertia) {
    std::mt19937 rng(11);
    for (int t = 0; t < 20; ++t) {
        const Index n = 2 + t % 19;
        const auto a = oracle::random_indefinite(n, 0.3, rng);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        std::vector<double> s(n);
        for (double& v : s) v = std::pow(10.0, u(rng));
        const auto before = oracle::eigen_inertia(oracle::dense(a));
        const auto after = oracle::eigen_inertia(oracle::dense(apply_symmetric_scaling(a, ScalingVector(s))), 1e-13);
        EXPECT_EQ(before.positive, after.positive);
        EXPECT_EQ(before.negative, after.negative);
    }
}

TEST(ApplySymmetricScaling, DimensionMismatch) {
    EXPECT_THROW(apply_symmetric_scaling(ones2(), ScalingVector::identity(3)), DimensionError);
}

TEST(Matvec, Examples) {
    const auto id = SymSparseMatrix::identity(3);
    EXPECT_EQ(matvec(id, std::vector<double>{1, 2, 3}), (DenseVector{1, 2, 3}));
    const SymSparseMatrix off(2, {{1, 0, 1.0}});
    EXPECT_EQ(matvec(off, std::vector<double>{1, 0}), (DenseVector{0, 1}));
    const SymSparseMatrix a(2, {{0, 0, 4.0}, {1, 0, 2.0}, {1, 1, 1.0}});
    EXPECT_EQ(matvec(a, std::vector<double>{1, 1}), (DenseVector{6, 3}));
    EXPECT_THROW(matvec(a, std::vector<double>{1}), DimensionError);
}

TEST(Matvec, AgreesWithDenseProduct) {
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (Index n : {1, 7, 23, 50}) {
        const auto a = oracle::random_symmetric(n, 0.2, 2.0, rng);
        std::vector<double> x(n);
        for (double& v : x) v = u(rng);
        const auto y = matvec(a, x);
        const Eigen::VectorXd ref = oracle::dense(a) * oracle::to_eigen(x);
        const double scale = (oracle::dense(a).cwiseAbs() * oracle::to_eigen(x).cwiseAbs()).maxCoeff();
        for (Index i = 0; i < n; ++i) EXPECT_NEAR(y[i], ref(i), 1e-14 * scale);
    }
}

TEST(ScaleRhs, ComponentwiseAndIdentity) {
    const std::vector<double> b{1.0, 1.0};
    EXPECT_EQ(scale_rhs(ScalingVector::identity(2), b), b);
    EXPECT_EQ(scale_rhs(ScalingVector({2.0, 3.0}), b), (DenseVector{2.0, 3.0}));
    EXPECT_THROW(scale_rhs(ScalingVector({2.0}), b), DimensionError);
}

TEST(ScaleRhs, ScaledSolveMatchesDirectSolve) {
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> u(-1.0, 1.0), ex(-2.0, 2.0);
    for (int t = 0; t < 10; ++t) {
        const auto a = oracle::random_indefinite(10, 0.5, rng);
        std::vector<double> b(10), s(10);
        for (double& v : b) v = u(rng);
        for (double& v : s) v = std::pow(10.0, ex(rng));
        const ScalingVector sv(s);
        const Eigen::VectorXd y = oracle::dense(a).fullPivLu().solve(oracle::to_eigen(b));
        const auto ahat = oracle::dense(apply_symmetric_scaling(a, sv));
        const auto bhat = scale_rhs(sv, b);
        const Eigen::VectorXd z = ahat.fullPivLu().solve(oracle::to_eigen(bhat));
        const auto y2 = unscale_solution(sv, std::vector<double>(z.data(), z.data() + z.size()));
        EXPECT_LE((oracle::to_eigen(y2) - y).cwiseAbs().maxCoeff(), 1e-8 * y.cwiseAbs().maxCoeff());
    }
}

TEST(MatrixMarket, ReadsSymmetricCoordinate) {
    std::istringstream in("%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 1.0\n2 1 3.0\n");
    const auto a = read_matrix_market(in);
    EXPECT_EQ(a.size(), 2);
    EXPECT_EQ(a.nnz(), 2u);
    EXPECT_DOUBLE_EQ(a.coeff(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(a.coeff(1, 0), 3.0);
}

TEST(MatrixMarket, RejectsComplexField) {
    std::istringstream in("%%MatrixMarket matrix coordinate complex symmetric\n1 1 1\n1 1 1.0 0.0\n");
    try {
        read_matrix_market(in);
        FAIL() << "expected an error";
    } catch (const MatrixMarketError& e) {
        EXPECT_NE(std::string(e.what()).find("unsupported field"), std::string::npos);
    }
}

TEST(MatrixMarket, GeneralWithMirroredEntries) {
    std::istringstream in("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.0\n2 1 3.0\n");
    const auto a = read_matrix_market(in);
    EXPECT_EQ(a.nnz(), 1u);
    EXPECT_DOUBLE_EQ(a.coeff(1, 0), 3.0);
    EXPECT_DOUBLE_EQ(a.coeff(0, 0), 0.0);
}

TEST(MatrixMarket, GeneralInconsistentMirrorIsAnError) {
    std::istringstream in("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 2 3.0\n2 1 3.5\n");
    EXPECT_THROW(read_matrix_market(in), MatrixMarketError);
    std::istringstream missing("%%MatrixMarket matrix coordinate real general\n2 2 1\n1 2 3.0\n");
    EXPECT_THROW(read_matrix_market(missing), MatrixMarketError);
}

TEST(MatrixMarket, MalformedInputs) {
    for (const char* text : {"%%MatrixMarket matrix array real symmetric\n2 2\n1\n2\n3\n",
                             "%%MatrixMarket matrix coordinate real symmetric\n2 3 1\n1 1 1.0\n",
                             "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 1.0\n",
                             "%%MatrixMarket matrix coordinate real symmetric\n2 2 1\n1 1 nan\n",
                             "not a header\n1 1 1\n1 1 1\n"}) {
        std::istringstream in(text);
        EXPECT_THROW(read_matrix_market(in), MatrixMarketError) << text;
    }
}

TEST(MatrixMarket, WriteLoadRoundTrip) {
    std::mt19937 rng(23);
    const auto a = oracle::random_symmetric(15, 0.3, 8.0, rng, true);
    std::stringstream buf;
    write_matrix_market(buf, a);
    EXPECT_EQ(buf.str().rfind("%%MatrixMarket matrix coordinate real symmetric", 0), 0u);
    const auto b = read_matrix_market(buf);
    EXPECT_EQ(entry_set(a), entry_set(b));
    std::stringstream buf2;
    write_matrix_market(buf2, b);
    EXPECT_EQ(buf.str(), buf2.str());
}
