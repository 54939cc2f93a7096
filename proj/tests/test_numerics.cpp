#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "labcvar/numerics.hpp"
#include "labcvar/rng.hpp"

using labcvar::Matrix;

TEST_CASE("matrix storage is row-major with correct shape accessors") {
    Matrix m = Matrix::from_rows({{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
    CHECK(m.rows() == 2);
    CHECK(m.cols() == 3);
    CHECK(m(0, 0) == 1.0);
    CHECK(m(1, 2) == 6.0);
    auto row = m.row(1);
    CHECK(row.size() == 3);
    CHECK(row[0] == 4.0);
}

TEST_CASE("matmul matches a hand-computed product") {
    Matrix a = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    Matrix b = Matrix::from_rows({{5.0, 6.0}, {7.0, 8.0}});
    Matrix c = labcvar::matmul(a, b);
    CHECK(c(0, 0) == doctest::Approx(19.0));
    CHECK(c(0, 1) == doctest::Approx(22.0));
    CHECK(c(1, 0) == doctest::Approx(43.0));
    CHECK(c(1, 1) == doctest::Approx(50.0));
}

TEST_CASE("matmul rejects mismatched shapes") {
    Matrix a(2, 3), b(2, 2);
    CHECK_THROWS_AS(labcvar::matmul(a, b), std::invalid_argument);
}

TEST_CASE("matmul against identity and transpose round-trip") {
    labcvar::Rng rng(7);
    Matrix a(4, 5);
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) a(i, j) = rng.normal();
    Matrix ai = labcvar::matmul(a, labcvar::identity(5));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) CHECK(ai(i, j) == doctest::Approx(a(i, j)));
    Matrix att = labcvar::transpose(labcvar::transpose(a));
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) CHECK(att(i, j) == a(i, j));
}

TEST_CASE("log_sum_exp is shift-invariant and exact on a known case") {
    // log(e^0 + e^0) = log 2
    std::vector<double> two_zeros{0.0, 0.0};
    CHECK(labcvar::log_sum_exp(two_zeros) == doctest::Approx(std::log(2.0)));

    std::vector<double> v{1.0, 2.0, 3.0};
    const double base = labcvar::log_sum_exp(v);
    for (double& x : v) x += 1000.0; // would overflow a naive implementation
    CHECK(labcvar::log_sum_exp(v) == doctest::Approx(base + 1000.0));

    std::vector<double> huge{-1e308, -1e308};
    CHECK(std::isfinite(labcvar::log_sum_exp(huge)));
}

TEST_CASE("log_sum_exp rejects empty and non-finite input") {
    std::vector<double> empty;
    CHECK_THROWS_AS(labcvar::log_sum_exp(empty), std::invalid_argument);
    std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(labcvar::log_sum_exp(bad), std::invalid_argument);
}

TEST_CASE("softmax rows sum to one and preserve order") {
    std::vector<double> v{0.5, -1.0, 3.0};
    std::vector<double> p = labcvar::softmax(v);
    double sum = 0.0;
    for (double x : p) {
        CHECK(x > 0.0);
        sum += x;
    }
    CHECK(sum == doctest::Approx(1.0));
    CHECK(p[2] > p[0]);
    CHECK(p[0] > p[1]);

    // Uniform logits give the uniform distribution exactly.
    std::vector<double> u{7.0, 7.0, 7.0, 7.0};
    for (double x : labcvar::softmax(u)) CHECK(x == doctest::Approx(0.25));
}

TEST_CASE("all_finite detects NaN and infinity") {
    Matrix m(2, 2);
    CHECK(m.all_finite());
    m(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_FALSE(m.all_finite());
    m(1, 1) = std::nan("");
    CHECK_FALSE(m.all_finite());
}
