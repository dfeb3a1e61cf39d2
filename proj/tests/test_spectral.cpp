#include "q3r/spectral.hpp"

#include "q3r/errors.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace q3r;

namespace {

Matrix low_rank(Index d1, Index d2, Index r, std::mt19937_64& rng) {
    return randn(d1, r, rng) * randn(r, d2, rng);
}

} // namespace

TEST_CASE("svd_truncated reconstructs and keeps orthonormal factors") {
    std::mt19937_64 rng(11);
    const Matrix w = randn(7, 5, rng);
    const SvdResult full = svd_truncated(w, 5);

    CHECK((full.u * full.s.asDiagonal() * full.v.transpose() - w).norm() <
          1e-12 * w.norm());
    CHECK((full.u.transpose() * full.u - Matrix::Identity(5, 5)).norm() < 1e-12);
    CHECK((full.v.transpose() * full.v - Matrix::Identity(5, 5)).norm() < 1e-12);
    for (Index i = 1; i < full.s.size(); ++i)
        CHECK(full.s[i - 1] >= full.s[i]);
    CHECK(full.frob_sq == doctest::Approx(w.squaredNorm()).epsilon(1e-14));

    const SvdResult top = svd_truncated(w, 2);
    CHECK(top.u.cols() == 2);
    CHECK(top.s.size() == 2);
    CHECK(top.v.cols() == 2);
    CHECK(top.s[0] == doctest::Approx(full.s[0]).epsilon(1e-12));
    CHECK(top.frob_sq == doctest::Approx(w.squaredNorm()).epsilon(1e-14));

    const SvdResult clamped = svd_truncated(w, 99);
    CHECK(clamped.s.size() == 5);
}

TEST_CASE("svd_truncated reconstruction error at full rank is tiny") {
    std::mt19937_64 rng(12);
    const Matrix w = randn(9, 6, rng);
    const SvdResult svd = svd_truncated(w, 6);
    CHECK((svd.u * svd.s.asDiagonal() * svd.v.transpose() - w).norm() < 1e-12 * w.norm());
}

TEST_CASE("singular values agree with the Gram-matrix oracle") {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        const Index d1 = 2 + static_cast<Index>(rng() % 9);
        const Index d2 = 2 + static_cast<Index>(rng() % 9);
        Matrix w;
        if (trial % 3 == 0)
            w = low_rank(d1, d2, 1 + std::min(d1, d2) / 2, rng);
        else
            w = randn(d1, d2, rng);

        const Vector lib = singular_values(w);
        const Vector ref = oracle::gram_singular_values(w);
        REQUIRE(lib.size() == ref.size());
        const double tol = 1e-7 * std::max(1.0, ref[0]);
        for (Index i = 0; i < lib.size(); ++i)
            CHECK(std::abs(lib[i] - ref[i]) < tol);
    }
}

TEST_CASE("svd_truncated input validation") {
    CHECK_THROWS_AS(svd_truncated(Matrix(0, 3), 1), ConfigError);
    CHECK_THROWS_WITH(svd_truncated(Matrix(0, 3), 1), "empty matrix");
    CHECK_THROWS_AS(svd_truncated(Matrix::Ones(2, 2), 0), ConfigError);

    Matrix bad = Matrix::Ones(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(svd_truncated(bad, 1), NumericError);
}

TEST_CASE("f_eps pinned values and branch behavior") {
    CHECK(f_eps(1.0, 2.0) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(f_eps(2.0, 2.0) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(f_eps(std::exp(1.0), 1.0) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(f_eps(0.0, 1.0) == 0.0);

    // both branches meet at the seam
    const double eps = 0.37;
    CHECK(f_eps(eps, eps) == doctest::Approx(0.5 * eps * eps).epsilon(1e-15));
    CHECK(f_eps(std::nextafter(eps, 0.0), eps) ==
          doctest::Approx(0.5 * eps * eps).epsilon(1e-12));

    CHECK_THROWS_AS(f_eps(1.0, 0.0), ConfigError);
    CHECK_THROWS_AS(f_eps(-1.0, 1.0), ConfigError);
}

TEST_CASE("f_eps seam is C1: one-sided difference quotients match") {
    const double eps = 0.8;
    const double h = 1e-7;
    const double up = (f_eps(eps + h, eps) - f_eps(eps, eps)) / h;
    const double down = (f_eps(eps, eps) - f_eps(eps - h, eps)) / h;
    CHECK(std::abs(up - eps) < 1e-6);
    CHECK(std::abs(down - eps) < 1e-6);
}

TEST_CASE("F_eps pinned values") {
    CHECK(F_eps(Matrix::Identity(3, 3), 2.0) == doctest::Approx(1.5).epsilon(1e-15));

    Matrix w = Matrix::Zero(2, 2);
    w(0, 0) = 4.0;
    w(1, 1) = 0.5;
    CHECK(F_eps(w, 1.0) ==
          doctest::Approx(std::log(4.0) + 0.5 + 0.125).epsilon(1e-14));
}

TEST_CASE("F_eps collapses to half the squared norm below the smoothing width") {
    std::mt19937_64 rng(17);
    const Matrix w = randn(5, 4, rng);
    const double eps = singular_values(w)[0] * 2.0;
    CHECK(F_eps(w, eps) == doctest::Approx(0.5 * w.squaredNorm()).epsilon(1e-13));
}

TEST_CASE("grad_F_eps_oracle pinned value") {
    Matrix w = Matrix::Zero(2, 2);
    w(0, 0) = 4.0;
    w(1, 1) = 0.5;
    const Matrix g = grad_F_eps_oracle(w, 1.0);
    CHECK(std::abs(g(0, 0) - 0.25) < 1e-14);
    CHECK(std::abs(g(1, 1) - 0.5) < 1e-14);
    CHECK(std::abs(g(0, 1)) < 1e-14);
    CHECK(std::abs(g(1, 0)) < 1e-14);
}

TEST_CASE("grad_F_eps_oracle matches finite differences") {
    std::mt19937_64 rng(19);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix w = randn(5, 4, rng);
        const double eps = 0.3 + 0.4 * static_cast<double>(trial);
        const Matrix g = grad_F_eps_oracle(w, eps);
        const Matrix fd = oracle::fd_grad(
            [eps](const Matrix& x) { return F_eps(x, eps); }, w, 1e-5);
        CHECK((g - fd).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("grad_F_eps_oracle is 1-Lipschitz on samples") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix a = randn(6, 5, rng);
        const Matrix b = a + 0.1 * randn(6, 5, rng);
        const double eps = 0.2 + 0.1 * static_cast<double>(trial % 7);
        const double num = (grad_F_eps_oracle(a, eps) - grad_F_eps_oracle(b, eps)).norm();
        CHECK(num <= (a - b).norm() * (1.0 + 1e-9));
    }
}
