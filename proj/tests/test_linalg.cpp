#include <catch2/catch_amalgamated.hpp>

#include "test_support.hpp"

using namespace fibrelin;

TEST_CASE("lu determinant on hand-checked matrices") {
    Mat J(3, 3);
    // rows: dx3, dx2, dx1 - e*dx2 at the origin (e = 1)
    J(0, 2) = 1.0;
    J(1, 1) = 1.0;
    J(2, 0) = 1.0;
    J(2, 1) = -1.0;
    CHECK(lu_factor(J).det() == Catch::Approx(-1.0).margin(1e-14));

    CHECK(lu_factor(Mat::identity(4)).det() == Catch::Approx(1.0));

    Mat s(2, 2);
    s(0, 0) = 1.0;
    s(0, 1) = 2.0;
    s(1, 0) = 2.0;
    s(1, 1) = 4.0;  // rank 1
    LuFactor f = lu_factor(s);
    CHECK((f.singular || std::fabs(f.det()) < 1e-12));
}

TEST_CASE("lu solve has small residuals on well-conditioned random systems") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 2 + static_cast<int>(rng.gen() % 4);
        Mat A = Mat::identity(n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) A(i, j) += 0.3 * rng.uniform(-1.0, 1.0);
        Vec b(n);
        for (double& v : b) v = rng.uniform(-2.0, 2.0);
        Vec x = lu_factor(A).solve(b);
        Vec rres = vec_sub(mat_vec(A, x), b);
        CHECK(norm_inf(rres) <= 1e-12);
    }
}

TEST_CASE("solving against a singular factorization throws") {
    Mat s(2, 2);
    s(0, 0) = 1.0;
    s(1, 0) = 1.0;
    LuFactor f = lu_factor(s);
    REQUIRE(f.singular);
    CHECK_THROWS_AS(f.solve({1.0, 2.0}), NumericalError);
}

TEST_CASE("symmetric eigenvalues and singular values") {
    Mat d(3, 3);
    d(0, 0) = 3.0;
    d(1, 1) = 1.0;
    d(2, 2) = 2.0;
    Vec ev = sym_eigenvalues(d);
    CHECK(ev[0] == Catch::Approx(1.0));
    CHECK(ev[1] == Catch::Approx(2.0));
    CHECK(ev[2] == Catch::Approx(3.0));

    Mat m(2, 3);  // orthonormal rows
    m(0, 2) = 1.0;
    m(1, 1) = 1.0;
    CHECK(smallest_singular_value(m) == Catch::Approx(1.0));

    Mat r1(2, 3);  // rank 1
    r1(0, 0) = 1.0;
    r1(1, 0) = 1.0;
    CHECK(smallest_singular_value(r1) == Catch::Approx(0.0).margin(1e-12));

    // eigenvalues are rotation invariant: A = Q diag Q^T keeps {1, 4}
    double c = std::cos(0.3), s = std::sin(0.3);
    Mat q(2, 2);
    q(0, 0) = c;
    q(0, 1) = -s;
    q(1, 0) = s;
    q(1, 1) = c;
    Mat diag(2, 2);
    diag(0, 0) = 1.0;
    diag(1, 1) = 4.0;
    Mat a = mat_mul(mat_mul(q, diag), transpose(q));
    Vec ev2 = sym_eigenvalues(a);
    CHECK(ev2[0] == Catch::Approx(1.0));
    CHECK(ev2[1] == Catch::Approx(4.0));
}

TEST_CASE("hcat stacks columns") {
    Mat a(2, 1), b(2, 2);
    a(0, 0) = 1.0;
    a(1, 0) = 2.0;
    b(0, 1) = 3.0;
    Mat c = hcat(a, b);
    CHECK(c.cols == 3);
    CHECK(c(0, 0) == 1.0);
    CHECK(c(0, 2) == 3.0);
    CHECK(c(1, 0) == 2.0);
}
