#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "mvtpm/qp.hpp"
#include "mvtpm/rng.hpp"

using namespace mvtpm;

namespace {

StructuredQp random_qp(Index m, std::uint64_t seed) {
    auto eng = seeded_engine(seed);
    const Index n = 4 * m;
    Matrix A(n, n);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) A(i, j) = normal01(eng);
    StructuredQp qp;
    qp.Q = A * A.transpose() / static_cast<double>(n);
    qp.c.resize(n);
    for (Index i = 0; i < n; ++i) qp.c[i] = normal01(eng);
    qp.block = m;
    qp.alpha_cap = uniform_in(eng, 0.5, 4.0);
    qp.pair_cap = uniform_in(eng, 0.5, 4.0);
    return qp;
}

Vector random_point(Index n, std::uint64_t seed, double radius) {
    auto eng = seeded_engine(seed);
    Vector v(n);
    for (Index i = 0; i < n; ++i) v[i] = uniform_in(eng, -radius, radius);
    return v;
}

bool is_feasible(const Vector& tau, const StructuredQp& qp, double tol) {
    const Index m = qp.block;
    for (Index i = 0; i < m; ++i) {
        if (tau[i] < -tol || tau[m + i] < -tol) return false;
        if (tau[i] + tau[m + i] > qp.pair_cap + tol) return false;
    }
    for (Index j = 2 * m; j < 4 * m; ++j)
        if (tau[j] < -tol || tau[j] > qp.alpha_cap + tol) return false;
    return true;
}

}  // namespace

TEST_CASE("project_feasible basic cases") {
    StructuredQp qp;
    qp.block = 2;
    qp.Q = Matrix::Identity(8, 8);
    qp.c = Vector::Zero(8);
    qp.alpha_cap = 3.0;
    qp.pair_cap = 4.0;

    SECTION("interior point is unchanged") {
        Vector p(8);
        p << 1.0, 2.0, 0.5, 0.5, 1.0, 2.0, 0.0, 3.0;
        CHECK((project_feasible(p, qp) - p).cwiseAbs().maxCoeff() == 0.0);
    }
    SECTION("symmetric pair projection onto a+b=cap") {
        Vector p = Vector::Zero(8);
        p[0] = 3.0;
        p[2] = 3.0;  // pair (beta1_0, beta2_0) = (3,3), cap 4
        const Vector out = project_feasible(p, qp);
        CHECK(out[0] == 2.0);
        CHECK(out[2] == 2.0);
    }
    SECTION("alpha clamping") {
        Vector p = Vector::Zero(8);
        p[4] = -1.0;
        p[5] = qp.alpha_cap + 5.0;
        const Vector out = project_feasible(p, qp);
        CHECK(out[4] == 0.0);
        CHECK(out[5] == qp.alpha_cap);
    }
    SECTION("wrong length is rejected") {
        CHECK_THROWS_AS(project_feasible(Vector::Zero(7), qp), std::invalid_argument);
    }
}

TEST_CASE("pair projection matches a dense search oracle") {
    // For random points, the analytic projection must beat every grid sample
    // of the triangle in distance.
    const double cap = 2.5;
    for (std::uint64_t seed : {7, 8, 9, 10}) {
        auto eng = seeded_engine(seed);
        for (int trial = 0; trial < 20; ++trial) {
            const double px = uniform_in(eng, -3.0, 6.0);
            const double py = uniform_in(eng, -3.0, 6.0);
            double a = px, b = py;
            project_pair(a, b, cap);
            REQUIRE(a >= 0.0);
            REQUIRE(b >= 0.0);
            REQUIRE(a + b <= cap + 1e-12);
            const double best = std::hypot(px - a, py - b);
            const int steps = 160;
            for (int i = 0; i <= steps; ++i) {
                for (int j = 0; i + j <= steps; ++j) {
                    const double ga = cap * i / steps;
                    const double gb = cap * j / steps;
                    CHECK(best <= std::hypot(px - ga, py - gb) + 1e-9);
                }
            }
        }
    }
}

TEST_CASE("project_feasible is idempotent and non-expansive") {
    const StructuredQp qp = random_qp(3, 101);
    for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
        const Vector x = random_point(12, seed, 8.0);
        const Vector y = random_point(12, seed + 50, 8.0);
        const Vector px = project_feasible(x, qp);
        CHECK((project_feasible(px, qp) - px).cwiseAbs().maxCoeff() <= 1e-12);
        const Vector py = project_feasible(y, qp);
        CHECK((px - py).norm() <= (x - y).norm() + 1e-12);
    }
}

TEST_CASE("projected gradient solves the identity examples") {
    StructuredQp qp;
    qp.block = 1;
    qp.Q = Matrix::Identity(4, 4);
    qp.c = Vector::Ones(4);
    qp.alpha_cap = 10.0;
    qp.pair_cap = 4.0;

    SECTION("interior optimum") {
        const QpSolution sol = solve_projected_gradient(qp);
        REQUIRE(sol.converged);
        CHECK((sol.tau - Vector::Ones(4)).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK_THAT(sol.objective, Catch::Matchers::WithinAbs(-2.0, 1e-9));
    }
    SECTION("beta optimum on the pair constraint") {
        qp.c << 2.0, 2.0, 0.0, 0.0;
        qp.pair_cap = 2.0;
        const QpSolution sol = solve_projected_gradient(qp);
        REQUIRE(sol.converged);
        CHECK_THAT(sol.tau[0], Catch::Matchers::WithinAbs(1.0, 1e-7));
        CHECK_THAT(sol.tau[1], Catch::Matchers::WithinAbs(1.0, 1e-7));
    }
    SECTION("non-finite input is rejected") {
        qp.c[0] = std::numeric_limits<double>::quiet_NaN();
        CHECK_THROWS_AS(solve_projected_gradient(qp), std::invalid_argument);
    }
}

TEST_CASE("coordinate descent solves the degenerate examples") {
    StructuredQp qp;
    qp.block = 1;
    qp.alpha_cap = 2.5;
    qp.pair_cap = 1.0;

    SECTION("zero quadratic pushes alphas to the cap") {
        qp.Q = Matrix::Zero(4, 4);
        qp.c = Vector::Zero(4);
        qp.c[2] = 1.0;
        qp.c[3] = 1.0;
        const QpSolution sol = solve_coordinate_descent(qp);
        REQUIRE(sol.converged);
        CHECK(sol.tau[2] == qp.alpha_cap);
        CHECK(sol.tau[3] == qp.alpha_cap);
    }
    SECTION("zero linear term stays at the origin") {
        qp.Q = Matrix::Identity(4, 4);
        qp.c = Vector::Zero(4);
        const QpSolution sol = solve_coordinate_descent(qp);
        REQUIRE(sol.converged);
        CHECK(sol.tau.cwiseAbs().maxCoeff() == 0.0);
        CHECK(sol.objective == 0.0);
    }
}

TEST_CASE("solvers agree on random instances") {
    // 8x8 and larger random PSD problems; the two algorithms are fully
    // independent, so matching objectives validate both.
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const StructuredQp qp = random_qp(seed % 2 ? 2 : 3, 1000 + seed);
        const QpSolution pg = solve_projected_gradient(qp, 1e-9, 200000);
        const QpSolution cd = solve_coordinate_descent(qp, 1e-9, 200000);
        REQUIRE(pg.converged);
        REQUIRE(cd.converged);
        CHECK(is_feasible(pg.tau, qp, 1e-10));
        CHECK(is_feasible(cd.tau, qp, 1e-10));
        const double scale = 1.0 + std::abs(pg.objective);
        CHECK(std::abs(pg.objective - cd.objective) <= 1e-6 * scale);
    }
}

TEST_CASE("projected gradient objective is non-increasing") {
    for (std::uint64_t seed : {11, 12, 13}) {
        const StructuredQp qp = random_qp(2, 2000 + seed);
        std::vector<double> trace;
        solve_projected_gradient(qp, 1e-8, 5000, &trace);
        REQUIRE(trace.size() >= 2);
        for (std::size_t i = 1; i < trace.size(); ++i)
            CHECK(trace[i] <= trace[i - 1] + 1e-12 * (1.0 + std::abs(trace[i - 1])));
    }
}

TEST_CASE("spectral_upper_bound brackets known spectra") {
    Matrix d = Matrix::Zero(3, 3);
    d.diagonal() << 1.0, 2.0, 3.0;
    const double bound = spectral_upper_bound(d);
    CHECK(bound >= 3.0);
    CHECK(bound <= 3.03 + 1e-12);

    const double id_bound = spectral_upper_bound(Matrix::Identity(5, 5));
    CHECK(id_bound >= 1.0);
    CHECK(id_bound <= 1.01 + 1e-12);

    CHECK(spectral_upper_bound(Matrix::Zero(4, 4)) == 0.0);

    Matrix bad = Matrix::Identity(2, 2);
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(spectral_upper_bound(bad), std::invalid_argument);
}

TEST_CASE("spectral_upper_bound dominates a dense eigensolver oracle") {
    for (std::uint64_t seed : {201, 202, 203, 204, 205}) {
        auto eng = seeded_engine(seed);
        Matrix A(10, 10);
        for (Index i = 0; i < 10; ++i)
            for (Index j = 0; j < 10; ++j) A(i, j) = normal01(eng);
        const Matrix Q = A * A.transpose();
        Eigen::SelfAdjointEigenSolver<Matrix> eig(Q);
        CHECK(spectral_upper_bound(Q) >= eig.eigenvalues().maxCoeff());
    }
}
