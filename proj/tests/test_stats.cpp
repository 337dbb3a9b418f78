#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>

#include "mvtpm/rng.hpp"
#include "mvtpm/stats.hpp"

using namespace mvtpm;

namespace {

AccuracyMatrix toy_matrix(const Matrix& values) {
    AccuracyMatrix acc;
    acc.values = values;
    acc.unit = AccuracyUnit::Fraction;
    for (Index i = 0; i < values.rows(); ++i) acc.datasets.push_back("d" + std::to_string(i));
    for (Index j = 0; j < values.cols(); ++j) acc.models.push_back("m" + std::to_string(j));
    return acc;
}

// Reference ranks: per-row brute-force count of strictly better columns
// plus half the ties (average-rank convention as an independent formula).
Vector rank_oracle(const Matrix& values) {
    Vector sums = Vector::Zero(values.cols());
    for (Index i = 0; i < values.rows(); ++i) {
        for (Index j = 0; j < values.cols(); ++j) {
            double better = 0, tied = 0;
            for (Index o = 0; o < values.cols(); ++o) {
                if (values(i, o) > values(i, j)) better += 1;
                if (o != j && values(i, o) == values(i, j)) tied += 1;
            }
            sums[j] += 1.0 + better + tied / 2.0;
        }
    }
    return sums / static_cast<double>(values.rows());
}

}  // namespace

TEST_CASE("average_ranks with full ties gives the midpoint rank") {
    Matrix v(3, 4);
    v.setConstant(0.5);
    const Vector r = average_ranks(toy_matrix(v));
    for (Index j = 0; j < 4; ++j) CHECK_THAT(r[j], Catch::Matchers::WithinAbs(2.5, 1e-12));
}

TEST_CASE("average_ranks hand example") {
    Matrix v(2, 2);
    v << 0.9, 0.8, 0.7, 0.8;
    const Vector r = average_ranks(toy_matrix(v));
    CHECK_THAT(r[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
    CHECK_THAT(r[1], Catch::Matchers::WithinAbs(1.5, 1e-12));
}

TEST_CASE("ranks sum to k(k+1)/2 per dataset and match the brute-force oracle") {
    auto eng = seeded_engine(5);
    Matrix v(7, 5);
    for (Index i = 0; i < v.rows(); ++i)
        for (Index j = 0; j < v.cols(); ++j)
            v(i, j) = std::round(uniform01(eng) * 20.0) / 20.0;  // force some ties
    const AccuracyMatrix acc = toy_matrix(v);
    const Vector r = average_ranks(acc);
    CHECK_THAT(r.sum() * static_cast<double>(v.rows()),
               Catch::Matchers::WithinAbs(v.rows() * 5.0 * 6.0 / 2.0, 1e-9));
    const Vector oracle = rank_oracle(v);
    CHECK((r - oracle).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("friedman chi-squared reproduces the published UCI value") {
    Vector r(6);
    r << 3.25, 4.29, 4.62, 3.89, 2.87, 2.07;
    const double chi2 = friedman_chi_squared(r, 55);
    CHECK_THAT(chi2, Catch::Matchers::WithinAbs(70.1627, 0.02));
    const double ff = friedman_f_statistic(chi2, 55, 6);
    CHECK_THAT(ff, Catch::Matchers::WithinAbs(18.4965, 0.001));
}

TEST_CASE("friedman chi-squared is zero for equal ranks and permutation invariant") {
    Vector equal = Vector::Constant(6, 3.5);
    CHECK_THAT(friedman_chi_squared(equal, 20), Catch::Matchers::WithinAbs(0.0, 1e-12));

    Vector r(5);
    r << 1.2, 4.8, 2.6, 3.4, 3.0;
    Vector p = r;
    std::reverse(p.begin(), p.end());
    CHECK_THAT(friedman_chi_squared(r, 12),
               Catch::Matchers::WithinAbs(friedman_chi_squared(p, 12), 1e-12));
}

TEST_CASE("friedman chi-squared matches a long-double re-evaluation") {
    auto eng = seeded_engine(17);
    for (int trial = 0; trial < 10; ++trial) {
        const int k = 3 + static_cast<int>(uniform_below(eng, 5));
        const int n = 5 + static_cast<int>(uniform_below(eng, 40));
        Vector r(k);
        for (int j = 0; j < k; ++j) r[j] = uniform_in(eng, 1.0, k);
        long double sum_sq = 0.0L;
        for (int j = 0; j < k; ++j)
            sum_sq += static_cast<long double>(r[j]) * static_cast<long double>(r[j]);
        const long double kk = k;
        const long double expected =
            12.0L * n / (kk * (kk + 1.0L)) * (sum_sq - kk * (kk + 1.0L) * (kk + 1.0L) / 4.0L);
        CHECK_THAT(friedman_chi_squared(r, n),
                   Catch::Matchers::WithinAbs(static_cast<double>(expected),
                                              1e-10 * (1.0 + std::abs(static_cast<double>(expected)))));
    }
}

TEST_CASE("friedman F statistic reproduces the published values") {
    CHECK_THAT(friedman_f_statistic(70.1627, 55, 6),
               Catch::Matchers::WithinAbs(18.4965, 0.001));
    CHECK_THAT(friedman_f_statistic(50.81, 45, 6),
               Catch::Matchers::WithinAbs(12.8345, 0.001));
    CHECK(friedman_f_statistic(0.0, 20, 4) == 0.0);
    CHECK_THROWS_AS(friedman_f_statistic(100.0, 10, 6), std::invalid_argument);
}

TEST_CASE("nemenyi critical difference reproduces the published values") {
    CHECK_THAT(nemenyi_critical_difference(6, 55, 2.850),
               Catch::Matchers::WithinAbs(1.0167, 0.0005));
    CHECK_THAT(nemenyi_critical_difference(6, 45, 2.850),
               Catch::Matchers::WithinAbs(1.1240, 0.0005));
    CHECK(nemenyi_critical_difference(6, 55, 0.0) == 0.0);
}

TEST_CASE("win-tie-loss counts, threshold, and symmetry") {
    Matrix v(5, 3);
    v << 0.9, 0.8, 0.8,
         0.9, 0.7, 0.7,
         0.9, 0.6, 0.6,
         0.9, 0.5, 0.5,
         0.9, 0.4, 0.4;
    AccuracyMatrix acc = toy_matrix(v);
    const WinTieLoss w = win_tie_loss_table(acc);
    CHECK(w.wins(0, 1) == 5);
    CHECK(w.ties(0, 1) == 0);
    CHECK(w.losses(0, 1) == 0);
    // identical columns: all ties, evenly split for significance
    CHECK(w.wins(1, 2) == 0);
    CHECK(w.ties(1, 2) == 5);
    CHECK(w.effective_wins(1, 2) == 2.0);  // odd tie dropped, remainder split

    for (Index a = 0; a < 3; ++a)
        for (Index b = 0; b < 3; ++b)
            if (a != b) {
                CHECK(w.wins(a, b) == w.losses(b, a));
                CHECK(w.ties(a, b) == w.ties(b, a));
            }
}

TEST_CASE("win-tie-loss threshold reproduces the published N=55 cut") {
    Matrix v = Matrix::Constant(55, 2, 0.5);
    for (Index i = 0; i < 55; ++i) v(i, 0) = 0.5 + 0.001 * static_cast<double>(i % 7);
    AccuracyMatrix acc = toy_matrix(v);
    const WinTieLoss w = win_tie_loss_table(acc);
    CHECK_THAT(w.threshold, Catch::Matchers::WithinAbs(42.035, 0.001));
}

TEST_CASE("accuracy matrix CSV round trip and validation") {
    namespace fs = std::filesystem;
    const fs::path dir =
        fs::temp_directory_path() /
        ("mvtpm_stats_" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);

    {
        std::ofstream out(dir / "acc.csv");
        out << "dataset,A,B\n";
        out << "iris,95.5,90.25\n";
        out << "wine,88,88\n";
    }
    const AccuracyMatrix acc = read_accuracy_csv(dir / "acc.csv", AccuracyUnit::Percent);
    CHECK(acc.models == std::vector<std::string>{"A", "B"});
    CHECK(acc.datasets == std::vector<std::string>{"iris", "wine"});
    CHECK(acc.values(0, 1) == 90.25);

    {
        std::ofstream out(dir / "bad.csv");
        out << "dataset,A,B\n";
        out << "iris,95.5\n";
    }
    CHECK_THROWS_AS(read_accuracy_csv(dir / "bad.csv", AccuracyUnit::Percent), DataError);

    // fraction-unit range check
    {
        std::ofstream out(dir / "toolarge.csv");
        out << "dataset,A,B\n";
        out << "iris,95.5,90.0\n";
        out << "wine,88,88\n";
    }
    CHECK_THROWS_AS(read_accuracy_csv(dir / "toolarge.csv", AccuracyUnit::Fraction),
                    std::invalid_argument);

    std::error_code ec;
    fs::remove_all(dir, ec);
}

TEST_CASE("stats report wires the pipeline together") {
    Matrix v(4, 3);
    v << 0.9, 0.5, 0.7,
         0.8, 0.9, 0.6,
         0.7, 0.55, 0.95,
         0.85, 0.45, 0.2;
    const StatsReport rep = stats_from_matrix(toy_matrix(v), 2.850);
    CHECK(rep.n_datasets == 4);
    CHECK(rep.ranks.size() == 3);
    CHECK(rep.wtl.has_value());
    const auto j = stats_report_json(rep);
    CHECK(j.at("schema") == "mvtpm-stats/1");
    CHECK(j.at("win_tie_loss").at("pairs").size() == 6);
}
