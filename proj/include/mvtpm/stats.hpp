#pragma once

// Rank-based model comparison over an accuracy matrix: Friedman test,
// Nemenyi post-hoc critical difference, and the pairwise win-tie-loss sign
// test. The matrix may come from this library's benchmark runs or from
// published tables typed into CSV; the arithmetic is the same.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvtpm/csv.hpp"
#include "mvtpm/types.hpp"

namespace mvtpm {

enum class AccuracyUnit { Fraction, Percent };

inline const char* accuracy_unit_name(AccuracyUnit u) {
    return u == AccuracyUnit::Fraction ? "fraction" : "percent";
}

inline AccuracyUnit parse_accuracy_unit(const std::string& name) {
    if (name == "fraction") return AccuracyUnit::Fraction;
    if (name == "percent") return AccuracyUnit::Percent;
    throw std::invalid_argument("unknown accuracy unit: " + name);
}

/// Datasets x models accuracies. The unit is declared, never sniffed.
struct AccuracyMatrix {
    Matrix values;
    std::vector<std::string> datasets;
    std::vector<std::string> models;
    AccuracyUnit unit = AccuracyUnit::Percent;
};

inline void validate_accuracy_matrix(const AccuracyMatrix& acc) {
    require(acc.values.rows() >= 2, "accuracy matrix: need at least 2 datasets");
    require(acc.values.cols() >= 2, "accuracy matrix: need at least 2 models");
    require(static_cast<Index>(acc.datasets.size()) == acc.values.rows(),
            "accuracy matrix: dataset names disagree with rows");
    require(static_cast<Index>(acc.models.size()) == acc.values.cols(),
            "accuracy matrix: model names disagree with columns");
    require(acc.values.allFinite(), "accuracy matrix: non-finite entries");
    const double hi = acc.unit == AccuracyUnit::Percent ? 100.0 : 1.0;
    require(acc.values.minCoeff() >= 0.0 && acc.values.maxCoeff() <= hi + 1e-12,
            "accuracy matrix: entries outside the declared unit range");
}

/// Header row of model names, first column of dataset names.
inline AccuracyMatrix read_accuracy_csv(const std::filesystem::path& path, AccuracyUnit unit) {
    const auto rows = read_csv_rows(path);
    if (rows.size() < 2) throw DataError(path.string() + ": need a header and data rows");
    AccuracyMatrix acc;
    acc.unit = unit;
    const auto& header = rows[0];
    if (header.size() < 3)
        throw DataError(path.string() + ": need at least two model columns");
    for (std::size_t c = 1; c < header.size(); ++c) acc.models.push_back(trim(header[c]));
    acc.values.resize(static_cast<Index>(rows.size() - 1), static_cast<Index>(header.size() - 1));
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw DataError(path.string() + ": ragged row " + std::to_string(r + 1));
        acc.datasets.push_back(trim(rows[r][0]));
        for (std::size_t c = 1; c < rows[r].size(); ++c)
            acc.values(static_cast<Index>(r - 1), static_cast<Index>(c - 1)) =
                parse_double(rows[r][c], path.string() + " row " + std::to_string(r + 1));
    }
    validate_accuracy_matrix(acc);
    return acc;
}

// ---------------------------------------------------------------------------
// Ranks and the Friedman statistics
// ---------------------------------------------------------------------------

/// Average rank per model: higher accuracy gets the lower rank, exactly tied
/// accuracies share the mean of their rank positions.
inline Vector average_ranks(const AccuracyMatrix& acc) {
    validate_accuracy_matrix(acc);
    const Index n = acc.values.rows(), k = acc.values.cols();
    Vector sums = Vector::Zero(k);
    std::vector<Index> order(static_cast<std::size_t>(k));
    for (Index i = 0; i < n; ++i) {
        std::iota(order.begin(), order.end(), Index{0});
        std::sort(order.begin(), order.end(), [&](Index a, Index b) {
            if (acc.values(i, a) != acc.values(i, b)) return acc.values(i, a) > acc.values(i, b);
            return a < b;
        });
        std::size_t pos = 0;
        while (pos < order.size()) {
            std::size_t end = pos + 1;
            while (end < order.size() &&
                   acc.values(i, order[end]) == acc.values(i, order[pos]))
                ++end;
            // positions pos..end-1 share the average 1-based rank
            const double shared =
                0.5 * (static_cast<double>(pos + 1) + static_cast<double>(end));
            for (std::size_t p = pos; p < end; ++p) sums[order[p]] += shared;
            pos = end;
        }
    }
    return sums / static_cast<double>(n);
}

/// chi^2_F = 12N / (k(k+1)) * (sum_j R_j^2 - k(k+1)^2 / 4)
inline double friedman_chi_squared(const Vector& ranks, int n_datasets) {
    const auto k = static_cast<double>(ranks.size());
    require(ranks.size() >= 2, "friedman_chi_squared: need at least 2 models");
    require(n_datasets >= 2, "friedman_chi_squared: need at least 2 datasets");
    require(ranks.allFinite(), "friedman_chi_squared: non-finite ranks");
    const double n = n_datasets;
    return 12.0 * n / (k * (k + 1.0)) *
           (ranks.squaredNorm() - k * (k + 1.0) * (k + 1.0) / 4.0);
}

/// F_F = (N-1) chi^2_F / (N(k-1) - chi^2_F)
inline double friedman_f_statistic(double chi2, int n_datasets, int k_models) {
    require(n_datasets >= 2 && k_models >= 2, "friedman_f_statistic: degenerate sizes");
    const double denom = static_cast<double>(n_datasets) * (k_models - 1) - chi2;
    require(denom > 0.0, "friedman_f_statistic: N(k-1) must exceed chi^2 (saturated statistic)");
    return (n_datasets - 1) * chi2 / denom;
}

/// C.D. = q_alpha sqrt(k(k+1) / (6N))
inline double nemenyi_critical_difference(int k_models, int n_datasets, double q_alpha) {
    require(k_models >= 2 && n_datasets >= 1, "nemenyi: degenerate sizes");
    require(q_alpha >= 0.0, "nemenyi: q_alpha must be nonnegative");
    const double k = k_models;
    return q_alpha * std::sqrt(k * (k + 1.0) / (6.0 * n_datasets));
}

// ---------------------------------------------------------------------------
// Win-tie-loss sign test
// ---------------------------------------------------------------------------

struct WinTieLoss {
    // (row, col) counts of row-model wins/ties/losses against col-model,
    // strict value comparison with no epsilon.
    Eigen::MatrixXi wins, ties, losses;
    double threshold = 0.0;  // significance cut on the win count
    // Wins after the tie-redistribution rule (an odd tie is dropped, the
    // rest split evenly); used only for the significance call.
    Matrix effective_wins;
    std::vector<std::vector<bool>> significant;
};

/// Pairwise sign test. The significance threshold reproduces the reference
/// arithmetic for N datasets: N/2 + 1.96 sqrt(N).
inline WinTieLoss win_tie_loss_table(const AccuracyMatrix& acc) {
    validate_accuracy_matrix(acc);
    const Index n = acc.values.rows(), k = acc.values.cols();
    WinTieLoss w;
    w.wins = Eigen::MatrixXi::Zero(k, k);
    w.ties = Eigen::MatrixXi::Zero(k, k);
    w.losses = Eigen::MatrixXi::Zero(k, k);
    w.effective_wins = Matrix::Zero(k, k);
    w.significant.assign(static_cast<std::size_t>(k),
                         std::vector<bool>(static_cast<std::size_t>(k), false));
    w.threshold = 0.5 * static_cast<double>(n) + 1.96 * std::sqrt(static_cast<double>(n));
    for (Index a = 0; a < k; ++a) {
        for (Index b = 0; b < k; ++b) {
            if (a == b) continue;
            int wins = 0, ties = 0, losses = 0;
            for (Index i = 0; i < n; ++i) {
                if (acc.values(i, a) > acc.values(i, b))
                    ++wins;
                else if (acc.values(i, a) < acc.values(i, b))
                    ++losses;
                else
                    ++ties;
            }
            w.wins(a, b) = wins;
            w.ties(a, b) = ties;
            w.losses(a, b) = losses;
            const int shared = (ties % 2 == 0) ? ties / 2 : (ties - 1) / 2;
            w.effective_wins(a, b) = wins + shared;
            w.significant[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
                w.effective_wins(a, b) >= w.threshold;
        }
    }
    return w;
}

// ---------------------------------------------------------------------------
// Report (schema mvtpm-stats/1)
// ---------------------------------------------------------------------------

inline constexpr const char* kStatsSchema = "mvtpm-stats/1";

struct StatsReport {
    std::vector<std::string> models;
    int n_datasets = 0;
    Vector ranks;
    double chi2 = 0.0;
    double f_statistic = 0.0;
    double q_alpha = 0.0;
    double critical_difference = 0.0;
    std::optional<WinTieLoss> wtl;  // absent when built from bare ranks
};

inline StatsReport stats_from_matrix(const AccuracyMatrix& acc, double q_alpha) {
    StatsReport r;
    r.models = acc.models;
    r.n_datasets = static_cast<int>(acc.values.rows());
    r.ranks = average_ranks(acc);
    r.chi2 = friedman_chi_squared(r.ranks, r.n_datasets);
    r.f_statistic = friedman_f_statistic(r.chi2, r.n_datasets, static_cast<int>(r.ranks.size()));
    r.q_alpha = q_alpha;
    r.critical_difference =
        nemenyi_critical_difference(static_cast<int>(r.ranks.size()), r.n_datasets, q_alpha);
    r.wtl = win_tie_loss_table(acc);
    return r;
}

/// Same pipeline when only published average ranks are available.
inline StatsReport stats_from_ranks(const Vector& ranks, int n_datasets, double q_alpha,
                                    const std::vector<std::string>& models = {}) {
    StatsReport r;
    r.models = models;
    if (r.models.empty())
        for (Index j = 0; j < ranks.size(); ++j)
            r.models.push_back("model" + std::to_string(j + 1));
    r.n_datasets = n_datasets;
    r.ranks = ranks;
    r.chi2 = friedman_chi_squared(ranks, n_datasets);
    r.f_statistic = friedman_f_statistic(r.chi2, n_datasets, static_cast<int>(ranks.size()));
    r.q_alpha = q_alpha;
    r.critical_difference =
        nemenyi_critical_difference(static_cast<int>(ranks.size()), n_datasets, q_alpha);
    return r;
}

inline nlohmann::json stats_report_json(const StatsReport& r) {
    nlohmann::json j;
    j["schema"] = kStatsSchema;
    j["models"] = r.models;
    j["n_datasets"] = r.n_datasets;
    j["average_ranks"] = std::vector<double>(r.ranks.begin(), r.ranks.end());
    j["friedman_chi2"] = r.chi2;
    j["friedman_f"] = r.f_statistic;
    j["q_alpha"] = r.q_alpha;
    j["nemenyi_cd"] = r.critical_difference;
    if (r.wtl) {
        nlohmann::json pairs = nlohmann::json::array();
        const Index k = r.wtl->wins.rows();
        for (Index a = 0; a < k; ++a) {
            for (Index b = 0; b < k; ++b) {
                if (a == b) continue;
                pairs.push_back({{"model", r.models[static_cast<std::size_t>(a)]},
                                 {"against", r.models[static_cast<std::size_t>(b)]},
                                 {"wins", r.wtl->wins(a, b)},
                                 {"ties", r.wtl->ties(a, b)},
                                 {"losses", r.wtl->losses(a, b)},
                                 {"effective_wins", r.wtl->effective_wins(a, b)},
                                 {"significant",
                                  static_cast<bool>(r.wtl->significant[static_cast<std::size_t>(
                                      a)][static_cast<std::size_t>(b)])}});
            }
        }
        j["win_tie_loss"] = {{"threshold", r.wtl->threshold}, {"pairs", std::move(pairs)}};
    }
    return j;
}

}  // namespace mvtpm
