#pragma once

// Dataset ingestion, deterministic splits and folds, and the synthetic
// two-view generators. A manifest describes where a dataset's files live and
// how to binarize its labels; when no view-B file is given, view B is
// synthesized by PCA on (scaled) view A.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mvtpm/csv.hpp"
#include "mvtpm/preprocess.hpp"
#include "mvtpm/rng.hpp"
#include "mvtpm/types.hpp"

namespace mvtpm {

/// Original label vocabulary behind the internal +1/-1 encoding.
struct LabelMap {
    std::string positive = "1";
    std::string negative = "-1";

    std::string name(int label) const { return label > 0 ? positive : negative; }
};

struct TwoViewDataset {
    Matrix view_a;
    Matrix view_b;
    std::vector<int> labels;  // +1 / -1
    std::string name;
    LabelMap label_map;
    // Present when view B was synthesized from view A; prediction on raw
    // samples reuses it instead of refitting.
    std::optional<SynthesisPipeline> view_b_synthesis;
};

inline void validate_dataset(const TwoViewDataset& ds) {
    require(ds.view_a.rows() == ds.view_b.rows(), "dataset: view row counts disagree");
    require(static_cast<Index>(ds.labels.size()) == ds.view_a.rows(),
            "dataset: label count disagrees with rows");
    for (int y : ds.labels)
        require(y == 1 || y == -1, "dataset: labels must be +1 or -1");
}

inline std::pair<Index, Index> class_counts(const TwoViewDataset& ds) {
    Index pos = 0, neg = 0;
    for (int y : ds.labels) (y > 0 ? pos : neg)++;
    return {pos, neg};
}

inline TwoViewDataset subset_dataset(const TwoViewDataset& ds, const std::vector<Index>& rows) {
    TwoViewDataset out;
    out.name = ds.name;
    out.label_map = ds.label_map;
    out.view_b_synthesis = ds.view_b_synthesis;
    out.view_a.resize(static_cast<Index>(rows.size()), ds.view_a.cols());
    out.view_b.resize(static_cast<Index>(rows.size()), ds.view_b.cols());
    out.labels.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.view_a.row(static_cast<Index>(i)) = ds.view_a.row(rows[i]);
        out.view_b.row(static_cast<Index>(i)) = ds.view_b.row(rows[i]);
        out.labels.push_back(ds.labels[static_cast<std::size_t>(rows[i])]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Manifests
// ---------------------------------------------------------------------------

inline constexpr const char* kManifestSchema = "mvtpm-manifest/1";

struct DatasetManifest {
    std::string name;
    std::filesystem::path view_a_path;
    std::optional<std::filesystem::path> view_b_path;
    std::optional<std::filesystem::path> labels_path;
    std::optional<Index> label_column;  // column of view A holding the label
    std::string positive_label = "1";
    bool has_header = false;
    ScalingMode scaling = ScalingMode::MinMax01;
    std::optional<double> pca_threshold;  // view-B synthesis when no view-B file
};

inline void validate_manifest(const DatasetManifest& m) {
    if (m.view_a_path.empty()) throw DataError("manifest: view_a path is required");
    if (m.view_b_path && m.pca_threshold)
        throw DataError("manifest: view_b and pca_threshold are mutually exclusive");
    if (!m.view_b_path && !m.pca_threshold)
        throw DataError("manifest: either view_b or pca_threshold must be given");
    if (m.labels_path && m.label_column)
        throw DataError("manifest: labels file and label_column are mutually exclusive");
    if (m.pca_threshold && !(*m.pca_threshold > 0.0 && *m.pca_threshold <= 1.0))
        throw DataError("manifest: pca_threshold must be in (0,1]");
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open manifest: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("manifest parse error in " + path.string() + ": " + e.what());
    }
    if (j.value("schema", "") != kManifestSchema)
        throw DataError("manifest: expected schema '" + std::string(kManifestSchema) + "' in " +
                        path.string());
    DatasetManifest m;
    const auto base = path.parent_path();
    const auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return fp.is_absolute() ? fp : base / fp;
    };
    m.name = j.value("name", path.stem().string());
    if (!j.contains("view_a")) throw DataError("manifest: missing view_a in " + path.string());
    m.view_a_path = resolve(j.at("view_a").get<std::string>());
    if (j.contains("view_b")) m.view_b_path = resolve(j.at("view_b").get<std::string>());
    if (j.contains("labels")) m.labels_path = resolve(j.at("labels").get<std::string>());
    if (j.contains("label_column")) m.label_column = j.at("label_column").get<Index>();
    m.positive_label = j.value("positive_label", "1");
    m.has_header = j.value("has_header", false);
    m.scaling = parse_scaling_mode(j.value("scaling", "minmax01"));
    if (j.contains("pca_threshold")) m.pca_threshold = j.at("pca_threshold").get<double>();
    validate_manifest(m);
    return m;
}

inline void write_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    validate_manifest(m);
    nlohmann::json j;
    j["schema"] = kManifestSchema;
    j["name"] = m.name;
    j["view_a"] = m.view_a_path.string();
    if (m.view_b_path) j["view_b"] = m.view_b_path->string();
    if (m.labels_path) j["labels"] = m.labels_path->string();
    if (m.label_column) j["label_column"] = *m.label_column;
    j["positive_label"] = m.positive_label;
    j["has_header"] = m.has_header;
    j["scaling"] = scaling_mode_name(m.scaling);
    if (m.pca_threshold) j["pca_threshold"] = *m.pca_threshold;
    std::ofstream out(path);
    if (!out) throw DataError("cannot write manifest: " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Loading
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<int> map_labels(const std::vector<std::string>& raw,
                                   const std::string& positive, LabelMap& map_out) {
    std::map<std::string, Index> distinct;
    for (const auto& r : raw) distinct[r]++;
    if (distinct.size() != 2)
        throw DataError("labels: expected exactly 2 distinct values, found " +
                        std::to_string(distinct.size()));
    if (!distinct.count(positive))
        throw DataError("labels: positive label '" + positive + "' not present");
    map_out.positive = positive;
    for (const auto& [value, count] : distinct)
        if (value != positive) map_out.negative = value;
    std::vector<int> labels;
    labels.reserve(raw.size());
    for (const auto& r : raw) labels.push_back(r == positive ? 1 : -1);
    return labels;
}

}  // namespace detail

/// Loads features and labels; view B comes from its file when given. With
/// `synthesize` (the default), a missing view B is materialized immediately
/// from the whole file; callers that must fit the synthesis on a training
/// split only (the benchmark protocol) pass false and synthesize themselves.
inline TwoViewDataset load_dataset(const DatasetManifest& m, bool synthesize = true) {
    validate_manifest(m);
    TwoViewDataset ds;
    ds.name = m.name;
    ds.view_a = read_csv_matrix(m.view_a_path, m.has_header);

    std::vector<std::string> raw_labels;
    if (m.labels_path) {
        raw_labels = read_csv_column(*m.labels_path, m.has_header);
    } else if (m.label_column) {
        const Index col = *m.label_column;
        if (col < 0 || col >= ds.view_a.cols())
            throw DataError("manifest: label_column " + std::to_string(col) +
                            " out of range for " + std::to_string(ds.view_a.cols()) + " columns");
        raw_labels.reserve(static_cast<std::size_t>(ds.view_a.rows()));
        for (Index i = 0; i < ds.view_a.rows(); ++i)
            raw_labels.push_back(format_double(ds.view_a(i, col)));
        Matrix features(ds.view_a.rows(), ds.view_a.cols() - 1);
        features.leftCols(col) = ds.view_a.leftCols(col);
        features.rightCols(ds.view_a.cols() - col - 1) = ds.view_a.rightCols(ds.view_a.cols() - col - 1);
        ds.view_a = std::move(features);
    } else {
        throw DataError("manifest: no label source (labels file or label_column)");
    }
    if (static_cast<Index>(raw_labels.size()) != ds.view_a.rows())
        throw DataError("labels: row count " + std::to_string(raw_labels.size()) +
                        " disagrees with view A rows " + std::to_string(ds.view_a.rows()));
    ds.labels = detail::map_labels(raw_labels, m.positive_label, ds.label_map);

    if (m.view_b_path) {
        ds.view_b = read_csv_matrix(*m.view_b_path, m.has_header);
        if (ds.view_b.rows() != ds.view_a.rows())
            throw DataError("view B rows " + std::to_string(ds.view_b.rows()) +
                            " disagree with view A rows " + std::to_string(ds.view_a.rows()));
    } else if (synthesize) {
        SynthesisPipeline pipeline = fit_view_b_synthesis(ds.view_a, m.scaling, *m.pca_threshold);
        ds.view_b = synthesize_view_b(pipeline, ds.view_a);
        ds.view_b_synthesis = std::move(pipeline);
    } else {
        ds.view_b.resize(ds.view_a.rows(), 0);
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Splits and folds
// ---------------------------------------------------------------------------

inline std::pair<std::vector<Index>, std::vector<Index>> train_test_indices(Index m, double ratio,
                                                                            std::uint64_t seed) {
    require(ratio > 0.0 && ratio < 1.0, "train_test_split: ratio must be in (0,1)");
    auto engine = seeded_engine(seed);
    auto perm = random_permutation(m, engine);
    const auto n_train = static_cast<Index>(ratio * static_cast<double>(m));
    require(n_train >= 1 && n_train < m, "train_test_split: a split side would be empty");
    std::vector<Index> train(perm.begin(), perm.begin() + n_train);
    std::vector<Index> test(perm.begin() + n_train, perm.end());
    return {std::move(train), std::move(test)};
}

inline std::pair<TwoViewDataset, TwoViewDataset> train_test_split(const TwoViewDataset& ds,
                                                                  double ratio,
                                                                  std::uint64_t seed) {
    auto [train_idx, test_idx] = train_test_indices(ds.view_a.rows(), ratio, seed);
    return {subset_dataset(ds, train_idx), subset_dataset(ds, test_idx)};
}

/// Seeded shuffle of 0..n-1 cut into k contiguous chunks whose sizes differ
/// by at most one (the first n mod k chunks are one longer).
inline std::vector<std::vector<Index>> kfold_indices(Index n, int k, std::uint64_t seed) {
    require(k >= 2, "kfold_indices: k must be at least 2");
    require(n >= k, "kfold_indices: need at least k samples");
    auto engine = seeded_engine(seed);
    auto perm = random_permutation(n, engine);
    std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
    const Index base = n / k;
    const Index extra = n % k;
    Index at = 0;
    for (int f = 0; f < k; ++f) {
        const Index size = base + (f < extra ? 1 : 0);
        folds[static_cast<std::size_t>(f)].assign(perm.begin() + at, perm.begin() + at + size);
        at += size;
    }
    return folds;
}

/// Class-stratified variant: each class is shuffled separately and dealt
/// round-robin, so per-fold class counts differ by at most one.
inline std::vector<std::vector<Index>> stratified_kfold_indices(const std::vector<int>& labels,
                                                                int k, std::uint64_t seed) {
    const auto n = static_cast<Index>(labels.size());
    require(k >= 2, "stratified_kfold_indices: k must be at least 2");
    require(n >= k, "stratified_kfold_indices: need at least k samples");
    auto engine = seeded_engine(seed);
    std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
    for (int wanted : {1, -1}) {
        std::vector<Index> members;
        for (Index i = 0; i < n; ++i)
            if (labels[static_cast<std::size_t>(i)] == wanted) members.push_back(i);
        const auto perm = random_permutation(static_cast<Index>(members.size()), engine);
        for (std::size_t p = 0; p < perm.size(); ++p)
            folds[p % static_cast<std::size_t>(k)].push_back(
                members[static_cast<std::size_t>(perm[p])]);
    }
    return folds;
}

// ---------------------------------------------------------------------------
// Synthetic generators
// ---------------------------------------------------------------------------

// The generators pair two 2-D distributions that share labels row by row:
//   synthetic1: concentric circles | double vortex (interleaved spirals)
//   synthetic2: Gaussian clouds    | 2x2 checkerboard
//   synthetic3: double bands       | double moon
// Rows hold the positive class first, then the negative class.
inline TwoViewDataset generate_synthetic(const std::string& name, Index n, std::uint64_t seed) {
    require(n >= 4 && n % 2 == 0, "generate_synthetic: n must be even and at least 4");
    const bool s1 = name == "synthetic1";
    const bool s2 = name == "synthetic2";
    const bool s3 = name == "synthetic3";
    require(s1 || s2 || s3, "generate_synthetic: unknown name '" + name + "'");

    auto engine = seeded_engine(seed);
    TwoViewDataset ds;
    ds.name = name;
    ds.view_a.resize(n, 2);
    ds.view_b.resize(n, 2);
    ds.labels.resize(static_cast<std::size_t>(n));
    const Index half = n / 2;

    for (Index i = 0; i < n; ++i) {
        const bool positive = i < half;
        ds.labels[static_cast<std::size_t>(i)] = positive ? 1 : -1;
        double ax = 0, ay = 0, bx = 0, by = 0;
        if (s1) {
            // view A: circles of radius 1 and 2 with radial noise 0.1
            const double theta = uniform_in(engine, 0.0, 2.0 * std::numbers::pi);
            const double radius = (positive ? 1.0 : 2.0) + 0.1 * normal01(engine);
            ax = radius * std::cos(theta);
            ay = radius * std::sin(theta);
            // view B: two interleaved Archimedean spirals, 1.5 turns
            const double t = uniform01(engine);
            const double phi = 3.0 * std::numbers::pi * t;
            const double r = 0.25 + 1.75 * t;
            const double sign = positive ? 1.0 : -1.0;
            bx = sign * r * std::cos(phi) + 0.1 * normal01(engine);
            by = sign * r * std::sin(phi) + 0.1 * normal01(engine);
        } else if (s2) {
            // view A: Gaussian clouds at (+-1.5, 0), covariance 0.5 I
            const double sd = std::sqrt(0.5);
            const double cx = positive ? 1.5 : -1.5;
            ax = cx + sd * normal01(engine);
            ay = sd * normal01(engine);
            // view B: 2x2 checkerboard of unit cells over [0,2]^2; the
            // positive class owns the (0,0)/(1,1) diagonal
            const bool second_cell = uniform01(engine) < 0.5;
            const Index cell_x = second_cell ? 1 : 0;
            const Index cell_y = (second_cell == positive) ? 1 : 0;
            bx = static_cast<double>(cell_x) + uniform01(engine);
            by = static_cast<double>(cell_y) + uniform01(engine);
        } else {
            // view A: two horizontal bands offset by 1.5
            ax = uniform_in(engine, -2.0, 2.0);
            ay = uniform_in(engine, -0.25, 0.25) + (positive ? 0.0 : 1.5);
            // view B: double moon, radius 1, width 0.6, vertical offset 0.4
            const double theta = uniform_in(engine, 0.0, std::numbers::pi);
            const double rho = uniform_in(engine, 0.7, 1.3);
            if (positive) {
                bx = rho * std::cos(theta);
                by = rho * std::sin(theta);
            } else {
                bx = rho * std::cos(theta) + 1.0;
                by = -rho * std::sin(theta) - 0.4;
            }
        }
        ds.view_a(i, 0) = ax;
        ds.view_a(i, 1) = ay;
        ds.view_b(i, 0) = bx;
        ds.view_b(i, 1) = by;
    }
    return ds;
}

}  // namespace mvtpm
