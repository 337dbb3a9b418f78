#pragma once

// Model persistence. The format is versioned JSON ("mvtpmsvm-model/1") with
// every real number in shortest round-trip form, so a reloaded model yields
// bit-identical decision values.

#include <filesystem>
#include <fstream>
#include <optional>

#include <json.hpp>

#include "mvtpm/model.hpp"
#include "mvtpm/types.hpp"

namespace mvtpm {

inline constexpr const char* kModelSchema = "mvtpmsvm-model/1";

namespace detail {

inline nlohmann::json matrix_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return nlohmann::json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    Matrix m(rows, cols);
    const auto& data = j.at("data");
    if (static_cast<Index>(data.size()) != rows) throw DataError("model file: bad matrix shape");
    for (Index i = 0; i < rows; ++i) {
        const auto& row = data[static_cast<std::size_t>(i)];
        if (static_cast<Index>(row.size()) != cols)
            throw DataError("model file: bad matrix row length");
        for (Index c = 0; c < cols; ++c) m(i, c) = row[static_cast<std::size_t>(c)].get<double>();
    }
    return m;
}

inline nlohmann::json vector_json(const Vector& v) {
    return nlohmann::json(std::vector<double>(v.begin(), v.end()));
}

inline Vector vector_from_json(const nlohmann::json& j) {
    const auto data = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(data.data(), static_cast<Index>(data.size()));
}

inline nlohmann::json kernel_json(const KernelSpec& k) {
    return {{"kind", kernel_kind_name(k.kind)}, {"sigma", k.sigma}};
}

inline KernelSpec kernel_from_json(const nlohmann::json& j) {
    return {parse_kernel_kind(j.at("kind").get<std::string>()), j.at("sigma").get<double>()};
}

inline nlohmann::json scaler_json(const Scaler& s) {
    nlohmann::json j;
    j["mode"] = scaling_mode_name(s.mode);
    if (s.mode != ScalingMode::None) {
        j["offset"] = vector_json(s.offset);
        j["scale"] = vector_json(s.scale);
    }
    return j;
}

inline Scaler scaler_from_json(const nlohmann::json& j) {
    Scaler s;
    s.mode = parse_scaling_mode(j.at("mode").get<std::string>());
    if (s.mode != ScalingMode::None) {
        s.offset = vector_from_json(j.at("offset"));
        s.scale = vector_from_json(j.at("scale"));
    }
    return s;
}

inline nlohmann::json pca_json(const PcaBasis& b) {
    return {{"mean", vector_json(b.mean)},
            {"components", matrix_json(b.components)},
            {"explained_variance_ratio", vector_json(b.explained_variance_ratio)},
            {"eigenvalues", vector_json(b.eigenvalues)},
            {"threshold", b.threshold}};
}

inline PcaBasis pca_from_json(const nlohmann::json& j) {
    PcaBasis b;
    b.mean = vector_from_json(j.at("mean"));
    b.components = matrix_from_json(j.at("components"));
    b.explained_variance_ratio = vector_from_json(j.at("explained_variance_ratio"));
    b.eigenvalues = vector_from_json(j.at("eigenvalues"));
    b.threshold = j.at("threshold").get<double>();
    return b;
}

}  // namespace detail

inline nlohmann::json model_to_json(const MvTpmModel& model) {
    nlohmann::json j;
    j["schema"] = kModelSchema;
    j["hyperparams"] = {{"c1", model.hp.c1},   {"c2", model.hp.c2},   {"c3", model.hp.c3},
                        {"c4", model.hp.c4},   {"d1", model.hp.d1},   {"d2", model.hp.d2},
                        {"eps1", model.hp.eps1}, {"eps2", model.hp.eps2}};
    j["kernel_a"] = detail::kernel_json(model.hp.kernel_a);
    j["kernel_b"] = detail::kernel_json(model.hp.kernel_b);
    j["split"] = {{"p_a", detail::matrix_json(model.split.p_a)},
                  {"p_b", detail::matrix_json(model.split.p_b)},
                  {"n_a", detail::matrix_json(model.split.n_a)},
                  {"n_b", detail::matrix_json(model.split.n_b)}};
    j["duals"] = {{"s1", detail::vector_json(model.s1)},
                  {"s2", detail::vector_json(model.s2)},
                  {"t1", detail::vector_json(model.t1)},
                  {"t2", detail::vector_json(model.t2)}};
    if (model.v1) j["v1"] = detail::vector_json(*model.v1);
    if (model.v2) j["v2"] = detail::vector_json(*model.v2);
    if (model.u1) j["u1"] = detail::vector_json(*model.u1);
    if (model.u2) j["u2"] = detail::vector_json(*model.u2);
    j["scaler_a"] = detail::scaler_json(model.scaler_a);
    j["scaler_b"] = detail::scaler_json(model.scaler_b);
    if (model.view_b_synthesis)
        j["view_b_synthesis"] = {{"scaler", detail::scaler_json(model.view_b_synthesis->scaler)},
                                 {"basis", detail::pca_json(model.view_b_synthesis->basis)}};
    j["label_map"] = {{"positive", model.label_map.positive},
                      {"negative", model.label_map.negative}};
    j["diagnostics"] = {{"converged_positive", model.diag.converged_positive},
                        {"converged_negative", model.diag.converged_negative},
                        {"iterations_positive", model.diag.iterations_positive},
                        {"iterations_negative", model.diag.iterations_negative},
                        {"residual_positive", model.diag.residual_positive},
                        {"residual_negative", model.diag.residual_negative}};
    return j;
}

inline MvTpmModel model_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != kModelSchema)
        throw DataError("model file: expected schema '" + std::string(kModelSchema) + "'");
    MvTpmModel model;
    const auto& hp = j.at("hyperparams");
    model.hp.c1 = hp.at("c1").get<double>();
    model.hp.c2 = hp.at("c2").get<double>();
    model.hp.c3 = hp.at("c3").get<double>();
    model.hp.c4 = hp.at("c4").get<double>();
    model.hp.d1 = hp.at("d1").get<double>();
    model.hp.d2 = hp.at("d2").get<double>();
    model.hp.eps1 = hp.at("eps1").get<double>();
    model.hp.eps2 = hp.at("eps2").get<double>();
    model.hp.kernel_a = detail::kernel_from_json(j.at("kernel_a"));
    model.hp.kernel_b = detail::kernel_from_json(j.at("kernel_b"));
    const auto& split = j.at("split");
    model.split.p_a = detail::matrix_from_json(split.at("p_a"));
    model.split.p_b = detail::matrix_from_json(split.at("p_b"));
    model.split.n_a = detail::matrix_from_json(split.at("n_a"));
    model.split.n_b = detail::matrix_from_json(split.at("n_b"));
    const auto& duals = j.at("duals");
    model.s1 = detail::vector_from_json(duals.at("s1"));
    model.s2 = detail::vector_from_json(duals.at("s2"));
    model.t1 = detail::vector_from_json(duals.at("t1"));
    model.t2 = detail::vector_from_json(duals.at("t2"));
    if (j.contains("v1")) model.v1 = detail::vector_from_json(j.at("v1"));
    if (j.contains("v2")) model.v2 = detail::vector_from_json(j.at("v2"));
    if (j.contains("u1")) model.u1 = detail::vector_from_json(j.at("u1"));
    if (j.contains("u2")) model.u2 = detail::vector_from_json(j.at("u2"));
    model.scaler_a = detail::scaler_from_json(j.at("scaler_a"));
    model.scaler_b = detail::scaler_from_json(j.at("scaler_b"));
    if (j.contains("view_b_synthesis")) {
        SynthesisPipeline p;
        p.scaler = detail::scaler_from_json(j.at("view_b_synthesis").at("scaler"));
        p.basis = detail::pca_from_json(j.at("view_b_synthesis").at("basis"));
        model.view_b_synthesis = std::move(p);
    }
    model.label_map.positive = j.at("label_map").at("positive").get<std::string>();
    model.label_map.negative = j.at("label_map").at("negative").get<std::string>();
    const auto& d = j.at("diagnostics");
    model.diag.converged_positive = d.at("converged_positive").get<bool>();
    model.diag.converged_negative = d.at("converged_negative").get<bool>();
    model.diag.iterations_positive = d.at("iterations_positive").get<int>();
    model.diag.iterations_negative = d.at("iterations_negative").get<int>();
    model.diag.residual_positive = d.at("residual_positive").get<double>();
    model.diag.residual_negative = d.at("residual_negative").get<double>();
    return model;
}

inline void save_model(const MvTpmModel& model, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path.string());
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw DataError("write failed: " + path.string());
}

inline MvTpmModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file parse error in " + path.string() + ": " + e.what());
    }
    try {
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("model file " + path.string() + ": " + e.what());
    }
}

}  // namespace mvtpm
