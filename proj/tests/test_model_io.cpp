#include <catch2/catch_amalgamated.hpp>

#include <chrono>
#include <filesystem>

#include "mvtpm/model_io.hpp"
#include "mvtpm/rng.hpp"

using namespace mvtpm;
namespace fs = std::filesystem;

namespace {

TwoViewDataset random_dataset(Index n, std::uint64_t seed) {
    auto eng = seeded_engine(seed);
    TwoViewDataset ds;
    ds.name = "random";
    ds.label_map = {"spam", "ham"};
    ds.view_a.resize(n, 3);
    ds.view_b.resize(n, 2);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < 3; ++j) ds.view_a(i, j) = normal01(eng);
        for (Index j = 0; j < 2; ++j) ds.view_b(i, j) = normal01(eng);
        ds.labels.push_back(i % 2 ? 1 : -1);
    }
    return ds;
}

}  // namespace

TEST_CASE("model save/load reproduces decision values bit for bit") {
    const fs::path dir =
        fs::temp_directory_path() /
        ("mvtpm_io_" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);

    const TwoViewDataset ds = random_dataset(24, 99);
    Hyperparams hp;
    hp.c1 = 0.7;
    hp.c3 = 1.3;
    hp.eps1 = 0.1;
    hp.kernel_a = KernelSpec::gaussian_paper(0.8);
    hp.kernel_b = KernelSpec::gaussian_squared(1.7);
    const MvTpmModel model = train(ds, hp);

    save_model(model, dir / "model.json");
    const MvTpmModel loaded = load_model(dir / "model.json");

    CHECK(loaded.hp.kernel_b.kind == KernelKind::GaussianSquared);
    CHECK(loaded.label_map.positive == "spam");
    CHECK(loaded.label_map.negative == "ham");

    auto eng = seeded_engine(8);
    Matrix ta(50, 3), tb(50, 2);
    for (Index i = 0; i < 50; ++i) {
        for (Index j = 0; j < 3; ++j) ta(i, j) = normal01(eng);
        for (Index j = 0; j < 2; ++j) tb(i, j) = normal01(eng);
    }
    const BatchDecisions before = predict(model, ta, tb);
    const BatchDecisions after = predict(loaded, ta, tb);
    REQUIRE(before.f.size() == after.f.size());
    for (Index i = 0; i < before.f.size(); ++i) {
        CHECK(before.f[i] == after.f[i]);  // bit-identical
        CHECK(before.labels[static_cast<std::size_t>(i)] ==
              after.labels[static_cast<std::size_t>(i)]);
    }

    std::error_code ec;
    fs::remove_all(dir, ec);
}

TEST_CASE("model files carry the schema tag and reject foreign documents") {
    const fs::path dir =
        fs::temp_directory_path() /
        ("mvtpm_io2_" +
         std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
    fs::create_directories(dir);

    const TwoViewDataset ds = random_dataset(10, 7);
    const MvTpmModel model = train(ds, Hyperparams{});
    const auto j = model_to_json(model);
    CHECK(j.at("schema") == "mvtpmsvm-model/1");

    {
        std::ofstream out(dir / "bogus.json");
        out << "{\"schema\": \"something-else/9\"}\n";
    }
    CHECK_THROWS_AS(load_model(dir / "bogus.json"), DataError);
    CHECK_THROWS_AS(load_model(dir / "missing.json"), DataError);

    std::error_code ec;
    fs::remove_all(dir, ec);
}

TEST_CASE("linear models round-trip their explicit vectors") {
    const TwoViewDataset ds = random_dataset(12, 55);
    Hyperparams hp;
    hp.kernel_a = KernelSpec::linear();
    hp.kernel_b = KernelSpec::linear();
    const MvTpmModel model = train(ds, hp);
    REQUIRE(model.v1);

    const auto j = model_to_json(model);
    const MvTpmModel loaded = model_from_json(j);
    REQUIRE(loaded.v1);
    REQUIRE(loaded.u2);
    CHECK((*loaded.v1 - *model.v1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((*loaded.u2 - *model.u2).cwiseAbs().maxCoeff() == 0.0);
}
