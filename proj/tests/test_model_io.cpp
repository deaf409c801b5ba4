#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "mobhsmm/error.hpp"
#include "mobhsmm/hsmm.hpp"
#include "mobhsmm/model_io.hpp"
#include "mobhsmm/mobtree.hpp"
#include "mobhsmm/rng.hpp"
#include "oracles.hpp"

using namespace mobhsmm;

namespace {

tree::MobTree sample_tree() {
    auto leaf = [](int, double intercept, double coef, double mu_y, std::size_t n) {
        auto node = std::make_unique<tree::Node>();
        node->model.intercept = intercept;
        node->model.coefficients = {coef};
        node->model.residual_variance = 0.01;
        node->model.n = n;
        node->mu_y = mu_y;
        node->n_rows = n;
        return node;
    };
    auto root = std::make_unique<tree::Node>();
    tree::Split s;
    s.var = "peep";
    s.var_index = 0;
    s.threshold = 6.5;
    root->split = s;
    root->left = leaf(1, 0.25, 1.5, 0.1, 40);
    root->right = std::make_unique<tree::Node>();
    tree::Split cat;
    cat.var = "sex";
    cat.var_index = 1;
    cat.categorical = true;
    cat.category = 0;
    cat.left_label = "M";
    cat.other_label = "F";
    cat.n_categories = 2;
    root->right->split = cat;
    root->right->left = leaf(2, -0.5, 0.125, 0.4, 30);
    root->right->right = leaf(3, 1.0 / 3.0, -2.25, 0.9, 25);

    tree::TreeParams params;
    params.alpha = 0.01;
    params.min_node_size = 25;
    params.max_depth = 3;
    params.n_permutations = 499;
    params.seed = 77;
    tree::MobTree t(std::move(root), {"peep", "sex"}, {"fluid"}, params);
    t.renumber_states();
    return t;
}

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) {
        path = (std::filesystem::temp_directory_path() / name).string();
    }
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("tree serialization round-trips byte for byte") {
    tree::MobTree t = sample_tree();
    io::ArtifactMeta meta{"fit-tree", {"--seed", "77", "--alpha", "0.01"}, 77};

    std::string text = io::tree_to_text(t, meta);
    tree::MobTree back = io::tree_from_text(text);
    CHECK(io::tree_to_text(back, meta) == text);

    CHECK(back.n_states() == 3);
    CHECK(back.partition_names() == std::vector<std::string>{"peep", "sex"});
    CHECK(back.regressor_names() == std::vector<std::string>{"fluid"});
    CHECK(back.params().alpha == 0.01);
    CHECK(back.params().n_permutations == 499);
    CHECK(back.params().seed == 77);

    // routing agrees with the original on a grid of inputs
    tree::TreeData d;
    d.partition_vars = {{"peep", false, {5, 7, 7}, {}}, {"sex", true, {0, 0, 1}, {"M", "F"}}};
    d.regressors = {{"fluid", false, {1, 2, 3}, {}}};
    d.target = {0, 0, 0};
    d.outcome = {0, 0, 0};
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(back.assign_state(d, i) == t.assign_state(d, i));
        CHECK(back.predict(d, i) == t.predict(d, i));
    }
    CHECK(t.assign_state(d, 0) == 1);
    CHECK(t.assign_state(d, 1) == 2);
    CHECK(t.assign_state(d, 2) == 3);
}

TEST_CASE("tree artifact carries documented shape") {
    tree::MobTree t = sample_tree();
    io::ArtifactMeta meta{"fit-tree", {"--alpha", "0.01"}, 9};
    auto doc = nlohmann::json::parse(io::tree_to_text(t, meta));

    CHECK(doc.at("format_version") == "1");
    CHECK(doc.at("kind") == "mobtree");
    CHECK(doc.at("meta").at("command") == "fit-tree");
    CHECK(doc.at("meta").at("flags") == nlohmann::json({"--alpha", "0.01"}));
    CHECK(doc.at("meta").at("seed") == 9);
    CHECK(doc.at("n_states") == 3);

    const auto& root = doc.at("root");
    CHECK(root.at("split").at("var") == "peep");
    CHECK(root.at("split").at("threshold") == 6.5);
    const auto& leaf = root.at("left").at("leaf");
    CHECK(leaf.at("state") == 1);
    CHECK(leaf.at("intercept") == 0.25);
    CHECK(leaf.at("coef").at("fluid") == 1.5);
    CHECK(leaf.at("mu_y") == 0.1);
    CHECK(leaf.at("n") == 40);
    const auto& cat = root.at("right").at("split");
    CHECK(cat.at("var") == "sex");
    CHECK(cat.at("category") == "M");
    CHECK(cat.at("other") == "F");
    CHECK(cat.at("n_categories") == 2);
}

TEST_CASE("tree values survive the decimal round trip exactly") {
    tree::MobTree t = sample_tree();
    t.root().left->model.intercept = 0.1 + 0.2; // 0.30000000000000004
    t.root().left->model.coefficients[0] = 1e-300;
    t.root().right->right->model.coefficients[0] = -123456789.123456789;
    io::ArtifactMeta meta;
    tree::MobTree back = io::tree_from_text(io::tree_to_text(t, meta));
    CHECK(back.root().left->model.intercept == 0.1 + 0.2);
    CHECK(back.root().left->model.coefficients[0] == 1e-300);
    CHECK(back.root().right->right->model.coefficients[0] == -123456789.123456789);
}

TEST_CASE("hsmm serialization round-trips byte for byte") {
    Rng rng(4);
    hsmm::Hsmm m = oracles::random_model(rng, 3, 5);
    m.defaulted[1] = true;
    io::ArtifactMeta meta{"build-hsmm", {"--dmax", "5"}, 123};

    std::string text = io::hsmm_to_text(m, meta);
    hsmm::Hsmm back = io::hsmm_from_text(text);
    CHECK(io::hsmm_to_text(back, meta) == text);
    CHECK(back.n_states == 3);
    CHECK(back.pi == m.pi);
    CHECK(back.transition == m.transition);
    CHECK(back.sojourn == m.sojourn);
    CHECK(back.dmax == 5);
    CHECK(back.defaulted == m.defaulted);
    for (int j = 0; j < 3; ++j) {
        CHECK(back.emissions[static_cast<std::size_t>(j)].mu ==
              m.emissions[static_cast<std::size_t>(j)].mu);
        CHECK(back.emissions[static_cast<std::size_t>(j)].sigma ==
              m.emissions[static_cast<std::size_t>(j)].sigma);
    }

    auto doc = nlohmann::json::parse(text);
    CHECK(doc.at("kind") == "hsmm");
    CHECK(doc.at("S") == 3);
    CHECK(doc.at("pi").size() == 3);
    CHECK(doc.at("A").size() == 3);
    CHECK(doc.at("emissions")[0].contains("mu"));
    CHECK(doc.at("emissions")[0].contains("sigma"));
}

TEST_CASE("loading rejects wrong kinds and versions") {
    Rng rng(4);
    hsmm::Hsmm m = oracles::random_model(rng, 2, 3);
    io::ArtifactMeta meta;
    std::string hsmm_text = io::hsmm_to_text(m, meta);
    std::string tree_text = io::tree_to_text(sample_tree(), meta);

    CHECK_THROWS_WITH_AS(io::tree_from_text(hsmm_text), "expected a mobtree artifact, found 'hsmm'",
                         DataError);
    CHECK_THROWS_WITH_AS(io::hsmm_from_text(tree_text), "expected a hsmm artifact, found 'mobtree'",
                         DataError);

    auto doc = nlohmann::json::parse(hsmm_text);
    doc["format_version"] = "2";
    CHECK_THROWS_WITH_AS(io::hsmm_from_text(doc.dump()),
                         "unsupported format_version '2', expected '1'", DataError);

    CHECK_THROWS_AS(io::hsmm_from_text(hsmm_text.substr(0, hsmm_text.size() / 2)), DataError);
    CHECK_THROWS_AS(io::hsmm_from_text("[1, 2]"), DataError);

    doc = nlohmann::json::parse(hsmm_text);
    doc.erase("pi");
    CHECK_THROWS_AS(io::hsmm_from_text(doc.dump()), DataError);

    // loaded models are validated
    doc = nlohmann::json::parse(hsmm_text);
    doc["A"][0][0] = 0.5;
    CHECK_THROWS_AS(io::hsmm_from_text(doc.dump()), DataError);
}

TEST_CASE("loading reports missing leaf coefficients") {
    io::ArtifactMeta meta;
    auto doc = nlohmann::json::parse(io::tree_to_text(sample_tree(), meta));
    doc["root"]["left"]["leaf"]["coef"].erase("fluid");
    CHECK_THROWS_WITH_AS(io::tree_from_text(doc.dump()),
                         "leaf is missing coefficient for 'fluid'", DataError);

    doc = nlohmann::json::parse(io::tree_to_text(sample_tree(), meta));
    doc["root"]["left"].erase("leaf");
    CHECK_THROWS_WITH_AS(io::tree_from_text(doc.dump()), "tree node has neither 'split' nor 'leaf'",
                         DataError);
}

TEST_CASE("save and load through the filesystem") {
    TempFile tf("mobhsmm_io_test_tree.json");
    tree::MobTree t = sample_tree();
    io::ArtifactMeta meta{"fit-tree", {}, 5};
    io::save_tree(tf.path, t, meta);
    tree::MobTree back = io::load_tree(tf.path);
    CHECK(io::tree_to_text(back, meta) == io::tree_to_text(t, meta));

    TempFile hf("mobhsmm_io_test_hsmm.json");
    Rng rng(8);
    hsmm::Hsmm m = oracles::random_model(rng, 2, 4);
    io::save_hsmm(hf.path, m, meta);
    CHECK(io::hsmm_to_text(io::load_hsmm(hf.path), meta) == io::hsmm_to_text(m, meta));

    CHECK_THROWS_WITH_AS(io::load_tree("/nonexistent/tree.json"),
                         "cannot open '/nonexistent/tree.json'", DataError);
}

TEST_CASE("missing defaulted block falls back to all-false") {
    Rng rng(4);
    hsmm::Hsmm m = oracles::random_model(rng, 2, 3);
    io::ArtifactMeta meta;
    auto doc = nlohmann::json::parse(io::hsmm_to_text(m, meta));
    doc.erase("defaulted");
    hsmm::Hsmm back = io::hsmm_from_text(doc.dump());
    CHECK(back.defaulted == std::vector<bool>{false, false});
}
