#include "doctest.h"

#include <random>

#include "pathmon/evaluate.hpp"
#include "pathmon/learn.hpp"
#include "support.hpp"

using namespace pathmon;

namespace {

// Two informative columns plus noise; label drawn from a logistic model.
FeatureTable synthetic_table(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform;
    FeatureTable t;
    t.spec.column_names = {"x0", "x1", "x2", "x3"};
    t.values.resize(Eigen::Index(n), 4);
    for (std::size_t i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < 4; ++c) t.values(Eigen::Index(i), c) = normal(rng);
        const double z = 2.0 * t.values(Eigen::Index(i), 0) - 1.5 * t.values(Eigen::Index(i), 1) - 0.5;
        t.labels.push_back(uniform(rng) < sigmoid(z) ? 1 : 0);
        t.case_ids.push_back("c" + std::to_string(i));
        t.prefix_ids.push_back(t.case_ids.back() + ":1");
        t.lengths.push_back(1);
    }
    return t;
}

template <typename Fn>
void expect_error(Fn fn, const std::string& code) {
    try {
        fn();
        FAIL("expected " << code);
    } catch (const Error& e) {
        CHECK(e.code() == code);
    }
}

}  // namespace

TEST_CASE("logistic gradient matches finite differences") {
    auto t = synthetic_table(60, 3);
    const Eigen::VectorXd y = t.label_vector();
    std::mt19937_64 rng(9);
    std::normal_distribution<double> normal;
    for (double l2 : {0.0, 0.01, 1.0}) {
        LogisticObjective<double> obj(t.values, y, l2);
        Eigen::VectorXd theta(obj.dimension());
        for (auto& v : theta) v = normal(rng);
        const Eigen::VectorXd g = obj.gradient(theta);
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            const double h = 1e-6;
            Eigen::VectorXd a = theta, b = theta;
            a[i] += h;
            b[i] -= h;
            const double fd = (obj.value(a) - obj.value(b)) / (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("logistic training lowers the objective monotonically") {
    auto t = synthetic_table(400, 4);
    auto model = train_logreg(t);
    REQUIRE(model.objective_history.size() >= 2);
    for (std::size_t i = 1; i < model.objective_history.size(); ++i) {
        CHECK(model.objective_history[i] <= model.objective_history[i - 1]);
    }
    CHECK(model.converged);
    CHECK(model.weights[0] > 0.5);
    CHECK(model.weights[1] < -0.5);

    std::vector<double> scores;
    auto preds = predict_logreg(model, t);
    CHECK(auc(preds).value() > 0.8);
}

TEST_CASE("logistic regression on separable and heavily regularized data") {
    FeatureTable t;
    t.spec.column_names = {"x"};
    t.values.resize(40, 1);
    for (int i = 0; i < 40; ++i) {
        t.values(i, 0) = i < 20 ? -1.0 - i * 0.1 : 1.0 + i * 0.1;
        t.labels.push_back(i < 20 ? 0 : 1);
        t.case_ids.push_back("c" + std::to_string(i));
        t.prefix_ids.push_back(t.case_ids.back() + ":1");
        t.lengths.push_back(1);
    }
    auto model = train_logreg(t);
    CHECK(auc(predict_logreg(model, t)).value() >= 0.99);

    auto skewed = synthetic_table(500, 5);
    const double rate = skewed.label_vector().mean();
    LogRegHyper strong;
    strong.l2_lambda = 1e6;
    auto flat = predict_logreg(train_logreg(skewed, strong), skewed);
    for (const auto& p : flat) CHECK(p.score == doctest::Approx(rate).epsilon(1e-3));

    auto single = skewed;
    std::fill(single.labels.begin(), single.labels.end(), 0);
    expect_error([&] { train_logreg(single); }, "single_class");
    expect_error([&] { train_rf(single); }, "single_class");
}

TEST_CASE("random forest is deterministic and thread invariant") {
    auto t = synthetic_table(300, 6);
    ForestHyper h;
    h.n_trees = 20;
    h.threads = 1;
    auto one = train_rf(t, h);
    h.threads = 4;
    auto four = train_rf(t, h);
    CHECK(one.trees == four.trees);
    CHECK(one.trees.size() == 20);
    auto preds = predict_rf(four, t);
    for (const auto& p : preds) CHECK((p.score >= 0.0 && p.score <= 1.0));
    CHECK(auc(preds).value() > 0.85);

    h.seed = 7;
    CHECK(!(train_rf(t, h).trees == one.trees));

    CHECK(gini(0, 10) == 0.0);
    CHECK(gini(5, 10) == doctest::Approx(0.5));
}

TEST_CASE("model files round trip and guard the feature layout") {
    auto t = synthetic_table(200, 8);
    t.spec.config.signals = {{"hr"}};
    ForestHyper h;
    h.n_trees = 5;
    auto dir = testing_support::scratch_dir("model_io");
    for (auto file : {make_model_file(train_logreg(t), t.spec), make_model_file(train_rf(t, h), t.spec)}) {
        const auto path = dir / ("model_" + file.kind() + ".json");
        save_model(file, path);
        auto loaded = load_model(path);
        CHECK(loaded.kind() == file.kind());
        CHECK(loaded.columns == t.spec.column_names);
        auto a = predict(file, t);
        auto b = predict(loaded, t);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].score == b[i].score);
        CHECK(serialize_model(loaded) == serialize_model(file));

        auto other = t;
        other.spec.config.signals = {{"spo2"}};
        expect_error([&] { predict(loaded, other); }, "fingerprint_mismatch");
    }
    testing_support::write_file(dir / "bad.json", "{\"format\": \"something else\"}");
    CHECK_THROWS_AS(load_model(dir / "bad.json"), Error);
}

TEST_CASE("prediction csv round trip") {
    std::vector<Prediction> preds{{"a:1", "a", 1, 0.125, 1}, {"b:2", "b", 2, 1.0 / 3.0, 0}};
    auto dir = testing_support::scratch_dir("pred_csv");
    write_predictions_csv(preds, dir / "p.csv");
    auto back = read_predictions_csv(dir / "p.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[1].prefix_id == "b:2");
    CHECK(back[1].score == preds[1].score);
    CHECK(back[0].label == 1);
}
