// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <random>

#include "linkforge/mlp.hpp"

using namespace linkforge;
using Catch::Matchers::WithinAbs;

namespace {

/// Central differences are only valid away from the ReLU kink: require every
/// hidden pre-activation to clear a margin no single-parameter perturbation
/// can bridge.
bool kink_safe(const model::MlpModel& m, const std::vector<std::vector<double>>& X,
               double margin = 1e-2) {
    for (const auto& x : X) {
        std::vector<double> a(x.begin(), x.end());
        for (std::size_t l = 0; l + 1 < m.weights.size() + 1 && l < m.weights.size(); ++l) {
            const std::size_t out_n = m.dims[l + 1], in_n = m.dims[l];
            std::vector<double> z(out_n);
            for (std::size_t o = 0; o < out_n; ++o) {
                double s = m.biases[l][o];
                for (std::size_t i = 0; i < in_n; ++i) s += m.weights[l][o * in_n + i] * a[i];
                z[o] = s;
            }
            const bool is_output = l + 1 == m.weights.size();
            if (!is_output) {
                for (double v : z) {
                    if (std::fabs(v) < margin) return false;
                }
            }
            a.resize(out_n);
            for (std::size_t o = 0; o < out_n; ++o) a[o] = is_output ? z[o] : std::max(0.0, z[o]);
        }
    }
    return true;
}

/// Central finite differences over every parameter of the model.
double max_gradient_rel_error(model::MlpModel& m, const std::vector<std::vector<double>>& X,
                              const std::vector<double>& y) {
    auto grads = model::Gradients::zeros_like(m);
    model::bce_gradients(m, X, y, grads);

    double worst = 0.0;
    auto probe = [&](double& w, double analytic) {
        const double saved = w;
        const double h = 1e-5 * std::max(1.0, std::fabs(saved));
        w = saved + h;
        const double lp = model::bce_loss(m, X, y);
        w = saved - h;
        const double lm = model::bce_loss(m, X, y);
        w = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double rel = std::fabs(analytic - fd) / std::max(std::fabs(analytic) + std::fabs(fd), 1e-6);
        worst = std::max(worst, rel);
    };
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (std::size_t i = 0; i < m.weights[l].size(); ++i) probe(m.weights[l][i], grads.weights[l][i]);
        for (std::size_t i = 0; i < m.biases[l].size(); ++i) probe(m.biases[l][i], grads.biases[l][i]);
    }
    return worst;
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<std::size_t> units(1, 16);
    std::uniform_int_distribution<int> layers(0, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    int done = 0;
    std::uint64_t net_seed = 1000;
    while (done < 5) {
        const std::size_t input = units(rng);
        std::vector<std::size_t> hidden;
        const int n_hidden = layers(rng);
        for (int l = 0; l < n_hidden; ++l) hidden.push_back(units(rng));
        auto m = model::init_mlp(input, hidden, net_seed++);

        std::vector<std::vector<double>> X(8, std::vector<double>(input));
        std::vector<double> y(8);
        for (auto& row : X) {
            for (auto& v : row) v = u(rng);
        }
        for (auto& v : y) v = u(rng) > 0 ? 1.0 : 0.0;

        if (!kink_safe(m, X)) continue;  // resample: FD is undefined at a ReLU kink
        ++done;
        CHECK(max_gradient_rel_error(m, X, y) < 1e-4);
    }
}

TEST_CASE("zero-weight model predicts one half") {
    auto m = model::init_mlp(3, {4}, 1);
    for (auto& layer : m.weights) std::fill(layer.begin(), layer.end(), 0.0);
    for (auto& layer : m.biases) std::fill(layer.begin(), layer.end(), 0.0);
    CHECK(m.predict(std::vector<double>{0.3, -2.0, 5.0}) == 0.5);
}

TEST_CASE("positive single weight makes the output increase in its feature") {
    model::MlpModel m;
    m.dims = {1, 1};
    m.weights = {{2.0}};
    m.biases = {{0.0}};
    const double lo = m.predict(std::vector<double>{-1.0});
    const double mid = m.predict(std::vector<double>{0.0});
    const double hi = m.predict(std::vector<double>{1.0});
    CHECK(lo < mid);
    CHECK(mid < hi);
    CHECK(mid == 0.5);
}

TEST_CASE("predict rejects rows with the wrong width") {
    auto m = model::init_mlp(3, {}, 1);
    CHECK_THROWS_AS(m.predict(std::vector<double>{1.0, 2.0}), LayoutMismatch);
}

namespace {

std::pair<std::vector<std::vector<double>>, std::vector<double>> separable_toy(std::size_t n,
                                                                               std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        const double cx = pos ? 1.5 : -1.5;
        X.push_back({cx + noise(rng), -cx + noise(rng)});
        y.push_back(pos ? 1.0 : 0.0);
    }
    return {X, y};
}

double holdout_accuracy(const model::MlpModel& m, const std::vector<std::vector<double>>& X,
                        const std::vector<double>& y) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < X.size(); ++i) {
        const bool pred = m.predict(X[i]) >= 0.5;
        if (pred == (y[i] >= 0.5)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(X.size());
}

}  // namespace

TEST_CASE("linearly separable toy set trains to high holdout accuracy") {
    const auto [X, y] = separable_toy(200, 11);
    model::TrainConfig cfg;
    cfg.hidden_sizes = {8};
    cfg.learning_rate = 0.05;
    cfg.batch_size = 32;
    cfg.max_epochs = 100;
    const auto m = model::train_mlp(X, y, cfg, 42);
    // Evaluate on fresh draws from the same distribution.
    const auto [Xh, yh] = separable_toy(200, 1234);
    CHECK(holdout_accuracy(m, Xh, yh) >= 0.99);

    // A training positive scores confidently.
    CHECK(m.predict(X[0]) > 0.9);
    CHECK_FALSE(m.history.empty());
}

TEST_CASE("XOR pattern is learnable with one hidden layer") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<std::vector<double>> X;
    std::vector<double> y;
    for (int i = 0; i < 400; ++i) {
        const int a = i % 2, b = (i / 2) % 2;
        X.push_back({static_cast<double>(a) + noise(rng), static_cast<double>(b) + noise(rng)});
        y.push_back(a != b ? 1.0 : 0.0);
    }
    model::TrainConfig cfg;
    cfg.hidden_sizes = {8};
    cfg.learning_rate = 0.1;
    cfg.batch_size = 32;
    cfg.max_epochs = 300;
    cfg.plateau_patience = 10;
    cfg.max_halvings = 8;
    const auto m = model::train_mlp(X, y, cfg, 4242);

    // Oracle: the exhaustive truth table.
    std::size_t correct = 0;
    for (int a = 0; a <= 1; ++a) {
        for (int b = 0; b <= 1; ++b) {
            const bool want = a != b;
            if ((m.predict(std::vector<double>{static_cast<double>(a), static_cast<double>(b)}) >= 0.5) ==
                want) {
                ++correct;
            }
        }
    }
    CHECK(correct == 4);
    CHECK(holdout_accuracy(m, X, y) >= 0.95);
}

TEST_CASE("training is bit-deterministic given the seed") {
    const auto [X, y] = separable_toy(120, 17);
    model::TrainConfig cfg;
    cfg.hidden_sizes = {6, 4};
    cfg.max_epochs = 10;
    const auto m1 = model::train_mlp(X, y, cfg, 777);
    const auto m2 = model::train_mlp(X, y, cfg, 777);
    CHECK(model::serialize_mlp(m1) == model::serialize_mlp(m2));

    const auto m3 = model::train_mlp(X, y, cfg, 778);
    CHECK(model::serialize_mlp(m1) != model::serialize_mlp(m3));
}

TEST_CASE("serialization round-trips bit-exactly") {
    const auto [X, y] = separable_toy(60, 5);
    model::TrainConfig cfg;
    cfg.hidden_sizes = {5};
    cfg.max_epochs = 5;
    const auto m = model::train_mlp(X, y, cfg, 9,
                                    features::stage1_layout(2, {}));
    const auto bytes = model::serialize_mlp(m);
    const auto restored = model::deserialize_mlp(bytes);
    CHECK(restored == m);
    CHECK(model::serialize_mlp(restored) == bytes);
    CHECK(restored.layout == m.layout);
    CHECK(restored.history.size() == m.history.size());
}

TEST_CASE("non-finite features are rejected") {
    std::vector<std::vector<double>> X = {{1.0, std::numeric_limits<double>::quiet_NaN()}};
    std::vector<double> y = {1.0};
    CHECK_THROWS_AS(model::train_mlp(X, y, {}, 1), NonFiniteLoss);
}

TEST_CASE("empty training data is rejected") {
    CHECK_THROWS_AS(model::train_mlp({}, {}, {}, 1), InsufficientData);
}
