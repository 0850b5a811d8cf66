// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "linkforge/errors.hpp"
#include "linkforge/features.hpp"
#include "linkforge/io.hpp"

namespace linkforge::model {

using json = nlohmann::json;

inline double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct TrainConfig {
    std::vector<std::size_t> hidden_sizes{256, 64};
    double learning_rate = 1e-3;
    double momentum = 0.9;
    std::size_t batch_size = 256;
    std::size_t max_epochs = 50;
    double holdout_fraction = 0.2;
    std::size_t plateau_patience = 3;  // epochs without improvement before halving the step
    std::size_t max_halvings = 4;
};

struct EpochStats {
    double train_loss = 0.0;
    double holdout_loss = 0.0;
    double learning_rate = 0.0;
};

/// Feed-forward binary classifier: ReLU hidden layers, logistic output.
/// Weights are row-major (out x in). Training is single-threaded and fully
/// determined by the seed.
struct MlpModel {
    std::vector<std::size_t> dims;               // input, hidden..., 1
    std::vector<std::vector<double>> weights;    // per layer, out*in
    std::vector<std::vector<double>> biases;     // per layer, out
    features::FeatureLayout layout;              // input feature descriptor
    std::uint64_t seed = 0;
    std::size_t epochs_run = 0;
    std::vector<EpochStats> history;

    std::size_t input_dim() const { return dims.empty() ? 0 : dims.front(); }
    std::size_t layer_count() const { return weights.size(); }

    /// Probability of the positive class.
    double predict(std::span<const double> x) const {
        if (x.size() != input_dim()) {
            throw LayoutMismatch("input has " + std::to_string(x.size()) + " features, model expects " +
                                 std::to_string(input_dim()));
        }
        std::vector<double> a(x.begin(), x.end());
        std::vector<double> next;
        for (std::size_t l = 0; l < weights.size(); ++l) {
            const std::size_t out_n = dims[l + 1], in_n = dims[l];
            next.assign(out_n, 0.0);
            for (std::size_t o = 0; o < out_n; ++o) {
                double z = biases[l][o];
                const double* w = &weights[l][o * in_n];
                for (std::size_t i = 0; i < in_n; ++i) z += w[i] * a[i];
                next[o] = (l + 1 == weights.size()) ? z : std::max(0.0, z);
            }
            a.swap(next);
        }
        return logistic(a[0]);
    }

    std::vector<double> predict_batch(const std::vector<std::vector<double>>& rows) const {
        std::vector<double> out;
        out.reserve(rows.size());
        for (const auto& r : rows) out.push_back(predict(r));
        return out;
    }

    bool operator==(const MlpModel& o) const {
        return dims == o.dims && weights == o.weights && biases == o.biases && layout == o.layout &&
               seed == o.seed;
    }
};

namespace detail {

inline double clipped_log(double p) {
    constexpr double kEps = 1e-12;
    return std::log(std::min(std::max(p, kEps), 1.0 - kEps));
}

struct ForwardPass {
    // activations[0] is the input; activations[l+1] the output of layer l
    std::vector<std::vector<double>> activations;
    double probability = 0.0;
};

inline ForwardPass forward(const MlpModel& m, std::span<const double> x) {
    ForwardPass fp;
    fp.activations.resize(m.weights.size() + 1);
    fp.activations[0].assign(x.begin(), x.end());
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        const std::size_t out_n = m.dims[l + 1], in_n = m.dims[l];
        auto& out = fp.activations[l + 1];
        out.assign(out_n, 0.0);
        const auto& a = fp.activations[l];
        for (std::size_t o = 0; o < out_n; ++o) {
            double z = m.biases[l][o];
            const double* w = &m.weights[l][o * in_n];
            for (std::size_t i = 0; i < in_n; ++i) z += w[i] * a[i];
            out[o] = (l + 1 == m.weights.size()) ? z : std::max(0.0, z);
        }
    }
    fp.probability = logistic(fp.activations.back()[0]);
    return fp;
}

}  // namespace detail

struct Gradients {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;

    static Gradients zeros_like(const MlpModel& m) {
        Gradients g;
        g.weights.reserve(m.weights.size());
        g.biases.reserve(m.biases.size());
        for (std::size_t l = 0; l < m.weights.size(); ++l) {
            g.weights.emplace_back(m.weights[l].size(), 0.0);
            g.biases.emplace_back(m.biases[l].size(), 0.0);
        }
        return g;
    }
};

/// Mean binary cross-entropy over a batch.
inline double bce_loss(const MlpModel& m, const std::vector<std::vector<double>>& X,
                       const std::vector<double>& y) {
    double loss = 0.0;
    for (std::size_t r = 0; r < X.size(); ++r) {
        const double p = m.predict(X[r]);
        loss -= y[r] * detail::clipped_log(p) + (1.0 - y[r]) * detail::clipped_log(1.0 - p);
    }
    return loss / static_cast<double>(X.size());
}

/// Mean BCE and its analytic gradients over a batch. The logistic output and
/// the cross-entropy combine into dL/dz = p - y at the output unit.
inline double bce_gradients(const MlpModel& m, const std::vector<std::vector<double>>& X,
                            const std::vector<double>& y, Gradients& grads) {
    const double scale = 1.0 / static_cast<double>(X.size());
    double loss = 0.0;
    std::vector<std::vector<double>> delta(m.weights.size());
    for (std::size_t r = 0; r < X.size(); ++r) {
        const auto fp = detail::forward(m, X[r]);
        loss -= y[r] * detail::clipped_log(fp.probability) +
                (1.0 - y[r]) * detail::clipped_log(1.0 - fp.probability);

        delta.back().assign(1, (fp.probability - y[r]) * scale);
        for (std::size_t l = m.weights.size(); l-- > 0;) {
            const std::size_t out_n = m.dims[l + 1], in_n = m.dims[l];
            const auto& a_in = fp.activations[l];
            const auto& d = delta[l];
            for (std::size_t o = 0; o < out_n; ++o) {
                grads.biases[l][o] += d[o];
                double* gw = &grads.weights[l][o * in_n];
                for (std::size_t i = 0; i < in_n; ++i) gw[i] += d[o] * a_in[i];
            }
            if (l == 0) break;
            auto& prev = delta[l - 1];
            prev.assign(in_n, 0.0);
            for (std::size_t o = 0; o < out_n; ++o) {
                const double* w = &m.weights[l][o * in_n];
                for (std::size_t i = 0; i < in_n; ++i) prev[i] += w[i] * d[o];
            }
            // ReLU gate on the layer that produced these activations.
            for (std::size_t i = 0; i < in_n; ++i) {
                if (fp.activations[l][i] <= 0.0) prev[i] = 0.0;
            }
        }
    }
    return loss * scale;
}

/// Seeded He/Glorot initialization.
inline MlpModel init_mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
                         std::uint64_t seed, features::FeatureLayout layout = {}) {
    MlpModel m;
    m.seed = seed;
    m.layout = std::move(layout);
    m.dims.push_back(input_dim);
    for (auto h : hidden) m.dims.push_back(h);
    m.dims.push_back(1);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        const std::size_t in_n = m.dims[l], out_n = m.dims[l + 1];
        const bool is_output = (l + 2 == m.dims.size());
        const double scale = is_output ? std::sqrt(1.0 / static_cast<double>(in_n))
                                       : std::sqrt(2.0 / static_cast<double>(in_n));
        m.weights.emplace_back(in_n * out_n);
        for (auto& w : m.weights.back()) w = normal(rng) * scale;
        m.biases.emplace_back(out_n, 0.0);
    }
    return m;
}

/// Trains with mini-batch gradient descent plus momentum, halving the step on
/// holdout plateaus and keeping the weights from the best holdout epoch.
inline MlpModel train_mlp(const std::vector<std::vector<double>>& X, const std::vector<double>& y,
                          const TrainConfig& cfg, std::uint64_t seed,
                          features::FeatureLayout layout = {}) {
    if (X.empty() || X.size() != y.size()) {
        throw InsufficientData("training needs a nonempty, equally sized feature/label set");
    }
    const std::size_t width = X[0].size();
    for (const auto& row : X) {
        if (row.size() != width) throw LayoutMismatch("training rows have inconsistent widths");
        for (double v : row) {
            if (!std::isfinite(v)) throw NonFiniteLoss("non-finite feature value in training data");
        }
    }

    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(X.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    std::size_t holdout_n = static_cast<std::size_t>(std::floor(
        static_cast<double>(X.size()) * std::clamp(cfg.holdout_fraction, 0.0, 0.5)));
    if (cfg.holdout_fraction > 0.0 && holdout_n == 0 && X.size() >= 5) holdout_n = 1;

    std::vector<std::size_t> holdout(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(holdout_n));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(holdout_n), order.end());
    if (train.empty()) throw InsufficientData("holdout split left no training rows");

    auto subset_loss = [&](const MlpModel& m, const std::vector<std::size_t>& idx) {
        double loss = 0.0;
        for (auto i : idx) {
            const double p = m.predict(X[i]);
            loss -= y[i] * detail::clipped_log(p) + (1.0 - y[i]) * detail::clipped_log(1.0 - p);
        }
        return loss / static_cast<double>(idx.size());
    };

    MlpModel m = init_mlp(width, cfg.hidden_sizes, seed, std::move(layout));
    Gradients velocity = Gradients::zeros_like(m);
    Gradients grads = Gradients::zeros_like(m);

    double lr = cfg.learning_rate;
    double best_holdout = std::numeric_limits<double>::infinity();
    MlpModel best = m;
    std::size_t plateau = 0, halvings = 0;

    std::vector<std::vector<double>> batch_x;
    std::vector<double> batch_y;
    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(train.begin(), train.end(), rng);
        for (std::size_t start = 0; start < train.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(start + cfg.batch_size, train.size());
            batch_x.clear();
            batch_y.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch_x.push_back(X[train[k]]);
                batch_y.push_back(y[train[k]]);
            }
            for (auto& g : grads.weights) std::fill(g.begin(), g.end(), 0.0);
            for (auto& g : grads.biases) std::fill(g.begin(), g.end(), 0.0);
            bce_gradients(m, batch_x, batch_y, grads);
            for (std::size_t l = 0; l < m.weights.size(); ++l) {
                for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
                    velocity.weights[l][i] = cfg.momentum * velocity.weights[l][i] - lr * grads.weights[l][i];
                    m.weights[l][i] += velocity.weights[l][i];
                }
                for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
                    velocity.biases[l][i] = cfg.momentum * velocity.biases[l][i] - lr * grads.biases[l][i];
                    m.biases[l][i] += velocity.biases[l][i];
                }
            }
        }

        const double train_loss = subset_loss(m, train);
        const double holdout_loss = holdout.empty() ? train_loss : subset_loss(m, holdout);
        if (!std::isfinite(train_loss) || !std::isfinite(holdout_loss)) {
            throw NonFiniteLoss("training diverged at epoch " + std::to_string(epoch));
        }
        m.history.push_back({train_loss, holdout_loss, lr});
        m.epochs_run = epoch + 1;

        if (holdout_loss < best_holdout - 1e-10) {
            best_holdout = holdout_loss;
            best = m;
            plateau = 0;
        } else if (++plateau >= cfg.plateau_patience) {
            plateau = 0;
            lr *= 0.5;
            if (++halvings > cfg.max_halvings) break;
        }
    }

    best.history = m.history;
    best.epochs_run = m.epochs_run;
    return best;
}

// ---------------------------------------------------------------------------
// Versioned binary serialization, bit-exact round-trip.
// Layout: 'L''F''M''L' | u32 version | u64 seed | u32 ndims | ndims * u64 |
//         u32 layout_len | layout json | per layer raw f64 weights, biases |
//         u64 epochs | u32 nhist | nhist * 3 f64
// ---------------------------------------------------------------------------

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    put_u64(out, bits);
}

struct Cursor {
    const std::string& buf;
    std::size_t pos = 0;
    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw SchemaError("model file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double d;
        std::memcpy(&d, &bits, 8);
        return d;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace detail

inline std::string serialize_mlp(const MlpModel& m) {
    std::string out = "LFML";
    detail::put_u32(out, 1);
    detail::put_u64(out, m.seed);
    detail::put_u32(out, static_cast<std::uint32_t>(m.dims.size()));
    for (auto d : m.dims) detail::put_u64(out, d);
    const std::string lj = m.layout.to_json().dump();
    detail::put_u32(out, static_cast<std::uint32_t>(lj.size()));
    out += lj;
    for (std::size_t l = 0; l < m.weights.size(); ++l) {
        for (double w : m.weights[l]) detail::put_f64(out, w);
        for (double b : m.biases[l]) detail::put_f64(out, b);
    }
    detail::put_u64(out, m.epochs_run);
    detail::put_u32(out, static_cast<std::uint32_t>(m.history.size()));
    for (const auto& h : m.history) {
        detail::put_f64(out, h.train_loss);
        detail::put_f64(out, h.holdout_loss);
        detail::put_f64(out, h.learning_rate);
    }
    return out;
}

inline MlpModel deserialize_mlp(detail::Cursor& cur) {
    if (cur.bytes(4) != "LFML") throw SchemaError("bad model magic");
    if (cur.u32() != 1) throw SchemaError("unsupported model version");
    MlpModel m;
    m.seed = cur.u64();
    const std::uint32_t ndims = cur.u32();
    for (std::uint32_t i = 0; i < ndims; ++i) m.dims.push_back(cur.u64());
    const std::uint32_t lj_len = cur.u32();
    m.layout = features::FeatureLayout::from_json(json::parse(cur.bytes(lj_len)));
    for (std::size_t l = 0; l + 1 < m.dims.size(); ++l) {
        m.weights.emplace_back(m.dims[l] * m.dims[l + 1]);
        for (auto& w : m.weights.back()) w = cur.f64();
        m.biases.emplace_back(m.dims[l + 1]);
        for (auto& b : m.biases.back()) b = cur.f64();
    }
    m.epochs_run = cur.u64();
    const std::uint32_t nhist = cur.u32();
    for (std::uint32_t i = 0; i < nhist; ++i) {
        EpochStats h;
        h.train_loss = cur.f64();
        h.holdout_loss = cur.f64();
        h.learning_rate = cur.f64();
        m.history.push_back(h);
    }
    return m;
}

inline MlpModel deserialize_mlp(const std::string& buf) {
    detail::Cursor cur{buf};
    return deserialize_mlp(cur);
}

}  // namespace linkforge::model
