#pragma once

#include <imbfc/detail/eigen_json.hpp>
#include <imbfc/error.hpp>
#include <imbfc/features.hpp>

#include <Eigen/Dense>

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace imbfc {

struct MlpConfig {
    std::uint64_t seed = 42;
    int hidden = 0; // 0: 2n+1 for n inputs
    int epochs = 200;
    int batch_size = 64;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double validation_fraction = 0.1; // chronological tail held out for early stopping
    int patience = 20;
    double tolerance = 1e-4;          // relative improvement needed to reset patience
    double plateau_threshold = 1.0;   // standardized MSE above which a warning is recorded
    std::size_t max_train_windows = 0; // 0: use every window; otherwise uniform stride subsample

    void validate() const {
        if (epochs <= 0 || batch_size <= 0 || !(learning_rate > 0.0) || patience <= 0 || hidden < 0 ||
            !(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
            throw ValueError("invalid MLP configuration");
        }
    }
};

/// One-hidden-layer perceptron: ReLU hidden units, identity outputs.
struct MlpNetwork {
    Eigen::MatrixXd w1; // inputs x hidden
    Eigen::RowVectorXd b1;
    Eigen::MatrixXd w2; // hidden x outputs
    Eigen::RowVectorXd b2;

    struct Gradient {
        Eigen::MatrixXd w1;
        Eigen::RowVectorXd b1;
        Eigen::MatrixXd w2;
        Eigen::RowVectorXd b2;
    };

    static MlpNetwork init(int inputs, int hidden, int outputs, std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        auto uniform = [&rng](double bound) {
            // 53-bit mantissa draw, independent of the standard library's distribution code
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            return (2.0 * u - 1.0) * bound;
        };
        MlpNetwork net;
        const double a1 = std::sqrt(6.0 / (inputs + hidden));
        const double a2 = std::sqrt(6.0 / (hidden + outputs));
        net.w1 = Eigen::MatrixXd::NullaryExpr(inputs, hidden, [&] { return uniform(a1); });
        net.b1 = Eigen::RowVectorXd::NullaryExpr(hidden, [&] { return uniform(a1); });
        net.w2 = Eigen::MatrixXd::NullaryExpr(hidden, outputs, [&] { return uniform(a2); });
        net.b2 = Eigen::RowVectorXd::NullaryExpr(outputs, [&] { return uniform(a2); });
        return net;
    }

    int inputs() const { return static_cast<int>(w1.rows()); }
    int hidden() const { return static_cast<int>(w1.cols()); }
    int outputs() const { return static_cast<int>(w2.cols()); }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const {
        const Eigen::MatrixXd h = ((x * w1).rowwise() + b1).cwiseMax(0.0);
        return (h * w2).rowwise() + b2;
    }

    /// Mean squared error over all rows and outputs, with its gradient.
    double loss_and_gradient(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Gradient& g) const {
        const Eigen::MatrixXd pre = (x * w1).rowwise() + b1;
        const Eigen::MatrixXd h = pre.cwiseMax(0.0);
        const Eigen::MatrixXd out = (h * w2).rowwise() + b2;
        const Eigen::MatrixXd err = out - y;
        const double scale = 1.0 / static_cast<double>(y.size());
        const Eigen::MatrixXd d_out = (2.0 * scale) * err;
        g.w2.noalias() = h.transpose() * d_out;
        g.b2 = d_out.colwise().sum();
        Eigen::MatrixXd d_h = d_out * w2.transpose();
        d_h = (pre.array() > 0.0).select(d_h, 0.0);
        g.w1.noalias() = x.transpose() * d_h;
        g.b1 = d_h.colwise().sum();
        return err.squaredNorm() * scale;
    }

    double loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) const {
        return (forward(x) - y).squaredNorm() / static_cast<double>(y.size());
    }
};

struct MlpModel {
    MlpNetwork net;
    Standardizer x_scale;
    Standardizer y_scale;
    MlpConfig config;
    std::vector<double> loss_history; // mean training-batch loss per epoch (standardized targets)
    std::vector<double> validation_history;
    int best_epoch = 0;
    std::vector<std::string> warnings;
};

namespace detail {

/// Adam moment state for one parameter block.
struct AdamSlot {
    Eigen::ArrayXXd m;
    Eigen::ArrayXXd v;

    template <typename Param, typename Grad>
    void step(Param& p, const Grad& g, const MlpConfig& c, double bias1, double bias2) {
        if (m.size() == 0) {
            m = Eigen::ArrayXXd::Zero(p.rows(), p.cols());
            v = Eigen::ArrayXXd::Zero(p.rows(), p.cols());
        }
        m = c.beta1 * m + (1.0 - c.beta1) * g.array();
        v = c.beta2 * v + (1.0 - c.beta2) * g.array().square();
        p.array() -= c.learning_rate * (m / bias1) / ((v / bias2).sqrt() + c.epsilon);
    }
};

inline std::vector<std::size_t> stride_subsample(std::size_t n, std::size_t cap) {
    std::vector<std::size_t> rows;
    if (cap == 0 || n <= cap) {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return rows;
    }
    for (std::size_t i = 0; i < cap; ++i) {
        rows.push_back(i * n / cap);
    }
    return rows;
}

} // namespace detail

/// Trains the multi-output perceptron on standardized windows with mini-batch
/// Adam and early stopping on the chronological tail.
inline MlpModel mlp_train(const WindowSet& windows, const MlpConfig& config = {}) {
    config.validate();
    if (windows.size() == 0) {
        throw InsufficientDataError("mlp_train: no training windows");
    }
    const auto rows = detail::stride_subsample(windows.size(), config.max_train_windows);
    const WindowSet data = rows.size() == windows.size() ? windows : windows.subset(rows);

    MlpModel model;
    model.config = config;
    model.x_scale = Standardizer::fit(data.features);
    model.y_scale = Standardizer::fit(data.targets);
    const Eigen::MatrixXd x = model.x_scale.transform(data.features);
    const Eigen::MatrixXd y = model.y_scale.transform(data.targets);

    const int inputs = static_cast<int>(x.cols());
    const int hidden = config.hidden > 0 ? config.hidden : 2 * inputs + 1;
    model.net = MlpNetwork::init(inputs, hidden, static_cast<int>(y.cols()), config.seed);

    const auto n = static_cast<std::size_t>(x.rows());
    std::size_t n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(n)));
    if (n - n_val < 1) {
        n_val = 0;
    }
    const std::size_t n_train = n - n_val;
    const Eigen::MatrixXd x_val = x.bottomRows(static_cast<Eigen::Index>(n_val));
    const Eigen::MatrixXd y_val = y.bottomRows(static_cast<Eigen::Index>(n_val));

    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(n_train);
    std::iota(order.begin(), order.end(), std::size_t{0});

    detail::AdamSlot s_w1, s_b1, s_w2, s_b2;
    MlpNetwork::Gradient g;
    MlpNetwork best = model.net;
    double best_loss = std::numeric_limits<double>::infinity();
    int since_best = 0;
    long step = 0;
    Eigen::MatrixXd xb, yb;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        for (std::size_t i = n_train; i > 1; --i) {
            std::swap(order[i - 1], order[rng() % i]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(n_train, start + static_cast<std::size_t>(config.batch_size));
            const auto b = static_cast<Eigen::Index>(end - start);
            xb.resize(b, x.cols());
            yb.resize(b, y.cols());
            for (Eigen::Index r = 0; r < b; ++r) {
                const auto src = static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(r)]);
                xb.row(r) = x.row(src);
                yb.row(r) = y.row(src);
            }
            epoch_loss += model.net.loss_and_gradient(xb, yb, g) * static_cast<double>(b);
            ++step;
            const double bias1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double bias2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            s_w1.step(model.net.w1, g.w1, config, bias1, bias2);
            s_b1.step(model.net.b1, g.b1, config, bias1, bias2);
            s_w2.step(model.net.w2, g.w2, config, bias1, bias2);
            s_b2.step(model.net.b2, g.b2, config, bias1, bias2);
        }
        model.loss_history.push_back(epoch_loss / static_cast<double>(n_train));

        const double monitored = n_val > 0 ? model.net.loss(x_val, y_val) : model.loss_history.back();
        if (n_val > 0) {
            model.validation_history.push_back(monitored);
        }
        if (monitored < best_loss * (1.0 - config.tolerance) || !std::isfinite(best_loss)) {
            best_loss = monitored;
            best = model.net;
            model.best_epoch = epoch;
            since_best = 0;
        } else if (monitored < best_loss) {
            best_loss = monitored;
            best = model.net;
            model.best_epoch = epoch;
            ++since_best;
        } else {
            ++since_best;
        }
        if (since_best >= config.patience) {
            break;
        }
    }
    model.net = std::move(best);
    // a constant target standardizes to exactly 0; zero output weights are its exact minimizer
    for (Eigen::Index j = 0; j < data.targets.cols(); ++j) {
        if (data.targets.col(j).maxCoeff() == data.targets.col(j).minCoeff()) {
            model.net.w2.col(j).setZero();
            model.net.b2[j] = 0.0;
        }
    }
    if (best_loss > config.plateau_threshold) {
        model.warnings.push_back("ConvergenceWarning: loss plateaued at " + std::to_string(best_loss) +
                                 " (standardized MSE)");
    } else if (model.best_epoch == config.epochs && since_best == 0 &&
               static_cast<int>(model.loss_history.size()) == config.epochs) {
        model.warnings.push_back("ConvergenceWarning: still improving after " + std::to_string(config.epochs) +
                                 " epochs");
    }
    return model;
}

/// Point forecasts (EUR/MWh) for each row of raw features.
inline Eigen::MatrixXd mlp_predict_batch(const MlpModel& model, const Eigen::MatrixXd& features) {
    return model.y_scale.inverse(model.net.forward(model.x_scale.transform(features)));
}

inline Eigen::RowVectorXd mlp_predict(const MlpModel& model, const Eigen::RowVectorXd& features) {
    if (features.size() != model.net.inputs()) {
        throw ValueError("mlp_predict: expected " + std::to_string(model.net.inputs()) + " features");
    }
    return mlp_predict_batch(model, features).row(0);
}

inline nlohmann::json to_json(const MlpModel& m) {
    return {{"format", "imbfc-mlp"},
            {"version", 1},
            {"w1", detail::matrix_json(m.net.w1)},
            {"b1", detail::row_json(m.net.b1)},
            {"w2", detail::matrix_json(m.net.w2)},
            {"b2", detail::row_json(m.net.b2)},
            {"x_scale", to_json(m.x_scale)},
            {"y_scale", to_json(m.y_scale)},
            {"seed", m.config.seed},
            {"best_epoch", m.best_epoch}};
}

inline MlpModel mlp_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "imbfc-mlp" || j.at("version") != 1) {
            throw SchemaError("unsupported MLP model file");
        }
        MlpModel m;
        m.net.w1 = detail::matrix_from_json(j.at("w1"));
        m.net.b1 = detail::row_from_json(j.at("b1"));
        m.net.w2 = detail::matrix_from_json(j.at("w2"));
        m.net.b2 = detail::row_from_json(j.at("b2"));
        m.x_scale = standardizer_from_json(j.at("x_scale"));
        m.y_scale = standardizer_from_json(j.at("y_scale"));
        m.config.seed = j.at("seed").get<std::uint64_t>();
        m.best_epoch = j.at("best_epoch").get<int>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("MLP model JSON: ") + e.what());
    }
}

} // namespace imbfc
