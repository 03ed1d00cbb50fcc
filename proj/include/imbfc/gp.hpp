#pragma once

#include <imbfc/detail/eigen_json.hpp>
#include <imbfc/error.hpp>
#include <imbfc/features.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>
#include <string>
#include <vector>

namespace imbfc {

/// Kernel hyperparameters: amplitude * Matern32(r; length_scale) + noise * [x == x'].
struct GpHyper {
    double amplitude = 1.0;    // constant-kernel variance
    double length_scale = 1.0;
    double noise = 1e-2;       // white-noise variance

    bool operator==(const GpHyper&) const = default;
};

struct GpConfig {
    std::size_t max_points = 1000;      // training subsample cap per lead time
    std::size_t optimize_points = 1000; // points used while fitting hyperparameters (<= max_points)
    int restarts = 3;                   // extra random starts after the heuristic one
    int max_iterations = 60;
    std::uint64_t seed = 7;
    bool optimize = true;
    GpHyper fixed;                      // used when optimize == false
    double min_length = 1e-2, max_length = 1e3;
    double min_variance = 1e-6, max_variance = 1e4;
    double jitter = 1e-8;
    double max_jitter = 1e-2;

    void validate() const {
        if (max_points < 2 || optimize_points < 2 || restarts < 0 || max_iterations <= 0 ||
            !(min_length > 0.0 && min_length < max_length) || !(min_variance > 0.0 && min_variance < max_variance)) {
            throw ValueError("invalid GP configuration");
        }
    }
};

inline double matern32(double r, double length_scale) {
    const double a = std::numbers::sqrt3 * r / length_scale;
    return (1.0 + a) * std::exp(-a);
}

inline double kernel(const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& x2, const GpHyper& h) {
    const double r = (x - x2).norm();
    return h.amplitude * matern32(r, h.length_scale) + (x == x2 ? h.noise : 0.0);
}

/// Euclidean distances between the rows of `a` and the rows of `b`.
inline Eigen::MatrixXd pairwise_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm();
    const Eigen::VectorXd nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd d = -2.0 * a * b.transpose();
    d.colwise() += na;
    d.rowwise() += nb.transpose();
    return d.cwiseMax(0.0).cwiseSqrt();
}

inline Eigen::MatrixXd matern_matrix(const Eigen::MatrixXd& dist, double length_scale) {
    return dist.unaryExpr([length_scale](double r) { return matern32(r, length_scale); });
}

/// Log marginal likelihood and its gradient with respect to
/// (log amplitude, log length_scale, log noise).
struct LmlValue {
    double value = -std::numeric_limits<double>::infinity();
    std::array<double, 3> grad{};
    bool ok = false;
};

/// `dist` is the symmetric training distance matrix (zero diagonal).
inline LmlValue log_marginal_likelihood(const Eigen::MatrixXd& dist, const Eigen::VectorXd& y, const GpHyper& h,
                                        bool with_gradient = true, double jitter = 1e-8) {
    const auto n = dist.rows();
    const double s3 = std::numbers::sqrt3 / h.length_scale;
    Eigen::MatrixXd m(n, n);     // Matern correlation
    Eigen::MatrixXd dm_dl(n, n); // d m / d log(length_scale)
    for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) {
            const double a = s3 * dist(r, c);
            const double e = std::exp(-a);
            m(r, c) = (1.0 + a) * e;
            dm_dl(r, c) = a * a * e;
        }
    }
    Eigen::MatrixXd k = h.amplitude * m;
    k.diagonal().array() += h.noise + jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    LmlValue out;
    if (llt.info() != Eigen::Success) {
        return out;
    }
    const Eigen::VectorXd alpha = llt.solve(y);
    const Eigen::MatrixXd& l = llt.matrixLLT();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    out.value = -0.5 * y.dot(alpha) - 0.5 * log_det - 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
    out.ok = std::isfinite(out.value);
    if (!with_gradient || !out.ok) {
        return out;
    }
    // dL/dtheta = 0.5 * tr((alpha alpha^T - K^-1) dK/dtheta)
    Eigen::MatrixXd w = llt.solve(Eigen::MatrixXd::Identity(n, n));
    w = alpha * alpha.transpose() - w;
    out.grad[0] = 0.5 * h.amplitude * (w.array() * m.array()).sum();
    out.grad[1] = 0.5 * h.amplitude * (w.array() * dm_dl.array()).sum();
    out.grad[2] = 0.5 * h.noise * w.trace();
    return out;
}

namespace detail {

inline std::array<double, 3> to_log(const GpHyper& h) {
    return {std::log(h.amplitude), std::log(h.length_scale), std::log(h.noise)};
}

inline GpHyper from_log(const std::array<double, 3>& t) {
    return {std::exp(t[0]), std::exp(t[1]), std::exp(t[2])};
}

/// Box-constrained quasi-Newton ascent on the log marginal likelihood in log-parameter space.
inline std::pair<GpHyper, double> maximize_lml(const Eigen::MatrixXd& dist, const Eigen::VectorXd& y, GpHyper start,
                                               const GpConfig& c) {
    const std::array<double, 3> lo{std::log(c.min_variance), std::log(c.min_length), std::log(c.min_variance)};
    const std::array<double, 3> hi{std::log(c.max_variance), std::log(c.max_length), std::log(c.max_variance)};
    auto clamp = [&](std::array<double, 3> t) {
        for (int i = 0; i < 3; ++i) {
            t[i] = std::clamp(t[i], lo[i], hi[i]);
        }
        return t;
    };
    std::array<double, 3> theta = clamp(to_log(start));
    LmlValue f = log_marginal_likelihood(dist, y, from_log(theta), true, c.jitter);
    if (!f.ok) {
        return {from_log(theta), f.value};
    }
    Eigen::Matrix3d inv_h = Eigen::Matrix3d::Identity();
    for (int it = 0; it < c.max_iterations; ++it) {
        const Eigen::Vector3d g(f.grad[0], f.grad[1], f.grad[2]);
        Eigen::Vector3d d = inv_h * g;
        for (int i = 0; i < 3; ++i) {
            if ((theta[i] <= lo[i] && d[i] < 0.0) || (theta[i] >= hi[i] && d[i] > 0.0)) {
                d[i] = 0.0;
            }
        }
        if (d.norm() > 3.0) {
            d *= 3.0 / d.norm();
        }
        bool accepted = false;
        std::array<double, 3> next{};
        LmlValue fn;
        for (double step = 1.0; step > 1e-6; step *= 0.5) {
            for (int i = 0; i < 3; ++i) {
                next[i] = theta[i] + step * d[i];
            }
            next = clamp(next);
            double ascent = 0.0;
            for (int i = 0; i < 3; ++i) {
                ascent += g[i] * (next[i] - theta[i]);
            }
            fn = log_marginal_likelihood(dist, y, from_log(next), true, c.jitter);
            if (fn.ok && fn.value >= f.value + 1e-4 * ascent) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            if (!inv_h.isIdentity()) {
                inv_h.setIdentity();
                continue;
            }
            break;
        }
        const Eigen::Vector3d s(next[0] - theta[0], next[1] - theta[1], next[2] - theta[2]);
        // minimizing -L: gradient difference is -(g_new - g_old)
        const Eigen::Vector3d yk = -(Eigen::Vector3d(fn.grad[0], fn.grad[1], fn.grad[2]) - g);
        const double change = fn.value - f.value;
        theta = next;
        f = fn;
        const double sy = s.dot(yk);
        if (sy > 1e-12) {
            const double rho = 1.0 / sy;
            const Eigen::Matrix3d i3 = Eigen::Matrix3d::Identity();
            inv_h = (i3 - rho * s * yk.transpose()) * inv_h * (i3 - rho * yk * s.transpose()) +
                    rho * s * s.transpose();
        }
        if (std::abs(change) < 1e-9 * (1.0 + std::abs(f.value)) || s.norm() < 1e-8) {
            break;
        }
    }
    return {from_log(theta), f.value};
}

/// Rows floor((i + u) * n / cap) for a seeded offset u in [0, 1).
inline std::vector<std::size_t> seeded_stride(std::size_t n, std::size_t cap, std::uint64_t seed) {
    std::vector<std::size_t> rows;
    if (n <= cap) {
        rows.resize(n);
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        return rows;
    }
    std::mt19937_64 rng(seed);
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    for (std::size_t i = 0; i < cap; ++i) {
        rows.push_back(std::min(n - 1, static_cast<std::size_t>((static_cast<double>(i) + u) *
                                                                static_cast<double>(n) / static_cast<double>(cap))));
    }
    return rows;
}

inline double median_distance(const Eigen::MatrixXd& dist) {
    std::vector<double> v;
    for (Eigen::Index c = 0; c < dist.cols(); ++c) {
        for (Eigen::Index r = 0; r < c; ++r) {
            v.push_back(dist(r, c));
        }
    }
    if (v.empty()) {
        return 1.0;
    }
    auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    return *mid > 0.0 ? *mid : 1.0;
}

} // namespace detail

/// Fitted single-output GP on standardized inputs and targets.
struct GpSubmodel {
    int lead = 0;
    GpHyper hyper;
    double y_mean = 0.0;
    double y_std = 1.0;
    double jitter = 0.0;
    double lml = 0.0;
    Eigen::MatrixXd chol; // lower Cholesky factor of K + (noise + jitter) I
    Eigen::VectorXd alpha;
    std::vector<std::string> warnings;
};

/// Direct strategy: one GP per lead time over shared training inputs.
struct GpModel {
    Standardizer x_scale;
    Eigen::MatrixXd x_train; // standardized
    std::vector<GpSubmodel> submodels;

    const GpSubmodel& at(int k) const {
        for (const auto& s : submodels) {
            if (s.lead == k) {
                return s;
            }
        }
        throw RangeError("no GP submodel for lead time " + std::to_string(k));
    }
};

namespace detail {

inline GpSubmodel fit_submodel(const Eigen::MatrixXd& dist, const Eigen::VectorXd& y_raw, int lead, const GpConfig& c,
                               std::uint64_t seed) {
    GpSubmodel sub;
    sub.lead = lead;
    const double n = static_cast<double>(y_raw.size());
    sub.y_mean = y_raw.mean();
    const double sd = std::sqrt((y_raw.array() - sub.y_mean).square().sum() / n);
    sub.y_std = sd > 1e-12 * std::max(1.0, std::abs(sub.y_mean)) ? sd : 1.0;
    const Eigen::VectorXd y = (y_raw.array() - sub.y_mean) / sub.y_std;

    if (!c.optimize) {
        sub.hyper = c.fixed;
    } else {
        const auto opt_rows = seeded_stride(static_cast<std::size_t>(y.size()), c.optimize_points, seed + 1);
        Eigen::MatrixXd d_opt(static_cast<Eigen::Index>(opt_rows.size()), static_cast<Eigen::Index>(opt_rows.size()));
        Eigen::VectorXd y_opt(static_cast<Eigen::Index>(opt_rows.size()));
        for (std::size_t i = 0; i < opt_rows.size(); ++i) {
            y_opt[static_cast<Eigen::Index>(i)] = y[static_cast<Eigen::Index>(opt_rows[i])];
            for (std::size_t j = 0; j < opt_rows.size(); ++j) {
                d_opt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    dist(static_cast<Eigen::Index>(opt_rows[i]), static_cast<Eigen::Index>(opt_rows[j]));
            }
        }
        const double median = median_distance(d_opt);
        const double var_y = std::max(c.min_variance, (y_opt.array() - y_opt.mean()).square().mean());
        std::mt19937_64 rng(seed);
        auto log_uniform = [&rng](double a, double b) {
            const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
            return std::exp(std::log(a) + u * (std::log(b) - std::log(a)));
        };
        double best = -std::numeric_limits<double>::infinity();
        for (int start = 0; start <= c.restarts; ++start) {
            GpHyper init{var_y, median, 0.1 * var_y};
            if (start > 0) {
                init = {log_uniform(0.1, 10.0), median * log_uniform(0.1, 10.0), log_uniform(1e-3, 1.0)};
            }
            auto [h, value] = maximize_lml(d_opt, y_opt, init, c);
            if (std::isfinite(value) && value > best) {
                best = value;
                sub.hyper = h;
            }
        }
        if (!std::isfinite(best)) {
            sub.hyper = {std::clamp(var_y, c.min_variance, c.max_variance),
                         std::clamp(median, c.min_length, c.max_length), std::max(c.min_variance, 0.1 * var_y)};
            sub.warnings.push_back("OptimFailure: fell back to median-heuristic length scale");
        }
    }

    const auto n_pts = dist.rows();
    Eigen::MatrixXd k = sub.hyper.amplitude * matern_matrix(dist, sub.hyper.length_scale);
    k.diagonal().array() += sub.hyper.noise;
    for (double jitter = c.jitter; jitter <= c.max_jitter * (1.0 + 1e-9); jitter *= 10.0) {
        Eigen::MatrixXd kj = k;
        kj.diagonal().array() += jitter;
        Eigen::LLT<Eigen::MatrixXd> llt(kj);
        if (llt.info() == Eigen::Success) {
            sub.jitter = jitter;
            sub.chol = llt.matrixL();
            sub.alpha = llt.solve(y);
            const double log_det = 2.0 * sub.chol.diagonal().array().log().sum();
            sub.lml = -0.5 * y.dot(sub.alpha) - 0.5 * log_det -
                      0.5 * static_cast<double>(n_pts) * std::log(2.0 * std::numbers::pi);
            return sub;
        }
    }
    throw CholeskyError("GP covariance not positive definite for lead " + std::to_string(lead) +
                        " even with jitter " + std::to_string(c.max_jitter));
}

} // namespace detail

/// Fits one GP per lead time 1..T on the windows' standardized features.
/// All lead times share the same seeded-stride subsample of the windows.
inline GpModel gp_train_direct(const WindowSet& windows, int horizon, const GpConfig& config = {}) {
    config.validate();
    if (windows.size() < 2) {
        throw InsufficientDataError("gp_train_direct: need at least 2 windows");
    }
    if (horizon <= 0 || horizon > windows.horizon()) {
        throw ValueError("gp_train_direct: horizon exceeds window targets");
    }
    const auto rows = detail::seeded_stride(windows.size(), config.max_points, config.seed);
    GpModel model;
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), windows.features.cols());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(rows.size()), horizon);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) = windows.features.row(static_cast<Eigen::Index>(rows[i]));
        y.row(static_cast<Eigen::Index>(i)) = windows.targets.row(static_cast<Eigen::Index>(rows[i])).head(horizon);
    }
    model.x_scale = Standardizer::fit(x);
    model.x_train = model.x_scale.transform(x);
    Eigen::MatrixXd dist = pairwise_distances(model.x_train, model.x_train);
    dist.diagonal().setZero();
    for (int k = 1; k <= horizon; ++k) {
        model.submodels.push_back(
            detail::fit_submodel(dist, y.col(k - 1), k, config, config.seed * 1000003ULL + static_cast<std::uint64_t>(k)));
    }
    return model;
}

struct GpPrediction {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;
};

/// Predictive mean and std (EUR/MWh, noise included) for every feature row, lead `k`.
inline GpPrediction gp_predict_batch(const GpModel& model, const Eigen::MatrixXd& features, int k) {
    const GpSubmodel& sub = model.at(k);
    const Eigen::MatrixXd xq = model.x_scale.transform(features);
    const Eigen::MatrixXd kq =
        sub.hyper.amplitude * matern_matrix(pairwise_distances(xq, model.x_train), sub.hyper.length_scale);
    GpPrediction p;
    p.mean = (kq * sub.alpha).array() * sub.y_std + sub.y_mean;
    const Eigen::MatrixXd v = sub.chol.triangularView<Eigen::Lower>().solve(kq.transpose());
    const Eigen::VectorXd explained = v.colwise().squaredNorm().transpose();
    const double prior = sub.hyper.amplitude + sub.hyper.noise;
    p.std = ((prior - explained.array()).cwiseMax(std::numeric_limits<double>::min())).sqrt() * sub.y_std;
    return p;
}

inline std::pair<double, double> gp_predict(const GpModel& model, const Eigen::RowVectorXd& features, int k) {
    const GpPrediction p = gp_predict_batch(model, features, k);
    return {p.mean[0], p.std[0]};
}

inline nlohmann::json to_json(const GpModel& m) {
    nlohmann::json subs = nlohmann::json::array();
    for (const auto& s : m.submodels) {
        subs.push_back({{"lead", s.lead},
                        {"amplitude", s.hyper.amplitude},
                        {"length_scale", s.hyper.length_scale},
                        {"noise", s.hyper.noise},
                        {"jitter", s.jitter},
                        {"y_mean", s.y_mean},
                        {"y_std", s.y_std},
                        {"lml", s.lml},
                        {"alpha", std::vector<double>(s.alpha.data(), s.alpha.data() + s.alpha.size())}});
    }
    return {{"format", "imbfc-gp"},
            {"version", 1},
            {"x_scale", to_json(m.x_scale)},
            {"x_train", detail::matrix_json(m.x_train)},
            {"submodels", subs}};
}

/// Rebuilds the Cholesky factors from the stored inputs and hyperparameters.
inline GpModel gp_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format") != "imbfc-gp" || j.at("version") != 1) {
            throw SchemaError("unsupported GP model file");
        }
        GpModel m;
        m.x_scale = standardizer_from_json(j.at("x_scale"));
        m.x_train = detail::matrix_from_json(j.at("x_train"));
        Eigen::MatrixXd dist = pairwise_distances(m.x_train, m.x_train);
        dist.diagonal().setZero();
        for (const auto& js : j.at("submodels")) {
            GpSubmodel s;
            s.lead = js.at("lead");
            s.hyper = {js.at("amplitude"), js.at("length_scale"), js.at("noise")};
            s.jitter = js.at("jitter");
            s.y_mean = js.at("y_mean");
            s.y_std = js.at("y_std");
            s.lml = js.at("lml");
            const auto alpha = js.at("alpha").get<std::vector<double>>();
            s.alpha = Eigen::Map<const Eigen::VectorXd>(alpha.data(), static_cast<Eigen::Index>(alpha.size()));
            Eigen::MatrixXd k = s.hyper.amplitude * matern_matrix(dist, s.hyper.length_scale);
            k.diagonal().array() += s.hyper.noise + s.jitter;
            Eigen::LLT<Eigen::MatrixXd> llt(k);
            if (llt.info() != Eigen::Success) {
                throw CholeskyError("stored GP hyperparameters give a singular covariance");
            }
            s.chol = llt.matrixL();
            m.submodels.push_back(std::move(s));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("GP model JSON: ") + e.what());
    }
}

} // namespace imbfc
