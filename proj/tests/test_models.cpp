#include "support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace imbfc;

namespace {

QuarterSeries ramp(std::size_t n) {
    std::vector<double> nrv(n);
    std::vector<double> price(n);
    for (std::size_t i = 0; i < n; ++i) {
        price[i] = static_cast<double>(i);
        nrv[i] = 1000.0 + static_cast<double>(i);
    }
    return test::series_of(nrv, price);
}

WindowSet toy_windows(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    WindowSet w;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        w.issues.push_back(QuarterIndex{i});
    }
    w.features = x;
    w.targets = y;
    return w;
}

GpConfig fixed_gp(GpHyper h) {
    GpConfig c;
    c.optimize = false;
    c.fixed = h;
    c.jitter = 1e-12;
    return c;
}

} // namespace

// ---- feature windows -------------------------------------------------------

TEST(Features, WindowCounts) {
    for (int t : {1, 4, 24}) {
        EXPECT_EQ(build_windows(ramp(96 + static_cast<std::size_t>(t)), t).size(), 1u);
        EXPECT_EQ(build_windows(ramp(100 + static_cast<std::size_t>(t)), t).size(), 5u);
        EXPECT_THROW(build_windows(ramp(95 + static_cast<std::size_t>(t)), t), InsufficientDataError);
    }
}

TEST(Features, LayoutOldestFirst) {
    const auto s = ramp(130);
    const auto w = build_windows(s, 4);
    for (std::size_t r = 0; r < w.size(); ++r) {
        const auto win = w.window(r);
        const auto t = static_cast<double>(win.issue - s.start);
        for (int h = 0; h < history_quarters; ++h) {
            ASSERT_EQ(win.features[static_cast<std::size_t>(h)], t - 95 + h);
            ASSERT_EQ(win.features[static_cast<std::size_t>(history_quarters + h)], 1000.0 + t - 95 + h);
        }
        for (int k = 1; k <= 4; ++k) {
            ASSERT_EQ(win.targets[static_cast<std::size_t>(k - 1)], t + k);
        }
    }
}

TEST(Features, FilledRowsAndSpanLimitWindows) {
    auto s = ramp(300);
    const auto all = build_windows(s, 4);
    s.filled[150] = 1;
    const auto gapped = build_windows(s, 4);
    // windows [t-95, t+4] containing row 150 are t = 146..245
    EXPECT_EQ(all.size() - gapped.size(), 100u);
    for (auto q : gapped.issues) {
        const auto t = q - s.start;
        ASSERT_TRUE(t < 146 || t > 245);
    }
    const auto limited = build_windows(ramp(300), 4, PriceMode::positive, QuarterSpan{s.start, s.start + 110});
    EXPECT_EQ(limited.size(), 110u - 96 - 4 + 1);
    EXPECT_LT(limited.issues.back() + 4, s.start + 110);
}

TEST(Features, StandardizerRoundTrip) {
    Eigen::MatrixXd x(3, 2);
    x << 1, 5, 2, 5, 3, 5;
    const auto s = Standardizer::fit(x);
    EXPECT_EQ(s.std[1], 1.0);
    EXPECT_TRUE(s.inverse(s.transform(x)).isApprox(x, 1e-14));
    const auto back = standardizer_from_json(to_json(s));
    EXPECT_EQ(back.mean, s.mean);
    EXPECT_EQ(back.std, s.std);
}

// ---- MLP -------------------------------------------------------------------

double max_relative_gradient_error(std::uint64_t seed) {
    auto net = MlpNetwork::init(5, 3, 2, seed);
    std::mt19937_64 rng(seed + 1000);
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(7, 5, [&] { return 2.0 * test::uniform01(rng) - 1.0; });
    Eigen::MatrixXd y = Eigen::MatrixXd::NullaryExpr(7, 2, [&] { return 2.0 * test::uniform01(rng) - 1.0; });
    MlpNetwork::Gradient g;
    net.loss_and_gradient(x, y, g);
    const double eps = 1e-6;
    double worst = 0.0;
    auto check = [&](auto& param, const auto& grad) {
        for (Eigen::Index i = 0; i < param.size(); ++i) {
            const double keep = param.data()[i];
            param.data()[i] = keep + eps;
            const double up = net.loss(x, y);
            param.data()[i] = keep - eps;
            const double down = net.loss(x, y);
            param.data()[i] = keep;
            const double numeric = (up - down) / (2.0 * eps);
            const double analytic = grad.data()[i];
            const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-4});
            worst = std::max(worst, std::abs(numeric - analytic) / scale);
        }
    };
    check(net.w1, g.w1);
    check(net.b1, g.b1);
    check(net.w2, g.w2);
    check(net.b2, g.b2);
    return worst;
}

TEST(Mlp, GradientMatchesFiniteDifferences) {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        EXPECT_LT(max_relative_gradient_error(seed), 1e-5) << "seed " << seed;
    }
}

TEST(Mlp, HiddenWidthIsTwoNPlusOne) {
    const Dataset d = generate(default_synth_spec(400, 3));
    MlpConfig c;
    c.epochs = 1;
    const auto model = mlp_train(build_windows(d.series, 4), c);
    EXPECT_EQ(model.net.inputs(), 192);
    EXPECT_EQ(model.net.hidden(), 385);
    EXPECT_EQ(model.net.outputs(), 4);
}

TEST(Mlp, ConstantSeriesRecoversConstant) {
    Dataset d = generate(default_synth_spec(300, 4));
    std::fill(d.series.pos_price.begin(), d.series.pos_price.end(), 42.0);
    std::fill(d.series.neg_price.begin(), d.series.neg_price.end(), 42.0);
    const auto w = build_windows(d.series, 4);
    const auto model = mlp_train(w);
    const Eigen::MatrixXd pred = mlp_predict_batch(model, w.features);
    EXPECT_LT((pred.array() - 42.0).abs().maxCoeff(), 1e-3);
}

TEST(Mlp, DeterministicForSeed) {
    const Dataset d = generate(default_synth_spec(400, 5));
    const auto w = build_windows(d.series, 2);
    MlpConfig c;
    c.epochs = 3;
    const auto a = mlp_train(w, c);
    const auto b = mlp_train(w, c);
    EXPECT_EQ(a.net.w1, b.net.w1);
    EXPECT_EQ(a.net.b2, b.net.b2);
    EXPECT_EQ(a.loss_history, b.loss_history);
    c.seed = 43;
    EXPECT_NE(mlp_train(w, c).net.w1, a.net.w1);
}

TEST(Mlp, EarlyStoppingAndSerialization) {
    const Dataset d = generate(default_synth_spec(600, 6));
    const auto w = build_windows(d.series, 1);
    MlpConfig c;
    c.epochs = 60;
    c.patience = 3;
    const auto m = mlp_train(w, c);
    EXPECT_LE(m.loss_history.size(), 60u);
    EXPECT_EQ(m.validation_history.size(), m.loss_history.size());
    EXPECT_GE(m.best_epoch, 1);
    // the kept weights are the best validation epoch's
    const double best = *std::min_element(m.validation_history.begin(), m.validation_history.end());
    EXPECT_DOUBLE_EQ(m.validation_history[static_cast<std::size_t>(m.best_epoch - 1)], best);
    const auto back = mlp_from_json(nlohmann::json::parse(to_json(m).dump()));
    EXPECT_TRUE(mlp_predict_batch(back, w.features).isApprox(mlp_predict_batch(m, w.features), 1e-12));
    EXPECT_THROW(mlp_predict(m, Eigen::RowVectorXd::Zero(3)), ValueError);
    EXPECT_THROW(mlp_train(WindowSet{}, c), InsufficientDataError);
}

TEST(Mlp, SubsampleCap) {
    const Dataset d = generate(default_synth_spec(800, 6));
    const auto w = build_windows(d.series, 1);
    MlpConfig c;
    c.epochs = 1;
    c.max_train_windows = 100;
    const auto m = mlp_train(w, c);
    // one epoch over 90 training windows of batch 64 gives two Adam steps
    EXPECT_EQ(m.loss_history.size(), 1u);
    const auto rows = detail::stride_subsample(w.size(), 100);
    EXPECT_EQ(rows.size(), 100u);
    EXPECT_TRUE(std::is_sorted(rows.begin(), rows.end()));
    EXPECT_EQ(std::set<std::size_t>(rows.begin(), rows.end()).size(), 100u);
}

// ---- Gaussian process ------------------------------------------------------

TEST(Gp, MaternKernel) {
    const GpHyper unit{1.0, 3.0, 0.0};
    Eigen::RowVectorXd a(2), b(2);
    a << 1, 2;
    b << 1, 5;
    EXPECT_EQ(kernel(a, a, unit), 1.0);
    EXPECT_NEAR(kernel(a, b, unit), (1.0 + std::sqrt(3.0)) * std::exp(-std::sqrt(3.0)), 1e-15);
    EXPECT_NEAR(matern32(3.0, 3.0), 0.48336, 1e-5);
    double prev = 1.0;
    for (double r = 0.1; r < 50.0; r += 0.1) {
        const double k = matern32(r, 2.0);
        ASSERT_LT(k, prev);
        ASSERT_GT(k, 0.0);
        prev = k;
    }
    EXPECT_LT(matern32(1e3, 1.0), 1e-300);
    EXPECT_EQ(kernel(a, a, {2.0, 1.0, 0.5}), 2.5);
}

TEST(Gp, LmlGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(5, 2, [&] { return 3.0 * test::uniform01(rng); });
        Eigen::VectorXd y = Eigen::VectorXd::NullaryExpr(5, [&] { return 2.0 * test::uniform01(rng) - 1.0; });
        Eigen::MatrixXd dist = pairwise_distances(x, x);
        dist.diagonal().setZero();
        std::array<double, 3> theta{std::log(0.5 + 2.0 * test::uniform01(rng)), std::log(0.3 + 2.0 * test::uniform01(rng)),
                                    std::log(0.01 + 0.5 * test::uniform01(rng))};
        const auto f = log_marginal_likelihood(dist, y, detail::from_log(theta), true, 0.0);
        ASSERT_TRUE(f.ok);
        for (int i = 0; i < 3; ++i) {
            const double eps = 1e-6;
            auto up = theta;
            auto down = theta;
            up[i] += eps;
            down[i] -= eps;
            const double numeric = (log_marginal_likelihood(dist, y, detail::from_log(up), false, 0.0).value -
                                    log_marginal_likelihood(dist, y, detail::from_log(down), false, 0.0).value) /
                                   (2.0 * eps);
            const double rel = std::abs(numeric - f.grad[static_cast<std::size_t>(i)]) /
                               std::max({std::abs(numeric), std::abs(f.grad[static_cast<std::size_t>(i)]), 1e-6});
            EXPECT_LT(rel, 1e-4) << "trial " << trial << " parameter " << i;
        }
    }
}

TEST(Gp, NoiseFreeInterpolation) {
    Eigen::MatrixXd x(3, 1);
    x << 0.0, 1.0, 2.0;
    Eigen::MatrixXd y(3, 1);
    y << 1.0, 3.0, 5.0;
    const auto model = gp_train_direct(toy_windows(x, y), 1, fixed_gp({1.0, 1.0, 1e-12}));
    const auto p = gp_predict_batch(model, x, 1);
    for (int i = 0; i < 3; ++i) {
        EXPECT_NEAR(p.mean[i], y(i, 0), 1e-6);
        EXPECT_LT(p.std[i], 1e-4);
    }
}

TEST(Gp, FarFieldRevertsToPrior) {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 1.0, 2.0, 3.0;
    Eigen::MatrixXd y(4, 1);
    y << 10.0, 14.0, 11.0, 17.0;
    const GpHyper h{1.3, 0.8, 0.05};
    const auto model = gp_train_direct(toy_windows(x, y), 1, fixed_gp(h));
    Eigen::MatrixXd far(1, 1);
    far << 1e6;
    const auto p = gp_predict_batch(model, far, 1);
    const double mean = y.mean();
    const double sd = std::sqrt((y.array() - mean).square().mean());
    EXPECT_NEAR(p.mean[0], mean, 1e-6);
    EXPECT_NEAR(p.std[0], std::sqrt(h.amplitude + h.noise) * sd, 1e-6);
}

TEST(Gp, SymmetricMidpoint) {
    Eigen::MatrixXd x(2, 1);
    x << -1.0, 1.0;
    Eigen::MatrixXd y(2, 1);
    y << 20.0, 50.0;
    const auto model = gp_train_direct(toy_windows(x, y), 1, fixed_gp({1.0, 0.7, 0.01}));
    Eigen::MatrixXd mid(1, 1);
    mid << 0.0;
    EXPECT_NEAR(gp_predict_batch(model, mid, 1).mean[0], 35.0, 1e-9);
}

TEST(Gp, PermutationInvariance) {
    std::mt19937_64 rng(5);
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(30, 3, [&] { return test::uniform01(rng); });
    Eigen::MatrixXd y(30, 2);
    for (int i = 0; i < 30; ++i) {
        y(i, 0) = std::sin(3.0 * x(i, 0)) + x(i, 1);
        y(i, 1) = x(i, 2) * x(i, 2);
    }
    std::vector<Eigen::Index> perm(30);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Eigen::MatrixXd xp(30, 3), yp(30, 2);
    for (int i = 0; i < 30; ++i) {
        xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        yp.row(i) = y.row(perm[static_cast<std::size_t>(i)]);
    }
    Eigen::MatrixXd q = Eigen::MatrixXd::NullaryExpr(10, 3, [&] { return 1.5 * test::uniform01(rng); });
    const auto a = gp_train_direct(toy_windows(x, y), 2, fixed_gp({1.0, 0.5, 0.01}));
    const auto b = gp_train_direct(toy_windows(xp, yp), 2, fixed_gp({1.0, 0.5, 0.01}));
    for (int k = 1; k <= 2; ++k) {
        const auto pa = gp_predict_batch(a, q, k);
        const auto pb = gp_predict_batch(b, q, k);
        EXPECT_LT((pa.mean - pb.mean).cwiseAbs().maxCoeff(), 1e-8);
        EXPECT_LT((pa.std - pb.std).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Gp, DirectStrategyFitsOneModelPerLead) {
    const Dataset d = generate(default_synth_spec(600, 9));
    const auto w = build_windows(d.series, 4);
    GpConfig c;
    c.max_points = 120;
    c.optimize_points = 60;
    c.restarts = 1;
    const auto model = gp_train_direct(w, 4, c);
    ASSERT_EQ(model.submodels.size(), 4u);
    for (int k = 1; k <= 4; ++k) {
        const auto& s = model.at(k);
        EXPECT_EQ(s.lead, k);
        EXPECT_GE(s.hyper.length_scale, c.min_length);
        EXPECT_LE(s.hyper.length_scale, c.max_length);
        EXPECT_TRUE(std::isfinite(s.lml));
    }
    EXPECT_EQ(model.x_train.rows(), 120);
    // optimized hyperparameters beat the starting heuristic on the optimization subset
    const auto p = gp_predict_batch(model, w.features.topRows(5), 2);
    EXPECT_TRUE((p.std.array() > 0.0).all());
    const auto again = gp_train_direct(w, 4, c);
    EXPECT_EQ(again.at(3).hyper, model.at(3).hyper);
    const auto back = gp_from_json(nlohmann::json::parse(to_json(model).dump()));
    const auto pb = gp_predict_batch(back, w.features.topRows(5), 2);
    EXPECT_TRUE(pb.mean.isApprox(p.mean, 1e-10));
    EXPECT_THROW(model.at(5), RangeError);
}

TEST(Gp, OptimizerImprovesLikelihood) {
    std::mt19937_64 rng(8);
    Eigen::MatrixXd x = Eigen::MatrixXd::NullaryExpr(40, 2, [&] { return 4.0 * test::uniform01(rng); });
    Eigen::VectorXd y(40);
    for (int i = 0; i < 40; ++i) {
        y[i] = std::sin(x(i, 0)) * std::cos(x(i, 1)) + 0.05 * (test::uniform01(rng) - 0.5);
    }
    Eigen::MatrixXd dist = pairwise_distances(x, x);
    dist.diagonal().setZero();
    const GpHyper start{1.0, 1.0, 0.1};
    const double before = log_marginal_likelihood(dist, y, start, false).value;
    const auto [h, after] = detail::maximize_lml(dist, y, start, GpConfig{});
    EXPECT_GT(after, before);
    // at an interior optimum the gradient vanishes
    const auto g = log_marginal_likelihood(dist, y, h, true);
    for (double gi : g.grad) {
        EXPECT_LT(std::abs(gi), 1e-2);
    }
}
