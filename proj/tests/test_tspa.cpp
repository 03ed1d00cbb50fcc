#include "support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace imbfc;

namespace {

const BinScheme two_bins({0.0}, {-50.0, 50.0});

// bin labels 1/2 of the worked example mapped onto the two-bin scheme
QuarterSeries labelled(const std::vector<int>& labels) {
    std::vector<double> nrv;
    for (int l : labels) {
        nrv.push_back(l == 1 ? -50.0 : 50.0);
    }
    return test::series_of(nrv);
}

} // namespace

// ---- transition estimation -------------------------------------------------

TEST(Transition, WorkedExampleRows) {
    const auto tm = estimate_transitions(labelled({1, 1, 2, 1, 2}), two_bins, {1});
    const LeadMatrix& m = tm.at(1);
    EXPECT_NEAR(m(0, 0), 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(m(0, 1), 2.0 / 3.0, 1e-15);
    EXPECT_EQ(m(1, 0), 1.0);
    EXPECT_EQ(m(1, 1), 0.0);
    EXPECT_EQ(m.origin_counts, (std::vector<std::uint64_t>{3, 1}));
}

TEST(Transition, BruteForcePairCounting) {
    std::mt19937_64 rng(21);
    std::vector<double> nrv(3000);
    for (auto& v : nrv) {
        v = -1500.0 + 3000.0 * test::uniform01(rng);
    }
    const BinScheme s = default_scheme();
    const auto series = test::series_of(nrv);
    const auto tm = estimate_transitions(series, s, {1, 3, 24});
    for (int k : {1, 3, 24}) {
        const auto& m = tm.at(k);
        for (std::size_t i = 0; i < s.n_bins(); ++i) {
            double from = 0.0;
            std::vector<double> to(s.n_bins(), 0.0);
            for (std::size_t t = 0; t + static_cast<std::size_t>(k) < nrv.size(); ++t) {
                if (s.bin_index(nrv[t]) == i) {
                    from += 1.0;
                    to[s.bin_index(nrv[t + static_cast<std::size_t>(k)])] += 1.0;
                }
            }
            for (std::size_t j = 0; j < s.n_bins(); ++j) {
                ASSERT_NEAR(m(i, j), from > 0 ? to[j] / from : tm.marginal()[j], 1e-12);
            }
        }
    }
}

TEST(Transition, ConstantSeriesUsesMarginalForEmptyRows) {
    const auto tm = estimate_transitions(test::series_of(std::vector<double>(50, 250.0)), default_scheme(), {1, 4});
    const std::size_t i = default_scheme().bin_index(250.0);
    for (int k : {1, 4}) {
        const auto& m = tm.at(k);
        for (std::size_t r = 0; r < m.n; ++r) {
            for (std::size_t j = 0; j < m.n; ++j) {
                EXPECT_EQ(m(r, j), j == i ? 1.0 : 0.0);
            }
            EXPECT_EQ(m.fallback[r] != 0, r != i);
        }
    }
    EXPECT_EQ(tm.marginal()[i], 1.0);
}

TEST(Transition, WindowAndFilledPairsAreExcluded) {
    auto s = labelled({1, 2, 1, 2, 2, 2, 2, 1});
    // window keeps only the first four quarters
    auto tm = estimate_transitions(s, two_bins, {1}, QuarterSpan{s.start, s.start + 4});
    EXPECT_EQ(tm.at(1)(0, 1), 1.0);
    EXPECT_EQ(tm.at(1)(1, 0), 1.0);
    // a filled quarter removes both pairs that touch it
    s.filled[1] = 1;
    tm = estimate_transitions(s, two_bins, {1}, QuarterSpan{s.start, s.start + 4});
    EXPECT_EQ(tm.at(1).origin_counts, (std::vector<std::uint64_t>{1, 0}));
}

TEST(Transition, Errors) {
    const auto s = labelled({1, 2, 1});
    EXPECT_THROW(estimate_transitions(s, two_bins, {}), ValueError);
    EXPECT_THROW(estimate_transitions(s, two_bins, {1, 1}), ValueError);
    EXPECT_THROW(estimate_transitions(s, two_bins, {0}), ValueError);
    EXPECT_THROW(estimate_transitions(s, two_bins, {3}), InsufficientDataError);
    EXPECT_THROW(estimate_transitions(s, two_bins, {1}).at(2), RangeError);
}

TEST(Transition, TwoStateChainConverges) {
    SynthSpec spec = default_synth_spec(100000, 17);
    spec.scheme = two_bins;
    spec.transition = {0.9, 0.1, 0.3, 0.7};
    const Dataset d = generate(spec);
    const auto tm = estimate_transitions(d.series, two_bins, {1});
    for (std::size_t i = 0; i < 2; ++i) {
        double tv = 0.0;
        for (std::size_t j = 0; j < 2; ++j) {
            tv += 0.5 * std::abs(tm.at(1)(i, j) - spec.transition[i * 2 + j]);
        }
        EXPECT_LT(tv, 0.05);
    }
}

TEST(Transition, Moments) {
    const std::vector<double> centers{-50.0, 50.0};
    auto m = discrete_moments(std::vector<double>{1.0 / 3.0, 2.0 / 3.0}, centers);
    EXPECT_NEAR(m.mean, 16.667, 1e-3);
    EXPECT_NEAR(m.std, 47.140, 1e-3);
    // brute-force second moment
    const double ex2 = (2500.0 + 2.0 * 2500.0) / 3.0;
    EXPECT_NEAR(m.std * m.std, ex2 - m.mean * m.mean, 1e-9);
    m = discrete_moments(std::vector<double>{0.0, 1.0}, centers);
    EXPECT_EQ(m.mean, 50.0);
    EXPECT_EQ(m.std, 0.0);
    m = discrete_moments(std::vector<double>{0.5, 0.5}, centers);
    EXPECT_EQ(m.mean, 0.0);
    EXPECT_EQ(m.std, 50.0);

    const auto tm = estimate_transitions(labelled({1, 1, 2, 1, 2}), two_bins, {1});
    m = nrv_moments(tm, 1, -10.0);
    EXPECT_NEAR(m.mean, 50.0 / 3.0, 1e-12);
}

TEST(Transition, HeatmapExport) {
    const auto tm = estimate_transitions(labelled({1, 1, 2, 1, 2}), two_bins, {1});
    EXPECT_EQ(export_heatmap(tm, 1), "from\\to,(-inf;0),[0;+inf)\n"
                                     "(-inf;0),0.3333333333333333,0.6666666666666666\n"
                                     "[0;+inf),1,0\n");
    // identity chain: 1->1 and 2->2 only
    EXPECT_EQ(export_heatmap(estimate_transitions(labelled({1, 1, 2, 2}), two_bins, {1}), 1),
              "from\\to,(-inf;0),[0;+inf)\n(-inf;0),0.5,0.5\n[0;+inf),0,1\n");
    const Dataset d = generate(default_synth_spec(20000, 2));
    const auto big = estimate_transitions(d.series, default_scheme(), {4});
    const auto lines = detail::split_lines(export_heatmap(big, 4));
    ASSERT_EQ(lines.size(), 23u);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = detail::split(lines[r]);
        ASSERT_EQ(fields.size(), 23u);
        double sum = 0.0;
        for (std::size_t c = 1; c < fields.size(); ++c) {
            sum += detail::parse_double(fields[c], "heatmap");
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
    }
}

TEST(Transition, JsonRoundTrip) {
    const Dataset d = generate(default_synth_spec(5000, 2));
    const auto tm = estimate_transitions(d.series, default_scheme(), {1, 4, 24});
    const auto back = transition_set_from_json(nlohmann::json::parse(to_json(tm).dump()));
    EXPECT_EQ(back.lead_times(), tm.lead_times());
    EXPECT_EQ(back.marginal(), tm.marginal());
    for (int k : {1, 4, 24}) {
        EXPECT_EQ(back.at(k).probs, tm.at(k).probs);
        EXPECT_EQ(back.at(k).fallback, tm.at(k).fallback);
    }
    EXPECT_EQ(to_json(tm.at(4))["k"], 4);
}

// ---- discrete price distributions ------------------------------------------

TEST(Distribution, MergeSortAndMoments) {
    const auto d = make_discrete({{60.0, 0.5}, {20.0, 0.25}, {60.0, 0.25}, {99.0, 0.0}});
    ASSERT_EQ(d.atoms.size(), 2u);
    EXPECT_EQ(d.atoms[0].price, 20.0);
    EXPECT_EQ(d.atoms[1].prob, 0.75);
    EXPECT_DOUBLE_EQ(d.mean, 50.0);
    EXPECT_NEAR(d.std, std::sqrt(300.0), 1e-12);
    EXPECT_THROW(make_discrete({{1.0, 0.5}}), ValueError);
}

TEST(Distribution, GeneralizedInverse) {
    const auto d = make_discrete({{0.0, 0.5}, {10.0, 0.5}});
    EXPECT_EQ(d.quantile(0.01), 0.0);
    EXPECT_EQ(d.quantile(0.5), 0.0);
    EXPECT_EQ(d.quantile(0.51), 10.0);
    EXPECT_EQ(d.quantile(0.99), 10.0);
    // three atoms whose cumulative sums are inexact in binary
    const auto t = make_discrete({{1.0, 0.1}, {2.0, 0.2}, {3.0, 0.7}});
    EXPECT_EQ(t.quantile(0.1), 1.0);
    EXPECT_EQ(t.quantile(0.3), 2.0);
    EXPECT_EQ(t.quantile(0.31), 3.0);
}

TEST(Distribution, GaussianQuantile) {
    const GaussianForecast g{10.0, 2.0};
    EXPECT_NEAR(g.quantile(0.5), 10.0, 1e-12);
    EXPECT_NEAR(g.quantile(0.975), 10.0 + 2.0 * 1.959963984540054, 1e-9);
    EXPECT_TRUE(std::isnan(predictive_std(PointForecast{3.0})));
}

// ---- TSPA ------------------------------------------------------------------

TEST(Tspa, ShiftBranches) {
    EXPECT_EQ(igcc_shift(50), 50);
    EXPECT_EQ(igcc_shift(100), 100);
    EXPECT_EQ(igcc_shift(-100), -100);
    EXPECT_EQ(igcc_shift(150), 50);
    EXPECT_EQ(igcc_shift(-150), -50);
}

TEST(Tspa, ArcPriceLookup) {
    std::array<double, arc_range_count> prices{};
    std::iota(prices.begin(), prices.end(), 1.0); // p-th range costs p
    const auto arc = test::flat_arc(quarter_from_date(2018, 1, 1), 4, prices);
    const QuarterIndex t = arc.start + 1;
    EXPECT_EQ(arc_price(arc, t, 50), 12.0);
    EXPECT_EQ(arc_price(arc, t, -1200), 1.0);
    EXPECT_EQ(arc_price(arc, t, 0), 12.0);
    EXPECT_THROW(arc_price(arc, arc.start + 4, 0), RangeError);
}

TEST(Tspa, WorkedExample) {
    // origin bin 0 moves to (bin 0, bin 1) with (0.25, 0.75)
    LeadMatrix m{1, 2, {0.25, 0.75, 0.25, 0.75}, {4, 4}, {0, 0}};
    TransitionMatrixSet tm(two_bins, {m}, {0.25, 0.75});
    std::array<double, arc_range_count> prices{};
    prices.fill(999.0);
    prices[10] = 20.0; // (-100, 0)
    prices[11] = 60.0; // [0, 100)
    const auto arc = test::flat_arc(quarter_from_date(2018, 1, 1), 8, prices);
    const TspaModel model(tm, arc);
    const auto d = forecast(model, arc.start, -50.0, 1);
    EXPECT_DOUBLE_EQ(d.mean, 50.0);
    EXPECT_NEAR(d.std, 17.321, 1e-3);
    // discrete-moment oracle on the mapped prices
    const auto mm = discrete_moments(std::vector<double>{0.25, 0.75}, std::vector<double>{20.0, 60.0});
    EXPECT_DOUBLE_EQ(d.mean, mm.mean);
    EXPECT_NEAR(d.std, mm.std, 1e-12);
}

TEST(Tspa, PointMassAndMerge) {
    LeadMatrix det{1, 2, {0.0, 1.0, 0.0, 1.0}, {1, 1}, {0, 0}};
    std::array<double, arc_range_count> prices{};
    prices.fill(42.0);
    prices[11] = 60.0;
    const auto arc = test::flat_arc(quarter_from_date(2018, 1, 1), 4, prices);
    const TspaModel a(TransitionMatrixSet(two_bins, {det}, {0.0, 1.0}), arc);
    const auto d = forecast(a, arc.start, 10.0, 1);
    ASSERT_EQ(d.atoms.size(), 1u);
    EXPECT_EQ(d.atoms[0].price, 60.0);
    EXPECT_EQ(d.std, 0.0);
    // both centers fall in ranges with the same price: one merged atom
    LeadMatrix half{1, 2, {0.5, 0.5, 0.5, 0.5}, {1, 1}, {0, 0}};
    prices.fill(42.0);
    const auto arc2 = test::flat_arc(quarter_from_date(2018, 1, 1), 4, prices);
    const TspaModel b(TransitionMatrixSet(two_bins, {half}, {0.5, 0.5}), arc2);
    const auto merged = forecast(b, arc2.start, 10.0, 1);
    ASSERT_EQ(merged.atoms.size(), 1u);
    EXPECT_EQ(merged.atoms[0].prob, 1.0);
}

TEST(Tspa, HorizonSequence) {
    const Dataset d = generate(default_synth_spec(4000, 6));
    std::vector<int> leads(24);
    std::iota(leads.begin(), leads.end(), 1);
    const TspaModel model(estimate_transitions(d.series, default_scheme(), leads), d.arc);
    const QuarterIndex t = d.series.start + 100;
    const double v = d.series.nrv_mw[100];
    const auto seq = forecast_horizon(model, t, v);
    ASSERT_EQ(seq.size(), 24u);
    for (int k = 1; k <= 24; ++k) {
        const auto one = forecast(model, t, v, k);
        EXPECT_EQ(seq[static_cast<std::size_t>(k - 1)].mean, one.mean);
    }
    const std::string csv = export_forecast_csv(t, leads, seq);
    const auto lines = detail::split_lines(csv);
    ASSERT_EQ(lines.size(), 25u);
    EXPECT_EQ(lines[0], "issue_time,lead_min,mean,std,atoms_json");
    EXPECT_TRUE(lines[1].find(",15,") != std::string_view::npos);
    EXPECT_TRUE(lines[24].find(",360,") != std::string_view::npos);

    // identical matrices for every lead with a constant ARC table give identical forecasts
    const LeadMatrix m1 = model.transitions().at(1);
    std::vector<LeadMatrix> same;
    for (int k = 1; k <= 4; ++k) {
        LeadMatrix m = m1;
        m.lead = k;
        same.push_back(m);
    }
    const auto flat = test::flat_arc(d.series.start, d.series.size(), default_arc_ladder());
    const TspaModel rep(TransitionMatrixSet(default_scheme(), same, model.transitions().marginal()), flat);
    const auto four = forecast_horizon(rep, t, v);
    ASSERT_EQ(four.size(), 4u);
    for (const auto& f : four) {
        EXPECT_EQ(f.atoms.size(), four[0].atoms.size());
        EXPECT_EQ(f.mean, four[0].mean);
    }
}

// ---- metrics ---------------------------------------------------------------

TEST(Metrics, NmaeNrmse) {
    const std::vector<double> p{50, 60};
    const std::vector<double> a{40, 80};
    const auto s = nmae_nrmse(p, a, reference_normalizer);
    EXPECT_NEAR(s.nmae, 100.0 * 15.0 / 55.02, 1e-9);
    EXPECT_NEAR(s.nmae, 27.263, 1e-3);
    EXPECT_NEAR(s.nrmse, 100.0 * std::sqrt(250.0) / 55.02, 1e-9);
    EXPECT_NEAR(s.nrmse, 28.7375, 1e-3);
    const auto perfect = nmae_nrmse(a, a, 1.0);
    EXPECT_EQ(perfect.nmae, 0.0);
    EXPECT_EQ(perfect.nrmse, 0.0);
    EXPECT_THROW(nmae_nrmse(std::vector<double>{}, std::vector<double>{}, 1.0), EmptyInput);
    EXPECT_THROW(nmae_nrmse(p, a, 0.0), ValueError);
}

TEST(Metrics, Pinball) {
    EXPECT_EQ(pinball(0.5, 10, 20), 5.0);
    EXPECT_DOUBLE_EQ(pinball(0.9, 10, 20), 9.0);
    EXPECT_DOUBLE_EQ(pinball(0.9, 30, 20), 1.0);
    EXPECT_EQ(pinball(0.3, 20, 20), 0.0);
}

TEST(Metrics, PlfGaussianStandard) {
    // independent quantiles by bisection on the erfc CDF
    double sum = 0.0;
    for (int i = 1; i <= 99; ++i) {
        const double q = i / 100.0;
        double lo = -10.0, hi = 10.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (0.5 * std::erfc(-mid / std::sqrt(2.0)) < q ? lo : hi) = mid;
        }
        const double z = 0.5 * (lo + hi);
        sum += 0.0 >= z ? q * (0.0 - z) : (1.0 - q) * z;
    }
    const double plf = plf_score(GaussianForecast{0.0, 1.0}, 0.0);
    EXPECT_NEAR(plf, sum / 99.0, 1e-9);
    EXPECT_NEAR(plf, 0.117956, 1e-6);
    // about half the CRPS, the large-grid limit of the averaged pinball loss
    EXPECT_NEAR(plf / crps(GaussianForecast{0.0, 1.0}, 0.0), 0.5, 0.01);
}

TEST(Metrics, PlfDiscreteBruteForce) {
    const auto d = make_discrete({{0.0, 0.5}, {10.0, 0.5}});
    double sum = 0.0;
    for (int i = 1; i <= 99; ++i) {
        const double q = i / 100.0;
        // smallest atom with cumulative probability >= q
        const double qx = q <= 0.5 ? 0.0 : 10.0;
        sum += pinball(q, qx, 0.0);
    }
    EXPECT_NEAR(plf_score(d, 0.0), sum / 99.0, 1e-12);
    EXPECT_NEAR(plf_score(d, 0.0), 1.2373737373737375, 1e-12);
    EXPECT_EQ(plf_score(make_discrete({{7.0, 1.0}}), 7.0), 0.0);
    EXPECT_TRUE(std::isnan(plf_score(PointForecast{1.0}, 1.0)));
}

TEST(Metrics, CrpsGaussian) {
    EXPECT_NEAR(crps(GaussianForecast{3.0, 10.0}, 3.0), 2.33694, 1e-4);
    EXPECT_NEAR(crps_gaussian(5.0, 1e-9, 7.5), 2.5, 1e-6);
    EXPECT_EQ(crps_gaussian(5.0, 0.0, 7.5), 2.5);
}

TEST(Metrics, CrpsDiscreteMatchesEnergyForm) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + static_cast<int>(rng() % 6);
        std::vector<PriceAtom> atoms;
        std::vector<double> w;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            w.push_back(0.05 + test::uniform01(rng));
            total += w.back();
        }
        std::vector<double> x;
        for (int i = 0; i < n; ++i) {
            x.push_back(std::round(200.0 * test::uniform01(rng) - 100.0));
            atoms.push_back({x.back(), w[static_cast<std::size_t>(i)] / total});
        }
        const auto d = make_discrete(atoms);
        std::vector<double> px, pw;
        for (const auto& a : d.atoms) {
            px.push_back(a.price);
            pw.push_back(a.prob);
        }
        const double y = 250.0 * test::uniform01(rng) - 125.0;
        ASSERT_NEAR(crps_discrete(d, y), test::energy_crps(px, pw, y), 1e-9);
        ASSERT_NEAR(crps_discrete(d, px[0]), test::energy_crps(px, pw, px[0]), 1e-9);
    }
    EXPECT_EQ(crps(make_discrete({{4.0, 1.0}}), 10.0), 6.0);
    EXPECT_EQ(crps(make_discrete({{4.0, 1.0}}), 4.0), 0.0);
}

TEST(Metrics, AccumulatorAndAverage) {
    ScoreAccumulator acc;
    acc.add(PointForecast{50.0}, 40.0);
    acc.add(PointForecast{60.0}, 80.0);
    const auto l = finalize(acc, 1, reference_normalizer);
    EXPECT_NEAR(l.nmae, 27.263, 1e-3);
    EXPECT_TRUE(std::isnan(l.plf));
    ScoreTable t{"TSPA", 2, 1.0, {}};
    ScoreAccumulator a1, a2;
    a1.add(GaussianForecast{0.0, 1.0}, 0.0);
    a2.add(GaussianForecast{0.0, 1.0}, 1.0);
    t.leads = {finalize(a1, 1, 1.0), finalize(a2, 2, 1.0)};
    const auto avg = t.average();
    EXPECT_NEAR(avg.nmae, 50.0, 1e-12);
    EXPECT_NEAR(avg.crps, 0.5 * (crps_gaussian(0, 1, 0) + crps_gaussian(0, 1, 1)), 1e-12);
}
