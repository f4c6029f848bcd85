#include <catch2/catch_amalgamated.hpp>

#include <votedyn/dynamics.hpp>

#include <cmath>
#include <optional>
#include <vector>

using namespace votedyn;
using Catch::Approx;

namespace {

// independent fixed-step explicit Euler references

struct EulerV1Out { double N, s; std::optional<double> tp; };

EulerV1Out euler_v1(const GlobalParamsV1& g, double S, double r, double horizon,
                    double dt) {
    double N = 1.0, s = S, t = 0.0;
    std::optional<double> tp;
    while (t < horizon - 0.5 * dt) {
        double list_rate;
        if (tp) {
            list_rate = g.nu * law_of_surfing_upper(1.0 + g.k_front * (t - *tp),
                                                    g.surf_mu, g.surf_lambda);
        } else if (t < g.upcoming_window) {
            list_rate = g.c * g.nu *
                        law_of_surfing_upper(1.0 + g.k_upcoming * t, g.surf_mu,
                                             g.surf_lambda);
        } else {
            list_rate = 0.0;
        }
        double dN = r * (list_rate + g.omega * s);
        double ds = -g.omega * s + g.fan_a * std::pow(N, -g.fan_b) * dN;
        N += dt * dN;
        s += dt * ds;
        t += dt;
        if (!tp && N >= g.promotion_threshold && t <= g.upcoming_window) tp = t;
    }
    return {N, s, tp};
}

struct EulerV2Out { double vF, vN, F, N; std::optional<double> tp; };

EulerV2Out euler_v2(const GlobalParamsV2& g, double rF, double rN, double S,
                    std::optional<double> forced_tp, std::optional<long long> vstar,
                    double horizon, double dt) {
    double vF = 0.0, vN = 1.0, F = S, N = g.user_count - S - 1.0, t = 0.0;
    std::optional<double> tp = forced_tp;
    while (t < horizon - 0.5 * dt) {
        double PN;
        if (tp && t >= *tp) {
            PN = law_of_surfing_upper(1.0 + g.k_front * (t - *tp), g.surf_mu,
                                      g.surf_lambda);
        } else if (t < g.upcoming_window) {
            PN = g.c * law_of_surfing_upper(1.0 + g.k_upcoming * t, g.surf_mu,
                                            g.surf_lambda);
        } else {
            PN = 0.0;
        }
        double dvF = g.omega * rF * F;
        double dvN = g.omega * rN * PN * N;
        double dv = dvF + dvN;
        double dF = -g.omega * F + g.rho * N * dv;
        double dN = -g.omega * PN * N - g.rho * N * dv;
        vF += dt * dvF;
        vN += dt * dvN;
        F += dt * dF;
        N += dt * dN;
        t += dt;
        if (!tp && vstar && vF + vN >= double(*vstar) && t <= g.upcoming_window)
            tp = t;
    }
    return {vF, vN, F, N, tp};
}

}  // namespace

TEST_CASE("v1 with zero interest reduces to friend-list decay") {
    GlobalParamsV1 g;
    StoryParams sp;
    sp.variant = ModelVariant::V1;
    sp.r = 0.0;
    sp.submitter_fans = 40;
    auto traj = solve_v1(g, sp, 10.0);
    REQUIRE(traj.time_unit == TimeUnit::WallHours);
    REQUIRE_FALSE(traj.promotion_time.has_value());
    REQUIRE(traj.final_votes() == Approx(1.0).margin(1e-9));
    REQUIRE(traj.samples.back().s == Approx(40.0 * std::exp(-0.12 * 10.0)).epsilon(1e-6));
}

TEST_CASE("v1 reproduces the reference fit table within 20 percent") {
    GlobalParamsV1 g;
    struct Row { double S, r, want, tp; };
    // tp references frozen from a high-accuracy independent integration
    std::vector<Row> rows = {
        {5, 0.51, 2229, 1.318}, {5, 0.44, 1921, 1.712}, {40, 0.32, 1297, 2.581},
        {40, 0.28, 1039, 3.193}, {160, 0.19, 740, 3.994}, {100, 0.13, 458, 8.869},
    };
    double prev = 1e18;
    for (const auto& row : rows) {
        StoryParams sp;
        sp.variant = ModelVariant::V1;
        sp.r = row.r;
        sp.submitter_fans = (long long)row.S;
        auto traj = solve_v1(g, sp, 100.0);
        double fin = traj.final_votes();
        REQUIRE(fin == Approx(row.want).epsilon(0.20));
        REQUIRE(fin < prev);  // table ordering
        prev = fin;
        REQUIRE(traj.promotion_time.has_value());
        REQUIRE(*traj.promotion_time == Approx(row.tp).epsilon(1e-3));
    }
}

TEST_CASE("v1 adaptive solve matches fine-step euler") {
    GlobalParamsV1 g;
    StoryParams sp;
    sp.variant = ModelVariant::V1;
    sp.r = 0.28;
    sp.submitter_fans = 40;
    auto traj = solve_v1(g, sp, 100.0);
    auto ref = euler_v1(g, 40.0, 0.28, 100.0, 1e-4);
    REQUIRE(traj.final_votes() == Approx(ref.N).epsilon(0.005));
    REQUIRE(traj.promotion_time.has_value());
    REQUIRE(*traj.promotion_time == Approx(*ref.tp).margin(0.01));
}

TEST_CASE("v1 low interest stays in the upcoming list and expires") {
    GlobalParamsV1 g;
    StoryParams sp;
    sp.variant = ModelVariant::V1;
    sp.r = 0.01;
    sp.submitter_fans = 0;
    auto traj = solve_v1(g, sp, 48.0);
    REQUIRE_FALSE(traj.promotion_time.has_value());
    REQUIRE(traj.final_votes() < 40.0);
    // votes freeze once removed and the friend list is exhausted
    double at24 = 0.0, at48 = traj.final_votes();
    for (const auto& s : traj.samples)
        if (s.t <= 24.0) at24 = s.votes;
    REQUIRE(at48 == Approx(at24).margin(0.5));
}

TEST_CASE("v1 final votes increase with interestingness") {
    GlobalParamsV1 g;
    double prev = -1.0;
    for (double r : {0.05, 0.1, 0.2, 0.3, 0.5, 0.8}) {
        StoryParams sp;
        sp.variant = ModelVariant::V1;
        sp.r = r;
        sp.submitter_fans = 40;
        double fin = solve_v1(g, sp, 100.0).final_votes();
        REQUIRE(fin > prev);
        prev = fin;
    }
}

TEST_CASE("v1 promotion region is monotone in r") {
    GlobalParamsV1 g;
    for (double S : {0.0, 20.0, 160.0}) {
        bool promoted_before = false;
        for (double r : {0.02, 0.05, 0.1, 0.15, 0.25, 0.4, 0.6, 0.9}) {
            bool p = promotion_time_v1(g, (long long)S, r).has_value();
            if (promoted_before) REQUIRE(p);
            promoted_before = p;
        }
    }
}

TEST_CASE("v2 with zero interest reduces to pool decay") {
    GlobalParamsV2 g;
    StoryParams sp;
    sp.r_fan = 0.0;
    sp.r_nonfan = 0.0;
    sp.submitter_fans = 30;
    auto traj = solve_v2(g, sp, 10.0);
    REQUIRE(traj.time_unit == TimeUnit::DiggHours);
    REQUIRE(traj.final_votes() == Approx(1.0).margin(1e-9));
    const auto& last = traj.samples.back();
    REQUIRE(last.vF == 0.0);
    REQUIRE(last.F == Approx(30.0 * std::exp(-0.2 * 10.0)).epsilon(1e-6));
    // non-fan pool drains only through upcoming-page exposure
    double I = integrate([&](double t) {
        return g.c * law_of_surfing_upper(1.0 + g.k_upcoming * t, g.surf_mu,
                                          g.surf_lambda);
    }, 0.0, 10.0, 1e-12);
    double wantN = (g.user_count - 31.0) * std::exp(-g.omega * I);
    REQUIRE(last.N == Approx(wantN).epsilon(1e-5));
}

TEST_CASE("v2 unpromoted medians match euler and the frozen reference") {
    GlobalParamsV2 g;
    g.promotion.kind = PromotionModel::Kind::Threshold;
    g.promotion.threshold = 1e9;  // promotion out of reach
    StoryParams sp;
    sp.r_fan = std::exp(-1.8);
    sp.r_nonfan = std::exp(-4.0);
    sp.submitter_fans = 5;
    auto traj = solve_v2(g, sp, 72.0);
    REQUIRE_FALSE(traj.promotion_time.has_value());
    const auto& last = traj.samples.back();
    REQUIRE(last.vF == Approx(3.1).margin(0.1));
    REQUIRE(last.vN == Approx(18.7).margin(0.3));
    auto ref = euler_v2(g, sp.r_fan, sp.r_nonfan, 5.0, std::nullopt, std::nullopt,
                        72.0, 1e-4);
    REQUIRE(last.vF == Approx(ref.vF).epsilon(0.005));
    REQUIRE(last.vN == Approx(ref.vN).epsilon(0.005));
    // removed stories collect no further list votes
    double vN24 = -1.0;
    for (const auto& s : traj.samples)
        if (s.t <= 24.0 + 1e-9) vN24 = s.vN;
    REQUIRE(last.vN == Approx(vN24).margin(1e-6));
}

TEST_CASE("v2 forced promotion at submission matches the frozen reference") {
    GlobalParamsV2 g;
    StoryParams sp;
    sp.r_fan = std::exp(-1.8);
    sp.r_nonfan = std::exp(-4.0);
    sp.submitter_fans = 5;
    SolveOptions opt;
    opt.known_promotion_time = 0.0;
    opt.sample_times = {1, 2, 4, 8, 16, 24, 36, 48, 60, 72};
    auto traj = solve_v2(g, sp, 72.0, opt);
    REQUIRE(traj.promotion_time.has_value());
    REQUIRE(*traj.promotion_time == 0.0);
    const auto& last = traj.samples.back();
    REQUIRE(last.vF == Approx(73.1863).epsilon(2e-3));
    REQUIRE(last.vN == Approx(1099.7172).epsilon(2e-3));
    REQUIRE(last.N == Approx(9567.05).epsilon(5e-3));
    // requested sample times are present
    REQUIRE(traj.samples.size() >= 10);
    bool saw16 = false;
    for (const auto& s : traj.samples) {
        if (s.t == 16.0) {
            saw16 = true;
            REQUIRE(s.vF == Approx(55.245).epsilon(2e-3));
            REQUIRE(s.vN == Approx(774.592).epsilon(2e-3));
        }
    }
    REQUIRE(saw16);
    auto ref = euler_v2(g, sp.r_fan, sp.r_nonfan, 5.0, 0.0, std::nullopt, 72.0, 1e-4);
    REQUIRE(last.vF == Approx(ref.vF).epsilon(0.005));
    REQUIRE(last.vN == Approx(ref.vN).epsilon(0.005));
}

TEST_CASE("v2 threshold promotion crosses and matches euler") {
    GlobalParamsV2 g;
    g.promotion.kind = PromotionModel::Kind::Threshold;
    g.promotion.threshold = 40.0;
    StoryParams sp;
    sp.r_fan = std::exp(-1.8);
    sp.r_nonfan = std::exp(-3.37);
    sp.submitter_fans = 30;
    auto traj = solve_v2(g, sp, 72.0);
    REQUIRE(traj.promotion_time.has_value());
    REQUIRE(*traj.promotion_time == Approx(18.67).margin(0.05));
    const auto& last = traj.samples.back();
    REQUIRE(last.vF == Approx(138.2).epsilon(0.02));
    REQUIRE(last.vN == Approx(1961.2).epsilon(0.02));
    // votes at the promotion instant equal the threshold
    double v_at_tp = 0.0;
    for (const auto& s : traj.samples)
        if (s.t <= *traj.promotion_time + 1e-12) v_at_tp = s.vF + s.vN;
    REQUIRE(v_at_tp == Approx(40.0).margin(1e-5));
    auto ref = euler_v2(g, sp.r_fan, sp.r_nonfan, 30.0, std::nullopt, 40, 72.0, 1e-4);
    REQUIRE(last.vF == Approx(ref.vF).epsilon(0.005));
    REQUIRE(last.vN == Approx(ref.vN).epsilon(0.005));
    REQUIRE(*traj.promotion_time == Approx(*ref.tp).margin(0.01));
}

TEST_CASE("v2 trajectory invariants") {
    GlobalParamsV2 g;  // logistic promotion: median rule applies
    StoryParams sp;
    sp.r_fan = std::exp(-1.4);
    sp.r_nonfan = std::exp(-3.3);
    sp.submitter_fans = 12;
    auto traj = solve_v2(g, sp, 72.0);
    REQUIRE(traj.promotion_time.has_value());
    const auto& ss = traj.samples;
    for (std::size_t i = 1; i < ss.size(); ++i) {
        REQUIRE(ss[i].vF >= ss[i - 1].vF - 1e-9);
        REQUIRE(ss[i].vN >= ss[i - 1].vN - 1e-9);
        REQUIRE(ss[i].N <= ss[i - 1].N + 1e-9);
        REQUIRE(ss[i].F + ss[i].N <= ss[i - 1].F + ss[i - 1].N + 1e-9);
        REQUIRE(ss[i].F >= -1e-9);
        REQUIRE(ss[i].N >= -1e-9);
    }
}

TEST_CASE("v2 final votes increase in each interest parameter") {
    GlobalParamsV2 g;
    double prev = -1.0;
    for (double rn : {0.005, 0.01, 0.02, 0.04, 0.08}) {
        StoryParams sp;
        sp.r_fan = 0.1;
        sp.r_nonfan = rn;
        sp.submitter_fans = 10;
        double fin = solve_v2(g, sp, 72.0).final_votes();
        REQUIRE(fin > prev);
        prev = fin;
    }
    prev = -1.0;
    for (double rf : {0.02, 0.08, 0.2, 0.5}) {
        StoryParams sp;
        sp.r_fan = rf;
        sp.r_nonfan = 0.02;
        sp.submitter_fans = 10;
        double fin = solve_v2(g, sp, 72.0).final_votes();
        REQUIRE(fin > prev);
        prev = fin;
    }
}

TEST_CASE("promotion time shifts later as interest drops") {
    GlobalParamsV1 g;
    auto t1 = promotion_time_v1(g, 40, 0.32);
    auto t2 = promotion_time_v1(g, 40, 0.28);
    REQUIRE(t1.has_value());
    REQUIRE(t2.has_value());
    REQUIRE(*t1 < *t2);
    REQUIRE_FALSE(promotion_time_v1(g, 0, 0.001).has_value());
}
