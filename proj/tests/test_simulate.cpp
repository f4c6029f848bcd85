#include <catch2/catch_amalgamated.hpp>

#include <votedyn/dynamics.hpp>
#include <votedyn/simulate.hpp>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

using namespace votedyn;
using Catch::Approx;

TEST_CASE("zero interest produces only the submitter vote") {
    GlobalParamsV2 g;
    StoryParams sp;
    sp.r_fan = 0.0;
    sp.r_nonfan = 0.0;
    sp.submitter_fans = 50;
    Rng rng(123, 0);
    auto story = simulate_story(g, sp, 72.0, rng, "s0");
    REQUIRE(story.votes.size() == 1);
    REQUIRE(story.votes[0].wall_time == 0.0);
    REQUIRE_FALSE(story.promotion_time.has_value());
}

TEST_CASE("identical seeds replay the identical story, streams differ") {
    GlobalParamsV2 g;
    StoryParams sp;
    sp.r_fan = 0.2;
    sp.r_nonfan = 0.02;
    sp.submitter_fans = 20;
    Rng a(99, 5), b(99, 5), c(99, 6);
    auto sa = simulate_story(g, sp, 48.0, a, "x");
    auto sb = simulate_story(g, sp, 48.0, b, "x");
    auto sc = simulate_story(g, sp, 48.0, c, "x");
    REQUIRE(sa.votes.size() == sb.votes.size());
    for (std::size_t i = 0; i < sa.votes.size(); ++i) {
        REQUIRE(sa.votes[i].wall_time == sb.votes[i].wall_time);
        REQUIRE(sa.votes[i].is_fan == sb.votes[i].is_fan);
        REQUIRE(sa.votes[i].voter_id == sb.votes[i].voter_id);
    }
    REQUIRE(sa.promotion_time == sb.promotion_time);
    bool differs = sa.votes.size() != sc.votes.size();
    if (!differs)
        for (std::size_t i = 0; i < sa.votes.size(); ++i)
            if (sa.votes[i].wall_time != sc.votes[i].wall_time) differs = true;
    REQUIRE(differs);
}

TEST_CASE("pure fan channel is a death process with unit-exponential gaps") {
    // with full fan interest, no list exposure and no conversion the vote
    // times form a death process at rate omega * (remaining fans)
    GlobalParamsV2 g;
    g.rho = 0.0;
    g.promotion.kind = PromotionModel::Kind::Threshold;
    g.promotion.threshold = 1e18;
    StoryParams sp;
    sp.r_fan = 1.0;
    sp.r_nonfan = 0.0;
    sp.submitter_fans = 50;

    std::vector<double> z;
    for (int rep = 0; rep < 260; ++rep) {
        Rng rng(2024, (std::uint64_t)rep);
        auto story = simulate_story(g, sp, 1e6, rng, "s");
        REQUIRE(story.votes.size() <= 51);
        double prev = 0.0;
        for (std::size_t k = 1; k < story.votes.size(); ++k) {
            REQUIRE(story.votes[k].is_fan);
            double gap = story.votes[k].wall_time - prev;
            prev = story.votes[k].wall_time;
            double rate = g.omega * (50.0 - double(k - 1));
            z.push_back(1.0 - std::exp(-rate * gap));
        }
    }
    REQUIRE(z.size() > 8000);
    std::sort(z.begin(), z.end());
    double d = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        double lo = double(i) / z.size(), hi = double(i + 1) / z.size();
        d = std::max({d, std::abs(z[i] - lo), std::abs(z[i] - hi)});
    }
    REQUIRE(ks_pvalue(d, z.size()) > 0.01);
}

TEST_CASE("ensemble mean tracks the deterministic trajectory") {
    GlobalParamsV2 g;
    StoryParams sp;
    sp.r_fan = std::exp(-1.8);
    sp.r_nonfan = std::exp(-4.0);
    sp.submitter_fans = 5;
    SolveOptions sopt;
    sopt.known_promotion_time = 0.0;
    auto ode = solve_v2(g, sp, 8.0, sopt);
    double odeF = ode.samples.back().vF, odeN = ode.samples.back().vN;

    SimulateOptions opt;
    opt.forced_promotion_time = 0.0;
    const int runs = 200;
    double mF = 0, mN = 0, qF = 0, qN = 0;
    for (int i = 0; i < runs; ++i) {
        Rng rng(777, (std::uint64_t)i);
        auto story = simulate_story(g, sp, 8.0, rng, "s", opt);
        double f = 0, n = 0;
        for (const auto& v : story.votes) (v.is_fan ? f : n) += 1.0;
        mF += f; mN += n; qF += f * f; qN += n * n;
    }
    mF /= runs; mN /= runs; qF = qF / runs - mF * mF; qN = qN / runs - mN * mN;
    double seF = std::sqrt(qF / runs), seN = std::sqrt(qN / runs);
    REQUIRE(std::abs(mF - odeF) < 4.0 * seF + 0.05);
    // the deterministic count includes the submitter's vote in vN
    REQUIRE(std::abs(mN - odeN) < 4.0 * seN + 0.05);
}

TEST_CASE("unpromoted stories collect no list votes after removal") {
    GlobalParamsV2 g;
    g.promotion.kind = PromotionModel::Kind::Threshold;
    g.promotion.threshold = 1e18;
    StoryParams sp;
    sp.r_fan = std::exp(-1.8);
    sp.r_nonfan = std::exp(-3.0);
    sp.submitter_fans = 8;
    int late_nonfan = 0, early_nonfan = 0;
    for (int i = 0; i < 40; ++i) {
        Rng rng(31, (std::uint64_t)i);
        auto story = simulate_story(g, sp, 72.0, rng, "s");
        for (std::size_t k = 1; k < story.votes.size(); ++k) {
            if (!story.votes[k].is_fan) {
                if (story.votes[k].wall_time > g.upcoming_window + 1e-12)
                    ++late_nonfan;
                else
                    ++early_nonfan;
            }
        }
    }
    REQUIRE(early_nonfan > 0);
    REQUIRE(late_nonfan == 0);
}

TEST_CASE("per-vote promotion sampling matches the survival curve") {
    GlobalParamsV2 g;
    g.rho = 0.0;
    StoryParams sp;
    sp.r_fan = 0.8;
    sp.r_nonfan = 0.0;
    sp.submitter_fans = 200;
    const int runs = 400;
    std::vector<long long> at;
    for (int i = 0; i < runs; ++i) {
        Rng rng(4242, (std::uint64_t)i);
        auto story = simulate_story(g, sp, 72.0, rng, "s");
        if (story.promotion_votes) at.push_back(*story.promotion_votes);
    }
    REQUIRE((int)at.size() >= 395);
    auto cdf = [&](long long v) {
        long long n = 0;
        for (long long x : at) if (x <= v) ++n;
        return double(n) / double(at.size());
    };
    REQUIRE(cdf(30) == Approx(1.0 - promotion_survival(g.promotion, 30)).margin(0.07));
    REQUIRE(cdf(37) == Approx(1.0 - promotion_survival(g.promotion, 37)).margin(0.10));
    REQUIRE(cdf(45) == Approx(1.0 - promotion_survival(g.promotion, 45)).margin(0.05));
    for (long long x : at) REQUIRE(x >= 2);
}

TEST_CASE("population activity reproduces the heavy-tailed mixture") {
    const long long users = 200000;
    Rng rng(5150, 0);
    auto counts = simulate_population_activity(-2.06, 1.82, users, rng);
    REQUIRE((long long)counts.size() == users);
    long long zero = 0, one = 0, two = 0;
    double mean = 0.0;
    for (long long k : counts) {
        if (k == 0) ++zero;
        else if (k == 1) ++one;
        else if (k == 2) ++two;
        mean += double(k);
    }
    mean /= double(users);
    // moments and masses of the lognormal-Poisson mixture
    REQUIRE(double(zero) / users == Approx(0.75668506).margin(0.004));
    REQUIRE(double(one) / users == Approx(0.13693899).margin(0.0035));
    REQUIRE(double(two) / users == Approx(0.04516680).margin(0.0025));
    REQUIRE(mean == Approx(std::exp(-2.06 + 0.5 * 1.82 * 1.82)).margin(0.035));
}

TEST_CASE("corpus generation is deterministic and mixes outcomes") {
    GlobalParamsV2 g;
    CorpusOptions opt;
    opt.stories = 80;
    opt.seed = 7;
    auto a = make_corpus(g, opt);
    auto b = make_corpus(g, opt);
    REQUIRE(a.stories.size() == 80);
    REQUIRE(b.stories.size() == 80);
    std::set<std::string> ids;
    int promoted = 0;
    for (std::size_t i = 0; i < a.stories.size(); ++i) {
        const auto& s = a.stories[i];
        REQUIRE(s.votes.size() == b.stories[i].votes.size());
        REQUIRE(s.votes.front().wall_time == 0.0);
        REQUIRE(s.params.r_fan > 0.0);
        REQUIRE(s.params.r_fan <= 1.0);
        REQUIRE(s.params.r_nonfan > 0.0);
        REQUIRE(s.params.r_nonfan <= 1.0);
        REQUIRE(s.params.submitter_fans >= 0);
        ids.insert(s.story_id);
        if (s.promotion_time) ++promoted;
        for (std::size_t k = 1; k < s.votes.size(); ++k)
            REQUIRE(s.votes[k].wall_time >= s.votes[k - 1].wall_time);
    }
    REQUIRE(ids.size() == 80);
    REQUIRE(promoted > 0);
    REQUIRE(promoted < 80);
}
