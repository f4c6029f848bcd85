#include <catch2/catch_amalgamated.hpp>

#include <votedyn/core.hpp>
#include <votedyn/numerics.hpp>
#include <votedyn/rng.hpp>

#include <cmath>
#include <string>
#include <vector>

using namespace votedyn;
using Catch::Approx;

static std::vector<double> uniform_stream(double rate_per_hour, double hours) {
    // one event at t=0 and one exactly at the end
    std::vector<double> t;
    long long n = (long long)std::llround(rate_per_hour * hours);
    for (long long i = 0; i <= n; ++i) t.push_back(double(i) / rate_per_hour);
    return t;
}

TEST_CASE("default parameter sets") {
    GlobalParamsV1 p1;
    REQUIRE(p1.nu == 600.0);
    REQUIRE(p1.c == 0.3);
    REQUIRE(p1.omega == 0.12);
    REQUIRE(p1.surf_mu == 0.6);
    REQUIRE(p1.surf_lambda == 0.6);
    REQUIRE(p1.fan_a == 51.0);
    REQUIRE(p1.fan_b == 0.62);
    REQUIRE(p1.promotion_threshold == 40.0);
    REQUIRE(p1.k_upcoming == 3.60);
    REQUIRE(p1.k_front == 0.18);

    GlobalParamsV2 p2;
    REQUIRE(p2.omega == 0.2);
    REQUIRE(p2.user_count == 70000.0);
    REQUIRE(p2.c == 0.065);
    REQUIRE(p2.surf_mu == 6.3);
    REQUIRE(p2.surf_lambda == 0.14);
    REQUIRE(p2.rho == 9.48e-6);
    REQUIRE(p2.k_upcoming == 3.60);
    REQUIRE(p2.k_front == 0.18);
    REQUIRE(p2.rho * (p2.user_count - 1.0) < 1.0);
}

TEST_CASE("activity clock identity for a uniform stream") {
    auto clock = build_activity_clock(uniform_stream(2500.0, 4.0), 2500.0);
    REQUIRE(to_digg_time(clock, 4.0) - to_digg_time(clock, 0.0) == Approx(4.0).margin(1e-12));
    for (double t : {0.0, 0.25, 1.0, 2.0, 3.7, 4.0})
        REQUIRE(to_digg_time(clock, t) == Approx(t).margin(1e-9));
}

TEST_CASE("activity clock compresses a double-rate hour") {
    // 5000 votes/hour for the first wall hour, then 2500/hour for two more
    std::vector<double> t;
    for (int i = 0; i < 5000; ++i) t.push_back(i / 5000.0);
    for (int i = 0; i <= 5000; ++i) t.push_back(1.0 + i / 2500.0);
    auto clock = build_activity_clock(t, 2500.0);
    REQUIRE(to_digg_time(clock, 0.5) - to_digg_time(clock, 0.0) == Approx(1.0).margin(1e-9));
    REQUIRE(to_digg_time(clock, 1.0) - to_digg_time(clock, 0.0) == Approx(2.0).margin(1e-9));
    REQUIRE(to_digg_time(clock, 3.0) - to_digg_time(clock, 1.0) == Approx(2.0).margin(1e-9));
}

TEST_CASE("activity clock on a sinusoidal day") {
    // rate(t) = 2500 (1 + 0.5 sin(2 pi t / 24)), averages 2500/hour over 24 h.
    // cumulative(t) = 2500 t + (15000/pi)(1 - cos(pi t / 12))
    auto cum = [](double t) {
        return 2500.0 * t + 15000.0 / M_PI * (1.0 - std::cos(M_PI * t / 12.0));
    };
    std::vector<double> events;
    events.reserve(60001);
    for (long long k = 0; k <= 60000; ++k) {
        double target = double(k);
        auto f = [&](double t) { return cum(t) - target; };
        events.push_back(k == 0 ? 0.0 : bisect_root(f, 0.0, 24.0, 1e-13));
    }
    auto clock = build_activity_clock(events, 2500.0);
    REQUIRE(to_digg_time(clock, 24.0) - to_digg_time(clock, 0.0) == Approx(24.0).margin(1e-9));
    for (double t : {3.0, 6.0, 13.5, 21.0})
        REQUIRE(to_digg_time(clock, t) - to_digg_time(clock, 0.0) ==
                Approx(cum(t) / 2500.0).margin(1e-6));
    // strictly monotone
    double prev = to_digg_time(clock, 0.0);
    for (double t = 0.1; t <= 24.0; t += 0.1) {
        double d = to_digg_time(clock, t);
        REQUIRE(d > prev);
        prev = d;
    }
    // round trip on both sides
    Rng rng(11, 0);
    for (int i = 0; i < 200; ++i) {
        double t = rng.uniform(0.0, 24.0);
        REQUIRE(from_digg_time(clock, to_digg_time(clock, t)) == Approx(t).margin(1e-9));
        double d = rng.uniform(to_digg_time(clock, 0.0), to_digg_time(clock, 24.0));
        REQUIRE(to_digg_time(clock, from_digg_time(clock, d)) == Approx(d).margin(1e-9));
    }
}

TEST_CASE("activity clock extrapolates with terminal slopes") {
    auto clock = build_activity_clock(uniform_stream(2500.0, 2.0), 2500.0);
    REQUIRE(to_digg_time(clock, 3.0) == Approx(3.0).margin(1e-6));
    REQUIRE(to_digg_time(clock, -1.0) == Approx(-1.0).margin(1e-6));
    REQUIRE(from_digg_time(clock, 3.0) == Approx(3.0).margin(1e-6));
}

TEST_CASE("degenerate clocks fall back to the identity map") {
    ActivityClock empty;
    REQUIRE(to_digg_time(empty, 5.5) == 5.5);
    REQUIRE(from_digg_time(empty, 5.5) == 5.5);
    auto one = build_activity_clock({2.0}, 2500.0);
    REQUIRE(to_digg_time(one, 3.0) - to_digg_time(one, 2.0) == Approx(1.0));
}

TEST_CASE("flat-ish digg segments invert to the earliest wall time") {
    // hand-built clock with an exactly flat middle segment
    ActivityClock c;
    c.votes_per_digg_hour = 1.0;
    c.breakpoints = {{0.0, 0.0}, {1.0, 5.0}, {4.0, 5.0}, {5.0, 10.0}};
    REQUIRE(from_digg_time(c, 5.0) == Approx(1.0).margin(1e-12));
}

TEST_CASE("vote normalization gives a total deterministic order") {
    std::vector<VoteEvent> votes = {
        {"s", "carol", 2.0, false},
        {"s", "alice", 1.0, false},
        {"s", "bob", 1.0, false},
        {"s", "dave", 0.5, false},
    };
    normalize_votes(votes);
    REQUIRE(votes[0].voter_id == "dave");
    REQUIRE(votes[1].voter_id == "alice");  // tie at t=1 broken by voter_id
    REQUIRE(votes[2].voter_id == "bob");
    REQUIRE(votes[3].voter_id == "carol");
    auto again = votes;
    Rng rng(13, 0);
    rng.shuffle(again.begin(), again.end());
    normalize_votes(again);
    for (std::size_t i = 0; i < votes.size(); ++i)
        REQUIRE(again[i].voter_id == votes[i].voter_id);
}

TEST_CASE("fan labels come from following any prior voter") {
    std::vector<VoteEvent> votes = {
        {"s", "submitter", 0.0, false},
        {"s", "fan_of_sub", 0.5, false},
        {"s", "stranger", 1.0, false},
        {"s", "late_fan", 2.0, false},
    };
    FanGraph g;
    g.add_edge("fan_of_sub", "submitter");
    g.add_edge("late_fan", "stranger");
    g.add_edge("stranger", "nobody_here");
    compute_is_fan(votes, g);
    REQUIRE_FALSE(votes[0].is_fan);
    REQUIRE(votes[1].is_fan);
    REQUIRE_FALSE(votes[2].is_fan);
    REQUIRE(votes[3].is_fan);
    REQUIRE(g.fan_count("submitter") == 1);
    REQUIRE(g.fan_count("nobody_here") == 1);
    REQUIRE(g.fan_count("unknown") == 0);
}

TEST_CASE("story params carry the model variant") {
    StoryParams sp;
    sp.variant = ModelVariant::V2;
    sp.r_fan = 0.165;
    sp.r_nonfan = 0.018;
    sp.submitter_fans = 5;
    REQUIRE(sp.variant == ModelVariant::V2);
    StoryParams s1;
    s1.variant = ModelVariant::V1;
    s1.r = 0.51;
    REQUIRE(s1.r == 0.51);
}
