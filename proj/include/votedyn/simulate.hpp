#pragma once

// Stochastic counterpart of the fan/non-fan mean-field model: an exact
// thinning simulation of the inhomogeneous vote point process, plus helpers
// that build synthetic story corpora and population activity samples.
//
// Bookkeeping mirrors the deterministic equations. Fans view the story's
// friends-list entry at rate omega and leave the pool afterwards whether or
// not they voted, so between votes the pool shrinks continuously by the
// non-voting share omega*(1-r_fan) while each fan vote removes one more
// member. Non-fans behave the same through the list-visibility factor, and
// every vote converts a Binomial(N, rho) handful of non-fans into fans.

#include <votedyn/core.hpp>
#include <votedyn/numerics.hpp>
#include <votedyn/rng.hpp>
#include <votedyn/visibility.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace votedyn {

struct SimulateOptions {
    // promote at this instant instead of sampling the per-vote rule
    std::optional<double> forced_promotion_time;
    // false keeps the story off the front page no matter the votes
    bool allow_promotion = true;
};

struct SimulatedStory {
    std::string story_id;
    StoryParams params;  // ground-truth draw behind the realization
    std::vector<VoteEvent> votes;  // model hours; first entry is the submitter
    std::optional<double> promotion_time;
    // cumulative count of the vote that triggered promotion; empty when
    // promotion was forced or never happened
    std::optional<long long> promotion_votes;
    long long final_votes() const { return (long long)votes.size(); }
};

inline SimulatedStory simulate_story(const GlobalParamsV2& g,
                                     const StoryParams& sp, double horizon,
                                     Rng& rng,
                                     const std::string& story_id = "story",
                                     const SimulateOptions& opt = {}) {
    SimulatedStory out;
    out.story_id = story_id;
    out.params = sp;
    out.votes.push_back({story_id, story_id + "_submitter", 0.0, false});

    double F = double(sp.submitter_fans);
    double N = std::max(0.0, g.user_count - F - 1.0);
    long long votes = 1;
    long long voter_seq = 0;
    const double W = g.upcoming_window;

    std::optional<double> tp = opt.forced_promotion_time;
    if (tp && *tp < 0.0) tp = 0.0;
    if (tp) out.promotion_time = tp;
    const bool sample_promotion = opt.allow_promotion && !tp;

    auto pn_at = [&](double u) -> double {
        if (tp && *tp <= u)
            return law_of_surfing_upper(1.0 + g.k_front * (u - *tp), g.surf_mu,
                                        g.surf_lambda);
        if (u < W)
            return g.c * law_of_surfing_upper(1.0 + g.k_upcoming * u, g.surf_mu,
                                              g.surf_lambda);
        return 0.0;
    };
    auto next_boundary = [&](double u) {
        double b = horizon;
        if (!(tp && *tp <= u) && u < W) b = std::min(b, W);
        if (tp && *tp > u) b = std::min(b, *tp);
        return b;
    };
    // deterministic drain of both pools across [t1, t2]; the interval never
    // straddles a list transition
    auto decay = [&](double t1, double t2) {
        if (t2 <= t1) return;
        F *= std::exp(-g.omega * (1.0 - sp.r_fan) * (t2 - t1));
        if (N <= 0.0) return;
        bool removed = !(tp && *tp <= t1) && t1 >= W - 1e-15;
        if (removed) return;
        double I = integrate([&](double u) { return pn_at(u); }, t1, t2, 1e-9,
                             1e-12);
        N *= std::exp(-g.omega * (1.0 - sp.r_nonfan) * I);
    };

    double t = 0.0;
    while (t < horizon - 1e-12) {
        double bnd = next_boundary(t);
        // both channels only lose intensity until the next vote or list
        // transition, so the current rate is a valid thinning bound
        double lam = g.omega * sp.r_fan * F +
                     g.omega * sp.r_nonfan * pn_at(t) * N;
        if (lam <= 1e-300) {
            decay(t, bnd);
            t = bnd;
            continue;
        }
        double prop = t + rng.exponential(lam);
        if (prop >= bnd) {
            decay(t, bnd);
            t = bnd;
            continue;
        }
        decay(t, prop);
        t = prop;
        double lam_fan = g.omega * sp.r_fan * F;
        double lam_non = g.omega * sp.r_nonfan * pn_at(t) * N;
        if (rng.uniform01() * lam > lam_fan + lam_non) continue;  // thinned
        bool fan = rng.uniform01() * (lam_fan + lam_non) < lam_fan;
        ++votes;
        if (fan) {
            F = std::max(0.0, F - 1.0);
        } else {
            N = std::max(0.0, N - 1.0);
        }
        out.votes.push_back(
            {story_id, story_id + "_u" + std::to_string(++voter_seq), t, fan});
        if (g.rho > 0.0 && N >= 1.0) {
            long long conv = rng.binomial((long long)N, g.rho);
            if (conv > 0) {
                N = std::max(0.0, N - double(conv));
                F += double(conv);
            }
        }
        if (sample_promotion && !tp && t < W &&
            rng.uniform01() < promotion_probability(g.promotion, votes)) {
            tp = t;
            out.promotion_time = t;
            out.promotion_votes = votes;
        }
    }
    return out;
}

inline StoryRecord to_record(const SimulatedStory& s) {
    StoryRecord r;
    r.story_id = s.story_id;
    r.submitter_fans = s.params.submitter_fans;
    r.votes = s.votes;
    r.promotion_time = s.promotion_time;
    r.final_votes = s.final_votes();
    return r;
}

// Draws one activity count per user from the lognormal-Poisson mixture,
// zeros included.
inline std::vector<long long> simulate_population_activity(double mu,
                                                           double sigma,
                                                           long long users,
                                                           Rng& rng) {
    std::vector<long long> out;
    out.reserve(std::size_t(std::max<long long>(users, 0)));
    for (long long i = 0; i < users; ++i)
        out.push_back(rng.poisson(rng.lognormal(mu, sigma)));
    return out;
}

struct CorpusOptions {
    long long stories = 100;
    double horizon = 72.0;  // model hours each story is observed
    // lognormal interest draws, resampled into (0, 1]
    double log_r_fan_mu = -1.8;
    double log_r_fan_sigma = 0.75;
    double log_r_nonfan_mu = -4.0;
    double log_r_nonfan_sigma = 0.63;
    // zero-inflated geometric submitter fan counts
    double fans_zero_prob = 0.3;
    double fans_mean = 20.0;
    std::uint64_t seed = 1;
};

struct Corpus {
    GlobalParamsV2 globals;
    std::vector<SimulatedStory> stories;
};

inline Corpus make_corpus(const GlobalParamsV2& g,
                          const CorpusOptions& opt = {}) {
    Corpus out;
    out.globals = g;
    out.stories.reserve(std::size_t(std::max<long long>(opt.stories, 0)));
    for (long long i = 0; i < opt.stories; ++i) {
        Rng rng(opt.seed, std::uint64_t(i));
        StoryParams sp;
        sp.variant = ModelVariant::V2;
        do {
            sp.r_fan = rng.lognormal(opt.log_r_fan_mu, opt.log_r_fan_sigma);
        } while (sp.r_fan > 1.0);
        do {
            sp.r_nonfan =
                rng.lognormal(opt.log_r_nonfan_mu, opt.log_r_nonfan_sigma);
        } while (sp.r_nonfan > 1.0);
        sp.submitter_fans = rng.uniform01() < opt.fans_zero_prob
                                ? 0
                                : rng.geometric(1.0 / opt.fans_mean);
        char name[32];
        std::snprintf(name, sizeof name, "s%04lld", i);
        out.stories.push_back(simulate_story(g, sp, opt.horizon, rng, name));
    }
    return out;
}

}  // namespace votedyn
