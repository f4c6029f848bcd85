#pragma once

// Core data model: vote streams, story records, the two parameter sets of
// the rate-equation models, and the site activity clock that converts wall
// hours to activity ("Digg") hours.
//
// Time conventions. VoteEvent.wall_time is hours since the story's
// submission. The V1 model runs in wall hours, the V2 model in Digg hours;
// synthetic corpora use the identity clock so both coincide there.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace votedyn {

enum class ModelVariant { V1, V2 };
enum class TimeUnit { WallHours, DiggHours };

struct VoteEvent {
    std::string story_id;
    std::string voter_id;
    double wall_time = 0.0;  // hours since story submission
    bool is_fan = false;
};

struct StoryRecord {
    std::string story_id;
    double submission_wall_time = 0.0;  // absolute epoch hours
    long long submitter_fans = 0;
    std::vector<VoteEvent> votes;  // ordered; votes[0] is the submitter
    std::optional<double> promotion_time;  // hours since submission
    std::optional<long long> final_votes;
};

// single-interestingness model, rates per wall hour
struct GlobalParamsV1 {
    double nu = 600.0;     // browsing users per hour
    double c = 0.3;        // upcoming-section visibility factor
    double omega = 0.12;   // friends-interface decay rate
    double surf_mu = 0.6;
    double surf_lambda = 0.6;
    double fan_a = 51.0;   // new fans per vote: fan_a * N^{-fan_b}
    double fan_b = 0.62;
    double promotion_threshold = 40.0;
    double k_upcoming = 3.60;  // pages per hour
    double k_front = 0.18;
    double upcoming_window = 24.0;  // hours until an unpromoted story is removed
};

struct PromotionModel {
    enum class Kind { Threshold, Logistic };
    Kind kind = Kind::Threshold;
    double threshold = 40.0;   // used by Threshold
    double intercept = 0.0;    // used by Logistic: P(v) = sigmoid(intercept + slope v)
    double slope = 0.0;
};

// fan/non-fan model, rates per Digg hour
struct GlobalParamsV2 {
    double omega = 0.2;          // per-user viewing rate
    double user_count = 70000.0; // active population U
    double c = 0.065;
    double surf_mu = 6.3;
    double surf_lambda = 0.14;
    double rho = 9.48e-6;        // per-vote fan conversion fraction of N
    double k_upcoming = 3.60;    // pages per Digg hour
    double k_front = 0.18;
    double upcoming_window = 24.0;  // Digg hours
    // promotion is probabilistic per vote; the logistic defaults put the
    // median promotion count near the V1 threshold
    PromotionModel promotion{PromotionModel::Kind::Logistic, 40.0, -11.0, 0.25};
};

struct StoryParams {
    ModelVariant variant = ModelVariant::V2;
    double r = 0.0;         // V1 interestingness
    double r_fan = 0.0;     // V2 fan vote probability
    double r_nonfan = 0.0;  // V2 non-fan vote probability
    long long submitter_fans = 0;
};

// Piecewise-linear monotone map wall hours -> Digg hours, built from the
// site-wide front page vote stream. Breakpoints store cumulative vote
// counts; the Digg time of a breakpoint is count / votes_per_digg_hour.
struct ActivityClock {
    struct Breakpoint {
        double wall_time = 0.0;        // absolute hours
        double cumulative_votes = 0.0;
    };
    std::vector<Breakpoint> breakpoints;  // strictly increasing wall_time
    double votes_per_digg_hour = 2500.0;
};

// front_page_vote_times: absolute wall hours, need not be sorted.
// Simultaneous votes merge into one breakpoint so wall times stay strictly
// increasing; Digg time between breakpoints interpolates linearly, so for
// any two vote times t1 < t2 the Digg interval is exactly
// (votes in (t1, t2]) / votes_per_digg_hour.
inline ActivityClock build_activity_clock(std::vector<double> front_page_vote_times,
                                          double votes_per_digg_hour = 2500.0) {
    if (votes_per_digg_hour <= 0.0)
        throw std::invalid_argument("votes_per_digg_hour must be positive");
    ActivityClock clock;
    clock.votes_per_digg_hour = votes_per_digg_hour;
    std::sort(front_page_vote_times.begin(), front_page_vote_times.end());
    double count = 0.0;
    for (std::size_t i = 0; i < front_page_vote_times.size(); ++i) {
        count += 1.0;
        if (i + 1 < front_page_vote_times.size() &&
            front_page_vote_times[i + 1] == front_page_vote_times[i])
            continue;
        clock.breakpoints.push_back({front_page_vote_times[i], count - 1.0});
    }
    return clock;
}

namespace detail {
// shared piecewise-linear evaluation; xs must be non-decreasing. A flat
// span in xs (possible for hand-built clocks) resolves to its first entry,
// so inversion returns the earliest wall time.
inline double piecewise_interp(const ActivityClock& c, double x, bool wall_to_digg) {
    const auto& bp = c.breakpoints;
    if (bp.empty()) return x;
    auto X = [&](std::size_t i) {
        return wall_to_digg ? bp[i].wall_time
                            : bp[i].cumulative_votes / c.votes_per_digg_hour;
    };
    auto Y = [&](std::size_t i) {
        return wall_to_digg ? bp[i].cumulative_votes / c.votes_per_digg_hour
                            : bp[i].wall_time;
    };
    if (bp.size() == 1) return Y(0) + (x - X(0));
    std::size_t lo = 0, hi = bp.size() - 1;
    if (x <= X(0)) {
        hi = 1;
    } else if (x >= X(hi)) {
        lo = hi - 1;
        // use the last strictly increasing segment for extrapolation
        while (lo > 0 && X(lo) == X(hi)) --lo;
    } else {
        while (hi - lo > 1) {
            std::size_t mid = (lo + hi) / 2;
            if (X(mid) <= x) lo = mid; else hi = mid;
        }
        if (X(lo) == x) {
            while (lo > 0 && X(lo - 1) == x) --lo;  // earliest on a flat span
            return Y(lo);
        }
    }
    double dx = X(hi) - X(lo);
    if (dx == 0.0) return Y(lo);
    return Y(lo) + (x - X(lo)) * (Y(hi) - Y(lo)) / dx;
}
}  // namespace detail

inline double to_digg_time(const ActivityClock& clock, double wall_t) {
    return detail::piecewise_interp(clock, wall_t, true);
}

inline double from_digg_time(const ActivityClock& clock, double digg_t) {
    return detail::piecewise_interp(clock, digg_t, false);
}

// total deterministic vote order: by time, ties by voter id
inline void normalize_votes(std::vector<VoteEvent>& votes) {
    std::sort(votes.begin(), votes.end(), [](const VoteEvent& a, const VoteEvent& b) {
        return std::tie(a.wall_time, a.voter_id) < std::tie(b.wall_time, b.voter_id);
    });
}

// directed follow graph: fan -> friend (the fan watches the friend)
class FanGraph {
  public:
    void add_edge(const std::string& fan, const std::string& friend_id) {
        follows_[fan].insert(friend_id);
        ++fans_of_[friend_id];
    }

    bool follows(const std::string& fan, const std::string& friend_id) const {
        auto it = follows_.find(fan);
        return it != follows_.end() && it->second.count(friend_id) > 0;
    }

    // number of users who watch the given user
    long long fan_count(const std::string& user) const {
        auto it = fans_of_.find(user);
        return it == fans_of_.end() ? 0 : it->second;
    }

    const std::unordered_set<std::string>* followees(const std::string& fan) const {
        auto it = follows_.find(fan);
        return it == follows_.end() ? nullptr : &it->second;
    }

  private:
    std::unordered_map<std::string, std::unordered_set<std::string>> follows_;
    std::unordered_map<std::string, long long> fans_of_;
};

// A vote is a fan vote when the voter follows any earlier voter of the
// same story. votes must already be ordered.
inline void compute_is_fan(std::vector<VoteEvent>& votes, const FanGraph& graph) {
    std::unordered_set<std::string> prior;
    for (auto& v : votes) {
        bool fan = false;
        if (const auto* fo = graph.followees(v.voter_id)) {
            if (fo->size() < prior.size()) {
                for (const auto& f : *fo)
                    if (prior.count(f)) { fan = true; break; }
            } else {
                for (const auto& p : prior)
                    if (fo->count(p)) { fan = true; break; }
            }
        }
        v.is_fan = fan;
        prior.insert(v.voter_id);
    }
}

}  // namespace votedyn
