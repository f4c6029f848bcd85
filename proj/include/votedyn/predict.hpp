#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "dynamics.hpp"
#include "estimate.hpp"

namespace votedyn {

struct PredictionConfig {
    long long vote_window = 10;  // votes the predictor is allowed to see
    double t_final = 72.0;       // forecast horizon, digg hours
    long long popularity_threshold = 500;
    bool use_prior = true;
    bool constrain_equal_r = false;
    // population prior for the MAP fit
    double prior_mu_fan = -1.8;
    double prior_sigma_fan = 0.75;
    double prior_mu_nonfan = -4.0;
    double prior_sigma_nonfan = 0.63;
};

// First k votes of a story. Outcome fields are dropped and the promotion
// time is kept only when it falls inside the window, so a predictor handed
// the result cannot see past the window's last vote.
inline StoryRecord truncate_story(const StoryRecord& s, long long k) {
    StoryRecord out;
    out.story_id = s.story_id;
    out.submission_wall_time = s.submission_wall_time;
    out.submitter_fans = s.submitter_fans;
    std::size_t n = std::min(s.votes.size(),
                             std::size_t(std::max<long long>(k, 0)));
    out.votes.assign(s.votes.begin(), s.votes.begin() + n);
    if (!out.votes.empty() && s.promotion_time &&
        *s.promotion_time <= out.votes.back().wall_time)
        out.promotion_time = s.promotion_time;
    return out;
}

struct StoryPrediction {
    std::string story_id;
    bool available = false;
    double window_time = 0.0;  // digg hours covered by the window
    long long window_votes = 0;
    double r_fan = 0.0;
    double r_nonfan = 0.0;
    double predicted_final = 0.0;
    bool predicted_popular = false;
    std::optional<double> promotion_time;  // observed in-window or forecast
};

// Fit the interest rates on the vote window, rebuild the audience pools at
// its end, and run the mean-field model forward to the horizon. Promotion
// observed inside the window is taken as given; otherwise the forward
// solve applies the promotion rule.
inline StoryPrediction predict_story(const GlobalParamsV2& g,
                                     const StoryRecord& story,
                                     const PredictionConfig& cfg) {
    StoryPrediction out;
    out.story_id = story.story_id;
    StoryRecord w = truncate_story(story, cfg.vote_window);
    if (w.votes.empty()) return out;
    double t_w = w.votes.back().wall_time;
    out.window_time = t_w;
    out.window_votes = (long long)w.votes.size();

    FitOptions fo;
    fo.observed_until = t_w;
    fo.use_prior = cfg.use_prior;
    fo.equal_r = cfg.constrain_equal_r;
    fo.prior_mu_fan = cfg.prior_mu_fan;
    fo.prior_sigma_fan = cfg.prior_sigma_fan;
    fo.prior_mu_nonfan = cfg.prior_mu_nonfan;
    fo.prior_sigma_nonfan = cfg.prior_sigma_nonfan;
    StoryFit fit = fit_story_interest(g, w, fo);
    if (!fit.converged) return out;
    out.r_fan = fit.r_fan;
    out.r_nonfan = fit.r_nonfan;

    StoryExposure ex = reconstruct_exposure(g, w, t_w);
    std::array<double, 4> y{double(ex.n_fan), 1.0 + double(ex.n_nonfan),
                            ex.F_end, ex.N_end};
    StoryParams sp;
    sp.variant = ModelVariant::V2;
    sp.r_fan = fit.r_fan;
    sp.r_nonfan = fit.r_nonfan;
    sp.submitter_fans = story.submitter_fans;

    TrajectoryV2 traj =
        solve_v2_from(g, sp, t_w, y, w.promotion_time, cfg.t_final);
    out.available = true;
    out.predicted_final = traj.final_votes();
    out.promotion_time = traj.promotion_time;
    out.predicted_popular =
        out.predicted_final >= double(cfg.popularity_threshold);
    return out;
}

inline bool predict_promotion(const GlobalParamsV2& g, const StoryRecord& story,
                              long long first_votes,
                              const PredictionConfig& base = {}) {
    PredictionConfig cfg = base;
    cfg.vote_window = first_votes;
    StoryPrediction p = predict_story(g, story, cfg);
    return p.available && p.promotion_time.has_value();
}

// -------- extrapolation baseline --------

struct BaselineCalibration {
    double intercept = 0.0;
    double slope = 1.0;
    long long stories = 0;  // calibration stories actually used
};

// v * t_final / t for a window of v votes whose last vote lands at t
inline double raw_extrapolation(const StoryRecord& story, long long window,
                                double t_final) {
    StoryRecord w = truncate_story(story, window);
    if (w.votes.empty()) throw std::invalid_argument("empty vote window");
    double t = w.votes.back().wall_time;
    if (t <= 0.0) throw std::invalid_argument("vote window spans zero time");
    return double(w.votes.size()) * t_final / t;
}

// Least-squares affine map from raw extrapolations to observed finals. The
// calibration set must be disjoint from whatever the map is applied to.
inline BaselineCalibration calibrate_baseline(
    const std::vector<StoryRecord>& calibration, long long window,
    double t_final) {
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    long long n = 0;
    for (const auto& s : calibration) {
        if (!s.final_votes) continue;
        StoryRecord w = truncate_story(s, window);
        if (w.votes.empty() || w.votes.back().wall_time <= 0.0) continue;
        double x = double(w.votes.size()) * t_final / w.votes.back().wall_time;
        double y = double(*s.final_votes);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    BaselineCalibration c;
    c.stories = n;
    double det = double(n) * sxx - sx * sx;
    if (n >= 2 && det > 0.0) {
        c.slope = (double(n) * sxy - sx * sy) / det;
        c.intercept = (sy - c.slope * sx) / double(n);
    }
    return c;
}

inline double extrapolate_baseline(const StoryRecord& story, long long window,
                                   double t_final,
                                   const BaselineCalibration& c) {
    return c.intercept + c.slope * raw_extrapolation(story, window, t_final);
}

// -------- evaluation --------

struct ReportRow {
    std::string story_id;
    bool available = false;
    double predicted_final = 0.0;
    bool predicted_popular = false;
    std::optional<double> actual_final;
};

struct PredictionReport {
    std::vector<ReportRow> rows;
    long long evaluated = 0;  // available rows with a known outcome
    long long unavailable = 0;
    double error_rate = 0.0;
    double pearson_r = 0.0;
    double spearman_rho = 0.0;
};

inline PredictionReport make_report(std::vector<ReportRow> rows,
                                    long long popularity_threshold) {
    PredictionReport rep;
    std::vector<double> pred, act;
    long long wrong = 0;
    for (const auto& r : rows) {
        if (!r.available) {
            ++rep.unavailable;
            continue;
        }
        if (!r.actual_final) continue;
        ++rep.evaluated;
        pred.push_back(r.predicted_final);
        act.push_back(*r.actual_final);
        bool actual_popular = *r.actual_final >= double(popularity_threshold);
        if (r.predicted_popular != actual_popular) ++wrong;
    }
    if (rep.evaluated > 0) rep.error_rate = double(wrong) / double(rep.evaluated);
    if (rep.evaluated >= 2) {
        rep.pearson_r = pearson(pred, act);
        rep.spearman_rho = spearman(pred, act);
    }
    rep.rows = std::move(rows);
    return rep;
}

inline PredictionReport evaluate(const GlobalParamsV2& g,
                                 const std::vector<StoryRecord>& corpus,
                                 const PredictionConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    std::vector<ReportRow> rows;
    rows.reserve(corpus.size());
    for (const auto& s : corpus) {
        StoryPrediction p = predict_story(g, s, cfg);
        ReportRow r;
        r.story_id = s.story_id;
        r.available = p.available;
        r.predicted_final = p.predicted_final;
        r.predicted_popular = p.predicted_popular;
        if (s.final_votes) r.actual_final = double(*s.final_votes);
        rows.push_back(std::move(r));
    }
    return make_report(std::move(rows), cfg.popularity_threshold);
}

// Baseline counterpart of evaluate(). Taking the calibration set as a
// separate argument keeps it structurally disjoint from the scored corpus.
inline PredictionReport evaluate_baseline(
    const std::vector<StoryRecord>& corpus,
    const std::vector<StoryRecord>& calibration, const PredictionConfig& cfg) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    BaselineCalibration c =
        calibrate_baseline(calibration, cfg.vote_window, cfg.t_final);
    std::vector<ReportRow> rows;
    rows.reserve(corpus.size());
    for (const auto& s : corpus) {
        ReportRow r;
        r.story_id = s.story_id;
        StoryRecord w = truncate_story(s, cfg.vote_window);
        if (!w.votes.empty() && w.votes.back().wall_time > 0.0) {
            r.available = true;
            r.predicted_final =
                c.intercept + c.slope * double(w.votes.size()) * cfg.t_final /
                                  w.votes.back().wall_time;
            r.predicted_popular =
                r.predicted_final >= double(cfg.popularity_threshold);
        }
        if (s.final_votes) r.actual_final = double(*s.final_votes);
        rows.push_back(std::move(r));
    }
    return make_report(std::move(rows), cfg.popularity_threshold);
}

// -------- descriptive relations --------

struct FanFractionBucket {
    long long fan_votes = 0;  // fan votes among the first reader votes
    long long stories = 0;
    double mean_final = 0.0;
};

// Mean final votes bucketed by how many of a story's first `first_votes`
// reader votes (the submitter's own vote excluded) came from fans. Stories
// with fewer reader votes than the window are left out.
inline std::vector<FanFractionBucket> early_fan_fraction_curve(
    const std::vector<StoryRecord>& corpus, long long first_votes = 10) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    std::vector<FanFractionBucket> buckets(std::size_t(first_votes) + 1);
    for (std::size_t k = 0; k < buckets.size(); ++k)
        buckets[k].fan_votes = (long long)k;
    for (const auto& s : corpus) {
        if (!s.final_votes) continue;
        if ((long long)s.votes.size() < first_votes + 1) continue;
        long long fans = 0;
        for (long long i = 1; i <= first_votes; ++i)
            fans += s.votes[std::size_t(i)].is_fan;
        auto& b = buckets[std::size_t(fans)];
        b.mean_final += (double(*s.final_votes) - b.mean_final) /
                        double(++b.stories);
    }
    return buckets;
}

struct InterestCorrelations {
    double r_ratio = 0.0;  // corr(final, fitted r_nonfan / r_fan)
    double v_ratio = 0.0;  // corr(final, non-fan votes / fan votes)
    long long stories = 0;
};

// Correlation of the final count with the fitted interest ratio versus the
// raw vote-count ratio, over stories that collected at least one fan vote.
// Only the prior fields of `cfg` matter here.
inline InterestCorrelations interest_outcome_correlations(
    const GlobalParamsV2& g, const std::vector<StoryRecord>& corpus,
    double observed_until = 72.0, const PredictionConfig& cfg = {}) {
    std::vector<double> fin, rr, vr;
    FitOptions fo;
    fo.observed_until = observed_until;
    fo.use_prior = true;
    fo.prior_mu_fan = cfg.prior_mu_fan;
    fo.prior_sigma_fan = cfg.prior_sigma_fan;
    fo.prior_mu_nonfan = cfg.prior_mu_nonfan;
    fo.prior_sigma_nonfan = cfg.prior_sigma_nonfan;
    for (const auto& s : corpus) {
        if (!s.final_votes) continue;
        long long vF = 0, vN = 1;  // the submitter's vote is a non-fan vote
        for (std::size_t i = 1; i < s.votes.size(); ++i) {
            if (s.votes[i].wall_time > observed_until) break;
            if (s.votes[i].is_fan)
                ++vF;
            else
                ++vN;
        }
        if (vF < 1) continue;
        StoryFit f = fit_story_interest(g, s, fo);
        if (!f.converged || f.r_fan <= 0.0) continue;
        fin.push_back(double(*s.final_votes));
        rr.push_back(f.r_nonfan / f.r_fan);
        vr.push_back(double(vN) / double(vF));
    }
    InterestCorrelations out;
    out.stories = (long long)fin.size();
    if (out.stories >= 3) {
        out.r_ratio = pearson(fin, rr);
        out.v_ratio = pearson(fin, vr);
    }
    return out;
}

}  // namespace votedyn
