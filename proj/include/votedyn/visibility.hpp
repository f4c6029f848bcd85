#pragma once

// Visibility model: how deep users browse (law of surfing), where a story
// sits on the upcoming/front page lists, and the promotion rule.

#include <cmath>
#include <cstdint>
#include <optional>

#include <votedyn/core.hpp>
#include <votedyn/numerics.hpp>

namespace votedyn {

// Fraction of users who view at least page m, i.e. the upper cumulative of
// the inverse-Gaussian page-stopping law with mean mu and shape lambda:
//   f(m) = (1/2) [ F(-mu) - e^{2 lambda/mu} F(mu) ],
//   F(x) = erfc(alpha (m-1+x)/mu),  alpha = sqrt(lambda / (2(m-1))).
// The product e^{2 lambda/mu} erfc(z) is evaluated as erfcx(z) e^{-w^2}
// (with w the first argument), which cancels the overflow for large
// lambda/mu and keeps the subtraction stable.
inline double law_of_surfing_upper(double m, double surf_mu, double surf_lambda) {
    if (m <= 1.0) return 1.0;
    const double alpha = std::sqrt(surf_lambda / (2.0 * (m - 1.0)));
    const double w = alpha * (m - 1.0 - surf_mu) / surf_mu;
    const double z = alpha * (m - 1.0 + surf_mu) / surf_mu;
    double f = 0.5 * (std::erfc(w) - erfcx(z) * std::exp(-w * w));
    if (f < 0.0) f = 0.0;  // cancellation guard in the far tail
    return f < 1.0 ? f : 1.0;
}

// d f / d mu and d f / d lambda in closed form (the erfc(w) derivative
// terms cancel against the scaled second term)
inline double law_of_surfing_dmu(double m, double surf_mu, double surf_lambda) {
    if (m <= 1.0) return 0.0;
    const double alpha = std::sqrt(surf_lambda / (2.0 * (m - 1.0)));
    const double w = alpha * (m - 1.0 - surf_mu) / surf_mu;
    const double z = alpha * (m - 1.0 + surf_mu) / surf_mu;
    return surf_lambda / (surf_mu * surf_mu) * erfcx(z) * std::exp(-w * w);
}

inline double law_of_surfing_dlambda(double m, double surf_mu, double surf_lambda) {
    if (m <= 1.0) return 0.0;
    const double alpha = std::sqrt(surf_lambda / (2.0 * (m - 1.0)));
    const double w = alpha * (m - 1.0 - surf_mu) / surf_mu;
    const double z = alpha * (m - 1.0 + surf_mu) / surf_mu;
    return std::exp(-w * w) *
           (alpha / (surf_lambda * std::sqrt(M_PI)) - erfcx(z) / surf_mu);
}

enum class ListLocation { Upcoming, FrontPage, Removed };

struct StoryPage {
    ListLocation location = ListLocation::Upcoming;
    double page = 1.0;
};

// List position at time t (hours since submission, in the model's time
// unit). promotion_time past the upcoming window never happens in the
// models and is treated as unpromoted.
inline StoryPage story_page(double t, std::optional<double> promotion_time,
                            double k_upcoming, double k_front,
                            double upcoming_window = 24.0) {
    if (promotion_time && *promotion_time <= upcoming_window && t >= *promotion_time)
        return {ListLocation::FrontPage, 1.0 + k_front * (t - *promotion_time)};
    if (t < upcoming_window)
        return {ListLocation::Upcoming, 1.0 + k_upcoming * t};
    return {ListLocation::Removed, 0.0};
}

// Probability that a browsing non-fan encounters the story.
inline double nonfan_visibility(ListLocation location, double page, double c,
                                double surf_mu, double surf_lambda) {
    switch (location) {
        case ListLocation::FrontPage:
            return law_of_surfing_upper(page, surf_mu, surf_lambda);
        case ListLocation::Upcoming:
            return c * law_of_surfing_upper(page, surf_mu, surf_lambda);
        case ListLocation::Removed:
        default:
            return 0.0;
    }
}

// Probability the story is promoted right after its v-th vote. The first
// vote (the submitter's) never promotes.
inline double promotion_probability(const PromotionModel& model, long long v) {
    if (v <= 1) return 0.0;
    if (model.kind == PromotionModel::Kind::Threshold)
        return double(v) >= model.threshold ? 1.0 : 0.0;
    return 1.0 / (1.0 + std::exp(-(model.intercept + model.slope * double(v))));
}

// probability of still being unpromoted after v votes
inline double promotion_survival(const PromotionModel& model, long long v) {
    double s = 1.0;
    for (long long i = 2; i <= v; ++i) {
        s *= 1.0 - promotion_probability(model, i);
        if (s == 0.0) break;
    }
    return s;
}

// Smallest vote count at which the cumulative promotion probability
// reaches 1/2; empty when it never does within a large search window.
inline std::optional<long long> median_promotion_count(const PromotionModel& model,
                                                       long long max_count = 1000000) {
    double s = 1.0;
    for (long long v = 2; v <= max_count; ++v) {
        s *= 1.0 - promotion_probability(model, v);
        if (1.0 - s >= 0.5) return v;
        // logistic tails: once P is monotone up and s is still ~1, a quick
        // bail keeps the search cheap when promotion is unreachable
        if (v > 10000 && s > 0.999) {
            if (model.kind == PromotionModel::Kind::Logistic && model.slope <= 0.0)
                return std::nullopt;
        }
    }
    return std::nullopt;
}

}  // namespace votedyn
