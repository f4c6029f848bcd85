#pragma once

// Deterministic mean-field trajectories for both model variants: adaptive
// Dormand-Prince 5(4) integration split at list transitions (promotion,
// removal from the upcoming section), with the promotion crossing located
// by cubic Hermite interpolation inside the bracketing step.

#include <votedyn/core.hpp>
#include <votedyn/visibility.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

namespace votedyn {

struct SolveOptions {
    // promotion instant supplied from data instead of the model's rule
    std::optional<double> known_promotion_time;
    // extra times (model hours) that must appear exactly in the output
    std::vector<double> sample_times;
    double rel_tol = 1e-8;
    double abs_tol = 1e-8;
    double max_step = 0.5;
};

struct SampleV1 {
    double t = 0.0;
    double votes = 0.0;  // N(t)
    double s = 0.0;      // friends-interface audience
    double page = 0.0;
    ListLocation location = ListLocation::Upcoming;
};

struct TrajectoryV1 {
    TimeUnit time_unit = TimeUnit::WallHours;
    std::optional<double> promotion_time;
    std::vector<SampleV1> samples;
    double final_votes() const {
        return samples.empty() ? 0.0 : samples.back().votes;
    }
};

struct SampleV2 {
    double t = 0.0;
    double vF = 0.0;  // votes from fans
    double vN = 0.0;  // votes from non-fans (submitter's own vote included)
    double F = 0.0;   // current fan pool
    double N = 0.0;   // remaining non-fan pool
    double page = 0.0;
    ListLocation location = ListLocation::Upcoming;
};

struct TrajectoryV2 {
    TimeUnit time_unit = TimeUnit::DiggHours;
    std::optional<double> promotion_time;
    std::vector<SampleV2> samples;
    double final_votes() const {
        return samples.empty() ? 0.0
                               : samples.back().vF + samples.back().vN;
    }
};

namespace detail {

enum class Regime { Upcoming, Front, Removed };

inline std::pair<double, ListLocation> regime_page(Regime reg, double t,
                                                   double tp, double k_upcoming,
                                                   double k_front) {
    switch (reg) {
        case Regime::Front:
            return {1.0 + k_front * (t - tp), ListLocation::FrontPage};
        case Regime::Upcoming:
            return {1.0 + k_upcoming * t, ListLocation::Upcoming};
        default:
            return {0.0, ListLocation::Removed};
    }
}

// One Dormand-Prince 5(4) step. k1 holds f(t, y) on entry; k7 returns
// f(t+h, y5) for first-same-as-last reuse. err is the embedded estimate.
template <std::size_t Dim, class Rhs>
inline void dopri45_step(const Rhs& f, double t, const std::array<double, Dim>& y,
                         double h, const std::array<double, Dim>& k1,
                         std::array<double, Dim>& y5,
                         std::array<double, Dim>& k7,
                         std::array<double, Dim>& err) {
    using St = std::array<double, Dim>;
    St k2, k3, k4, k5, k6, w;
    for (std::size_t i = 0; i < Dim; ++i) w[i] = y[i] + h * (1.0 / 5) * k1[i];
    f(t + h / 5, w, k2);
    for (std::size_t i = 0; i < Dim; ++i)
        w[i] = y[i] + h * ((3.0 / 40) * k1[i] + (9.0 / 40) * k2[i]);
    f(t + 3 * h / 10, w, k3);
    for (std::size_t i = 0; i < Dim; ++i)
        w[i] = y[i] + h * ((44.0 / 45) * k1[i] - (56.0 / 15) * k2[i] +
                           (32.0 / 9) * k3[i]);
    f(t + 4 * h / 5, w, k4);
    for (std::size_t i = 0; i < Dim; ++i)
        w[i] = y[i] + h * ((19372.0 / 6561) * k1[i] - (25360.0 / 2187) * k2[i] +
                           (64448.0 / 6561) * k3[i] - (212.0 / 729) * k4[i]);
    f(t + 8 * h / 9, w, k5);
    for (std::size_t i = 0; i < Dim; ++i)
        w[i] = y[i] + h * ((9017.0 / 3168) * k1[i] - (355.0 / 33) * k2[i] +
                           (46732.0 / 5247) * k3[i] + (49.0 / 176) * k4[i] -
                           (5103.0 / 18656) * k5[i]);
    f(t + h, w, k6);
    for (std::size_t i = 0; i < Dim; ++i)
        y5[i] = y[i] + h * ((35.0 / 384) * k1[i] + (500.0 / 1113) * k3[i] +
                            (125.0 / 192) * k4[i] - (2187.0 / 6784) * k5[i] +
                            (11.0 / 84) * k6[i]);
    f(t + h, y5, k7);
    for (std::size_t i = 0; i < Dim; ++i)
        err[i] = h * ((71.0 / 57600) * k1[i] - (71.0 / 16695) * k3[i] +
                      (71.0 / 1920) * k4[i] - (17253.0 / 339200) * k5[i] +
                      (22.0 / 525) * k6[i] - (1.0 / 40) * k7[i]);
}

// Integrates y over [t0, t1] with a smooth right-hand side, recording every
// accepted step. Interior `stops` (sorted, inside the interval) and t1 are
// landed on exactly. When `event` is given and crosses from negative to
// non-negative, integration halts at the crossing; its time is returned and
// y holds the state there.
template <std::size_t Dim, class Rhs, class Record>
inline std::optional<double> integrate_regime(
    const Rhs& rhs, std::array<double, Dim>& y, double t0, double t1,
    std::vector<double> stops,
    const std::function<double(double, const std::array<double, Dim>&)>& event,
    const Record& record, const SolveOptions& opt) {
    using St = std::array<double, Dim>;
    const double tiny = 1e-12 * std::max(1.0, std::abs(t1));
    if (t1 <= t0 + tiny) return std::nullopt;
    stops.push_back(t1);

    double t = t0;
    St k1;
    rhs(t, y, k1);
    if (event && event(t, y) >= 0.0) return t;

    std::size_t next_stop = 0;
    double h = std::min({opt.max_step, t1 - t0, 1e-3});
    while (t < t1 - tiny) {
        while (next_stop < stops.size() && stops[next_stop] <= t + tiny)
            ++next_stop;
        double target = stops[next_stop];
        double h_try = std::min({h, opt.max_step, target - t});
        bool aimed = h_try >= target - t - tiny;
        if (aimed) h_try = target - t;

        St y5, k7, err;
        dopri45_step(rhs, t, y, h_try, k1, y5, k7, err);
        double en = 0.0;
        for (std::size_t i = 0; i < Dim; ++i) {
            double scale = opt.abs_tol +
                           opt.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
            double e = err[i] / scale;
            en += e * e;
        }
        en = std::sqrt(en / double(Dim));

        if (en <= 1.0 || h_try <= 1e-13) {
            if (event) {
                double g1 = event(t + h_try, y5);
                if (g1 >= 0.0) {
                    // bracketed: bisect on the Hermite interpolant
                    auto at = [&](double th, St& out) {
                        double u = 1.0 - th;
                        double h00 = (1.0 + 2.0 * th) * u * u;
                        double h10 = th * u * u;
                        double h01 = th * th * (3.0 - 2.0 * th);
                        double h11 = th * th * (th - 1.0);
                        for (std::size_t i = 0; i < Dim; ++i)
                            out[i] = h00 * y[i] + h10 * h_try * k1[i] +
                                     h01 * y5[i] + h11 * h_try * k7[i];
                    };
                    double lo = 0.0, hi = 1.0;
                    St w;
                    for (int it = 0; it < 80; ++it) {
                        double mid = 0.5 * (lo + hi);
                        at(mid, w);
                        if (event(t + mid * h_try, w) >= 0.0) hi = mid;
                        else lo = mid;
                    }
                    double te = t + hi * h_try;
                    if (hi * h_try > 1e-14) {
                        St ye, ke, ee;
                        dopri45_step(rhs, t, y, hi * h_try, k1, ye, ke, ee);
                        y = ye;
                    }
                    record(te, y);
                    return te;
                }
            }
            t = aimed ? target : t + h_try;
            y = y5;
            k1 = k7;
            record(t, y);
            double grow = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
            h = h_try * std::clamp(grow, 0.2, 5.0);
        } else {
            h = h_try * std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
        }
    }
    return std::nullopt;
}

inline std::vector<double> stops_between(const std::vector<double>& times,
                                         double a, double b) {
    std::vector<double> out;
    for (double x : times)
        if (x > a + 1e-12 && x < b - 1e-12) out.push_back(x);
    return out;
}

}  // namespace detail

// Mean-field single-interestingness trajectory (wall-clock hours).
inline TrajectoryV1 solve_v1(const GlobalParamsV1& g, const StoryParams& sp,
                             double horizon, const SolveOptions& opt = {}) {
    using St = std::array<double, 2>;  // {N, s}
    using detail::Regime;
    TrajectoryV1 out;
    out.time_unit = TimeUnit::WallHours;
    if (horizon < 0.0) horizon = 0.0;

    St y{1.0, double(sp.submitter_fans)};
    const double W = g.upcoming_window;

    std::vector<double> marks = opt.sample_times;
    std::sort(marks.begin(), marks.end());

    auto rhs_for = [&](Regime reg, double tp) {
        return [&g, &sp, reg, tp](double t, const St& v, St& dv) {
            double vis = 0.0;
            if (reg == Regime::Front)
                vis = g.nu * law_of_surfing_upper(1.0 + g.k_front * (t - tp),
                                                  g.surf_mu, g.surf_lambda);
            else if (reg == Regime::Upcoming)
                vis = g.c * g.nu *
                      law_of_surfing_upper(1.0 + g.k_upcoming * t, g.surf_mu,
                                           g.surf_lambda);
            double dN = sp.r * (vis + g.omega * v[1]);
            dv[0] = dN;
            dv[1] = -g.omega * v[1] +
                    g.fan_a * std::pow(std::max(v[0], 1.0), -g.fan_b) * dN;
        };
    };
    auto rec_for = [&](Regime reg, double tp) {
        return [&, reg, tp](double t, const St& v) {
            auto [page, loc] = detail::regime_page(reg, t, tp, g.k_upcoming,
                                                   g.k_front);
            out.samples.push_back({t, v[0], v[1], page, loc});
        };
    };
    using EventFn = std::function<double(double, const St&)>;
    const EventFn no_event;

    auto run = [&](Regime reg, double tp, double a, double b,
                   const EventFn& ev) {
        return detail::integrate_regime<2>(rhs_for(reg, tp), y, a, b,
                                           detail::stops_between(marks, a, b),
                                           ev, rec_for(reg, tp), opt);
    };

    if (opt.known_promotion_time) {
        double tp = std::max(0.0, *opt.known_promotion_time);
        out.promotion_time = tp;
        Regime first = tp <= 0.0 ? Regime::Front : Regime::Upcoming;
        rec_for(first, tp)(0.0, y);
        run(Regime::Upcoming, tp, 0.0, std::min({W, tp, horizon}), no_event);
        if (tp > W)
            run(Regime::Removed, tp, std::min(W, horizon),
                std::min(tp, horizon), no_event);
        run(Regime::Front, tp, tp, horizon, no_event);
        return out;
    }

    rec_for(Regime::Upcoming, 0.0)(0.0, y);
    EventFn cross = [&g](double, const St& v) {
        return v[0] - g.promotion_threshold;
    };
    auto hit = run(Regime::Upcoming, 0.0, 0.0, std::min(W, horizon), cross);
    if (hit) {
        out.promotion_time = *hit;
        run(Regime::Front, *hit, *hit, horizon, no_event);
    } else {
        run(Regime::Removed, 0.0, std::min(W, horizon), horizon, no_event);
    }
    return out;
}

// Promotion instant under the vote-threshold rule, if reached inside the
// upcoming window.
inline std::optional<double> promotion_time_v1(const GlobalParamsV1& g,
                                               long long submitter_fans,
                                               double r) {
    StoryParams sp;
    sp.variant = ModelVariant::V1;
    sp.r = r;
    sp.submitter_fans = submitter_fans;
    return solve_v1(g, sp, g.upcoming_window).promotion_time;
}

namespace detail {

// shared driver behind solve_v2 and solve_v2_from: advance {vF, vN, F, N}
// from (t0, y). known_tp fixes the promotion time (possibly before t0, the
// story is then already on the front page); without it the story promotes
// when cumulative votes reach the promotion model's median count.
inline TrajectoryV2 solve_v2_core(const GlobalParamsV2& g,
                                  const StoryParams& sp, double t0,
                                  std::array<double, 4> y,
                                  std::optional<double> known_tp,
                                  double horizon, const SolveOptions& opt) {
    using St = std::array<double, 4>;
    TrajectoryV2 out;
    out.time_unit = TimeUnit::DiggHours;
    if (horizon < t0) horizon = t0;
    if (y[3] < 0.0) y[3] = 0.0;
    const double W = g.upcoming_window;

    std::vector<double> marks = opt.sample_times;
    std::sort(marks.begin(), marks.end());

    auto rhs_for = [&](Regime reg, double tp) {
        return [&g, &sp, reg, tp](double t, const St& v, St& dv) {
            double pn = 0.0;
            if (reg == Regime::Front)
                pn = law_of_surfing_upper(1.0 + g.k_front * (t - tp), g.surf_mu,
                                          g.surf_lambda);
            else if (reg == Regime::Upcoming)
                pn = g.c * law_of_surfing_upper(1.0 + g.k_upcoming * t,
                                                g.surf_mu, g.surf_lambda);
            double dvF = g.omega * sp.r_fan * v[2];
            double dvN = g.omega * sp.r_nonfan * pn * v[3];
            double dv_all = dvF + dvN;
            dv[0] = dvF;
            dv[1] = dvN;
            dv[2] = -g.omega * v[2] + g.rho * v[3] * dv_all;
            dv[3] = -g.omega * pn * v[3] - g.rho * v[3] * dv_all;
        };
    };
    auto rec_for = [&](Regime reg, double tp) {
        return [&, reg, tp](double t, const St& v) {
            auto [page, loc] = detail::regime_page(reg, t, tp, g.k_upcoming,
                                                   g.k_front);
            out.samples.push_back({t, v[0], v[1], v[2], v[3], page, loc});
        };
    };
    using EventFn = std::function<double(double, const St&)>;
    const EventFn no_event;

    auto run = [&](Regime reg, double tp, double a, double b,
                   const EventFn& ev) {
        return detail::integrate_regime<4>(rhs_for(reg, tp), y, a, b,
                                           detail::stops_between(marks, a, b),
                                           ev, rec_for(reg, tp), opt);
    };

    if (known_tp) {
        double tp = std::max(0.0, *known_tp);
        out.promotion_time = tp;
        Regime first = tp <= t0 ? Regime::Front
                                : (t0 < W ? Regime::Upcoming : Regime::Removed);
        rec_for(first, tp)(t0, y);
        run(Regime::Upcoming, tp, t0, std::min({W, tp, horizon}), no_event);
        if (tp > W)
            run(Regime::Removed, tp, std::max(t0, std::min(W, horizon)),
                std::min(tp, horizon), no_event);
        run(Regime::Front, tp, std::max(tp, t0), horizon, no_event);
        return out;
    }

    auto vstar = median_promotion_count(g.promotion);
    if (t0 < W && vstar && y[0] + y[1] >= double(*vstar)) {
        // the state is handed over already past the promotion count
        out.promotion_time = t0;
        rec_for(Regime::Front, t0)(t0, y);
        run(Regime::Front, t0, t0, horizon, no_event);
        return out;
    }

    rec_for(t0 < W ? Regime::Upcoming : Regime::Removed, 0.0)(t0, y);
    EventFn cross;
    if (vstar)
        cross = [target = double(*vstar)](double, const St& v) {
            return v[0] + v[1] - target;
        };
    auto hit = run(Regime::Upcoming, 0.0, t0, std::min(W, horizon), cross);
    if (hit) {
        out.promotion_time = *hit;
        run(Regime::Front, *hit, *hit, horizon, no_event);
    } else {
        run(Regime::Removed, 0.0, std::max(t0, std::min(W, horizon)), horizon,
            no_event);
    }
    return out;
}

}  // namespace detail

// Mean-field fan/non-fan trajectory (Digg hours) from submission.
inline TrajectoryV2 solve_v2(const GlobalParamsV2& g, const StoryParams& sp,
                             double horizon, const SolveOptions& opt = {}) {
    std::array<double, 4> y{0.0, 1.0, double(sp.submitter_fans),
                            g.user_count - double(sp.submitter_fans) - 1.0};
    return detail::solve_v2_core(g, sp, 0.0, y, opt.known_promotion_time,
                                 std::max(horizon, 0.0), opt);
}

// Continue a fan/non-fan trajectory from a mid-story state {vF, vN, F, N}.
// `promoted_at` is the promotion time when it is already known (it may lie
// before t0); otherwise the promotion rule applies from t0 onward.
inline TrajectoryV2 solve_v2_from(const GlobalParamsV2& g,
                                  const StoryParams& sp, double t0,
                                  const std::array<double, 4>& y0,
                                  std::optional<double> promoted_at,
                                  double horizon,
                                  const SolveOptions& opt = {}) {
    return detail::solve_v2_core(g, sp, t0, y0, promoted_at, horizon, opt);
}

}  // namespace votedyn
