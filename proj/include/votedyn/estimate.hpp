#pragma once

// Inference for the fan/non-fan model and the population activity mixture.
//
// The vote stream of one story is an inhomogeneous Poisson process whose
// intensity is omega * r_fan * F(t) + omega * r_nonfan * P(t) * N(t), with
// the audience pools F and N reconstructed deterministically from the
// observed vote times (exposure decay between votes, a conversion jump of
// rho * N at each vote). Both interest rates then have closed-form maximum
// likelihood estimates n / (omega * exposure); site-wide parameters are
// fitted by maximizing the likelihood with the per-story rates profiled
// out, which keeps the objective low dimensional and its gradient exact by
// the envelope theorem.

#include <votedyn/core.hpp>
#include <votedyn/numerics.hpp>
#include <votedyn/rng.hpp>
#include <votedyn/visibility.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace votedyn {

// log likelihood of event times under an arbitrary intensity on [t0, t1]
template <class Rate>
double loglik_inhomogeneous(Rate&& rate, const std::vector<double>& times,
                            double t0, double t1, double rel_tol = 1e-10) {
    double ll = -integrate(rate, t0, t1, rel_tol, 1e-13);
    for (double t : times)
        if (t > t0 && t <= t1) ll += std::log(std::max(rate(t), 1e-300));
    return ll;
}

// Exposure integrals of one story's reconstructed pools over [0, T] and
// their partial derivatives with respect to (c, surf_mu, surf_lambda, rho).
// sum_log_x collects log of the pre-vote pool factor at each vote, i.e. the
// vote-time terms of the likelihood with the rate constants stripped off.
struct StoryExposure {
    double A_fan = 0.0;     // integral of F dt
    double A_nonfan = 0.0;  // integral of P * N dt
    std::array<double, 4> dA_fan{}, dA_nonfan{};
    long long n_fan = 0, n_nonfan = 0;  // votes in (0, T]
    double sum_log_x_fan = 0.0, sum_log_x_nonfan = 0.0;
    std::array<double, 4> dsum_fan{}, dsum_nonfan{};
    double t_end = 0.0, F_end = 0.0, N_end = 0.0;
};

namespace detail {

// integral of the stopping law and its mu/lambda partials along a page
// drift page(u) = 1 + slope * (u - t_ref), on fixed Gauss panels so the
// result is smooth in the parameters. The law has a boundary layer just
// past page 1, so panel widths are graded there (each panel roughly
// doubles the distance from the list entry) before settling at 0.25h.
inline void surf_page_integrals(double a, double b, double slope, double t_ref,
                                double mu, double lambda, double& base,
                                double& dmu, double& dla) {
    base = dmu = dla = 0.0;
    if (b <= a) return;
    auto page = [&](double u) { return 1.0 + slope * (u - t_ref); };
    double lo = a;
    while (lo < b) {
        double d = slope * (lo - t_ref);
        double w = 0.25;
        if (slope > 0.0 && d < 0.9)
            w = std::min(w, std::max(d, 0.004) / slope);
        double hi = std::min(b, lo + w);
        base += gauss7(
            [&](double u) { return law_of_surfing_upper(page(u), mu, lambda); },
            lo, hi);
        dmu += gauss7(
            [&](double u) { return law_of_surfing_dmu(page(u), mu, lambda); },
            lo, hi);
        dla += gauss7(
            [&](double u) {
                return law_of_surfing_dlambda(page(u), mu, lambda);
            },
            lo, hi);
        lo = hi;
    }
}

}  // namespace detail

inline StoryExposure reconstruct_exposure(const GlobalParamsV2& g,
                                          const StoryRecord& story,
                                          double t_end) {
    StoryExposure out;
    out.t_end = t_end;
    const double W = g.upcoming_window;
    std::optional<double> tp = story.promotion_time;

    // event times: votes in (0, T] plus the list transitions
    std::vector<std::pair<double, bool>> vs;
    for (const auto& v : story.votes)
        if (v.wall_time > 0.0 && v.wall_time <= t_end)
            vs.push_back({v.wall_time, v.is_fan});
    std::stable_sort(vs.begin(), vs.end(),
                     [](const auto& a, const auto& b) {
                         return a.first < b.first;
                     });
    std::vector<double> vote_times;
    std::vector<bool> vote_is_fan;
    for (const auto& [t, fan] : vs) {
        vote_times.push_back(t);
        vote_is_fan.push_back(fan);
    }
    std::vector<double> cuts = vote_times;
    if (tp && *tp > 0.0 && *tp < t_end) cuts.push_back(*tp);
    if (W > 0.0 && W < t_end && !(tp && *tp <= W)) cuts.push_back(W);
    cuts.push_back(t_end);
    std::sort(cuts.begin(), cuts.end());

    double F = double(story.submitter_fans);
    double N = std::max(0.0, g.user_count - F - 1.0);
    std::array<double, 4> dF{}, dN{};

    double t = 0.0;
    std::size_t vi = 0;  // next vote index
    for (double b : cuts) {
        if (b < t) continue;
        // regime on [t, b)
        bool front = tp && *tp <= t;
        bool upcoming = !front && t < W;

        double I = 0.0;
        std::array<double, 4> dI{};
        double pn_b = 0.0;  // left limit of visibility at b
        std::array<double, 4> dpn_b{};
        if (front) {
            double base, bmu, bla;
            detail::surf_page_integrals(t, b, g.k_front, *tp, g.surf_mu,
                                        g.surf_lambda, base, bmu, bla);
            I = base;
            dI = {0.0, bmu, bla, 0.0};
            double m = 1.0 + g.k_front * (b - *tp);
            pn_b = law_of_surfing_upper(m, g.surf_mu, g.surf_lambda);
            dpn_b = {0.0, law_of_surfing_dmu(m, g.surf_mu, g.surf_lambda),
                     law_of_surfing_dlambda(m, g.surf_mu, g.surf_lambda), 0.0};
        } else if (upcoming) {
            double base, bmu, bla;
            detail::surf_page_integrals(t, b, g.k_upcoming, 0.0, g.surf_mu,
                                        g.surf_lambda, base, bmu, bla);
            I = g.c * base;
            dI = {base, g.c * bmu, g.c * bla, 0.0};
            double m = 1.0 + g.k_upcoming * b;
            double f = law_of_surfing_upper(m, g.surf_mu, g.surf_lambda);
            pn_b = g.c * f;
            dpn_b = {f, g.c * law_of_surfing_dmu(m, g.surf_mu, g.surf_lambda),
                     g.c * law_of_surfing_dlambda(m, g.surf_mu, g.surf_lambda),
                     0.0};
        }

        // advance the pools across [t, b)
        double ew = std::exp(-g.omega * (b - t));
        out.A_fan += F * (1.0 - ew) / g.omega;
        for (int k = 0; k < 4; ++k) out.dA_fan[k] += dF[k] * (1.0 - ew) / g.omega;
        F *= ew;
        for (int k = 0; k < 4; ++k) dF[k] *= ew;

        double ei = std::exp(-g.omega * I);
        out.A_nonfan += N * (1.0 - ei) / g.omega;
        for (int k = 0; k < 4; ++k)
            out.dA_nonfan[k] += dN[k] * (1.0 - ei) / g.omega + N * ei * dI[k];
        for (int k = 0; k < 4; ++k)
            dN[k] = dN[k] * ei - N * ei * g.omega * dI[k];
        N *= ei;
        t = b;

        // votes that land exactly at b use the pre-jump pools
        while (vi < vote_times.size() && vote_times[vi] <= b + 1e-15) {
            bool fan = vote_is_fan[vi];
            ++vi;
            if (fan) {
                ++out.n_fan;
                double x = std::max(F, 1e-300);
                out.sum_log_x_fan += std::log(x);
                for (int k = 0; k < 4; ++k) out.dsum_fan[k] += dF[k] / x;
            } else {
                ++out.n_nonfan;
                double x = std::max(pn_b * N, 1e-300);
                out.sum_log_x_nonfan += std::log(x);
                for (int k = 0; k < 4; ++k)
                    out.dsum_nonfan[k] += (dpn_b[k] * N + pn_b * dN[k]) / x;
            }
            // conversion: rho * N non-fans become fans
            double conv = g.rho * N;
            for (int k = 0; k < 4; ++k) {
                double dconv = g.rho * dN[k] + (k == 3 ? N : 0.0);
                dF[k] += dconv;
                dN[k] -= dconv;
            }
            F += conv;
            N -= conv;
        }
    }
    out.F_end = F;
    out.N_end = N;
    return out;
}

struct FitOptions {
    double observed_until = 72.0;  // end of the observation interval
    std::optional<double> window;  // truncate observation to [0, window]
    bool use_prior = false;        // lognormal population prior on each rate
    double prior_mu_fan = -1.8;
    double prior_sigma_fan = 0.75;
    double prior_mu_nonfan = -4.0;
    double prior_sigma_nonfan = 0.63;
    bool equal_r = false;  // one shared rate for both channels
};

struct StoryFit {
    double r_fan = 0.0, r_nonfan = 0.0;
    long long n_fan = 0, n_nonfan = 0;
    double exposure_fan = 0.0, exposure_nonfan = 0.0;  // omega * A
    double log_likelihood = 0.0;
    bool converged = true;
    int iterations = 0;
};

namespace detail {

// posterior mode of log r under rate exposure wA, count n and a lognormal
// prior; the objective n*u - u - wA*e^u - (u-pm)^2/(2 ps^2) is strictly
// concave so undamped newton converges
inline double map_log_rate(double wA, long long n, double pm, double ps,
                           int& iters, bool& ok) {
    double u = n > 0 ? std::log(double(n) / std::max(wA, 1e-300)) : pm;
    u = std::min(u, 5.0);
    ok = true;
    for (iters = 0; iters < 100; ++iters) {
        double eu = std::exp(u);
        double g1 = double(n) - 1.0 - wA * eu - (u - pm) / (ps * ps);
        double g2 = -wA * eu - 1.0 / (ps * ps);
        double step = g1 / g2;
        u -= step;
        if (std::abs(step) < 1e-13) return u;
    }
    ok = false;
    return u;
}

}  // namespace detail

// Per-story interest rates. Without a prior these are the closed-form
// maximum likelihood ratios n / (omega * exposure), clamped into [0, 1];
// with one they are posterior modes under the lognormal population prior.
inline StoryFit fit_story_interest(const GlobalParamsV2& g,
                                   const StoryRecord& story,
                                   const FitOptions& opt = {}) {
    double T = opt.window ? std::min(*opt.window, opt.observed_until)
                          : opt.observed_until;
    auto ex = reconstruct_exposure(g, story, T);
    StoryFit fit;
    fit.n_fan = ex.n_fan;
    fit.n_nonfan = ex.n_nonfan;
    fit.exposure_fan = g.omega * ex.A_fan;
    fit.exposure_nonfan = g.omega * ex.A_nonfan;

    auto solve_channel = [&](double wA, long long n, double pm, double ps,
                             double& r) {
        if (!opt.use_prior) {
            r = wA > 0.0 ? std::clamp(double(n) / wA, 0.0, 1.0) : 0.0;
            return;
        }
        int it = 0;
        bool ok = true;
        double u = detail::map_log_rate(wA, n, pm, ps, it, ok);
        fit.iterations += it;
        fit.converged = fit.converged && ok;
        r = std::min(std::exp(u), 1.0);
    };

    if (opt.equal_r) {
        double wA = fit.exposure_fan + fit.exposure_nonfan;
        long long n = ex.n_fan + ex.n_nonfan;
        double r = 0.0;
        solve_channel(wA, n, opt.prior_mu_nonfan, opt.prior_sigma_nonfan, r);
        fit.r_fan = fit.r_nonfan = r;
    } else {
        solve_channel(fit.exposure_fan, ex.n_fan, opt.prior_mu_fan,
                      opt.prior_sigma_fan, fit.r_fan);
        solve_channel(fit.exposure_nonfan, ex.n_nonfan, opt.prior_mu_nonfan,
                      opt.prior_sigma_nonfan, fit.r_nonfan);
    }

    auto ll = [&](double r, double wA, long long n, double slx) {
        double s = -r * wA + slx + double(n) * std::log(g.omega);
        if (n > 0) s += double(n) * std::log(std::max(r, 1e-300));
        return s;
    };
    fit.log_likelihood = ll(fit.r_fan, fit.exposure_fan, ex.n_fan,
                            ex.sum_log_x_fan) +
                         ll(fit.r_nonfan, fit.exposure_nonfan, ex.n_nonfan,
                            ex.sum_log_x_nonfan);
    return fit;
}

// Corpus log likelihood with every story's rates profiled out at their
// closed-form optimum. Optional gradient with respect to raw
// (c, surf_mu, surf_lambda, rho), exact by the envelope theorem.
inline double global_profile_loglik(const GlobalParamsV2& g,
                                    const std::vector<StoryRecord>& stories,
                                    double observed_until,
                                    std::array<double, 4>* grad = nullptr) {
    double ll = 0.0;
    if (grad) grad->fill(0.0);
    for (const auto& story : stories) {
        auto ex = reconstruct_exposure(g, story, observed_until);
        struct Side {
            double A, sum;
            const std::array<double, 4>*dA, *dsum;
            long long n;
        };
        Side sides[2] = {
            {ex.A_fan, ex.sum_log_x_fan, &ex.dA_fan, &ex.dsum_fan, ex.n_fan},
            {ex.A_nonfan, ex.sum_log_x_nonfan, &ex.dA_nonfan, &ex.dsum_nonfan,
             ex.n_nonfan}};
        for (const auto& s : sides) {
            if (s.n <= 0 || s.A <= 0.0) continue;
            double rhat = double(s.n) / (g.omega * s.A);
            if (rhat <= 1.0) {
                ll += -double(s.n) + double(s.n) * std::log(double(s.n) / s.A) +
                      s.sum;
                if (grad)
                    for (int k = 0; k < 4; ++k)
                        (*grad)[k] += -double(s.n) * (*s.dA)[k] / s.A +
                                      (*s.dsum)[k];
            } else {
                // rate capped at one
                ll += -g.omega * s.A + double(s.n) * std::log(g.omega) + s.sum;
                if (grad)
                    for (int k = 0; k < 4; ++k)
                        (*grad)[k] += -g.omega * (*s.dA)[k] + (*s.dsum)[k];
            }
        }
    }
    return ll;
}

struct GlobalFitOptions {
    double observed_until = 72.0;
    bool fit_rho = true;
    int max_iter = 150;
};

struct GlobalFit {
    GlobalParamsV2 params;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Site-wide visibility and conversion parameters by profiled maximum
// likelihood over a story corpus, in unconstrained coordinates
// (logit c, log mu, log lambda, log rho).
inline GlobalFit fit_global_params(const GlobalParamsV2& init,
                                   const std::vector<StoryRecord>& stories,
                                   const GlobalFitOptions& opt = {}) {
    long long total_votes = 1;
    for (const auto& s : stories) total_votes += (long long)s.votes.size();
    const double scale = 1.0 / double(total_votes);

    const int dim = opt.fit_rho ? 4 : 3;
    auto apply = [&](const std::vector<double>& x) {
        GlobalParamsV2 g = init;
        g.c = 1.0 / (1.0 + std::exp(-x[0]));
        g.surf_mu = std::exp(x[1]);
        g.surf_lambda = std::exp(x[2]);
        if (dim == 4) g.rho = std::exp(x[3]);
        return g;
    };
    auto objective = [&](const std::vector<double>& x,
                         std::vector<double>* grad) {
        GlobalParamsV2 g = apply(x);
        std::array<double, 4> raw{};
        double ll = global_profile_loglik(g, stories, opt.observed_until,
                                          grad ? &raw : nullptr);
        if (grad) {
            (*grad)[0] = -raw[0] * g.c * (1.0 - g.c) * scale;
            (*grad)[1] = -raw[1] * g.surf_mu * scale;
            (*grad)[2] = -raw[2] * g.surf_lambda * scale;
            if (dim == 4) (*grad)[3] = -raw[3] * g.rho * scale;
        }
        return -ll * scale;
    };

    std::vector<double> x0 = {std::log(init.c / (1.0 - init.c)),
                              std::log(init.surf_mu),
                              std::log(init.surf_lambda)};
    if (dim == 4) x0.push_back(std::log(init.rho));

    // coarse multi-start around the initial guess: the surface can have a
    // shallow ridge between mu and lambda
    std::vector<std::vector<double>> starts = {x0};
    for (double dmu : {-0.5, 0.5})
        for (double dla : {-0.5, 0.5}) {
            auto x = x0;
            x[1] += dmu;
            x[2] += dla;
            starts.push_back(x);
        }
    double best = 1e300;
    std::vector<double> xbest = x0;
    for (const auto& s : starts) {
        double v = objective(s, nullptr);
        if (v < best) {
            best = v;
            xbest = s;
        }
    }

    BfgsOptions bo;
    bo.max_iter = opt.max_iter;
    bo.grad_tol = 1e-7;
    auto res = bfgs_minimize(objective, xbest, bo);

    GlobalFit out;
    out.params = apply(res.x);
    out.log_likelihood = -res.fx / scale;
    out.converged = res.converged;
    out.iterations = res.iters;
    return out;
}

// One-dimensional refit of the conversion fraction with everything else
// held fixed.
inline GlobalFit fit_rho(const GlobalParamsV2& init,
                         const std::vector<StoryRecord>& stories,
                         double observed_until = 72.0) {
    auto neg = [&](double logrho) {
        GlobalParamsV2 g = init;
        g.rho = std::exp(logrho);
        return -global_profile_loglik(g, stories, observed_until);
    };
    double c0 = std::log(init.rho);
    auto res = brent_minimize(neg, c0 - 3.0, c0 + 3.0, 1e-10);
    GlobalFit out;
    out.params = init;
    out.params.rho = std::exp(res.x);
    out.log_likelihood = -res.fx;
    out.converged = res.converged;
    out.iterations = res.iters;
    return out;
}

// Probability mass of the lognormal-Poisson activity mixture, with
// derivatives in the mixture parameters. Fixed trapezoid nodes around the
// integrand's mode keep the value smooth in (mu, sigma) and accurate to
// roughly 1e-12 relative.
inline void poisson_lognormal_pmf_grad(double mu, double sigma, long long k,
                                       double& p, double& dmu, double& dsigma) {
    const double s2 = sigma * sigma;
    double u = k > 0 ? std::log(double(k)) : mu;
    for (int it = 0; it < 80; ++it) {
        double eu = std::exp(u);
        double step = (double(k) - eu - (u - mu) / s2) / (eu + 1.0 / s2);
        u += step;
        if (std::abs(step) < 1e-13) break;
    }
    double width = 1.0 / std::sqrt(std::exp(u) + 1.0 / s2);
    const double h = 0.35;
    const int M = 60;
    double lg = std::lgamma(double(k) + 1.0);
    p = dmu = dsigma = 0.0;
    for (int j = -M; j <= M; ++j) {
        double uj = u + width * h * double(j);
        double w = uj - mu;
        double gj =
            double(k) * uj - std::exp(uj) - lg - w * w / (2.0 * s2);
        double val = std::exp(gj);
        p += val;
        dmu += val * (w / s2);
        dsigma += val * (w * w / (s2 * sigma) - 1.0 / sigma);
    }
    double norm = width * h / (sigma * std::sqrt(6.283185307179586));
    p *= norm;
    dmu *= norm;
    dsigma *= norm;
}

inline double poisson_lognormal_pmf(double mu, double sigma, long long k) {
    double p, a, b;
    poisson_lognormal_pmf_grad(mu, sigma, k, p, a, b);
    return p;
}

struct ActivityFit {
    double mu = 0.0, sigma = 1.0;
    double user_count_estimate = 0.0;  // observed / (1 - P(0))
    long long observed_users = 0;
    double log_likelihood = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Fits the activity mixture to users seen at least once; the zero class is
// unobservable, so the likelihood is zero-truncated and the total headcount
// follows from the fitted zero mass.
inline ActivityFit fit_activity_zero_truncated(
    const std::vector<long long>& counts) {
    std::map<long long, long long> hist;
    long long uplus = 0;
    double mean_log = 0.0;
    for (long long k : counts)
        if (k >= 1) {
            ++hist[k];
            ++uplus;
            mean_log += std::log(double(k));
        }
    if (uplus == 0)
        throw std::invalid_argument("activity fit needs nonzero counts");
    mean_log /= double(uplus);

    auto objective = [&](const std::vector<double>& x,
                         std::vector<double>* grad) {
        double mu = x[0], sigma = std::exp(x[1]);
        double p0, p0m, p0s;
        poisson_lognormal_pmf_grad(mu, sigma, 0, p0, p0m, p0s);
        double ll = -double(uplus) * std::log(std::max(1.0 - p0, 1e-300));
        double gm = double(uplus) * p0m / std::max(1.0 - p0, 1e-300);
        double gs = double(uplus) * p0s / std::max(1.0 - p0, 1e-300);
        for (const auto& [k, n] : hist) {
            double p, pm, ps;
            poisson_lognormal_pmf_grad(mu, sigma, k, p, pm, ps);
            p = std::max(p, 1e-300);
            ll += double(n) * std::log(p);
            gm += double(n) * pm / p;
            gs += double(n) * ps / p;
        }
        double scale = 1.0 / double(uplus);
        if (grad) {
            (*grad)[0] = -gm * scale;
            (*grad)[1] = -gs * sigma * scale;  // chain rule through log sigma
        }
        return -ll * scale;
    };

    std::vector<double> x0 = {mean_log - 1.0, std::log(1.5)};
    BfgsOptions bo;
    bo.grad_tol = 1e-8;
    auto res = bfgs_minimize(objective, x0, bo);

    ActivityFit out;
    out.mu = res.x[0];
    out.sigma = std::exp(res.x[1]);
    out.observed_users = uplus;
    out.log_likelihood = -res.fx * double(uplus);
    out.converged = res.converged;
    out.iterations = res.iters;
    double p0 = poisson_lognormal_pmf(out.mu, out.sigma, 0);
    out.user_count_estimate = double(uplus) / std::max(1.0 - p0, 1e-12);
    return out;
}

struct LognormalFit {
    double mu = 0.0, sigma = 1.0;
};

inline LognormalFit fit_lognormal(const std::vector<double>& xs) {
    if (xs.empty()) throw std::invalid_argument("empty sample");
    double m = 0.0;
    for (double x : xs) m += std::log(x);
    m /= double(xs.size());
    double v = 0.0;
    for (double x : xs) {
        double d = std::log(x) - m;
        v += d * d;
    }
    v /= double(xs.size());
    return {m, std::sqrt(std::max(v, 1e-300))};
}

struct GofResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

namespace detail {

inline double ks_stat_lognormal(std::vector<double> xs, double mu,
                                double sigma) {
    std::sort(xs.begin(), xs.end());
    double d = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double cdf = lognormal_cdf(xs[i], mu, sigma);
        d = std::max({d, std::abs(cdf - double(i) / xs.size()),
                      std::abs(cdf - double(i + 1) / xs.size())});
    }
    return d;
}

}  // namespace detail

// Kolmogorov-Smirnov test against a fitted lognormal; fitting is repeated
// inside every bootstrap replicate so the estimated-parameter bias is
// carried into the null distribution.
inline GofResult ks_bootstrap_gof_lognormal(const std::vector<double>& xs,
                                            int replicates, Rng& rng) {
    auto fit = fit_lognormal(xs);
    GofResult out;
    out.statistic = detail::ks_stat_lognormal(xs, fit.mu, fit.sigma);
    int worse = 0;
    std::vector<double> sample(xs.size());
    for (int rep = 0; rep < replicates; ++rep) {
        for (auto& x : sample) x = rng.lognormal(fit.mu, fit.sigma);
        auto f2 = fit_lognormal(sample);
        if (detail::ks_stat_lognormal(sample, f2.mu, f2.sigma) >=
            out.statistic - 1e-15)
            ++worse;
    }
    out.p_value = double(1 + worse) / double(replicates + 1);
    return out;
}

struct PromotionFit {
    PromotionModel model;
    bool converged = false;
    int iterations = 0;
    long long trials = 0, promotions = 0;
};

// Logistic regression of the per-vote promotion decision on the cumulative
// vote count. Each vote arriving while the story sat unpromoted on the
// upcoming list is one Bernoulli trial. Perfectly separated data (a hard
// threshold) has no finite optimum; the slope is then capped and the
// implied boundary -intercept/slope preserved, flagged as not converged.
inline PromotionFit fit_promotion(const std::vector<StoryRecord>& stories,
                                  double upcoming_window = 24.0) {
    std::map<long long, std::pair<long long, long long>> rows;  // v -> {trials, hits}
    PromotionFit out;
    for (const auto& story : stories) {
        std::vector<double> times;
        for (const auto& v : story.votes)
            if (v.wall_time >= 0.0) times.push_back(v.wall_time);
        std::sort(times.begin(), times.end());
        long long count = 0;
        for (double t : times) {
            ++count;
            if (count < 2) continue;
            bool in_window = t < upcoming_window &&
                             (!story.promotion_time ||
                              t <= *story.promotion_time + 1e-12);
            if (!in_window) continue;
            bool hit = story.promotion_time &&
                       std::abs(t - *story.promotion_time) <= 1e-12;
            auto& row = rows[count];
            row.first += 1;
            row.second += hit ? 1 : 0;
            ++out.trials;
            if (hit) out.promotions += 1;
            if (hit) break;
        }
    }
    if (out.trials == 0) {
        out.model.kind = PromotionModel::Kind::Logistic;
        return out;
    }

    double a = std::log(std::max(1.0, double(out.promotions)) /
                        std::max(1.0, double(out.trials - out.promotions)));
    double b = 0.0;
    bool capped = false;
    int it = 0;
    for (; it < 200; ++it) {
        double ga = 0, gb = 0, haa = 0, hab = 0, hbb = 0;
        for (const auto& [v, tn] : rows) {
            double z = a + b * double(v);
            double p = 1.0 / (1.0 + std::exp(-z));
            double t = double(tn.first), y = double(tn.second);
            ga += y - t * p;
            gb += (y - t * p) * double(v);
            double wgt = t * p * (1.0 - p);
            haa += wgt;
            hab += wgt * double(v);
            hbb += wgt * double(v) * double(v);
        }
        double det = haa * hbb - hab * hab;
        if (!(det > 1e-12)) break;
        double da = (hbb * ga - hab * gb) / det;
        double db = (haa * gb - hab * ga) / det;
        // damp oversized jumps; perfect separation otherwise shoots off
        double norm = std::max(std::abs(da), std::abs(db));
        if (norm > 2.0) {
            da *= 2.0 / norm;
            db *= 2.0 / norm;
        }
        a += da;
        b += db;
        if (std::abs(b) > 50.0) {
            double boundary = -a / b;
            b = b > 0 ? 50.0 : -50.0;
            a = -boundary * b;
            capped = true;
            break;
        }
        if (std::abs(da) < 1e-10 && std::abs(db) < 1e-10) {
            out.converged = true;
            break;
        }
    }
    out.iterations = it;
    if (capped) out.converged = false;
    out.model.kind = PromotionModel::Kind::Logistic;
    out.model.intercept = a;
    out.model.slope = b;
    return out;
}

inline std::vector<double> average_ranks(const std::vector<double>& x) {
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    std::size_t i = 0;
    while (i < idx.size()) {
        std::size_t j = i;
        while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
        double avg = 0.5 * (double(i) + double(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(const std::vector<double>& x,
                      const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("pearson needs two equal-length samples");
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= double(x.size());
    my /= double(x.size());
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(const std::vector<double>& x,
                       const std::vector<double>& y) {
    return pearson(average_ranks(x), average_ranks(y));
}

struct CorrTest {
    double corr = 0.0;
    double p_value = 1.0;
};

inline CorrTest permutation_corr_test(const std::vector<double>& x,
                                      const std::vector<double>& y,
                                      int permutations, Rng& rng) {
    CorrTest out;
    out.corr = pearson(x, y);
    std::vector<double> yy = y;
    int worse = 0;
    for (int rep = 0; rep < permutations; ++rep) {
        rng.shuffle(yy.begin(), yy.end());
        if (std::abs(pearson(x, yy)) >= std::abs(out.corr) - 1e-15) ++worse;
    }
    out.p_value = double(1 + worse) / double(permutations + 1);
    return out;
}

}  // namespace votedyn
