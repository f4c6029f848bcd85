// Command-line front end: simulate corpora, fit parameters, predict and
// evaluate popularity, and build the site activity clock. Settings come
// from a JSON config file (--config) with flags overriding it; unknown
// config keys are rejected. Exit codes: 0 ok, 2 bad usage or input,
// 3 internal numeric failure.

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "votedyn/io.hpp"
#include "votedyn/simulate.hpp"

namespace {

using votedyn::io::json;
namespace io = votedyn::io;
using namespace votedyn;

// -------------------------------------------------------------------------
// plumbing

struct Flags {
    std::optional<long long> seed;
    std::optional<long long> window;
    std::optional<double> threshold;
    std::optional<double> t_final;
    std::optional<bool> prior;
    std::optional<bool> equal_r;
    int jobs = 1;
};

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    return io::read_json(path);
}

std::string need_path(const json& cfg, const char* key, const char* cmd) {
    std::string p = cfg.value(key, std::string());
    if (p.empty())
        throw std::invalid_argument(std::string(cmd) + " needs '" + key +
                                    "' in its config");
    return p;
}

std::optional<std::string> maybe_path(const json& cfg, const char* key) {
    std::string p = cfg.value(key, std::string());
    if (p.empty()) return std::nullopt;
    return p;
}

// index-parallel loop; results must be written to preassigned slots so the
// output is identical at any worker count
void parallel_for(std::size_t n, int jobs,
                  const std::function<void(std::size_t)>& fn) {
    jobs = std::max(1, jobs);
    if (jobs == 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    int workers = int(std::min<std::size_t>(std::size_t(jobs), n));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mutex);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

io::CorpusData load_corpus(const json& cfg, const char* cmd) {
    std::optional<std::filesystem::path> meta;
    if (auto m = maybe_path(cfg, "meta_in")) meta = *m;
    FanGraph graph;
    const FanGraph* graph_ptr = nullptr;
    if (auto g = maybe_path(cfg, "fan_graph_in")) {
        graph = io::read_fan_graph_csv(*g);
        graph_ptr = &graph;
    }
    auto corpus = io::read_corpus(need_path(cfg, "votes_in", cmd), meta,
                                  graph_ptr);
    if (corpus.stories.empty())
        throw std::invalid_argument(std::string(cmd) +
                                    ": vote file contains no votes");
    return corpus;
}

// prediction settings shared by predict and eval; prior hyperparameters
// come from the fitted rate distributions when a params file supplies them
PredictionConfig prediction_config(const json& cfg, const Flags& flags,
                                   const io::FitReport* params) {
    PredictionConfig pc;
    pc.vote_window = cfg.value("window", pc.vote_window);
    pc.t_final = cfg.value("t_final", pc.t_final);
    pc.popularity_threshold =
        (long long)cfg.value("threshold", double(pc.popularity_threshold));
    pc.use_prior = cfg.value("prior", pc.use_prior);
    pc.constrain_equal_r = cfg.value("equal_r", pc.constrain_equal_r);
    if (flags.window) pc.vote_window = *flags.window;
    if (flags.t_final) pc.t_final = *flags.t_final;
    if (flags.threshold) pc.popularity_threshold = (long long)*flags.threshold;
    if (flags.prior) pc.use_prior = *flags.prior;
    if (flags.equal_r) pc.constrain_equal_r = *flags.equal_r;
    if (params) {
        if (params->dist_fan) {
            pc.prior_mu_fan = params->dist_fan->mu;
            pc.prior_sigma_fan = params->dist_fan->sigma;
        }
        if (params->dist_nonfan) {
            pc.prior_mu_nonfan = params->dist_nonfan->mu;
            pc.prior_sigma_nonfan = params->dist_nonfan->sigma;
        }
    }
    return pc;
}

// evaluate() with the per-story loop farmed out to the worker pool
PredictionReport evaluate_parallel(const GlobalParamsV2& g,
                                   const std::vector<StoryRecord>& corpus,
                                   const PredictionConfig& cfg, int jobs,
                                   std::vector<StoryPrediction>* preds = nullptr) {
    if (corpus.empty()) throw std::invalid_argument("empty corpus");
    std::vector<StoryPrediction> out(corpus.size());
    parallel_for(corpus.size(), jobs,
                 [&](std::size_t i) { out[i] = predict_story(g, corpus[i], cfg); });
    std::vector<ReportRow> rows;
    rows.reserve(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i) {
        ReportRow r;
        r.story_id = corpus[i].story_id;
        r.available = out[i].available;
        r.predicted_final = out[i].predicted_final;
        r.predicted_popular = out[i].predicted_popular;
        if (corpus[i].final_votes)
            r.actual_final = double(*corpus[i].final_votes);
        rows.push_back(std::move(r));
    }
    if (preds) *preds = std::move(out);
    return make_report(std::move(rows), cfg.popularity_threshold);
}

// -------------------------------------------------------------------------
// simulate

int cmd_simulate(const json& cfg, const Flags& flags) {
    io::detail::reject_unknown_keys(
        cfg,
        {"stories", "horizon", "seed", "format", "votes_out", "meta_out",
         "trajectories_out", "globals", "population"},
        "simulate config");
    GlobalParamsV2 g;
    if (cfg.contains("globals")) g = io::globals_v2_from_json(cfg.at("globals"));
    CorpusOptions opt;
    opt.stories = cfg.value("stories", opt.stories);
    opt.horizon = cfg.value("horizon", opt.horizon);
    opt.seed = (std::uint64_t)cfg.value("seed", (long long)opt.seed);
    if (flags.seed) opt.seed = (std::uint64_t)*flags.seed;
    if (cfg.contains("population")) {
        const auto& p = cfg.at("population");
        io::detail::reject_unknown_keys(
            p,
            {"log_r_fan_mu", "log_r_fan_sigma", "log_r_nonfan_mu",
             "log_r_nonfan_sigma", "fans_zero_prob", "fans_mean"},
            "simulate population");
        opt.log_r_fan_mu = p.value("log_r_fan_mu", opt.log_r_fan_mu);
        opt.log_r_fan_sigma = p.value("log_r_fan_sigma", opt.log_r_fan_sigma);
        opt.log_r_nonfan_mu = p.value("log_r_nonfan_mu", opt.log_r_nonfan_mu);
        opt.log_r_nonfan_sigma =
            p.value("log_r_nonfan_sigma", opt.log_r_nonfan_sigma);
        opt.fans_zero_prob = p.value("fans_zero_prob", opt.fans_zero_prob);
        opt.fans_mean = p.value("fans_mean", opt.fans_mean);
    }
    std::string format = cfg.value("format", std::string("csv"));
    if (format != "csv" && format != "jsonl")
        throw std::invalid_argument("simulate: format must be csv or jsonl");

    io::log(1, "simulating " + std::to_string(opt.stories) + " stories");
    Corpus corpus = make_corpus(g, opt);

    std::vector<StoryRecord> records;
    io::CorpusTruth truth;
    truth.globals = g;
    records.reserve(corpus.stories.size());
    for (std::size_t i = 0; i < corpus.stories.size(); ++i) {
        StoryRecord rec = to_record(corpus.stories[i]);
        rec.submission_wall_time = double(i);  // staggered hourly submissions
        records.push_back(std::move(rec));
        truth.story_params[corpus.stories[i].story_id] =
            corpus.stories[i].params;
    }

    std::string votes_out = cfg.value("votes_out", std::string("votes.csv"));
    std::string meta_out = cfg.value("meta_out", std::string("meta.json"));
    io::write_corpus(votes_out, meta_out, records, &truth, format == "jsonl");
    io::log(1, "wrote " + votes_out + " and " + meta_out);

    if (auto traj = maybe_path(cfg, "trajectories_out")) {
        std::vector<std::pair<std::string, TrajectoryV2>> trajectories;
        for (const auto& s : corpus.stories) {
            SolveOptions so;
            // pin the realized promotion outcome, not the mean-field rule
            so.known_promotion_time =
                s.promotion_time ? *s.promotion_time : 1e18;
            trajectories.emplace_back(
                s.story_id, solve_v2(g, s.params, opt.horizon, so));
        }
        io::write_trajectories_csv(*traj, trajectories);
        io::log(1, "wrote " + *traj);
    }
    return 0;
}

// -------------------------------------------------------------------------
// fit

// covariance of the profiled global likelihood from a finite-difference
// Hessian of its analytic gradient; empty on any numerical trouble
std::map<std::string, double> global_stderr(
    const GlobalParamsV2& g, const std::vector<StoryRecord>& stories,
    double observed_until, bool with_rho) {
    const int dim = with_rho ? 4 : 3;
    std::array<double, 4> x{g.c, g.surf_mu, g.surf_lambda, g.rho};
    auto grad_at = [&](const std::array<double, 4>& p) {
        GlobalParamsV2 gg = g;
        gg.c = p[0];
        gg.surf_mu = p[1];
        gg.surf_lambda = p[2];
        gg.rho = p[3];
        std::array<double, 4> grad{};
        global_profile_loglik(gg, stories, observed_until, &grad);
        return grad;
    };
    double hess[4][4] = {};
    for (int j = 0; j < dim; ++j) {
        double h = 1e-4 * std::abs(x[std::size_t(j)]) + 1e-12;
        auto hi = x, lo = x;
        hi[std::size_t(j)] += h;
        lo[std::size_t(j)] -= h;
        auto ghi = grad_at(hi), glo = grad_at(lo);
        for (int i = 0; i < dim; ++i)
            hess[i][j] = (ghi[std::size_t(i)] - glo[std::size_t(i)]) / (2 * h);
    }
    // negate (covariance is the inverse of the observed information) and
    // symmetrize before a small Gauss-Jordan inversion
    double a[4][8] = {};
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j)
            a[i][j] = -0.5 * (hess[i][j] + hess[j][i]);
        a[i][dim + i] = 1.0;
    }
    for (int col = 0; col < dim; ++col) {
        int piv = col;
        for (int r = col + 1; r < dim; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return {};
        std::swap_ranges(a[col], a[col] + 2 * dim, a[piv]);
        double d = a[col][col];
        for (int k = 0; k < 2 * dim; ++k) a[col][k] /= d;
        for (int r = 0; r < dim; ++r) {
            if (r == col) continue;
            double f = a[r][col];
            for (int k = 0; k < 2 * dim; ++k) a[r][k] -= f * a[col][k];
        }
    }
    static const char* names[4] = {"c", "surf_mu", "surf_lambda", "rho"};
    std::map<std::string, double> out;
    for (int i = 0; i < dim; ++i) {
        double v = a[i][dim + i];
        if (!(v > 0.0) || !std::isfinite(v)) return {};
        out[names[i]] = std::sqrt(v);
    }
    return out;
}

int cmd_fit(const json& cfg, const Flags& flags) {
    io::detail::reject_unknown_keys(
        cfg,
        {"votes_in", "meta_in", "fan_graph_in", "observed_until", "fit_rho",
         "bootstrap_rounds", "seed", "out"},
        "fit config");
    auto corpus = load_corpus(cfg, "fit");
    const auto& stories = corpus.stories;
    double observed_until = cfg.value("observed_until", 72.0);
    bool with_rho = cfg.value("fit_rho", true);
    int rounds = (int)cfg.value("bootstrap_rounds", 200LL);
    std::uint64_t seed = (std::uint64_t)cfg.value("seed", 1LL);
    if (flags.seed) seed = (std::uint64_t)*flags.seed;

    io::log(1, "fitting global parameters on " +
                   std::to_string(stories.size()) + " stories");
    GlobalFitOptions gfo;
    gfo.observed_until = observed_until;
    gfo.fit_rho = with_rho;
    GlobalFit gfit = fit_global_params(GlobalParamsV2{}, stories, gfo);

    io::FitReport report;
    report.globals = gfit.params;
    report.global_converged = gfit.converged;
    report.global_iterations = gfit.iterations;
    report.global_log_likelihood = gfit.log_likelihood;
    if (gfit.converged) {
        try {
            report.global_stderr = global_stderr(gfit.params, stories,
                                                 observed_until, with_rho);
        } catch (const std::exception&) {
            report.global_stderr.clear();
        }
    }

    io::log(1, "fitting per-story interest");
    FitOptions fo;
    fo.observed_until = observed_until;
    std::vector<StoryFit> fits(stories.size());
    parallel_for(stories.size(), flags.jobs, [&](std::size_t i) {
        fits[i] = fit_story_interest(gfit.params, stories[i], fo);
    });
    for (std::size_t i = 0; i < stories.size(); ++i)
        report.stories.push_back({stories[i].story_id, fits[i]});

    // site-wide activity from voter multiplicity in the stream; useless
    // when every voter appears exactly once
    std::unordered_map<std::string, long long> per_user;
    for (const auto& s : stories)
        for (const auto& v : s.votes) ++per_user[v.voter_id];
    std::vector<long long> counts;
    counts.reserve(per_user.size());
    long long max_count = 0;
    for (const auto& [_, n] : per_user) {
        counts.push_back(n);
        max_count = std::max(max_count, n);
    }
    if (max_count > 1) {
        try {
            report.activity = fit_activity_zero_truncated(counts);
        } catch (const std::exception& e) {
            io::log(1, std::string("activity fit skipped: ") + e.what());
        }
    }

    try {
        report.promotion = fit_promotion(stories, gfit.params.upcoming_window);
    } catch (const std::exception& e) {
        io::log(1, std::string("promotion fit skipped: ") + e.what());
    }

    // population distribution of the fitted rates, per channel
    auto fit_channel = [&](bool fan_channel, std::uint64_t stream)
        -> std::optional<io::RateDistribution> {
        std::vector<double> xs;
        for (const auto& f : fits) {
            double r = fan_channel ? f.r_fan : f.r_nonfan;
            long long n = fan_channel ? f.n_fan : f.n_nonfan;
            if (n >= 1 && r > 0.0 && r < 1.0) xs.push_back(r);
        }
        if (xs.size() < 5) return std::nullopt;
        auto ln = fit_lognormal(xs);
        io::RateDistribution d;
        d.mu = ln.mu;
        d.sigma = ln.sigma;
        d.n = (long long)xs.size();
        d.se_mu = ln.sigma / std::sqrt(double(xs.size()));
        d.se_sigma = ln.sigma / std::sqrt(2.0 * double(xs.size()));
        Rng rng(seed, stream);
        auto gof = ks_bootstrap_gof_lognormal(xs, rounds, rng);
        d.ks_statistic = gof.statistic;
        d.p_value = gof.p_value;
        return d;
    };
    report.dist_fan = fit_channel(true, 101);
    report.dist_nonfan = fit_channel(false, 102);

    // does fitted non-fan interest line up with how stories actually did
    std::vector<double> log_rate, log_final;
    for (std::size_t i = 0; i < stories.size(); ++i) {
        if (!stories[i].final_votes || fits[i].r_nonfan <= 0.0) continue;
        log_rate.push_back(std::log(fits[i].r_nonfan));
        log_final.push_back(std::log(double(*stories[i].final_votes)));
    }
    report.diagnostics_stories = (long long)log_rate.size();
    if (log_rate.size() >= 2) {
        report.pearson_log_rate_vs_log_final = pearson(log_rate, log_final);
        report.spearman_log_rate_vs_log_final = spearman(log_rate, log_final);
    }

    std::string out = need_path(cfg, "out", "fit");
    io::write_json(out, io::fit_report_to_json(report));
    io::log(1, "wrote " + out);
    return 0;
}

// -------------------------------------------------------------------------
// predict

int cmd_predict(const json& cfg, const Flags& flags) {
    io::detail::reject_unknown_keys(
        cfg,
        {"votes_in", "meta_in", "fan_graph_in", "params_in", "window",
         "t_final", "threshold", "prior", "equal_r", "report_out", "rows_out",
         "fan_curve_out"},
        "predict config");
    auto params = io::fit_report_from_json(
        io::read_json(need_path(cfg, "params_in", "predict")));
    auto corpus = load_corpus(cfg, "predict");
    PredictionConfig pc = prediction_config(cfg, flags, &params);

    io::log(1, "predicting " + std::to_string(corpus.stories.size()) +
                   " stories at window " + std::to_string(pc.vote_window));
    std::vector<StoryPrediction> preds;
    PredictionReport rep =
        evaluate_parallel(params.globals, corpus.stories, pc, flags.jobs,
                          &preds);

    json out;
    out["schema_version"] = 1;
    out["window"] = pc.vote_window;
    out["t_final"] = pc.t_final;
    out["threshold"] = double(pc.popularity_threshold);
    out["prior"] = pc.use_prior;
    out["equal_r"] = pc.constrain_equal_r;
    out["evaluated"] = rep.evaluated;
    out["unavailable"] = rep.unavailable;
    out["error_rate"] = rep.error_rate;
    out["pearson_r"] = io::detail::num_or_null(rep.pearson_r);
    out["spearman_rho"] = io::detail::num_or_null(rep.spearman_rho);
    io::write_json(need_path(cfg, "report_out", "predict"), out);

    if (auto rows_out = maybe_path(cfg, "rows_out")) {
        std::vector<io::PredictionRowOut> rows;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            io::PredictionRowOut r;
            r.pred = preds[i];
            if (corpus.stories[i].final_votes)
                r.actual_final = double(*corpus.stories[i].final_votes);
            rows.push_back(std::move(r));
        }
        io::write_prediction_rows_csv(*rows_out, rows);
    }
    if (auto curve_out = maybe_path(cfg, "fan_curve_out"))
        io::write_fan_curve_csv(*curve_out,
                                early_fan_fraction_curve(corpus.stories));
    return 0;
}

// -------------------------------------------------------------------------
// eval

int cmd_eval(const json& cfg, const Flags& flags) {
    io::detail::reject_unknown_keys(
        cfg,
        {"votes_in", "meta_in", "fan_graph_in", "params_in", "windows",
         "t_final", "threshold", "prior", "calibration_votes_in",
         "calibration_meta_in", "calibration_fraction", "seed", "grid_out",
         "grid_csv_out", "fan_curve_out"},
        "eval config");
    std::optional<io::FitReport> params;
    if (auto p = maybe_path(cfg, "params_in"))
        params = io::fit_report_from_json(io::read_json(*p));
    GlobalParamsV2 g = params ? params->globals : GlobalParamsV2{};
    auto corpus = load_corpus(cfg, "eval");

    std::vector<long long> windows = {10, 216};
    if (cfg.contains("windows")) {
        windows.clear();
        for (const auto& w : cfg.at("windows"))
            windows.push_back(w.get<long long>());
        if (windows.empty())
            throw std::invalid_argument("eval: windows must be non-empty");
    }
    if (flags.window) windows = {*flags.window};

    // the baseline's affine map is calibrated on stories the scored set
    // never sees: either a separate corpus or a seeded split of this one
    std::vector<StoryRecord> calibration, scored;
    if (auto cv = maybe_path(cfg, "calibration_votes_in")) {
        std::optional<std::filesystem::path> cm;
        if (auto m = maybe_path(cfg, "calibration_meta_in")) cm = *m;
        calibration = io::read_corpus(*cv, cm).stories;
        scored = corpus.stories;
    } else {
        double frac = cfg.value("calibration_fraction", 0.3);
        std::uint64_t seed = (std::uint64_t)cfg.value("seed", 1LL);
        if (flags.seed) seed = (std::uint64_t)*flags.seed;
        std::vector<std::size_t> idx(corpus.stories.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        Rng rng(seed, 7001);
        rng.shuffle(idx.begin(), idx.end());
        std::size_t n_cal = std::min(
            idx.size() > 2 ? idx.size() - 2 : std::size_t(0),
            std::max<std::size_t>(2, std::size_t(frac * double(idx.size()))));
        std::vector<bool> is_cal(idx.size(), false);
        for (std::size_t i = 0; i < n_cal; ++i) is_cal[idx[i]] = true;
        for (std::size_t i = 0; i < corpus.stories.size(); ++i)
            (is_cal[i] ? calibration : scored).push_back(corpus.stories[i]);
    }
    if (scored.empty())
        throw std::invalid_argument("eval: no stories left to score");

    std::vector<io::EvalCell> cells;
    for (long long w : windows) {
        PredictionConfig pc = prediction_config(
            cfg, flags, params ? &*params : nullptr);
        pc.vote_window = w;
        pc.constrain_equal_r = false;
        io::log(1, "eval window " + std::to_string(w));
        cells.push_back(
            {w, "model_distinct",
             evaluate_parallel(g, scored, pc, flags.jobs)});
        PredictionConfig pe = pc;
        pe.constrain_equal_r = true;
        cells.push_back(
            {w, "model_equal", evaluate_parallel(g, scored, pe, flags.jobs)});
        cells.push_back({w, "extrapolation",
                         evaluate_baseline(scored, calibration, pc)});
    }

    PredictionConfig shown = prediction_config(cfg, flags, nullptr);
    json out;
    out["schema_version"] = 1;
    out["windows"] = windows;
    out["t_final"] = shown.t_final;
    out["threshold"] = double(shown.popularity_threshold);
    out["prior"] = shown.use_prior;
    out["calibration_stories"] = (long long)calibration.size();
    out["scored_stories"] = (long long)scored.size();
    json grid = json::array();
    for (const auto& c : cells) grid.push_back(io::eval_cell_to_json(c));
    out["grid"] = std::move(grid);
    io::write_json(need_path(cfg, "grid_out", "eval"), out);

    if (auto csv = maybe_path(cfg, "grid_csv_out"))
        io::write_eval_grid_csv(*csv, cells);
    if (auto curve_out = maybe_path(cfg, "fan_curve_out"))
        io::write_fan_curve_csv(*curve_out,
                                early_fan_fraction_curve(corpus.stories));
    return 0;
}

// -------------------------------------------------------------------------
// digg-time

int cmd_digg_time(const json& cfg, const Flags&) {
    io::detail::reject_unknown_keys(
        cfg, {"votes_in", "votes_per_digg_hour", "clock_out"},
        "digg-time config");
    auto stories = io::read_stories(need_path(cfg, "votes_in", "digg-time"));
    std::vector<double> times;
    for (const auto& s : stories)
        for (const auto& v : s.votes)
            times.push_back(s.submission_wall_time + v.wall_time);
    if (times.empty())
        throw std::invalid_argument("digg-time: vote file contains no votes");
    double vpdh = cfg.value("votes_per_digg_hour", 2500.0);
    auto clock = build_activity_clock(times, vpdh);
    io::write_json(need_path(cfg, "clock_out", "digg-time"),
                   io::clock_to_json(clock));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic models of collaborative vote dynamics"};
    app.require_subcommand(1);

    struct SubSetup {
        CLI::App* sub = nullptr;
        std::string config_path;
        long long seed = 0;
        long long window = 0;
        double threshold = 0.0;
        double t_final = 0.0;
        int jobs = 1;
        bool prior_on = false, prior_off = false;
        bool equal_on = false, equal_off = false;
    };
    std::map<std::string, SubSetup> subs;

    auto common = [&](const char* name, const char* desc, bool predictish) {
        SubSetup& s = subs[name];
        s.sub = app.add_subcommand(name, desc);
        s.sub->add_option("--config", s.config_path, "JSON config file");
        s.sub->add_option("--seed", s.seed, "override the rng seed");
        s.sub->add_option("--jobs", s.jobs, "worker threads for per-story work")
            ->check(CLI::Range(1, 256));
        if (predictish) {
            s.sub->add_option("--window", s.window,
                              "early votes the predictor may see");
            s.sub->add_option("--threshold", s.threshold,
                              "popularity class boundary in votes");
            s.sub->add_option("--t-final", s.t_final,
                              "forecast horizon in Digg hours");
            auto* on = s.sub->add_flag("--prior", s.prior_on,
                                       "shrink rate fits toward the "
                                       "population distribution");
            auto* off = s.sub->add_flag("--no-prior", s.prior_off,
                                        "plain maximum likelihood rate fits");
            on->excludes(off);
            off->excludes(on);
            auto* eq = s.sub->add_flag("--equal-r", s.equal_on,
                                       "constrain one shared interest rate");
            auto* ne = s.sub->add_flag("--distinct-r", s.equal_off,
                                       "separate fan and non-fan rates");
            eq->excludes(ne);
            ne->excludes(eq);
        }
        return s.sub;
    };

    common("simulate", "draw a synthetic story corpus", false);
    common("fit", "estimate parameters from vote streams", false);
    common("predict", "forecast final popularity from early votes", true);
    common("eval", "compare predictors across windows", true);
    common("digg-time", "build the activity clock from a front-page stream",
           false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        for (auto& [name, s] : subs) {
            if (!s.sub->parsed()) continue;
            json cfg = load_config(s.config_path);
            Flags flags;
            if (s.sub->count("--seed")) flags.seed = s.seed;
            flags.jobs = s.jobs;
            if (s.sub->get_option_no_throw("--window") &&
                s.sub->count("--window"))
                flags.window = s.window;
            if (s.sub->get_option_no_throw("--threshold") &&
                s.sub->count("--threshold"))
                flags.threshold = s.threshold;
            if (s.sub->get_option_no_throw("--t-final") &&
                s.sub->count("--t-final"))
                flags.t_final = s.t_final;
            if (s.prior_on) flags.prior = true;
            if (s.prior_off) flags.prior = false;
            if (s.equal_on) flags.equal_r = true;
            if (s.equal_off) flags.equal_r = false;

            if (name == "simulate") return cmd_simulate(cfg, flags);
            if (name == "fit") return cmd_fit(cfg, flags);
            if (name == "predict") return cmd_predict(cfg, flags);
            if (name == "eval") return cmd_eval(cfg, flags);
            if (name == "digg-time") return cmd_digg_time(cfg, flags);
        }
        std::fprintf(stderr, "votedyn: no subcommand given\n");
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "votedyn: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "votedyn: internal failure: %s\n", e.what());
        return 3;
    }
}
