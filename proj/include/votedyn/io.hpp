#pragma once

// File formats and ingestion: vote streams (CSV / JSON lines), fan graphs,
// corpus sidecars, fitted-parameter reports, trajectory and plot CSVs.
// Every writer goes through an atomic temp-and-rename so readers never see
// a half-written file, and every format carries a schema_version.

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "votedyn/core.hpp"
#include "votedyn/dynamics.hpp"
#include "votedyn/estimate.hpp"
#include "votedyn/predict.hpp"

namespace votedyn::io {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// logging (VOTE_DYNAMICS_LOG: unset/0 quiet, 1/info, 2/debug)

inline int log_level() {
    static int level = [] {
        const char* v = std::getenv("VOTE_DYNAMICS_LOG");
        if (!v || !*v) return 0;
        std::string s(v);
        if (s == "debug" || s == "2") return 2;
        if (s == "info" || s == "1") return 1;
        if (s == "0" || s == "quiet" || s == "off") return 0;
        return 1;  // any other non-empty value: be chatty rather than silent
    }();
    return level;
}

inline void log(int level, const std::string& msg) {
    if (log_level() >= level) std::fprintf(stderr, "votedyn: %s\n", msg.c_str());
}

// ---------------------------------------------------------------------------
// timestamps

namespace detail {

inline long long days_from_civil(long long y, unsigned m, unsigned d) {
    y -= m <= 2;
    const long long era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = unsigned(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + (long long)doe - 719468;
}

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace((unsigned char)s[a])) ++a;
    while (b > a && std::isspace((unsigned char)s[b - 1])) --b;
    return s.substr(a, b - a);
}

}  // namespace detail

// Accepts raw epoch seconds ("1150360200", fractional ok) or ISO-8601
// ("2006-06-15T08:30:00Z", offset forms, fractional seconds; bare times are
// read as UTC). Returns epoch seconds.
inline double parse_timestamp_seconds(const std::string& raw) {
    std::string s = detail::trim(raw);
    if (s.empty()) throw std::invalid_argument("empty timestamp");

    static const std::regex num_re(R"(^[+-]?\d+(\.\d+)?([eE][+-]?\d+)?$)");
    if (std::regex_match(s, num_re)) return std::stod(s);

    static const std::regex iso_re(
        R"(^(\d{4})-(\d{2})-(\d{2})[T ](\d{2}):(\d{2}):(\d{2})(\.\d+)?(Z|[+-]\d{2}:?\d{2})?$)");
    std::smatch m;
    if (!std::regex_match(s, m, iso_re))
        throw std::invalid_argument("unparseable timestamp: " + raw);

    long long year = std::stoll(m[1]);
    unsigned month = unsigned(std::stoul(m[2]));
    unsigned day = unsigned(std::stoul(m[3]));
    unsigned hh = unsigned(std::stoul(m[4]));
    unsigned mm = unsigned(std::stoul(m[5]));
    unsigned ss = unsigned(std::stoul(m[6]));
    static const unsigned month_days[12] = {31, 28, 31, 30, 31, 30,
                                            31, 31, 30, 31, 30, 31};
    bool leap = year % 4 == 0 && (year % 100 != 0 || year % 400 == 0);
    if (month < 1 || month > 12)
        throw std::invalid_argument("bad month in timestamp: " + raw);
    unsigned dmax = month_days[month - 1] + (month == 2 && leap ? 1 : 0);
    if (day < 1 || day > dmax)
        throw std::invalid_argument("bad day in timestamp: " + raw);
    if (hh > 23 || mm > 59 || ss > 60)
        throw std::invalid_argument("bad time of day in timestamp: " + raw);

    double frac = m[7].matched ? std::stod(m[7].str()) : 0.0;
    double offset = 0.0;  // seconds east of UTC
    if (m[8].matched && m[8].str() != "Z") {
        std::string z = m[8].str();
        int sign = z[0] == '-' ? -1 : 1;
        std::string rest = z.substr(1);
        rest.erase(std::remove(rest.begin(), rest.end(), ':'), rest.end());
        int zh = std::stoi(rest.substr(0, 2));
        int zm = std::stoi(rest.substr(2, 2));
        offset = sign * (zh * 3600.0 + zm * 60.0);
    }
    double secs = double(detail::days_from_civil(year, month, day)) * 86400.0 +
                  hh * 3600.0 + mm * 60.0 + ss + frac;
    return secs - offset;
}

// ---------------------------------------------------------------------------
// atomic writes

inline void atomic_write_text(const std::filesystem::path& path,
                              const std::string& text) {
    static std::atomic<unsigned> counter{0};
    std::filesystem::path tmp =
        path.string() + ".tmp." + std::to_string(::getpid()) + "." +
        std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::invalid_argument("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);  // same directory: atomic replace
}

inline json read_json(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("bad json in " + path.string() + ": " +
                                    e.what());
    }
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    atomic_write_text(path, j.dump(2) + "\n");
}

namespace detail {

inline void check_schema_version(const json& j, const std::string& what) {
    if (!j.is_object() || !j.contains("schema_version"))
        throw std::invalid_argument(what + ": missing schema_version");
    if (j.at("schema_version").get<long long>() != 1)
        throw std::invalid_argument(what + ": unsupported schema_version");
}

inline void reject_unknown_keys(const json& j,
                                const std::vector<std::string>& allowed,
                                const std::string& what) {
    if (!j.is_object())
        throw std::invalid_argument(what + ": expected an object");
    for (const auto& item : j.items()) {
        bool ok = false;
        for (const auto& k : allowed)
            if (item.key() == k) {
                ok = true;
                break;
            }
        if (!ok)
            throw std::invalid_argument("unknown key '" + item.key() + "' in " +
                                        what);
    }
}

inline std::string fmt(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

// NaN-aware: json has no NaN literal, so absent correlations become null
inline json num_or_null(double x) {
    if (std::isnan(x)) return nullptr;
    return x;
}

inline double num_or_nan(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// plain CSV tables (no quoting; none of our fields contain commas)

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

}  // namespace detail

inline CsvTable read_csv_table(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read " + path.string());
    CsvTable table;
    std::string line;
    if (!std::getline(in, line))
        throw std::invalid_argument("empty csv file " + path.string());
    table.header = detail::split_csv_line(line);
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        auto row = detail::split_csv_line(line);
        if (row.size() != table.header.size())
            throw std::invalid_argument("ragged csv row in " + path.string());
        table.rows.push_back(std::move(row));
    }
    return table;
}

// ---------------------------------------------------------------------------
// vote streams

namespace detail {

struct VoteRowIn {
    std::string story_id, voter_id;
    double timestamp_s = 0.0;
    std::optional<bool> is_fan;
};

inline std::optional<bool> parse_fan_flag(const std::string& s,
                                          const std::string& where) {
    if (s.empty()) return std::nullopt;
    if (s == "1" || s == "true" || s == "True") return true;
    if (s == "0" || s == "false" || s == "False") return false;
    throw std::invalid_argument("bad is_fan value '" + s + "' in " + where);
}

inline std::vector<VoteRowIn> read_vote_rows(
    const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string text = buf.str();
    std::size_t first = text.find_first_not_of(" \t\r\n");
    bool jsonl = first != std::string::npos && text[first] == '{';

    std::vector<VoteRowIn> rows;
    std::istringstream stream(text);
    std::string line;
    if (jsonl) {
        while (std::getline(stream, line)) {
            std::string t = trim(line);
            if (t.empty()) continue;
            json j;
            try {
                j = json::parse(t);
            } catch (const json::parse_error& e) {
                throw std::invalid_argument("bad json line in " +
                                            path.string() + ": " + e.what());
            }
            VoteRowIn r;
            r.story_id = j.at("story_id").get<std::string>();
            r.voter_id = j.at("voter_id").get<std::string>();
            const auto& ts = j.at("timestamp");
            r.timestamp_s = ts.is_string()
                                ? parse_timestamp_seconds(ts.get<std::string>())
                                : ts.get<double>();
            if (j.contains("is_fan") && !j.at("is_fan").is_null())
                r.is_fan = j.at("is_fan").get<bool>();
            rows.push_back(std::move(r));
        }
        return rows;
    }

    if (!std::getline(stream, line))
        throw std::invalid_argument("empty vote file " + path.string());
    auto header = split_csv_line(line);
    auto col = [&](const std::string& name) -> long long {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return (long long)i;
        return -1;
    };
    long long c_story = col("story_id"), c_voter = col("voter_id"),
              c_ts = col("timestamp"), c_fan = col("is_fan");
    if (c_story < 0 || c_voter < 0 || c_ts < 0)
        throw std::invalid_argument(
            path.string() + ": vote csv needs story_id, voter_id, timestamp");
    while (std::getline(stream, line)) {
        if (trim(line).empty()) continue;
        auto f = split_csv_line(line);
        if (f.size() < header.size())
            throw std::invalid_argument("ragged vote row in " + path.string());
        VoteRowIn r;
        r.story_id = f[std::size_t(c_story)];
        r.voter_id = f[std::size_t(c_voter)];
        r.timestamp_s = parse_timestamp_seconds(f[std::size_t(c_ts)]);
        if (c_fan >= 0)
            r.is_fan = parse_fan_flag(f[std::size_t(c_fan)], path.string());
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace detail

inline FanGraph read_fan_graph_csv(const std::filesystem::path& path) {
    auto table = read_csv_table(path);
    long long c_fan = -1, c_friend = -1;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (table.header[i] == "fan_id") c_fan = (long long)i;
        if (table.header[i] == "friend_id") c_friend = (long long)i;
    }
    if (c_fan < 0 || c_friend < 0)
        throw std::invalid_argument(path.string() +
                                    ": fan graph csv needs fan_id, friend_id");
    FanGraph g;
    for (const auto& row : table.rows)
        g.add_edge(row[std::size_t(c_fan)], row[std::size_t(c_friend)]);
    return g;
}

// Groups a vote stream into StoryRecords: per story, votes sorted by time,
// the first vote is the submitter's and defines t = 0. An explicit is_fan
// column wins; otherwise a vote is a fan vote when the voter follows any
// earlier voter in the supplied graph; otherwise false.
inline std::vector<StoryRecord> read_stories(
    const std::filesystem::path& path, const FanGraph* graph = nullptr) {
    auto rows = detail::read_vote_rows(path);
    std::vector<std::string> order;
    std::unordered_map<std::string, std::vector<detail::VoteRowIn>> by_story;
    for (auto& r : rows) {
        auto it = by_story.find(r.story_id);
        if (it == by_story.end()) {
            order.push_back(r.story_id);
            by_story[r.story_id].push_back(std::move(r));
        } else {
            it->second.push_back(std::move(r));
        }
    }

    std::vector<StoryRecord> out;
    out.reserve(order.size());
    for (const auto& sid : order) {
        auto& sr = by_story[sid];
        std::stable_sort(sr.begin(), sr.end(),
                         [](const detail::VoteRowIn& a,
                            const detail::VoteRowIn& b) {
                             return a.timestamp_s < b.timestamp_s;
                         });
        StoryRecord rec;
        rec.story_id = sid;
        rec.submission_wall_time = sr.front().timestamp_s / 3600.0;
        std::unordered_set<std::string> prior;
        for (const auto& r : sr) {
            bool fan = false;
            if (r.is_fan.has_value()) {
                fan = *r.is_fan;
            } else if (graph && !prior.empty()) {
                if (const auto* fo = graph->followees(r.voter_id)) {
                    if (fo->size() < prior.size()) {
                        for (const auto& f : *fo)
                            if (prior.count(f)) {
                                fan = true;
                                break;
                            }
                    } else {
                        for (const auto& p : prior)
                            if (fo->count(p)) {
                                fan = true;
                                break;
                            }
                    }
                }
            }
            rec.votes.push_back(
                {sid, r.voter_id,
                 (r.timestamp_s - sr.front().timestamp_s) / 3600.0, fan});
            prior.insert(r.voter_id);
        }
        rec.votes.front().is_fan = false;  // the submitter's own vote
        out.push_back(std::move(rec));
    }
    return out;
}

inline void write_vote_stream_csv(const std::filesystem::path& path,
                                  const std::vector<StoryRecord>& stories) {
    std::ostringstream out;
    out << "story_id,voter_id,timestamp,is_fan\n";
    for (const auto& s : stories)
        for (const auto& v : s.votes)
            out << s.story_id << ',' << v.voter_id << ','
                << detail::fmt((s.submission_wall_time + v.wall_time) * 3600.0)
                << ',' << (v.is_fan ? 1 : 0) << '\n';
    atomic_write_text(path, out.str());
}

inline void write_vote_stream_jsonl(const std::filesystem::path& path,
                                    const std::vector<StoryRecord>& stories) {
    std::ostringstream out;
    for (const auto& s : stories)
        for (const auto& v : s.votes) {
            json j = {{"story_id", s.story_id},
                      {"voter_id", v.voter_id},
                      {"timestamp",
                       (s.submission_wall_time + v.wall_time) * 3600.0},
                      {"is_fan", v.is_fan}};
            out << j.dump() << '\n';
        }
    atomic_write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// corpus sidecar: per-story metadata plus optional ground truth

struct CorpusTruth {
    std::optional<GlobalParamsV2> globals;
    std::map<std::string, StoryParams> story_params;
};

struct CorpusData {
    std::vector<StoryRecord> stories;
    CorpusTruth truth;
};

inline json promotion_model_to_json(const PromotionModel& m) {
    if (m.kind == PromotionModel::Kind::Threshold)
        return json{{"kind", "threshold"}, {"h", m.threshold}};
    return json{{"kind", "logistic"},
                {"intercept", m.intercept},
                {"slope", m.slope}};
}

inline PromotionModel promotion_model_from_json(const json& j) {
    detail::reject_unknown_keys(j, {"kind", "h", "intercept", "slope"},
                                "promotion model");
    std::string kind = j.at("kind").get<std::string>();
    PromotionModel m;
    if (kind == "threshold") {
        m.kind = PromotionModel::Kind::Threshold;
        m.threshold = j.value("h", 40.0);
    } else if (kind == "logistic") {
        m.kind = PromotionModel::Kind::Logistic;
        m.intercept = j.at("intercept").get<double>();
        m.slope = j.at("slope").get<double>();
    } else {
        throw std::invalid_argument("unknown promotion model kind '" + kind +
                                    "'");
    }
    return m;
}

inline json globals_v2_to_json(const GlobalParamsV2& g) {
    return json{{"omega", g.omega},
                {"user_count", g.user_count},
                {"c", g.c},
                {"surf_mu", g.surf_mu},
                {"surf_lambda", g.surf_lambda},
                {"rho", g.rho},
                {"k_upcoming", g.k_upcoming},
                {"k_front", g.k_front},
                {"upcoming_window", g.upcoming_window},
                {"promotion", promotion_model_to_json(g.promotion)}};
}

// Partial objects are fine: absent keys keep their defaults.
inline GlobalParamsV2 globals_v2_from_json(const json& j) {
    detail::reject_unknown_keys(
        j,
        {"omega", "user_count", "c", "surf_mu", "surf_lambda", "rho",
         "k_upcoming", "k_front", "upcoming_window", "promotion"},
        "globals");
    GlobalParamsV2 g;
    g.omega = j.value("omega", g.omega);
    g.user_count = j.value("user_count", g.user_count);
    g.c = j.value("c", g.c);
    g.surf_mu = j.value("surf_mu", g.surf_mu);
    g.surf_lambda = j.value("surf_lambda", g.surf_lambda);
    g.rho = j.value("rho", g.rho);
    g.k_upcoming = j.value("k_upcoming", g.k_upcoming);
    g.k_front = j.value("k_front", g.k_front);
    g.upcoming_window = j.value("upcoming_window", g.upcoming_window);
    if (j.contains("promotion"))
        g.promotion = promotion_model_from_json(j.at("promotion"));
    return g;
}

inline void write_corpus(const std::filesystem::path& votes_path,
                         const std::filesystem::path& meta_path,
                         const std::vector<StoryRecord>& stories,
                         const CorpusTruth* truth = nullptr,
                         bool jsonl = false) {
    if (jsonl)
        write_vote_stream_jsonl(votes_path, stories);
    else
        write_vote_stream_csv(votes_path, stories);

    json meta;
    meta["schema_version"] = 1;
    json rows = json::array();
    for (const auto& s : stories) {
        json row;
        row["story_id"] = s.story_id;
        row["submitter_fans"] = s.submitter_fans;
        row["promotion_time"] =
            s.promotion_time ? json(*s.promotion_time) : json(nullptr);
        row["final_votes"] =
            s.final_votes ? json(*s.final_votes) : json(nullptr);
        if (truth) {
            auto it = truth->story_params.find(s.story_id);
            if (it != truth->story_params.end())
                row["truth"] = json{{"r", it->second.r},
                                    {"r_fan", it->second.r_fan},
                                    {"r_nonfan", it->second.r_nonfan}};
        }
        rows.push_back(std::move(row));
    }
    meta["stories"] = std::move(rows);
    if (truth && truth->globals)
        meta["truth_globals"] = globals_v2_to_json(*truth->globals);
    write_json(meta_path, meta);
}

inline CorpusData read_corpus(
    const std::filesystem::path& votes_path,
    const std::optional<std::filesystem::path>& meta_path = std::nullopt,
    const FanGraph* graph = nullptr) {
    CorpusData out;
    out.stories = read_stories(votes_path, graph);
    if (!meta_path) return out;

    json meta = read_json(*meta_path);
    detail::check_schema_version(meta, meta_path->string());
    detail::reject_unknown_keys(
        meta, {"schema_version", "stories", "truth_globals"},
        meta_path->string());
    std::unordered_map<std::string, StoryRecord*> by_id;
    for (auto& s : out.stories) by_id[s.story_id] = &s;
    for (const auto& row : meta.value("stories", json::array())) {
        detail::reject_unknown_keys(
            row,
            {"story_id", "submitter_fans", "promotion_time", "final_votes",
             "truth"},
            "sidecar story entry");
        std::string sid = row.at("story_id").get<std::string>();
        auto it = by_id.find(sid);
        if (it == by_id.end()) {
            log(1, "sidecar entry for unknown story " + sid + ", ignored");
            continue;
        }
        StoryRecord& rec = *it->second;
        rec.submitter_fans = row.value("submitter_fans", rec.submitter_fans);
        if (row.contains("promotion_time") && !row.at("promotion_time").is_null())
            rec.promotion_time = row.at("promotion_time").get<double>();
        if (row.contains("final_votes") && !row.at("final_votes").is_null())
            rec.final_votes = row.at("final_votes").get<long long>();
        if (row.contains("truth")) {
            const auto& t = row.at("truth");
            detail::reject_unknown_keys(t, {"r", "r_fan", "r_nonfan"},
                                        "sidecar story truth");
            StoryParams sp;
            sp.r = t.value("r", 0.0);
            sp.r_fan = t.value("r_fan", 0.0);
            sp.r_nonfan = t.value("r_nonfan", 0.0);
            sp.submitter_fans = rec.submitter_fans;
            out.truth.story_params[sid] = sp;
        }
    }
    if (meta.contains("truth_globals"))
        out.truth.globals = globals_v2_from_json(meta.at("truth_globals"));
    return out;
}

// ---------------------------------------------------------------------------
// activity clock

inline json clock_to_json(const ActivityClock& c) {
    json bps = json::array();
    for (const auto& bp : c.breakpoints)
        bps.push_back(json{{"wall_time", bp.wall_time},
                           {"cumulative_votes", bp.cumulative_votes}});
    return json{{"schema_version", 1},
                {"votes_per_digg_hour", c.votes_per_digg_hour},
                {"breakpoints", std::move(bps)}};
}

inline ActivityClock clock_from_json(const json& j) {
    detail::check_schema_version(j, "clock");
    detail::reject_unknown_keys(
        j, {"schema_version", "votes_per_digg_hour", "breakpoints"}, "clock");
    ActivityClock c;
    c.votes_per_digg_hour = j.at("votes_per_digg_hour").get<double>();
    for (const auto& bp : j.at("breakpoints")) {
        detail::reject_unknown_keys(bp, {"wall_time", "cumulative_votes"},
                                    "clock breakpoint");
        c.breakpoints.push_back({bp.at("wall_time").get<double>(),
                                 bp.at("cumulative_votes").get<double>()});
    }
    return c;
}

// ---------------------------------------------------------------------------
// trajectory CSVs

namespace detail {

inline const char* list_name(ListLocation loc) {
    switch (loc) {
        case ListLocation::Upcoming: return "upcoming";
        case ListLocation::FrontPage: return "front_page";
        case ListLocation::Removed: return "removed";
    }
    return "removed";
}

}  // namespace detail

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const TrajectoryV1& t) {
    std::ostringstream out;
    out << "t,votes,audience,page,list\n";
    for (const auto& s : t.samples)
        out << detail::fmt(s.t) << ',' << detail::fmt(s.votes) << ','
            << detail::fmt(s.s) << ',' << detail::fmt(s.page) << ','
            << detail::list_name(s.location) << '\n';
    atomic_write_text(path, out.str());
}

inline void write_trajectory_csv(const std::filesystem::path& path,
                                 const TrajectoryV2& t) {
    std::ostringstream out;
    out << "t,votes_fan,votes_nonfan,fans,nonfans,page,list\n";
    for (const auto& s : t.samples)
        out << detail::fmt(s.t) << ',' << detail::fmt(s.vF) << ','
            << detail::fmt(s.vN) << ',' << detail::fmt(s.F) << ','
            << detail::fmt(s.N) << ',' << detail::fmt(s.page) << ','
            << detail::list_name(s.location) << '\n';
    atomic_write_text(path, out.str());
}

// one file for a whole corpus, keyed by story id
inline void write_trajectories_csv(
    const std::filesystem::path& path,
    const std::vector<std::pair<std::string, TrajectoryV2>>& trajectories) {
    std::ostringstream out;
    out << "story_id,t,votes_fan,votes_nonfan,fans,nonfans,page,list\n";
    for (const auto& [sid, t] : trajectories)
        for (const auto& s : t.samples)
            out << sid << ',' << detail::fmt(s.t) << ',' << detail::fmt(s.vF)
                << ',' << detail::fmt(s.vN) << ',' << detail::fmt(s.F) << ','
                << detail::fmt(s.N) << ',' << detail::fmt(s.page) << ','
                << detail::list_name(s.location) << '\n';
    atomic_write_text(path, out.str());
}

// ---------------------------------------------------------------------------
// fitted-parameter report

struct RateDistribution {
    double mu = 0.0, sigma = 1.0;
    double se_mu = 0.0, se_sigma = 0.0;
    long long n = 0;
    double ks_statistic = 0.0;
    double p_value = 1.0;
};

struct FitReport {
    GlobalParamsV2 globals;
    bool global_converged = false;
    int global_iterations = 0;
    double global_log_likelihood = 0.0;
    std::map<std::string, double> global_stderr;

    struct StoryRow {
        std::string story_id;
        StoryFit fit;
    };
    std::vector<StoryRow> stories;

    std::optional<ActivityFit> activity;
    std::optional<PromotionFit> promotion;
    std::optional<RateDistribution> dist_fan, dist_nonfan;

    long long diagnostics_stories = 0;
    double pearson_log_rate_vs_log_final =
        std::numeric_limits<double>::quiet_NaN();
    double spearman_log_rate_vs_log_final =
        std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline json rate_distribution_to_json(
    const std::optional<RateDistribution>& d) {
    if (!d) return nullptr;
    return json{{"mu", d->mu},           {"sigma", d->sigma},
                {"se_mu", d->se_mu},     {"se_sigma", d->se_sigma},
                {"n", d->n},             {"ks_statistic", d->ks_statistic},
                {"p_value", d->p_value}};
}

inline std::optional<RateDistribution> rate_distribution_from_json(
    const json& j) {
    if (j.is_null()) return std::nullopt;
    reject_unknown_keys(
        j, {"mu", "sigma", "se_mu", "se_sigma", "n", "ks_statistic", "p_value"},
        "rate distribution");
    RateDistribution d;
    d.mu = j.at("mu").get<double>();
    d.sigma = j.at("sigma").get<double>();
    d.se_mu = j.value("se_mu", 0.0);
    d.se_sigma = j.value("se_sigma", 0.0);
    d.n = j.at("n").get<long long>();
    d.ks_statistic = j.value("ks_statistic", 0.0);
    d.p_value = j.value("p_value", 1.0);
    return d;
}

}  // namespace detail

inline json fit_report_to_json(const FitReport& r) {
    json j;
    j["schema_version"] = 1;
    j["model"] = "fan_nonfan_v2";
    j["globals"] = globals_v2_to_json(r.globals);
    json se = json::object();
    for (const auto& [k, v] : r.global_stderr) se[k] = v;
    j["global_fit"] = json{{"converged", r.global_converged},
                           {"iterations", r.global_iterations},
                           {"log_likelihood", r.global_log_likelihood},
                           {"stderr", std::move(se)}};
    json rows = json::array();
    for (const auto& row : r.stories)
        rows.push_back(json{{"story_id", row.story_id},
                            {"r_fan", row.fit.r_fan},
                            {"r_nonfan", row.fit.r_nonfan},
                            {"n_fan", row.fit.n_fan},
                            {"n_nonfan", row.fit.n_nonfan},
                            {"exposure_fan", row.fit.exposure_fan},
                            {"exposure_nonfan", row.fit.exposure_nonfan},
                            {"log_likelihood", row.fit.log_likelihood},
                            {"converged", row.fit.converged},
                            {"iterations", row.fit.iterations}});
    j["stories"] = std::move(rows);
    if (r.activity) {
        j["activity"] = json{
            {"mu", r.activity->mu},
            {"sigma", r.activity->sigma},
            {"user_count_estimate", r.activity->user_count_estimate},
            {"observed_users", r.activity->observed_users},
            {"log_likelihood", r.activity->log_likelihood},
            {"converged", r.activity->converged},
            {"iterations", r.activity->iterations}};
    } else {
        j["activity"] = nullptr;
    }
    if (r.promotion) {
        j["promotion"] =
            json{{"model", promotion_model_to_json(r.promotion->model)},
                 {"converged", r.promotion->converged},
                 {"iterations", r.promotion->iterations},
                 {"trials", r.promotion->trials},
                 {"promotions", r.promotion->promotions}};
    } else {
        j["promotion"] = nullptr;
    }
    j["rate_distributions"] =
        json{{"fan", detail::rate_distribution_to_json(r.dist_fan)},
             {"nonfan", detail::rate_distribution_to_json(r.dist_nonfan)}};
    j["diagnostics"] =
        json{{"stories", r.diagnostics_stories},
             {"pearson_log_rate_vs_log_final",
              detail::num_or_null(r.pearson_log_rate_vs_log_final)},
             {"spearman_log_rate_vs_log_final",
              detail::num_or_null(r.spearman_log_rate_vs_log_final)}};
    return j;
}

inline FitReport fit_report_from_json(const json& j) {
    detail::check_schema_version(j, "fit report");
    FitReport r;
    r.globals = globals_v2_from_json(j.at("globals"));
    const auto& gf = j.at("global_fit");
    r.global_converged = gf.at("converged").get<bool>();
    r.global_iterations = gf.value("iterations", 0);
    r.global_log_likelihood = gf.value("log_likelihood", 0.0);
    json se = gf.value("stderr", json::object());
    for (const auto& item : se.items())
        r.global_stderr[item.key()] = item.value().get<double>();
    for (const auto& row : j.value("stories", json::array())) {
        FitReport::StoryRow sr;
        sr.story_id = row.at("story_id").get<std::string>();
        sr.fit.r_fan = row.at("r_fan").get<double>();
        sr.fit.r_nonfan = row.at("r_nonfan").get<double>();
        sr.fit.n_fan = row.value("n_fan", 0LL);
        sr.fit.n_nonfan = row.value("n_nonfan", 0LL);
        sr.fit.exposure_fan = row.value("exposure_fan", 0.0);
        sr.fit.exposure_nonfan = row.value("exposure_nonfan", 0.0);
        sr.fit.log_likelihood = row.value("log_likelihood", 0.0);
        sr.fit.converged = row.value("converged", true);
        sr.fit.iterations = row.value("iterations", 0);
        r.stories.push_back(std::move(sr));
    }
    if (j.contains("activity") && !j.at("activity").is_null()) {
        const auto& a = j.at("activity");
        ActivityFit act;
        act.mu = a.at("mu").get<double>();
        act.sigma = a.at("sigma").get<double>();
        act.user_count_estimate = a.at("user_count_estimate").get<double>();
        act.observed_users = a.value("observed_users", 0LL);
        act.log_likelihood = a.value("log_likelihood", 0.0);
        act.converged = a.value("converged", false);
        act.iterations = a.value("iterations", 0);
        r.activity = act;
    }
    if (j.contains("promotion") && !j.at("promotion").is_null()) {
        const auto& p = j.at("promotion");
        PromotionFit promo;
        promo.model = promotion_model_from_json(p.at("model"));
        promo.converged = p.value("converged", false);
        promo.iterations = p.value("iterations", 0);
        promo.trials = p.value("trials", 0LL);
        promo.promotions = p.value("promotions", 0LL);
        r.promotion = promo;
    }
    if (j.contains("rate_distributions")) {
        const auto& d = j.at("rate_distributions");
        r.dist_fan = detail::rate_distribution_from_json(d.value("fan", json()));
        r.dist_nonfan =
            detail::rate_distribution_from_json(d.value("nonfan", json()));
    }
    if (j.contains("diagnostics")) {
        const auto& d = j.at("diagnostics");
        r.diagnostics_stories = d.value("stories", 0LL);
        r.pearson_log_rate_vs_log_final = detail::num_or_nan(
            d.value("pearson_log_rate_vs_log_final", json()));
        r.spearman_log_rate_vs_log_final = detail::num_or_nan(
            d.value("spearman_log_rate_vs_log_final", json()));
    }
    return r;
}

// ---------------------------------------------------------------------------
// prediction outputs

struct PredictionRowOut {
    StoryPrediction pred;
    std::optional<double> actual_final;
};

inline void write_prediction_rows_csv(const std::filesystem::path& path,
                                      const std::vector<PredictionRowOut>& rows) {
    std::ostringstream out;
    out << "story_id,available,window_votes,window_time,r_fan,r_nonfan,"
           "predicted_final,predicted_popular,promotion_time,actual_final\n";
    for (const auto& r : rows) {
        const auto& p = r.pred;
        out << p.story_id << ',' << (p.available ? 1 : 0) << ','
            << p.window_votes << ',' << detail::fmt(p.window_time) << ',';
        if (p.available)
            out << detail::fmt(p.r_fan) << ',' << detail::fmt(p.r_nonfan) << ','
                << detail::fmt(p.predicted_final) << ','
                << (p.predicted_popular ? 1 : 0) << ',';
        else
            out << ",,,,";
        if (p.promotion_time) out << detail::fmt(*p.promotion_time);
        out << ',';
        if (r.actual_final) out << detail::fmt(*r.actual_final);
        out << '\n';
    }
    atomic_write_text(path, out.str());
}

inline void write_fan_curve_csv(const std::filesystem::path& path,
                                const std::vector<FanFractionBucket>& curve) {
    std::ostringstream out;
    out << "fan_votes,stories,mean_final\n";
    for (const auto& b : curve)
        out << b.fan_votes << ',' << b.stories << ','
            << detail::fmt(b.mean_final) << '\n';
    atomic_write_text(path, out.str());
}

struct EvalCell {
    long long window = 0;
    std::string method;
    PredictionReport report;
};

inline json eval_cell_to_json(const EvalCell& cell) {
    return json{{"window", cell.window},
                {"method", cell.method},
                {"evaluated", cell.report.evaluated},
                {"unavailable", cell.report.unavailable},
                {"error_rate", cell.report.error_rate},
                {"pearson_r", detail::num_or_null(cell.report.pearson_r)},
                {"spearman_rho", detail::num_or_null(cell.report.spearman_rho)}};
}

inline void write_eval_grid_csv(const std::filesystem::path& path,
                                const std::vector<EvalCell>& cells) {
    std::ostringstream out;
    out << "window,method,evaluated,unavailable,error_rate,pearson_r,"
           "spearman_rho\n";
    for (const auto& c : cells) {
        out << c.window << ',' << c.method << ',' << c.report.evaluated << ','
            << c.report.unavailable << ',' << detail::fmt(c.report.error_rate)
            << ',';
        if (!std::isnan(c.report.pearson_r))
            out << detail::fmt(c.report.pearson_r);
        out << ',';
        if (!std::isnan(c.report.spearman_rho))
            out << detail::fmt(c.report.spearman_rho);
        out << '\n';
    }
    atomic_write_text(path, out.str());
}

}  // namespace votedyn::io
