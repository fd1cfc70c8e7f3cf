#include "cutwalk/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "cutwalk/dvals.hpp"
#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"

namespace cutwalk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

void check_config(const WalkConfig& c) {
    if (c.monitored_max < 1) throw ConfigError("levels must be >= 1");
    if (!(c.eps_censor > 0.0 && c.eps_censor < 1.0)) throw ConfigError("eps must lie in (0, 1)");
    if (c.replicas < 1) throw ConfigError("replicas must be >= 1");
    if (c.workers < 1) throw ConfigError("workers must be >= 1");
    if (c.step_cap < 1) throw ConfigError("step cap must be >= 1");
    if (c.guard < 0 || c.guard >= c.monitored_max) {
        throw ConfigError("guard must lie in [0, levels)");
    }
    for (const auto& [j, k] : c.pairs) {
        if (j < 1 || k <= j || k > c.monitored_max) {
            throw ConfigError("pair " + std::to_string(j) + ":" + std::to_string(k) +
                              " needs 1 <= j < k <= levels");
        }
    }
}

}  // namespace

std::uint64_t replica_seed(std::uint64_t master_seed, std::int64_t replica_id) {
    return splitmix64(splitmix64(master_seed) +
                      static_cast<std::uint64_t>(replica_id) * 0x9e3779b97f4a7c15ULL);
}

PreparedWalk prepare_walk(const ChainEnv& env, const WalkConfig& config) {
    check_config(config);
    const auto tv = transience_verdict(env.family());
    if (tv.outcome == Transience::Recurrent) {
        throw RecurrentError("family " + env.family().grammar() + " is recurrent: " + tv.detail);
    }
    PreparedWalk w;
    w.config = config;
    w.family = env.family().grammar();
    w.horizon = horizon_for_epsilon(env, config.monitored_max, config.eps_censor);
    w.up_threshold.resize(static_cast<std::size_t>(w.horizon));
    w.up_threshold[0] = ~std::uint64_t{0};
    for (Level i = 1; i < w.horizon; ++i) {
        w.up_threshold[static_cast<std::size_t>(i)] =
            static_cast<std::uint64_t>(std::ldexp(0.5 + env.p_at(i), 64));
    }
    return w;
}

CensusRecord run_replica(const PreparedWalk& walk, std::int64_t replica_id) {
    const auto m = static_cast<std::size_t>(walk.config.monitored_max);
    CensusRecord rec;
    rec.replica_id = replica_id;
    rec.horizon = walk.horizon;
    rec.local_time.assign(m + 1, 0);
    rec.upcross.assign(m + 1, 0);
    rec.downs_into.assign(m + 1, 0);
    std::vector<std::uint8_t> weak_broken(m + 1, 0);

    std::mt19937_64 gen(replica_seed(walk.config.master_seed, replica_id));
    const Level h = walk.horizon;
    const Level mm = walk.config.monitored_max;
    Level x = 0;
    Level max_reached = 0;
    std::int64_t steps = 0;
    rec.local_time[0] = 1;
    while (x < h) {
        if (steps == walk.config.step_cap) {
            rec.failed = true;
            break;
        }
        ++steps;
        const bool up = x == 0 || gen() < walk.up_threshold[static_cast<std::size_t>(x)];
        if (up) {
            if (x <= mm) ++rec.upcross[static_cast<std::size_t>(x)];
            ++x;
            max_reached = std::max(max_reached, x);
        } else {
            if (x <= mm && max_reached > x) weak_broken[static_cast<std::size_t>(x)] = 1;
            --x;
            if (x <= mm) ++rec.downs_into[static_cast<std::size_t>(x)];
        }
        if (x <= mm) ++rec.local_time[static_cast<std::size_t>(x)];
    }
    rec.steps = steps;
    rec.is_cutpoint.assign(m + 1, 0);
    rec.is_strong.assign(m + 1, 0);
    rec.is_weak.assign(m + 1, 0);
    for (std::size_t r = 1; r <= m; ++r) {
        rec.is_cutpoint[r] = rec.upcross[r] == 1;
        rec.is_strong[r] = rec.local_time[r] == 1;
        rec.is_weak[r] = !weak_broken[r];
    }
    return rec;
}

// ---------------------------------------------------------------------------
// census

Census Census::empty_for(const PreparedWalk& walk) {
    Census c;
    c.family = walk.family;
    c.monitored_max = walk.config.monitored_max;
    c.eps_censor = walk.config.eps_censor;
    c.horizon = walk.horizon;
    c.replicas = walk.config.replicas;
    c.master_seed = walk.config.master_seed;
    c.guard = walk.config.guard;
    c.sites.resize(static_cast<std::size_t>(walk.config.monitored_max));
    for (const auto& [j, k] : walk.config.pairs) c.pairs.push_back({j, k, 0, 0});
    return c;
}

const SiteTally& Census::site(Level r) const {
    if (r < 1 || r > monitored_max) {
        throw DomainError("site " + std::to_string(r) + " is not monitored");
    }
    return sites[static_cast<std::size_t>(r - 1)];
}

void Census::add(const CensusRecord& rec) {
    if (rec.failed) {
        ++failed;
        return;
    }
    ++succeeded;
    total_steps += rec.steps;
    for (Level r = 1; r <= monitored_max; ++r) {
        const auto i = static_cast<std::size_t>(r);
        auto& s = sites[i - 1];
        s.cut += rec.is_cutpoint[i];
        s.strong += rec.is_strong[i];
        s.weak += rec.is_weak[i];
        s.max_local_time = std::max(s.max_local_time, rec.local_time[i]);
        ++s.local_time_hist[rec.local_time[i]];
        ++s.upcross_hist[rec.upcross[i]];
    }
    for (auto& p : pairs) {
        const auto j = static_cast<std::size_t>(p.j);
        const auto k = static_cast<std::size_t>(p.k);
        p.both_cut += rec.is_cutpoint[j] && rec.is_cutpoint[k];
        p.both_strong += rec.is_strong[j] && rec.is_strong[k];
    }
    ++strong_run_hist[longest_strong_run(rec, guard)];
}

void Census::merge(const Census& o) {
    if (o.monitored_max != monitored_max || o.pairs.size() != pairs.size()) {
        throw DomainError("cannot merge censuses of different shape");
    }
    succeeded += o.succeeded;
    failed += o.failed;
    total_steps += o.total_steps;
    for (std::size_t i = 0; i < sites.size(); ++i) {
        auto& s = sites[i];
        const auto& t = o.sites[i];
        s.cut += t.cut;
        s.strong += t.strong;
        s.weak += t.weak;
        s.max_local_time = std::max(s.max_local_time, t.max_local_time);
        for (const auto& [l, n] : t.local_time_hist) s.local_time_hist[l] += n;
        for (const auto& [l, n] : t.upcross_hist) s.upcross_hist[l] += n;
    }
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        pairs[i].both_cut += o.pairs[i].both_cut;
        pairs[i].both_strong += o.pairs[i].both_strong;
    }
    for (const auto& [l, n] : o.strong_run_hist) strong_run_hist[l] += n;
}

Census census(const PreparedWalk& walk) {
    const std::int64_t n = walk.config.replicas;
    const auto workers = static_cast<std::int64_t>(
        std::min<std::int64_t>(walk.config.workers, n));
    std::vector<Census> parts(static_cast<std::size_t>(workers), Census::empty_for(walk));
    auto body = [&](std::int64_t w) {
        const std::int64_t begin = n * w / workers;
        const std::int64_t end = n * (w + 1) / workers;
        for (std::int64_t id = begin; id < end; ++id) {
            parts[static_cast<std::size_t>(w)].add(run_replica(walk, id));
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> threads;
        for (std::int64_t w = 0; w < workers; ++w) threads.emplace_back(body, w);
        for (auto& t : threads) t.join();
    }
    Census total = Census::empty_for(walk);
    for (const auto& p : parts) total.merge(p);
    return total;
}

Census census(const ChainEnv& env, const WalkConfig& config) {
    return census(prepare_walk(env, config));
}

Level longest_strong_run(const CensusRecord& rec, Level guard) {
    const Level top = static_cast<Level>(rec.local_time.size()) - 1 - guard;
    Level best = 0;
    Level run = 0;
    for (Level r = 1; r <= top; ++r) {
        run = rec.local_time[static_cast<std::size_t>(r)] == 1 ? run + 1 : 0;
        best = std::max(best, run);
    }
    return best;
}

Level longest_strong_run(const Census& c) {
    return c.strong_run_hist.empty() ? 0 : c.strong_run_hist.rbegin()->first;
}

LocaltimeRatio max_localtime_ratio(const Census& c, const ChainEnv& env, double eps) {
    if (c.empty()) throw NoDataError("no data");
    LocaltimeRatio out;
    out.envelope = 2.0 * (1.0 + eps);
    for (Level r = 2; r <= c.monitored_max; ++r) {
        const double d = d_limit(env, r, 1e-10).mid();
        const double ratio = static_cast<double>(c.site(r).max_local_time) /
                             (d * std::log(static_cast<double>(r)));
        if (ratio > out.ratio) {
            out.ratio = ratio;
            out.site = r;
        }
    }
    out.exceeded = out.ratio > out.envelope;
    return out;
}

// ---------------------------------------------------------------------------
// JSON lines

namespace {

using ojson = nlohmann::ordered_json;

ojson hist_json(const std::map<std::int64_t, std::int64_t>& h) {
    ojson a = ojson::array();
    for (const auto& [l, n] : h) a.push_back({l, n});
    return a;
}

std::map<std::int64_t, std::int64_t> hist_from(const ojson& a) {
    std::map<std::int64_t, std::int64_t> h;
    for (const auto& e : a) h[e.at(0).get<std::int64_t>()] += e.at(1).get<std::int64_t>();
    return h;
}

}  // namespace

std::string to_jsonl(const Census& c) {
    std::ostringstream out;
    ojson head;
    head["type"] = "census";
    head["family"] = c.family;
    head["levels"] = c.monitored_max;
    head["eps"] = format_double(c.eps_censor);
    head["horizon"] = c.horizon;
    head["replicas"] = c.replicas;
    head["seed"] = c.master_seed;
    head["guard"] = c.guard;
    head["succeeded"] = c.succeeded;
    head["failed"] = c.failed;
    head["total_steps"] = c.total_steps;
    head["strong_run_hist"] = hist_json(c.strong_run_hist);
    out << head.dump() << '\n';
    for (Level r = 1; r <= c.monitored_max; ++r) {
        const auto& s = c.site(r);
        ojson line;
        line["type"] = "site";
        line["site"] = r;
        line["n"] = c.succeeded;
        line["cut"] = s.cut;
        line["strong"] = s.strong;
        line["weak"] = s.weak;
        line["max_local_time"] = s.max_local_time;
        line["local_time_hist"] = hist_json(s.local_time_hist);
        line["upcross_hist"] = hist_json(s.upcross_hist);
        out << line.dump() << '\n';
    }
    for (const auto& p : c.pairs) {
        ojson line;
        line["type"] = "pair";
        line["j"] = p.j;
        line["k"] = p.k;
        line["n"] = c.succeeded;
        line["both_cut"] = p.both_cut;
        line["both_strong"] = p.both_strong;
        out << line.dump() << '\n';
    }
    return out.str();
}

Census census_from_jsonl(const std::string& text) {
    Census c;
    bool have_head = false;
    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
        ojson line;
        try {
            line = ojson::parse(raw);
        } catch (const std::exception& e) {
            throw ConfigError("census line " + std::to_string(lineno) + ": " + e.what());
        }
        const auto type = line.value("type", std::string{});
        try {
            if (type == "census") {
                c.family = line.at("family").get<std::string>();
                c.monitored_max = line.at("levels").get<Level>();
                c.eps_censor = std::stod(line.at("eps").get<std::string>());
                c.horizon = line.at("horizon").get<Level>();
                c.replicas = line.at("replicas").get<std::int64_t>();
                c.master_seed = line.at("seed").get<std::uint64_t>();
                c.guard = line.at("guard").get<Level>();
                c.succeeded = line.at("succeeded").get<std::int64_t>();
                c.failed = line.at("failed").get<std::int64_t>();
                c.total_steps = line.at("total_steps").get<std::int64_t>();
                c.strong_run_hist = hist_from(line.at("strong_run_hist"));
                c.sites.assign(static_cast<std::size_t>(std::max<Level>(c.monitored_max, 0)), {});
                have_head = true;
            } else if (type == "site") {
                if (!have_head) throw ConfigError("site line before census line");
                const Level r = line.at("site").get<Level>();
                if (r < 1 || r > c.monitored_max) throw ConfigError("site out of range");
                auto& s = c.sites[static_cast<std::size_t>(r - 1)];
                s.cut = line.at("cut").get<std::int64_t>();
                s.strong = line.at("strong").get<std::int64_t>();
                s.weak = line.at("weak").get<std::int64_t>();
                s.max_local_time = line.at("max_local_time").get<std::int64_t>();
                s.local_time_hist = hist_from(line.at("local_time_hist"));
                s.upcross_hist = hist_from(line.at("upcross_hist"));
            } else if (type == "pair") {
                if (!have_head) throw ConfigError("pair line before census line");
                c.pairs.push_back({line.at("j").get<Level>(), line.at("k").get<Level>(),
                                   line.at("both_cut").get<std::int64_t>(),
                                   line.at("both_strong").get<std::int64_t>()});
            } else {
                throw ConfigError("unknown record type '" + type + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("census line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!have_head) throw NoDataError("census file has no census line");
    return c;
}

}  // namespace cutwalk
