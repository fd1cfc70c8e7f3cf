#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cutwalk/classify.hpp"
#include "cutwalk/dvals.hpp"
#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"
#include "cutwalk/laws.hpp"
#include "cutwalk/simulate.hpp"
#include "cutwalk/stats.hpp"

namespace cutwalk::cli {

using ojson = nlohmann::ordered_json;

namespace {

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw ConfigError("write to '" + path + "' failed");
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// Records config, outputs and a hash of the output payloads (timestamps excluded).
class Manifest {
public:
    Manifest(std::string command, const CLI::App& sub) : command_(std::move(command)) {
        started_ = utc_now();
        for (const auto* opt : sub.get_options()) {
            const auto name = opt->get_single_name();
            if (name.empty() || name == "help" || name == "config") continue;
            const auto res = opt->results();
            if (opt->get_expected_max() == 0) {
                config_[name] = opt->count() > 0;
            } else if (res.size() == 1) {
                config_[name] = res.front();
            } else if (!res.empty()) {
                config_[name] = res;
            }
        }
    }

    void set(const std::string& key, ojson value) { extra_[key] = std::move(value); }

    void add_output(const std::string& path, const std::string& payload) {
        outputs_.push_back(path.empty() ? "-" : path);
        hash_ = fnv1a64(payload, hash_);
    }

    void write(const std::string& anchor) const {
        if (anchor.empty() || anchor == "-") return;
        ojson m;
        m["command"] = command_;
        m["version"] = CUTWALK_VERSION;
        m["config"] = config_;
        for (const auto& [k, v] : extra_.items()) m[k] = v;
        m["outputs"] = outputs_;
        m["payload_hash"] = hex64(hash_);
        m["started"] = started_;
        m["finished"] = utc_now();
        write_text(anchor + ".manifest.json", m.dump(2) + "\n");
    }

    std::uint64_t hash() const { return hash_; }

private:
    std::string command_;
    std::string started_;
    ojson config_ = ojson::object();
    ojson extra_ = ojson::object();
    std::vector<std::string> outputs_;
    std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

std::vector<std::pair<Level, Level>> parse_pairs(const std::string& text) {
    std::vector<std::pair<Level, Level>> out;
    if (text.empty()) return out;
    std::istringstream in(text);
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        const auto colon = item.find(':');
        if (colon == std::string::npos) throw ConfigError("pair '" + item + "' is not j:k");
        Level j = 0;
        Level k = 0;
        const auto a = item.substr(0, colon);
        const auto b = item.substr(colon + 1);
        const auto ra = std::from_chars(a.data(), a.data() + a.size(), j);
        const auto rb = std::from_chars(b.data(), b.data() + b.size(), k);
        if (ra.ec != std::errc{} || ra.ptr != a.data() + a.size() || rb.ec != std::errc{} ||
            rb.ptr != b.data() + b.size()) {
            throw ConfigError("pair '" + item + "' is not j:k");
        }
        out.emplace_back(j, k);
    }
    return out;
}

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string family;
    Level max_level = 1000;
    double tol = 1e-10;
    std::string out;
    std::string laws;
    double clamp = kDefaultClampDelta;
};

int cmd_analyze(const AnalyzeArgs& a, Manifest& manifest) {
    const ChainEnv env(parse_family(a.family, a.clamp));
    if (a.max_level < 0) throw ConfigError("max-level must be >= 0");
    if (!(a.tol > 0.0)) throw ConfigError("tol must be positive");
    ProfileOptions opts;
    opts.width_target = a.tol;
    const auto d = d_profile(env, a.max_level, opts);

    std::ostringstream csv;
    csv << "level,d_lo,d_hi,escape_prob_lo,escape_prob_hi,heuristic_flag\n";
    bool all_converged = true;
    for (std::size_t i = 0; i < d.size(); ++i) {
        all_converged = all_converged && d[i].converged;
        csv << i << ',' << format_double(d[i].lo) << ',' << format_double(d[i].hi) << ','
            << format_double(1.0 / d[i].hi) << ',' << format_double(1.0 / d[i].lo) << ','
            << (d[i].heuristic ? 1 : 0) << '\n';
    }
    write_text(a.out, csv.str());
    manifest.set("family", env.family().grammar());
    manifest.add_output(a.out, csv.str());

    if (!a.laws.empty()) {
        std::ostringstream laws;
        laws << "site,p,cutpoint_prob,strong_cutpoint_prob,localtime_q,upcross_q\n";
        for (std::size_t i = 1; i < d.size(); ++i) {
            const double p = env.p_at(static_cast<Level>(i));
            const double dm = d[i].mid();
            const double strong = (1.0 + 2.0 * p) / (2.0 * dm);
            laws << i << ',' << format_double(p) << ',' << format_double(1.0 / dm) << ','
                 << format_double(strong) << ',' << format_double(strong) << ','
                 << format_double(1.0 / dm) << '\n';
        }
        write_text(a.laws, laws.str());
        manifest.add_output(a.laws, laws.str());
    }
    manifest.write(a.out);
    if (!all_converged) {
        std::cerr << "cutwalk: some D brackets did not reach tol " << format_double(a.tol) << '\n';
        return kUnconverged;
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyArgs {
    std::string family;
    double delta = 1.0;
    Level check_level = 100000;
    std::string compare;
    std::string out;
    double clamp = kDefaultClampDelta;
};

int cmd_classify(const ClassifyArgs& a, Manifest& manifest) {
    const auto family = parse_family(a.family, a.clamp);
    ClassifyOptions opts;
    opts.delta = a.delta;
    opts.check_level = a.check_level;
    if (!(a.delta > 0.0)) throw ConfigError("delta must be positive");
    if (a.check_level < 16) throw ConfigError("check-level must be >= 16");
    if (!a.compare.empty()) opts.comparison = parse_family(a.compare, a.clamp);
    const auto v = classify(family, opts);

    ojson j;
    j["family"] = family.grammar();
    j["outcome"] = to_string(v.outcome);
    j["technical_condition_met"] = v.technical_condition_met;
    j["delta"] = v.delta_used;
    j["rationale"] = ojson::array();
    for (const auto& r : v.rationale) j["rationale"].push_back({{"rule", r.rule}, {"detail", r.detail}});
    const auto text = j.dump(2) + "\n";
    write_text(a.out, text);
    manifest.set("family", family.grammar());
    manifest.add_output(a.out, text);
    manifest.write(a.out);
    return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
    std::string family;
    Level levels = 20;
    double eps = 1.0 / 1024.0;
    std::int64_t replicas = 1000;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string pairs;
    std::string out;
    std::string summary;
    std::int64_t step_cap = 1000000000;
    Level guard = 0;
    double clamp = kDefaultClampDelta;
};

WalkConfig walk_config(const SimulateArgs& a) {
    WalkConfig c;
    c.monitored_max = a.levels;
    c.eps_censor = a.eps;
    c.replicas = a.replicas;
    c.master_seed = a.seed;
    c.workers = a.workers;
    c.pairs = parse_pairs(a.pairs);
    c.step_cap = a.step_cap;
    c.guard = a.guard;
    return c;
}

int step_cap_status(const Census& c) {
    if (c.failed * 100 > c.replicas) {
        std::cerr << "cutwalk: step cap hit on " << c.failed << " of " << c.replicas
                  << " replicas\n";
        return kStepCap;
    }
    return kOk;
}

int cmd_simulate(const SimulateArgs& a, Manifest& manifest) {
    const ChainEnv env(parse_family(a.family, a.clamp));
    const auto walk = prepare_walk(env, walk_config(a));
    const auto c = census(walk);
    const auto payload = to_jsonl(c);
    write_text(a.out, payload);
    manifest.set("family", walk.family);
    manifest.set("seed", a.seed);
    manifest.set("horizon", walk.horizon);
    manifest.add_output(a.out, payload);
    if (!a.summary.empty()) {
        if (c.empty()) {
            std::cerr << "cutwalk: no replica succeeded; summary not written\n";
        } else {
            const auto csv = summary_csv(compare_census_to_exact(c, env));
            write_text(a.summary, csv);
            manifest.add_output(a.summary, csv);
        }
    }
    if (!c.empty()) {
        const auto lt = max_localtime_ratio(c, env, 0.1);
        if (lt.exceeded) {
            std::cerr << "cutwalk: local time ratio " << format_double(lt.ratio) << " at site "
                      << lt.site << " exceeds envelope " << format_double(lt.envelope) << '\n';
        }
    }
    manifest.write(a.out);
    return step_cap_status(c);
}

// ---------------------------------------------------------------------------
// validate

struct ValidateArgs {
    SimulateArgs sim;
    std::string census_path;
    std::vector<Level> sites;
    std::optional<double> localtime_q;
    std::optional<double> upcross_q;
    double alpha = 1e-3;
    double z_max = 4.0;
    std::string out;
};

struct TestRow {
    std::string site;
    std::string test;
    double stat = 0.0;
    std::string df;
    std::optional<double> p_value;
    bool pass = false;
};

double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

TestRow z_row(std::string site, std::string test, double z, double z_max) {
    return {std::move(site), std::move(test), z, "", normal_two_sided(z), std::abs(z) <= z_max};
}

TestRow gof_row(Level site, const std::string& test, const std::map<std::int64_t, std::int64_t>& obs,
                double q, double alpha) {
    TestRow row{std::to_string(site), test, 0.0, "", std::nullopt, false};
    try {
        const auto g = chi_square_geometric(obs, q);
        row.stat = g.statistic;
        row.df = std::to_string(g.df);
        row.p_value = g.p_value;
        row.pass = g.p_value ? *g.p_value > alpha : g.statistic == 0.0;
    } catch (const DomainError& e) {
        std::cerr << "cutwalk: " << test << " at site " << site << ": " << e.what() << '\n';
        row.stat = NAN;
    }
    return row;
}

int cmd_validate(const ValidateArgs& a, Manifest& manifest) {
    Census c;
    if (!a.census_path.empty()) {
        c = census_from_jsonl(read_text(a.census_path));
    } else if (!a.sim.family.empty()) {
        const ChainEnv env(parse_family(a.sim.family, a.sim.clamp));
        c = census(prepare_walk(env, walk_config(a.sim)));
        if (const int rc = step_cap_status(c); rc != kOk) return rc;
    } else {
        throw ConfigError("validate needs --census or --family");
    }
    if (c.empty()) throw NoDataError("census has no successful replicas");
    const ChainEnv env(parse_family(c.family, a.sim.clamp));

    std::vector<Level> sites = a.sites;
    if (sites.empty()) sites.push_back(c.monitored_max - c.guard);
    const auto cmp = compare_census_to_exact(c, env);

    std::vector<TestRow> rows;
    for (const Level r : sites) {
        if (r < 1 || r > c.monitored_max - c.guard) {
            throw ConfigError("site " + std::to_string(r) + " is outside 1.." +
                              std::to_string(c.monitored_max - c.guard));
        }
        const auto& s = cmp.sites[static_cast<std::size_t>(r - 1)];
        const auto name = std::to_string(r);
        rows.push_back(z_row(name, "cutpoint_z", s.z_cut, a.z_max));
        rows.push_back(z_row(name, "strong_z", s.z_strong, a.z_max));
        const double q_lt = a.localtime_q.value_or(local_time_law(env, r).success);
        const double q_up = a.upcross_q.value_or(upcross_law(env, r).success);
        rows.push_back(gof_row(r, "localtime_gof", c.site(r).local_time_hist, q_lt, a.alpha));
        rows.push_back(gof_row(r, "upcross_gof", c.site(r).upcross_hist, q_up, a.alpha));
    }
    for (const auto& p : cmp.pairs) {
        const auto name = std::to_string(p.j) + ":" + std::to_string(p.k);
        rows.push_back(z_row(name, "pair_cutpoint_z", p.z_cut, a.z_max));
        rows.push_back(z_row(name, "pair_strong_z", p.z_strong, a.z_max));
    }

    std::ostringstream csv;
    csv << "site,test,stat,df,p_value,pass\n";
    int failures = 0;
    for (const auto& r : rows) {
        csv << r.site << ',' << r.test << ',' << format_double(r.stat) << ',' << r.df << ','
            << (r.p_value ? format_double(*r.p_value) : "") << ',' << (r.pass ? "true" : "false")
            << '\n';
        if (!r.pass) {
            ++failures;
            std::cerr << "cutwalk: FAIL " << r.test << " at site " << r.site << " (stat "
                      << format_double(r.stat) << ")\n";
        }
    }
    write_text(a.out, csv.str());
    manifest.set("family", c.family);
    manifest.set("seed", c.master_seed);
    manifest.add_output(a.out, csv.str());
    manifest.write(a.out);
    return failures == 0 ? kOk : kValidationFailed;
}

void add_family(CLI::App* sub, std::string& family, double& clamp, bool required) {
    auto* opt = sub->add_option("--family", family, "bias family grammar");
    if (required) opt->required();
    sub->add_option("--clamp", clamp, "margin below 1/2 for clamped biases")
        ->check(CLI::Range(1e-12, 0.5));
}

void add_simulate_flags(CLI::App* sub, SimulateArgs& s) {
    sub->add_option("--levels", s.levels, "monitored sites 1..M");
    sub->add_option("--eps", s.eps, "censoring error per site");
    sub->add_option("--replicas", s.replicas, "number of replicas");
    sub->add_option("--seed", s.seed, "master seed")->envname("CUTWALK_SEED");
    sub->add_option("--workers", s.workers, "worker threads");
    sub->add_option("--pairs", s.pairs, "site pairs j:k[,j:k...]");
    sub->add_option("--step-cap", s.step_cap, "steps before a replica is failed");
    sub->add_option("--guard", s.guard, "sites below M excluded from validation");
}

}  // namespace

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::vector<std::string> out;
    std::string path;
    std::set<std::string> given;
    for (std::size_t i = 0; i < args.size(); ++i) {
        const auto& s = args[i];
        if (s == "--config") {
            if (i + 1 >= args.size()) throw ConfigError("--config needs a path");
            path = args[++i];
            continue;
        }
        if (s.rfind("--config=", 0) == 0) {
            path = s.substr(9);
            continue;
        }
        if (s.rfind("--", 0) == 0) given.insert(s.substr(2, s.find('=') - 2));
        out.push_back(s);
    }
    if (path.empty()) return out;

    std::istringstream in(read_text(path));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        }
        auto key = trim(line.substr(0, eq));
        const auto value = trim(line.substr(eq + 1));
        if (key.rfind("--", 0) == 0) key = key.substr(2);
        std::replace(key.begin(), key.end(), '_', '-');
        if (key.empty()) throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
        if (given.count(key)) continue;
        out.push_back("--" + key);
        out.push_back(value);
    }
    return out;
}

int run(const std::vector<std::string>& raw_args) {
    CLI::App app{"Nearest-neighbour random walks on the half-line: escape functions, "
                 "cutpoint laws, classification and simulation"};
    app.name("cutwalk");
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(CUTWALK_VERSION));
    // Read by expand_config before parsing; declared so --help lists it.
    std::string config_path;
    app.add_option("--config", config_path, "file of key = value lines; flags win");

    AnalyzeArgs an;
    auto* analyze = app.add_subcommand("analyze", "D brackets, escape probabilities and laws");
    add_family(analyze, an.family, an.clamp, true);
    analyze->add_option("--max-level", an.max_level, "largest level");
    analyze->add_option("--tol", an.tol, "relative bracket width target");
    analyze->add_option("--out", an.out, "D CSV (default stdout)");
    analyze->add_option("--laws", an.laws, "laws CSV");

    ClassifyArgs cl;
    auto* classify_cmd = app.add_subcommand("classify", "cutpoint classification verdict");
    add_family(classify_cmd, cl.family, cl.clamp, true);
    classify_cmd->add_option("--delta", cl.delta, "delta of the growth condition");
    classify_cmd->add_option("--check-level", cl.check_level, "level of the empirical checks");
    classify_cmd->add_option("--compare", cl.compare, "family for the domination rule");
    classify_cmd->add_option("--out", cl.out, "JSON output (default stdout)");

    SimulateArgs sm;
    auto* simulate = app.add_subcommand("simulate", "censored Monte Carlo census");
    add_family(simulate, sm.family, sm.clamp, true);
    add_simulate_flags(simulate, sm);
    simulate->add_option("--out", sm.out, "census JSONL")->required();
    simulate->add_option("--summary", sm.summary, "per-site CSV summary");

    ValidateArgs va;
    auto* validate = app.add_subcommand("validate", "statistical checks of a census");
    validate->add_option("--census", va.census_path, "census JSONL from simulate");
    add_family(validate, va.sim.family, va.sim.clamp, false);
    add_simulate_flags(validate, va.sim);
    validate->add_option("--sites", va.sites, "sites to test (default M - guard)")->delimiter(',');
    validate->add_option("--localtime-q", va.localtime_q, "override q of the local-time law");
    validate->add_option("--upcross-q", va.upcross_q, "override q of the upcrossing law");
    validate->add_option("--alpha", va.alpha, "p-value threshold");
    validate->add_option("--z-max", va.z_max, "largest accepted |z|");
    validate->add_option("--out", va.out, "CSV output (default stdout)");

    std::vector<std::string> args;
    try {
        args = expand_config(std::vector<std::string>(raw_args.begin() + 1, raw_args.end()));
        std::reverse(args.begin(), args.end());
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    } catch (const ConfigError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*analyze) {
            Manifest m("analyze", *analyze);
            return cmd_analyze(an, m);
        }
        if (*classify_cmd) {
            Manifest m("classify", *classify_cmd);
            return cmd_classify(cl, m);
        }
        if (*simulate) {
            Manifest m("simulate", *simulate);
            return cmd_simulate(sm, m);
        }
        Manifest m("validate", *validate);
        return cmd_validate(va, m);
    } catch (const ConfigError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kUsage;
    } catch (const NoDataError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kUsage;
    } catch (const DomainError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kUsage;
    } catch (const RecurrentError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kRecurrent;
    } catch (const ConvergenceError& e) {
        std::cerr << "cutwalk: " << e.what() << '\n';
        return kUnconverged;
    }
}

}  // namespace cutwalk::cli
