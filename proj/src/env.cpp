#include "cutwalk/env.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include "cutwalk/errors.hpp"
#include "cutwalk/format.hpp"

namespace cutwalk {

const char* to_string(FamilyKind k) {
    switch (k) {
        case FamilyKind::Constant: return "const";
        case FamilyKind::Harmonic: return "harmonic";
        case FamilyKind::Lambda: return "lambda";
        case FamilyKind::LogLogBeta: return "loglog";
        case FamilyKind::Table: return "table";
    }
    return "?";
}

const char* to_string(TailRule t) {
    return t == TailRule::RepeatLast ? "repeat_last" : "zero";
}

const char* to_string(Transience t) {
    switch (t) {
        case Transience::Transient: return "TRANSIENT";
        case Transience::Recurrent: return "RECURRENT";
        case Transience::Unknown: return "UNKNOWN";
    }
    return "?";
}

double odds_ratio(double p) noexcept { return (0.5 - p) / (0.5 + p); }

double log_odds_ratio(double p) noexcept { return std::log1p(-2.0 * p) - std::log1p(2.0 * p); }

namespace {

void check_delta(double delta) {
    if (!(delta > 0.0 && delta < 0.5)) {
        throw ConfigError("clamp_delta must lie in (0, 1/2), got " + format_double(delta));
    }
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw ConfigError(std::string(what) + " must be finite");
}

// First integer with log_{K-1} i >= 1, where log_0 i = i.
Level lambda_start(int k) {
    if (k == 1) return 1;
    double threshold = 1.0;
    for (int j = 1; j < k; ++j) threshold = std::exp(threshold);
    if (threshold > 1e15) {
        throw ConfigError("lambda:K=" + std::to_string(k) +
                          " has its first well-defined index beyond the representable range");
    }
    auto i = static_cast<Level>(std::ceil(threshold));
    auto iterated = [k](double x) {
        for (int j = 1; j < k; ++j) x = std::log(x);
        return x;
    };
    while (iterated(static_cast<double>(i)) < 1.0) ++i;
    return i;
}

}  // namespace

double BiasFamily::clamp(double p) const noexcept {
    return std::min(std::max(p, 0.0), 0.5 - clamp_delta_);
}

BiasFamily BiasFamily::constant(double p, double clamp_delta) {
    check_delta(clamp_delta);
    check_finite(p, "p");
    if (p < 0.0) throw ConfigError("const:p must be nonnegative, got " + format_double(p));
    BiasFamily f;
    f.kind_ = FamilyKind::Constant;
    f.p_ = p;
    f.clamp_delta_ = clamp_delta;
    f.finalize();
    return f;
}

BiasFamily BiasFamily::harmonic(double b, double clamp_delta) {
    check_delta(clamp_delta);
    check_finite(b, "B");
    if (b < 0.0) throw ConfigError("harmonic:B must be nonnegative, got " + format_double(b));
    BiasFamily f;
    f.kind_ = FamilyKind::Harmonic;
    f.b_ = b;
    f.clamp_delta_ = clamp_delta;
    f.finalize();
    return f;
}

BiasFamily BiasFamily::lambda(int k, double b, double clamp_delta) {
    check_delta(clamp_delta);
    check_finite(b, "B");
    if (k < 1) throw ConfigError("lambda:K must be >= 1, got " + std::to_string(k));
    if (b < 0.0) throw ConfigError("lambda:B must be nonnegative, got " + format_double(b));
    BiasFamily f;
    f.kind_ = FamilyKind::Lambda;
    f.k_ = k;
    f.b_ = b;
    f.clamp_delta_ = clamp_delta;
    f.finalize();
    return f;
}

BiasFamily BiasFamily::loglog(double beta, double clamp_delta) {
    check_delta(clamp_delta);
    check_finite(beta, "beta");
    if (beta < 0.0) throw ConfigError("loglog:beta must be nonnegative, got " + format_double(beta));
    BiasFamily f;
    f.kind_ = FamilyKind::LogLogBeta;
    f.beta_ = beta;
    f.clamp_delta_ = clamp_delta;
    f.finalize();
    return f;
}

BiasFamily BiasFamily::table(std::vector<double> entries, std::optional<TailRule> tail,
                             double clamp_delta) {
    check_delta(clamp_delta);
    if (entries.empty()) throw ConfigError("table family needs at least one entry");
    BiasFamily f;
    f.kind_ = FamilyKind::Table;
    f.clamp_delta_ = clamp_delta;
    f.tail_ = tail;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const double p = entries[i];
        if (!std::isfinite(p) || p < 0.0) {
            throw ConfigError("table entry p_" + std::to_string(i + 1) +
                              " must be a finite nonnegative number");
        }
        entries[i] = f.clamp(p);
    }
    f.entries_ = std::move(entries);
    f.finalize();
    return f;
}

BiasFamily BiasFamily::with_head(std::vector<double> head) const {
    BiasFamily f = *this;
    for (double& p : head) {
        if (!std::isfinite(p) || p < 0.0) throw ConfigError("head entries must be nonnegative");
        p = f.clamp(p);
    }
    f.head_ = std::move(head);
    f.finalize();
    return f;
}

double BiasFamily::formula(double x) const {
    switch (kind_) {
        case FamilyKind::Constant:
            return p_;
        case FamilyKind::Harmonic:
            return b_ / (4.0 * x);
        case FamilyKind::Lambda: {
            double sum = 0.0;
            double denom = x;
            double iterated = x;
            for (int j = 1; j < k_; ++j) {
                sum += 1.0 / denom;
                iterated = std::log(iterated);
                denom *= iterated;
            }
            return 0.25 * (sum + b_ / denom);
        }
        case FamilyKind::LogLogBeta: {
            const double ll = std::log(std::log(x));
            return 0.25 * (1.0 / x + 1.0 / (x * std::pow(ll, beta_)));
        }
        case FamilyKind::Table:
            break;
    }
    throw DomainError("table families have no analytic formula");
}

void BiasFamily::finalize() {
    const auto head_len = static_cast<Level>(head_.size());
    switch (kind_) {
        case FamilyKind::Constant:
            start_ = 1;
            tail_start_ = head_len + 1;
            return;
        case FamilyKind::Harmonic: start_ = 1; break;
        case FamilyKind::Lambda: start_ = lambda_start(k_); break;
        case FamilyKind::LogLogBeta: start_ = 16; break;
        case FamilyKind::Table:
            start_ = 1;
            tail_start_ = 0;
            return;
    }
    // formula() decreases past start_, so the first unclamped index is found
    // by doubling then bisection.
    const double cap = 0.5 - clamp_delta_;
    Level lo = std::max(start_, head_len + 1);
    if (formula(static_cast<double>(lo)) > cap) {
        Level hi = lo;
        while (formula(static_cast<double>(hi)) > cap) {
            lo = hi;
            hi *= 2;
        }
        while (hi - lo > 1) {
            const Level m = lo + (hi - lo) / 2;
            (formula(static_cast<double>(m)) > cap ? lo : hi) = m;
        }
        lo = hi;
    }
    tail_start_ = lo;
}

double BiasFamily::p_at(Level i) const {
    if (i < 1) throw DomainError("p_at requires i >= 1, got " + std::to_string(i));
    if (static_cast<std::size_t>(i) <= head_.size()) return head_[i - 1];
    if (kind_ == FamilyKind::Table) {
        if (static_cast<std::size_t>(i) <= entries_.size()) return entries_[i - 1];
        if (!tail_) {
            throw ConfigError("table index " + std::to_string(i) +
                              " beyond entries and no tail rule set");
        }
        return *tail_ == TailRule::RepeatLast ? entries_.back() : 0.0;
    }
    if (kind_ == FamilyKind::Constant) return clamp(p_);
    return clamp(formula(static_cast<double>(std::max(i, start_))));
}

std::string BiasFamily::grammar() const {
    switch (kind_) {
        case FamilyKind::Constant: return "const:p=" + format_double(p_);
        case FamilyKind::Harmonic: return "harmonic:B=" + format_double(b_);
        case FamilyKind::Lambda:
            return "lambda:K=" + std::to_string(k_) + ",B=" + format_double(b_);
        case FamilyKind::LogLogBeta: return "loglog:beta=" + format_double(beta_);
        case FamilyKind::Table:
            return "table:" + (source_.empty() ? std::string("<inline>") : source_);
    }
    return "?";
}

// ---------------------------------------------------------------------------
// grammar

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

double parse_number(std::string_view token, std::string_view context) {
    const auto t = trim(token);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw ConfigError("invalid number '" + std::string(token) + "' in '" +
                          std::string(context) + "'");
    }
    return v;
}

std::map<std::string, std::string, std::less<>> parse_params(std::string_view body,
                                                             std::string_view text) {
    std::map<std::string, std::string, std::less<>> out;
    while (!body.empty()) {
        const auto comma = body.find(',');
        const auto item = trim(body.substr(0, comma));
        body = comma == std::string_view::npos ? std::string_view{} : body.substr(comma + 1);
        const auto eq = item.find('=');
        if (eq == std::string_view::npos || eq == 0) {
            throw ConfigError("malformed parameter '" + std::string(item) + "' in '" +
                              std::string(text) + "'");
        }
        auto key = std::string(trim(item.substr(0, eq)));
        if (out.contains(key)) throw ConfigError("duplicate parameter '" + key + "'");
        out.emplace(std::move(key), std::string(trim(item.substr(eq + 1))));
    }
    return out;
}

double take(std::map<std::string, std::string, std::less<>>& params, std::string_view key,
            std::string_view text) {
    const auto it = params.find(key);
    if (it == params.end()) {
        throw ConfigError("missing parameter '" + std::string(key) + "' in '" +
                          std::string(text) + "'");
    }
    const double v = parse_number(it->second, text);
    params.erase(it);
    return v;
}

}  // namespace

BiasFamily parse_family(std::string_view text, double clamp_delta) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) {
        throw ConfigError("family '" + std::string(text) + "' lacks a ':' separator");
    }
    const auto name = trim(text.substr(0, colon));
    const auto body = text.substr(colon + 1);

    if (name == "table") {
        const auto path = trim(body);
        if (path.empty()) throw ConfigError("table family needs a path");
        return read_table(std::filesystem::path(std::string(path)), clamp_delta);
    }

    auto params = parse_params(body, text);
    BiasFamily out = [&] {
        if (name == "const") return BiasFamily::constant(take(params, "p", text), clamp_delta);
        if (name == "harmonic") return BiasFamily::harmonic(take(params, "B", text), clamp_delta);
        if (name == "loglog") return BiasFamily::loglog(take(params, "beta", text), clamp_delta);
        if (name == "lambda") {
            const double k = take(params, "K", text);
            if (k != std::floor(k) || k < 1 || k > 64) {
                throw ConfigError("lambda:K must be a positive integer, got '" +
                                  format_double(k) + "'");
            }
            return BiasFamily::lambda(static_cast<int>(k), take(params, "B", text), clamp_delta);
        }
        throw ConfigError("unknown family '" + std::string(name) + "'");
    }();
    if (!params.empty()) {
        throw ConfigError("unexpected parameter '" + params.begin()->first + "' in '" +
                          std::string(text) + "'");
    }
    return out;
}

BiasFamily read_table(const std::filesystem::path& path, double clamp_delta) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open table file '" + path.string() + "'");

    std::vector<double> entries;
    std::optional<TailRule> tail;
    bool header_seen = false;
    bool footer_seen = false;
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto line = trim(raw);
        if (line.empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(lineno);
        if (footer_seen) throw ConfigError(where + ": content after #tail directive");
        if (line.front() == '#') {
            if (line.starts_with("#tail=")) {
                const auto rule = trim(line.substr(6));
                if (rule == "repeat_last") tail = TailRule::RepeatLast;
                else if (rule == "zero") tail = TailRule::Zero;
                else throw ConfigError(where + ": unknown tail rule '" + std::string(rule) + "'");
                footer_seen = true;
                continue;
            }
            throw ConfigError(where + ": unknown directive '" + std::string(line) + "'");
        }
        if (!header_seen) {
            std::string compact;
            for (char c : line) if (!std::isspace(static_cast<unsigned char>(c))) compact += c;
            if (compact != "i,p") throw ConfigError(where + ": expected header 'i,p'");
            header_seen = true;
            continue;
        }
        const auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ConfigError(where + ": expected 'i,p'");
        const double idx = parse_number(line.substr(0, comma), where);
        if (idx != static_cast<double>(entries.size() + 1)) {
            throw ConfigError(where + ": indices must be consecutive from 1");
        }
        entries.push_back(parse_number(line.substr(comma + 1), where));
    }
    if (!header_seen) throw ConfigError(path.string() + ": empty table file");
    auto f = BiasFamily::table(std::move(entries), tail.value_or(TailRule::RepeatLast), clamp_delta);
    f.source_ = path.string();
    return f;
}

// ---------------------------------------------------------------------------
// verdicts

TransienceVerdict transience_verdict(const BiasFamily& family, const TrendOptions& opts) {
    TransienceVerdict v;
    switch (family.kind()) {
        case FamilyKind::Constant:
            if (family.p_at(family.analytic_tail_start()) > 0.0) {
                v.outcome = Transience::Transient;
                v.rule = "geometric_series";
                v.detail = "U < 1 constant, so sum of U^k converges";
            } else {
                v.outcome = Transience::Recurrent;
                v.rule = "symmetric_walk";
                v.detail = "p = 0 is the reflecting simple symmetric walk";
            }
            return v;
        case FamilyKind::Harmonic:
        case FamilyKind::Lambda: {
            const bool transient = family.b_param() > 1.0;
            v.outcome = transient ? Transience::Transient : Transience::Recurrent;
            v.rule = "lambda_watershed";
            v.detail = std::string("p = Lambda(K,i,B)/4 with B ") + (transient ? "> 1" : "<= 1");
            return v;
        }
        case FamilyKind::LogLogBeta:
            v.outcome = Transience::Transient;
            v.rule = "loglog_dominates_watershed";
            v.detail = "r_k ~ exp(-int du/(u (log log u)^beta)) / k is summable for every beta";
            return v;
        case FamilyKind::Table:
            break;
    }

    // Cauchy condensation of sum r_k over complete dyadic blocks of the table.
    const auto n = static_cast<Level>(family.entries().size());
    std::vector<double> blocks;
    double log_r = 0.0;
    Level k = 1;
    for (Level lo = 1; 2 * lo - 1 <= n; lo *= 2) {
        double s = 0.0;
        for (; k <= 2 * lo - 1; ++k) {
            log_r += log_odds_ratio(family.p_at(k));
            s += std::exp(log_r);
        }
        blocks.push_back(s);
    }
    const auto rep = dyadic_trend(blocks, opts);
    v.rule = "table_condensation_trend";
    v.detail = std::string(to_string(rep.trend)) + " (" + rep.note +
               ", fitted power " + format_double(rep.fitted_power) + ", " +
               std::to_string(rep.blocks) + " blocks)";
    v.outcome = rep.trend == Trend::Converging   ? Transience::Transient
                : rep.trend == Trend::Diverging ? Transience::Recurrent
                                                : Transience::Unknown;
    return v;
}

bool is_slower(const BiasFamily& a, const BiasFamily& b, Level up_to) {
    if (up_to < 1) throw DomainError("is_slower requires up_to >= 1");
    for (Level i = 1; i <= up_to; ++i) {
        if (a.p_at(i) > b.p_at(i)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// ChainEnv

namespace {
constexpr std::size_t kPrefixCacheCap = std::size_t{1} << 22;
}

struct ChainEnv::Memo {
    mutable std::shared_mutex mu;
    std::vector<double> log_r{0.0};  // log_r[k] = sum_{i<=k} log U_i
    double sum = 0.0;    // uncompensated running sum behind log_r.back()
    double carry = 0.0;  // Neumaier compensation
    std::map<Level, Bracket> brackets;
};

ChainEnv::ChainEnv(BiasFamily family) : family_(std::move(family)), memo_(std::make_unique<Memo>()) {}
ChainEnv::~ChainEnv() = default;
ChainEnv::ChainEnv(ChainEnv&&) noexcept = default;
ChainEnv& ChainEnv::operator=(ChainEnv&&) noexcept = default;

double ChainEnv::u_at(Level i) const { return odds_ratio(family_.p_at(i)); }
double ChainEnv::log_u_at(Level i) const { return log_odds_ratio(family_.p_at(i)); }

double ChainEnv::log_prefix_product(Level k) const {
    if (k < 1) throw DomainError("log_prefix_product requires k >= 1");
    const auto idx = static_cast<std::size_t>(k);
    {
        std::shared_lock lock(memo_->mu);
        if (idx < memo_->log_r.size()) return memo_->log_r[idx];
    }
    std::unique_lock lock(memo_->mu);
    auto& log_r = memo_->log_r;
    double sum = memo_->sum;
    double carry = memo_->carry;
    auto add = [&](double term) {
        const double t = sum + term;
        carry += std::abs(sum) >= std::abs(term) ? (sum - t) + term : (term - t) + sum;
        sum = t;
    };
    const std::size_t cached_to = std::min(idx, kPrefixCacheCap);
    while (log_r.size() <= cached_to) {
        add(log_u_at(static_cast<Level>(log_r.size())));
        log_r.push_back(sum + carry);
    }
    memo_->sum = sum;
    memo_->carry = carry;
    if (idx < log_r.size()) return log_r[idx];
    for (std::size_t i = log_r.size(); i <= idx; ++i) add(log_u_at(static_cast<Level>(i)));
    return sum + carry;
}

std::optional<Bracket> ChainEnv::cached_bracket(Level m) const {
    std::shared_lock lock(memo_->mu);
    const auto it = memo_->brackets.find(m);
    if (it == memo_->brackets.end()) return std::nullopt;
    return it->second;
}

Bracket ChainEnv::remember_bracket(Level m, const Bracket& b) const {
    std::unique_lock lock(memo_->mu);
    auto [it, inserted] = memo_->brackets.try_emplace(m, b);
    if (!inserted) it->second = intersect(it->second, b);
    return it->second;
}

}  // namespace cutwalk
