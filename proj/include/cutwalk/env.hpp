#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cutwalk/bracket.hpp"
#include "cutwalk/trend.hpp"

namespace cutwalk {

inline constexpr double kDefaultClampDelta = 0.01;

enum class FamilyKind { Constant, Harmonic, Lambda, LogLogBeta, Table };
enum class TailRule { RepeatLast, Zero };

const char* to_string(FamilyKind k);
const char* to_string(TailRule t);

/// Rule producing the bias sequence p_1, p_2, ... of a nearest-neighbour walk
/// on {0, 1, 2, ...} that steps up from site i with probability 1/2 + p_i.
///
/// Every produced value lies in [0, 1/2 - clamp_delta]. Analytic kinds are
/// evaluated at start_index() for all smaller i, where the formula is either
/// undefined (iterated logarithms <= 0) or too large to be a probability.
class BiasFamily {
public:
    static BiasFamily constant(double p, double clamp_delta = kDefaultClampDelta);
    /// p_i = B / (4 i)
    static BiasFamily harmonic(double b, double clamp_delta = kDefaultClampDelta);
    /// p_i = Lambda(K, i, B) / 4 with
    /// Lambda(K, i, B) = 1/i + 1/(i log i) + ... + B/(i log i ... log_{K-1} i).
    static BiasFamily lambda(int k, double b, double clamp_delta = kDefaultClampDelta);
    /// p_i = (1/4) (1/i + 1/(i (log log i)^beta))
    static BiasFamily loglog(double beta, double clamp_delta = kDefaultClampDelta);
    /// Explicit p_1..p_n. Without a tail rule, indices past the table throw.
    static BiasFamily table(std::vector<double> entries, std::optional<TailRule> tail,
                            double clamp_delta = kDefaultClampDelta);

    /// Same family with p_1..p_n replaced by `head` (clamped). Finitely many
    /// changes leave every asymptotic statement untouched.
    BiasFamily with_head(std::vector<double> head) const;

    FamilyKind kind() const noexcept { return kind_; }
    double p_param() const noexcept { return p_; }
    double b_param() const noexcept { return b_; }
    int k_param() const noexcept { return k_; }
    double beta_param() const noexcept { return beta_; }
    double clamp_delta() const noexcept { return clamp_delta_; }
    std::optional<TailRule> tail_rule() const noexcept { return tail_; }
    std::span<const double> entries() const noexcept { return entries_; }
    std::span<const double> head() const noexcept { return head_; }
    bool is_analytic() const noexcept { return kind_ != FamilyKind::Table; }

    /// First index at which the analytic formula is used as is.
    Level start_index() const noexcept { return start_; }

    double p_at(Level i) const;

    /// Unclamped formula at real x >= start_index(). Analytic kinds only.
    double formula(double x) const;

    /// Smallest level from which p_i equals formula(i) unclamped, with
    /// formula decreasing and x * formula(x) nonincreasing. 0 if the kind has
    /// no such analytic tail (tables), or if it lies beyond double range.
    Level analytic_tail_start() const noexcept { return tail_start_; }

    /// Canonical grammar text, e.g. "lambda:K=2,B=2".
    std::string grammar() const;

private:
    BiasFamily() = default;
    void finalize();
    double clamp(double p) const noexcept;

    FamilyKind kind_ = FamilyKind::Constant;
    double p_ = 0.0;
    double b_ = 0.0;
    int k_ = 1;
    double beta_ = 0.0;
    double clamp_delta_ = kDefaultClampDelta;
    std::optional<TailRule> tail_;
    std::vector<double> entries_;
    std::vector<double> head_;
    std::string source_;  // table path, for grammar()
    Level start_ = 1;
    Level tail_start_ = 0;

    friend BiasFamily read_table(const std::filesystem::path& path, double clamp_delta);
};

/// Parses `const:p=<float>`, `harmonic:B=<float>`, `lambda:K=<int>,B=<float>`,
/// `loglog:beta=<float>` or `table:<path>`. Throws ConfigError naming the
/// offending token.
BiasFamily parse_family(std::string_view text, double clamp_delta = kDefaultClampDelta);

/// CSV with header `i,p`, consecutive i from 1, optional `#tail=repeat_last|zero`
/// footer (default repeat_last).
BiasFamily read_table(const std::filesystem::path& path,
                      double clamp_delta = kDefaultClampDelta);

/// U_i = (1/2 - p) / (1/2 + p)
double odds_ratio(double p) noexcept;
/// log U_i, accurate for small p.
double log_odds_ratio(double p) noexcept;

enum class Transience { Transient, Recurrent, Unknown };
const char* to_string(Transience t);

struct TransienceVerdict {
    Transience outcome = Transience::Unknown;
    std::string rule;
    std::string detail;
};

/// Analytic kinds are decided in closed form. Tables are judged from the
/// condensed partial sums of r_k = U_1 ... U_k over their explicit entries;
/// the tail rule is not consulted, and Unknown is a legitimate answer.
TransienceVerdict transience_verdict(const BiasFamily& family, const TrendOptions& opts = {});

/// True iff a is slower than b on 1..up_to, i.e. p_i(a) <= p_i(b).
bool is_slower(const BiasFamily& a, const BiasFamily& b, Level up_to);

/// A bias family together with memoized prefix products and D-brackets.
/// Logically immutable; the memo tables are guarded, so one ChainEnv may be
/// shared by any number of reader threads.
class ChainEnv {
public:
    explicit ChainEnv(BiasFamily family);
    ~ChainEnv();
    ChainEnv(ChainEnv&&) noexcept;
    ChainEnv& operator=(ChainEnv&&) noexcept;

    const BiasFamily& family() const noexcept { return family_; }

    double p_at(Level i) const { return family_.p_at(i); }
    double u_at(Level i) const;
    double log_u_at(Level i) const;

    /// sum_{i=1..k} log U_i
    double log_prefix_product(Level k) const;

    std::optional<Bracket> cached_bracket(Level m) const;
    /// Stores b intersected with any cached bracket and returns the result, so
    /// the cache only ever narrows.
    Bracket remember_bracket(Level m, const Bracket& b) const;

private:
    struct Memo;
    BiasFamily family_;
    std::unique_ptr<Memo> memo_;
};

}  // namespace cutwalk
