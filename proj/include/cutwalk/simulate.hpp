#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cutwalk/env.hpp"

namespace cutwalk {

struct WalkConfig {
    Level monitored_max = 20;  // M: sites 1..M are tallied
    double eps_censor = 1.0 / 1024.0;
    std::int64_t replicas = 1000;
    std::uint64_t master_seed = 0;
    int workers = 1;
    std::vector<std::pair<Level, Level>> pairs;
    std::int64_t step_cap = 1000000000;
    // Sites in (M - guard, M] are left out of validation statistics.
    Level guard = 0;
};

/// Per-replica tallies, indexed by site 0..M.
struct CensusRecord {
    std::int64_t replica_id = 0;
    std::vector<std::int64_t> local_time;
    std::vector<std::int64_t> upcross;
    std::vector<std::int64_t> downs_into;  // steps R+1 -> R
    std::vector<std::uint8_t> is_cutpoint;
    std::vector<std::uint8_t> is_strong;
    std::vector<std::uint8_t> is_weak;
    std::int64_t steps = 0;
    Level horizon = 0;
    bool failed = false;
};

/// Config plus everything derived from it before the first replica runs.
struct PreparedWalk {
    WalkConfig config;
    std::string family;
    Level horizon = 0;
    // Step up from site i iff the next 64-bit draw is below up_threshold[i].
    std::vector<std::uint64_t> up_threshold;
};

/// Validates the config, rejects recurrent families (RecurrentError) and
/// computes the censoring horizon.
PreparedWalk prepare_walk(const ChainEnv& env, const WalkConfig& config);

/// Seed of replica `id`'s generator: splitmix64 of the master seed, then of
/// the sum with id times the golden-ratio increment.
std::uint64_t replica_seed(std::uint64_t master_seed, std::int64_t replica_id);

/// Runs X_0 = 0 until the first hit of the horizon.
CensusRecord run_replica(const PreparedWalk& walk, std::int64_t replica_id);

struct SiteTally {
    std::int64_t cut = 0;
    std::int64_t strong = 0;
    std::int64_t weak = 0;
    std::int64_t max_local_time = 0;
    std::map<std::int64_t, std::int64_t> local_time_hist;
    std::map<std::int64_t, std::int64_t> upcross_hist;
};

struct PairTally {
    Level j = 0;
    Level k = 0;
    std::int64_t both_cut = 0;
    std::int64_t both_strong = 0;
};

/// Integer tallies over replicas. add() and merge() only sum counts, so the
/// result does not depend on how replicas are split between workers.
struct Census {
    std::string family;
    Level monitored_max = 0;
    double eps_censor = 0.0;
    Level horizon = 0;
    std::int64_t replicas = 0;
    std::uint64_t master_seed = 0;
    Level guard = 0;
    std::int64_t succeeded = 0;
    std::int64_t failed = 0;
    std::int64_t total_steps = 0;
    std::vector<SiteTally> sites;  // sites[R - 1] for R = 1..M
    std::vector<PairTally> pairs;
    std::map<std::int64_t, std::int64_t> strong_run_hist;

    static Census empty_for(const PreparedWalk& walk);
    const SiteTally& site(Level r) const;
    void add(const CensusRecord& rec);
    void merge(const Census& other);
    bool empty() const noexcept { return succeeded == 0; }
};

Census census(const ChainEnv& env, const WalkConfig& config);
Census census(const PreparedWalk& walk);

/// Longest run of consecutive sites in 1..M-guard with local time 1.
Level longest_strong_run(const CensusRecord& rec, Level guard = 0);
/// Longest run seen in any replica.
Level longest_strong_run(const Census& c);

struct LocaltimeRatio {
    double ratio = 0.0;     // max over sites R >= 2 of xi(R) / (D(R) log R)
    Level site = 0;
    double envelope = 0.0;  // 2 (1 + eps)
    bool exceeded = false;
};
LocaltimeRatio max_localtime_ratio(const Census& c, const ChainEnv& env, double eps);

/// One "census" header line, one "site" line per site, one "pair" line per pair.
std::string to_jsonl(const Census& c);
Census census_from_jsonl(const std::string& text);

}  // namespace cutwalk
