#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "hpm/retrieval.hpp"

namespace hpm {

/// CMC curve and mean average precision under the single-query protocol with
/// Market-style junk filtering.
struct EvalReport {
    std::vector<float> cmc;
    float map = 0.0f;
    std::vector<float> per_query_ap;
    int num_valid_queries = 0;
    bool distance_ties = false;
};

/// Gallery item is invalid for a query iff it shares both person and camera
/// id with it, or its person id is negative (distractor).
std::vector<char> junk_mask(const Descriptor& query, const std::vector<Descriptor>& gallery);

/// AP over a ranked relevance list: mean of precision-at-k over the relevant
/// ranks. Requires at least one relevant entry.
float average_precision(std::span<const char> ranked_relevance);

/// cmc[k] = fraction of lists whose first relevant entry is at rank <= k+1.
std::vector<float> cmc_curve(const std::vector<std::vector<char>>& ranked_relevance, int K);

/// Full protocol: distances, junk filtering, ranking, AP and CMC. Queries
/// with no valid relevant gallery item are dropped from both denominators.
EvalReport evaluate(const std::vector<Descriptor>& queries,
                    const std::vector<Descriptor>& gallery, int K);

/// "map=", "cmc_1=", "cmc_5=", "cmc_10=" (those within K) and "ties=".
void write_report(std::ostream& out, const EvalReport& report);

/// "rank,rate" per line over the whole curve.
void write_cmc_csv(std::ostream& out, const EvalReport& report);

}  // namespace hpm
