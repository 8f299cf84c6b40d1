#include "hpm/metrics.hpp"

#include <cstdio>
#include <ostream>
#include <stdexcept>

namespace hpm {

std::vector<char> junk_mask(const Descriptor& query,
                            const std::vector<Descriptor>& gallery) {
    std::vector<char> valid(gallery.size(), 1);
    for (std::size_t i = 0; i < gallery.size(); ++i) {
        const Descriptor& g = gallery[i];
        if (g.person_id < 0 ||
            (g.person_id == query.person_id && g.camera_id == query.camera_id)) {
            valid[i] = 0;
        }
    }
    return valid;
}

float average_precision(std::span<const char> ranked_relevance) {
    int relevant = 0;
    double sum = 0.0;
    for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
        if (ranked_relevance[k]) {
            ++relevant;
            sum += static_cast<double>(relevant) / static_cast<double>(k + 1);
        }
    }
    if (relevant == 0) {
        throw std::invalid_argument("average_precision: no relevant items");
    }
    return static_cast<float>(sum / relevant);
}

std::vector<float> cmc_curve(const std::vector<std::vector<char>>& ranked_relevance,
                             int K) {
    if (ranked_relevance.empty()) {
        throw std::invalid_argument("cmc_curve: no queries");
    }
    if (K < 1) {
        throw std::invalid_argument("cmc_curve: K must be >= 1");
    }
    std::vector<int> hits(static_cast<std::size_t>(K), 0);
    for (const std::vector<char>& rel : ranked_relevance) {
        int first = -1;
        for (std::size_t k = 0; k < rel.size(); ++k) {
            if (rel[k]) {
                first = static_cast<int>(k);
                break;
            }
        }
        if (first >= 0) {
            for (int k = first; k < K; ++k) {
                ++hits[static_cast<std::size_t>(k)];
            }
        }
    }
    std::vector<float> cmc(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        cmc[static_cast<std::size_t>(k)] = static_cast<float>(hits[static_cast<std::size_t>(k)]) /
                                           static_cast<float>(ranked_relevance.size());
    }
    return cmc;
}

EvalReport evaluate(const std::vector<Descriptor>& queries,
                    const std::vector<Descriptor>& gallery, int K) {
    if (K < 1) {
        throw std::invalid_argument("evaluate: K must be >= 1");
    }
    const Tensor distances = distance_matrix(queries, gallery);
    EvalReport report;
    std::vector<std::vector<char>> ranked_relevance;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        const std::vector<char> valid = junk_mask(queries[q], gallery);
        int valid_count = 0;
        int relevant_count = 0;
        for (std::size_t g = 0; g < gallery.size(); ++g) {
            if (valid[g]) {
                ++valid_count;
                if (gallery[g].person_id == queries[q].person_id) {
                    ++relevant_count;
                }
            }
        }
        if (valid_count == 0 || relevant_count == 0) {
            continue;  // no answer exists for this query
        }
        const std::span<const float> row(distances.data() + q * gallery.size(),
                                         gallery.size());
        const std::vector<int> order = rank(row, valid);
        for (std::size_t k = 1; k < order.size(); ++k) {
            if (row[static_cast<std::size_t>(order[k])] ==
                row[static_cast<std::size_t>(order[k - 1])]) {
                report.distance_ties = true;
                break;
            }
        }
        std::vector<char> rel(order.size());
        for (std::size_t k = 0; k < order.size(); ++k) {
            rel[k] = gallery[static_cast<std::size_t>(order[k])].person_id ==
                             queries[q].person_id
                         ? 1
                         : 0;
        }
        report.per_query_ap.push_back(average_precision(rel));
        ranked_relevance.push_back(std::move(rel));
    }
    if (ranked_relevance.empty()) {
        throw std::invalid_argument("evaluate: every query was excluded");
    }
    report.num_valid_queries = static_cast<int>(ranked_relevance.size());
    report.cmc = cmc_curve(ranked_relevance, K);
    double sum = 0.0;
    for (float ap : report.per_query_ap) {
        sum += ap;
    }
    report.map = static_cast<float>(sum / report.num_valid_queries);
    return report;
}

void write_report(std::ostream& out, const EvalReport& report) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "map=%.6f\n", report.map);
    out << buf;
    for (int k : {1, 5, 10}) {
        if (static_cast<std::size_t>(k) <= report.cmc.size()) {
            std::snprintf(buf, sizeof(buf), "cmc_%d=%.6f\n", k,
                          report.cmc[static_cast<std::size_t>(k - 1)]);
            out << buf;
        }
    }
    out << "valid_queries=" << report.num_valid_queries << "\n";
    out << "ties=" << (report.distance_ties ? 1 : 0) << "\n";
}

void write_cmc_csv(std::ostream& out, const EvalReport& report) {
    out << "rank,rate\n";
    char buf[64];
    for (std::size_t k = 0; k < report.cmc.size(); ++k) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", k + 1, report.cmc[k]);
        out << buf;
    }
}

}  // namespace hpm
