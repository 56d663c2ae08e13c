#ifndef BCD_SIMULATOR_HPP
#define BCD_SIMULATOR_HPP

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "bcd/covariates.hpp"
#include "bcd/metrics.hpp"
#include "bcd/rules.hpp"

namespace bcd {

// Either a covariate-free rule or a covariate-aware one.
struct StudyRule {
    std::variant<RuleSpec, CovRuleSpec> spec;

    static StudyRule parse(const std::string& text);
    std::string to_string() const;
    bool covariate_aware() const { return std::holds_alternative<CovRuleSpec>(spec); }
};

struct StudyConfig {
    StudyRule rule;
    int n_max = 200;
    long n_sim = 100000;
    uint64_t seed = 0;
    int covariate_count = 0;  // 0 = no covariates; else m iid standard normals
    int arms = 2;
    int workers = 0;  // 0 = hardware concurrency

    int q() const { return covariate_count + 1; }
    void validate() const;
};

struct TrajectoryPoint {
    int n;
    double bias_adj;
    double loss_adj;
};

struct StudyResult {
    std::vector<PerNMetrics> per_n;  // index i holds patient n = i + 1
    std::vector<double> loss_adj;    // adjacent averages, NaN at n = 1
    std::vector<double> bias_adj;

    const PerNMetrics& at(int n) const { return per_n.at(n - 1); }
    double loss_adj_at(int n) const { return loss_adj.at(n - 1); }
    double bias_adj_at(int n) const { return bias_adj.at(n - 1); }
};

// One simulated trial; traces are indexed by patient (length n_max). The
// loss trace is NaN while the covariate information matrix is singular.
void run_replicate(const StudyConfig& config, long replicate_id,
                   std::vector<double>& loss_trace, std::vector<double>& bias_trace);

// Averages n_sim replicates. Replicates are distributed over workers in
// fixed-size chunks merged in index order, so the output is identical for
// any worker count.
StudyResult run_study(const StudyConfig& config);

// Adjacent-averaged (bias, loss) pairs at the marked sample sizes.
std::vector<TrajectoryPoint> admissibility_trajectory(const StudyResult& result,
                                                      const std::vector<int>& marks);

}  // namespace bcd

#endif  // BCD_SIMULATOR_HPP
