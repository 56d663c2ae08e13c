#include "bcd/simulator.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

namespace bcd {

namespace {

constexpr long kChunkSize = 512;

struct ChunkSums {
    std::vector<double> loss_sum, loss_sumsq, bias_sum, bias_sumsq;
    std::vector<long> loss_count;

    explicit ChunkSums(int n_max)
        : loss_sum(n_max, 0.0),
          loss_sumsq(n_max, 0.0),
          bias_sum(n_max, 0.0),
          bias_sumsq(n_max, 0.0),
          loss_count(n_max, 0) {}

    void absorb(const std::vector<double>& loss, const std::vector<double>& bias) {
        for (std::size_t i = 0; i < loss.size(); ++i) {
            if (!std::isnan(loss[i])) {
                loss_sum[i] += loss[i];
                loss_sumsq[i] += loss[i] * loss[i];
                loss_count[i] += 1;
            }
            bias_sum[i] += bias[i];
            bias_sumsq[i] += bias[i] * bias[i];
        }
    }
};

double se_of_mean(double sum, double sumsq, long count) {
    if (count < 2) return 0.0;
    const double mean = sum / count;
    double var = (sumsq - count * mean * mean) / (count - 1);
    if (var < 0.0) var = 0.0;
    return std::sqrt(var / count);
}

}  // namespace

StudyRule StudyRule::parse(const std::string& text) {
    StudyRule rule;
    try {
        rule.spec = RuleSpec::parse(text);
        return rule;
    } catch (const std::invalid_argument& plain_err) {
        try {
            rule.spec = CovRuleSpec::parse(text);
            return rule;
        } catch (const std::invalid_argument&) {
            throw plain_err;
        }
    }
}

std::string StudyRule::to_string() const {
    if (covariate_aware()) return std::get<CovRuleSpec>(spec).to_string();
    return std::get<RuleSpec>(spec).to_string();
}

void StudyConfig::validate() const {
    if (n_max < 2) throw std::invalid_argument("study: n_max must be >= 2");
    if (n_sim < 1) throw std::invalid_argument("study: n_sim must be >= 1");
    if (arms != 2) throw std::invalid_argument("study: only two-arm trials are simulated");
    if (rule.covariate_aware() && covariate_count < 1)
        throw std::invalid_argument("study: covariate-aware rule requires covariates");
}

void run_replicate(const StudyConfig& config, long replicate_id,
                   std::vector<double>& loss_trace, std::vector<double>& bias_trace) {
    const int n_max = config.n_max;
    loss_trace.assign(n_max, std::numeric_limits<double>::quiet_NaN());
    bias_trace.assign(n_max, 0.0);

    CounterRng rng(config.seed, static_cast<uint64_t>(replicate_id));
    TrialCounts state(2);

    const bool with_cov = config.covariate_count > 0;
    const bool cov_rule = config.rule.covariate_aware();
    const CovRuleSpec* cspec = cov_rule ? &std::get<CovRuleSpec>(config.rule.spec) : nullptr;

    RuleEngine engine(cov_rule ? RuleSpec::random() : std::get<RuleSpec>(config.rule.spec));
    DesignState design(with_cov ? config.q() : 1);
    StratumState strata(with_cov ? config.covariate_count : 1);

    Eigen::VectorXd x(config.covariate_count);
    for (int i = 0; i < n_max; ++i) {
        PatientCovariates cov;
        if (with_cov) {
            for (int k = 0; k < config.covariate_count; ++k) x[k] = rng.next_normal();
            cov = PatientCovariates::from_raw(x);
        }

        double pi1, guess_pi1;
        if (cov_rule) {
            pi1 = cspec->needs_strata() ? strat_rule_prob1(*cspec, strata, cov)
                                        : cov_rule_prob1(*cspec, design, cov.z);
            guess_pi1 = pi1;
        } else {
            // The guess probability must be read before prob1 consumes a
            // permuted-block entry.
            guess_pi1 = engine.guess_prob1(state);
            pi1 = engine.prob1(state, rng);
        }

        bias_trace[i] = expected_bias_increment(guess_pi1);
        const int arm = allocate(pi1, state, rng.next_double());

        if (with_cov) {
            design.update(cov.z, arm);
            if (cov_rule && cspec->needs_strata()) strata.update(cov, arm);
            loss_trace[i] = design.variance_loss();
        } else {
            loss_trace[i] = loss_simple(state.imbalance(), state.n);
        }
    }
}

StudyResult run_study(const StudyConfig& config) {
    config.validate();
    const int n_max = config.n_max;
    const long n_chunks = (config.n_sim + kChunkSize - 1) / kChunkSize;

    std::vector<ChunkSums> chunks(n_chunks, ChunkSums(n_max));
    std::atomic<long> next_chunk{0};

    auto worker = [&]() {
        std::vector<double> loss, bias;
        for (;;) {
            const long c = next_chunk.fetch_add(1);
            if (c >= n_chunks) return;
            const long first = c * kChunkSize;
            const long last = std::min(first + kChunkSize, config.n_sim);
            for (long r = first; r < last; ++r) {
                run_replicate(config, r, loss, bias);
                chunks[c].absorb(loss, bias);
            }
        }
    };

    int workers = config.workers > 0
                      ? config.workers
                      : static_cast<int>(std::thread::hardware_concurrency());
    if (workers < 1) workers = 1;
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    // Merge in chunk order: the reduction is independent of the worker count.
    ChunkSums total(n_max);
    std::vector<long> bias_count(n_max, 0);
    for (const auto& c : chunks) {
        for (int i = 0; i < n_max; ++i) {
            total.loss_sum[i] += c.loss_sum[i];
            total.loss_sumsq[i] += c.loss_sumsq[i];
            total.loss_count[i] += c.loss_count[i];
            total.bias_sum[i] += c.bias_sum[i];
            total.bias_sumsq[i] += c.bias_sumsq[i];
        }
    }

    StudyResult result;
    result.per_n.resize(n_max);
    std::vector<double> loss_means(n_max), bias_means(n_max);
    for (int i = 0; i < n_max; ++i) {
        PerNMetrics& m = result.per_n[i];
        m.n = i + 1;
        const long lc = total.loss_count[i];
        m.loss_mean = lc > 0 ? total.loss_sum[i] / lc
                             : std::numeric_limits<double>::quiet_NaN();
        m.loss_se = se_of_mean(total.loss_sum[i], total.loss_sumsq[i], lc);
        m.bias_mean = total.bias_sum[i] / config.n_sim;
        m.bias_se = se_of_mean(total.bias_sum[i], total.bias_sumsq[i], config.n_sim);
        loss_means[i] = m.loss_mean;
        bias_means[i] = m.bias_mean;
    }
    result.loss_adj = adjacent_average(loss_means);
    result.bias_adj = adjacent_average(bias_means);
    return result;
}

std::vector<TrajectoryPoint> admissibility_trajectory(const StudyResult& result,
                                                      const std::vector<int>& marks) {
    std::vector<TrajectoryPoint> points;
    points.reserve(marks.size());
    for (int n : marks) {
        if (n < 2 || n > static_cast<int>(result.per_n.size()))
            throw std::invalid_argument("admissibility_trajectory: mark outside 2..n_max");
        points.push_back({n, result.bias_adj_at(n), result.loss_adj_at(n)});
    }
    return points;
}

}  // namespace bcd
