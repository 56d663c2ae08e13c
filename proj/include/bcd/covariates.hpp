#ifndef BCD_COVARIATES_HPP
#define BCD_COVARIATES_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace bcd {

// Covariates of one patient: the raw vector, the regression expansion
// (main effects by default), the stratum cell, and per-covariate categories.
struct PatientCovariates {
    Eigen::VectorXd x;            // raw covariates, length m
    Eigen::VectorXd z;            // model expansion, length q - 1
    int cell = 0;                 // stratum index in [0, 2^m) after dichotomizing at 0
    std::vector<int> margins;     // per-covariate category (0 or 1)

    // Builds the default expansion z = x and dichotomizes at 0.
    static PatientCovariates from_raw(const Eigen::VectorXd& x);
};

// Sufficient statistics of the sequential linear model E y = a*Delta + F*beta.
// Inverse-information blocks are maintained by rank-one updates once full
// rank is reached, with a periodic drift check against recomputation.
class DesignState {
public:
    explicit DesignState(int q);

    int n() const { return n_; }
    int q() const { return q_; }
    int count(int arm) const { return counts_[arm]; }
    int imbalance() const { return counts_[0] - counts_[1]; }

    bool full_rank() const { return has_full_; }       // G'G invertible
    bool nuisance_rank() const { return has_nuis_; }   // F'F invertible

    const Eigen::VectorXd& balance() const { return b_; }
    const Eigen::MatrixXd& inv_info_full() const { return inv_full_; }
    const Eigen::MatrixXd& inv_info_nuisance() const { return inv_nuis_; }

    // Registers patient covariates z and the chosen arm (0 or 1).
    void update(const Eigen::VectorXd& z, int arm);

    // Directional derivative d(j, n, z) of the D_A criterion; requires full rank.
    double derivative(const Eigen::VectorXd& z, int arm) const;

    // Loss L_n = b' (F'F)^{-1} b; NaN while F'F is singular (startup).
    double variance_loss() const;

private:
    void try_factorize();
    void recompute_inverses();

    int q_;
    int n_ = 0;
    int counts_[2] = {0, 0};
    Eigen::MatrixXd gtg_;       // (q+1) x (q+1), allocation column first
    Eigen::MatrixXd ftf_;       // q x q
    Eigen::VectorXd b_;         // F'a
    Eigen::MatrixXd inv_full_;
    Eigen::MatrixXd inv_nuis_;
    bool has_full_ = false;
    bool has_nuis_ = false;
};

// Generalized imbalance from the two derivative values; reduces to n1 - n2
// without covariates. Near-balance maps to exactly 0.
double pseudo_difference(double d1, double d2, int n);

// Adjustable-rule allocation function evaluated at a real-valued imbalance.
double prob_adjustable_real(double a, double x);

// Optimum-design allocation rules on per-arm derivative values.
std::vector<double> prob_rule_A(const std::vector<double>& d_values);
std::vector<double> prob_rule_B_cov(double gamma, const std::vector<double>& d_values);
// Two arms: larger derivative gets p. More arms: rank-based probabilities
// 2(t+1-j)/{t(t+1)}, averaged over tied sets.
std::vector<double> prob_rule_E_gen(double p, const std::vector<double>& d_values);
double prob_rule_J_cov(double a, double d1, double d2, int n);

// Marginal and stratified balancing state for rules M/ME and C/CE/CJ.
class StratumState {
public:
    StratumState(int m_covariates, int levels = 2);

    // Total marginal imbalance C(j) if arm j were allocated to this patient.
    double minimization_score(const PatientCovariates& cov, int arm) const;

    const std::pair<int, int>& cell_counts(int cell) const;

    void update(const PatientCovariates& cov, int arm);

private:
    int m_;
    int levels_;
    std::vector<std::pair<int, int>> margin_counts_;  // [covariate * levels + category]
    std::vector<std::pair<int, int>> cell_counts_;    // [cell]
};

double prob_rule_M_ME(double score1, double score2, bool randomized, double p);

enum class CellVariant { C, CE, CJ };
double prob_rule_C_family(int count1, int count2, CellVariant variant, double param);

// Covariate-aware rule description, grammar "family[:key=value]".
enum class CovFamily { Mini, MiniE, StratC, StratCE, StratCJ, Atkinson, BayesCov, EfronCov, AdjustableCov };

struct CovRuleSpec {
    CovFamily family = CovFamily::Atkinson;
    double p = 2.0 / 3.0;
    double a = 2.0;
    double gamma = 0.01;

    static CovRuleSpec parse(const std::string& text);
    std::string to_string() const;

    bool needs_strata() const {
        return family == CovFamily::Mini || family == CovFamily::MiniE ||
               family == CovFamily::StratC || family == CovFamily::StratCE ||
               family == CovFamily::StratCJ;
    }
    bool needs_design_state() const { return !needs_strata(); }
};

// Probability of treatment 1 for the optimum-design rules, with random
// allocation while the information matrix is singular (startup).
double cov_rule_prob1(const CovRuleSpec& rule, const DesignState& design,
                      const Eigen::VectorXd& z);

// Probability of treatment 1 for the marginal/stratified rules.
double strat_rule_prob1(const CovRuleSpec& rule, const StratumState& strata,
                        const PatientCovariates& cov);

}  // namespace bcd

#endif  // BCD_COVARIATES_HPP
