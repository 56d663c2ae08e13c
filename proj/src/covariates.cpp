#include "bcd/covariates.hpp"

#include "bcd/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace bcd {

namespace {

constexpr double kRcondFloor = 1e-10;
constexpr int kDriftCheckInterval = 1000;

// Sherman-Morrison: (M + v v')^{-1} from M^{-1}. Returns false when the
// update denominator signals loss of positive definiteness.
bool rank_one_update(Eigen::MatrixXd& inv, const Eigen::VectorXd& v) {
    const Eigen::VectorXd w = inv * v;
    const double denom = 1.0 + v.dot(w);
    if (denom < 1e-12) return false;
    inv.noalias() -= (w * w.transpose()) / denom;
    return true;
}

bool invert_if_well_conditioned(const Eigen::MatrixXd& m, Eigen::MatrixXd& inv) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
    if (!lu.isInvertible() || lu.rcond() < kRcondFloor) return false;
    inv = lu.inverse();
    return true;
}

}  // namespace

PatientCovariates PatientCovariates::from_raw(const Eigen::VectorXd& x) {
    PatientCovariates cov;
    cov.x = x;
    cov.z = x;  // main effects only
    cov.margins.resize(x.size());
    cov.cell = 0;
    for (int i = 0; i < x.size(); ++i) {
        cov.margins[i] = x[i] < 0.0 ? 0 : 1;  // dichotomized at 0
        cov.cell = cov.cell * 2 + cov.margins[i];
    }
    return cov;
}

DesignState::DesignState(int q)
    : q_(q),
      gtg_(Eigen::MatrixXd::Zero(q + 1, q + 1)),
      ftf_(Eigen::MatrixXd::Zero(q, q)),
      b_(Eigen::VectorXd::Zero(q)) {
    if (q < 1) throw std::invalid_argument("DesignState: q must be >= 1");
}

void DesignState::update(const Eigen::VectorXd& z, int arm) {
    if (z.size() != q_ - 1) throw std::invalid_argument("DesignState: z has wrong length");
    const double alloc = arm == 0 ? 1.0 : -1.0;
    Eigen::VectorXd f(q_);
    f[0] = 1.0;
    f.tail(q_ - 1) = z;
    Eigen::VectorXd g(q_ + 1);
    g[0] = alloc;
    g.tail(q_) = f;

    gtg_.noalias() += g * g.transpose();
    ftf_.noalias() += f * f.transpose();
    b_.noalias() += alloc * f;
    counts_[arm] += 1;
    n_ += 1;

    if (has_full_) {
        if (!rank_one_update(inv_full_, g)) recompute_inverses();
    }
    if (has_nuis_) {
        if (!rank_one_update(inv_nuis_, f)) recompute_inverses();
    }
    if (!has_full_ || !has_nuis_) try_factorize();
    if (n_ % kDriftCheckInterval == 0) recompute_inverses();
}

void DesignState::try_factorize() {
    if (!has_nuis_ && n_ >= q_)
        has_nuis_ = invert_if_well_conditioned(ftf_, inv_nuis_);
    if (!has_full_ && n_ >= q_ + 1)
        has_full_ = invert_if_well_conditioned(gtg_, inv_full_);
}

void DesignState::recompute_inverses() {
    has_full_ = invert_if_well_conditioned(gtg_, inv_full_);
    has_nuis_ = invert_if_well_conditioned(ftf_, inv_nuis_);
}

double DesignState::derivative(const Eigen::VectorXd& z, int arm) const {
    if (!has_full_ || !has_nuis_)
        throw std::logic_error("DesignState::derivative: information matrix is singular");
    Eigen::VectorXd f(q_);
    f[0] = 1.0;
    f.tail(q_ - 1) = z;
    Eigen::VectorXd g(q_ + 1);
    g[0] = arm == 0 ? 1.0 : -1.0;
    g.tail(q_) = f;
    const double d = g.dot(inv_full_ * g) - f.dot(inv_nuis_ * f);
    return std::max(d, 0.0);
}

double DesignState::variance_loss() const {
    if (!has_nuis_) return std::numeric_limits<double>::quiet_NaN();
    return b_.dot(inv_nuis_ * b_);
}

double pseudo_difference(double d1, double d2, int n) {
    if (d1 < 0.0 || d2 < 0.0)
        throw std::invalid_argument("pseudo_difference: derivatives must be nonnegative");
    const double eps = 1e-9 * (d1 + d2 + 1.0 / n);
    if (std::abs(d1 - d2) < eps) return 0.0;
    return (2.0 - n * (d1 + d2)) / (d1 - d2);
}

double prob_adjustable_real(double a, double x) {
    if (a < 0.0) throw std::invalid_argument("prob_adjustable_real: a must be nonnegative");
    if (x == 0.0 || a == 0.0) return 0.5;
    const double e = a * std::log(std::abs(x));
    const double toward_balance = 1.0 / (1.0 + std::exp(-e));
    return x < 0.0 ? toward_balance : 1.0 - toward_balance;
}

std::vector<double> prob_rule_A(const std::vector<double>& d_values) {
    const double total = std::accumulate(d_values.begin(), d_values.end(), 0.0);
    std::vector<double> pi(d_values.size());
    if (total <= 0.0) {
        std::fill(pi.begin(), pi.end(), 1.0 / d_values.size());
        return pi;
    }
    for (std::size_t j = 0; j < d_values.size(); ++j) pi[j] = d_values[j] / total;
    return pi;
}

std::vector<double> prob_rule_B_cov(double gamma, const std::vector<double>& d_values) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("prob_rule_B_cov: gamma must lie in (0, 1]");
    std::vector<double> logw(d_values.size());
    double lmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < d_values.size(); ++j) {
        logw[j] = std::log1p(d_values[j]) / gamma;
        lmax = std::max(lmax, logw[j]);
    }
    double total = 0.0;
    std::vector<double> pi(d_values.size());
    for (std::size_t j = 0; j < d_values.size(); ++j) {
        pi[j] = std::exp(logw[j] - lmax);
        total += pi[j];
    }
    for (double& v : pi) v /= total;
    return pi;
}

std::vector<double> prob_rule_E_gen(double p, const std::vector<double>& d_values) {
    const int t = static_cast<int>(d_values.size());
    if (t == 2) {
        if (d_values[0] == d_values[1]) return {0.5, 0.5};
        return d_values[0] > d_values[1] ? std::vector<double>{p, 1.0 - p}
                                         : std::vector<double>{1.0 - p, p};
    }
    // Rank by derivative, largest first; ties share the average probability.
    std::vector<int> order(t);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int i, int j) { return d_values[i] > d_values[j]; });
    std::vector<double> pi(t, 0.0);
    int start = 0;
    while (start < t) {
        int end = start;
        while (end + 1 < t && d_values[order[end + 1]] == d_values[order[start]]) ++end;
        double share = 0.0;
        for (int r = start; r <= end; ++r)
            share += 2.0 * (t - r) / (static_cast<double>(t) * (t + 1));
        share /= (end - start + 1);
        for (int r = start; r <= end; ++r) pi[order[r]] = share;
        start = end + 1;
    }
    return pi;
}

double prob_rule_J_cov(double a, double d1, double d2, int n) {
    return prob_adjustable_real(a, pseudo_difference(d1, d2, n));
}

StratumState::StratumState(int m_covariates, int levels)
    : m_(m_covariates),
      levels_(levels),
      margin_counts_(static_cast<std::size_t>(m_covariates) * levels, {0, 0}),
      cell_counts_(static_cast<std::size_t>(std::pow(levels, m_covariates)), {0, 0}) {
    if (m_covariates < 1) throw std::invalid_argument("StratumState: need >= 1 covariate");
}

double StratumState::minimization_score(const PatientCovariates& cov, int arm) const {
    double total = 0.0;
    for (int i = 0; i < m_; ++i) {
        const auto& c = margin_counts_[static_cast<std::size_t>(i) * levels_ + cov.margins[i]];
        const int c1 = c.first + (arm == 0 ? 1 : 0);
        const int c2 = c.second + (arm == 1 ? 1 : 0);
        total += std::abs(c1 - c2);
    }
    return total;
}

const std::pair<int, int>& StratumState::cell_counts(int cell) const {
    return cell_counts_.at(cell);
}

void StratumState::update(const PatientCovariates& cov, int arm) {
    for (int i = 0; i < m_; ++i) {
        auto& c = margin_counts_[static_cast<std::size_t>(i) * levels_ + cov.margins[i]];
        (arm == 0 ? c.first : c.second) += 1;
    }
    auto& cc = cell_counts_.at(cov.cell);
    (arm == 0 ? cc.first : cc.second) += 1;
}

double prob_rule_M_ME(double score1, double score2, bool randomized, double p) {
    if (score1 == score2) return 0.5;
    const double favored = randomized ? p : 1.0;
    return score1 < score2 ? favored : 1.0 - favored;
}

double prob_rule_C_family(int count1, int count2, CellVariant variant, double param) {
    const int d = count1 - count2;
    switch (variant) {
        case CellVariant::C: return prob_deterministic(d);
        case CellVariant::CE: return prob_efron(param, d);
        case CellVariant::CJ: return prob_adjustable(param, d);
    }
    throw std::logic_error("unreachable cell variant");
}

CovRuleSpec CovRuleSpec::parse(const std::string& text) {
    std::string name = text;
    double value = std::numeric_limits<double>::quiet_NaN();
    std::string key;
    if (const auto colon = text.find(':'); colon != std::string::npos) {
        name = text.substr(0, colon);
        const std::string rest = text.substr(colon + 1);
        const auto eq = rest.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("covariate rule grammar: expected key=value");
        key = rest.substr(0, eq);
        try {
            value = std::stod(rest.substr(eq + 1));
        } catch (const std::exception&) {
            throw std::invalid_argument("covariate rule '" + name + "': bad value");
        }
    }
    auto need = [&](const char* k) {
        if (key != k || std::isnan(value))
            throw std::invalid_argument("covariate rule '" + name + "': expected parameter '" +
                                        k + "'");
        return value;
    };
    CovRuleSpec s;
    if (name == "mini") { s.family = CovFamily::Mini; return s; }
    if (name == "mini-e") { s.family = CovFamily::MiniE; s.p = need("p"); return s; }
    if (name == "strat-c") { s.family = CovFamily::StratC; return s; }
    if (name == "strat-ce") { s.family = CovFamily::StratCE; s.p = need("p"); return s; }
    if (name == "strat-cj") { s.family = CovFamily::StratCJ; s.a = need("a"); return s; }
    if (name == "atkinson") { s.family = CovFamily::Atkinson; return s; }
    if (name == "bayes-cov") { s.family = CovFamily::BayesCov; s.gamma = need("gamma"); return s; }
    if (name == "efron-cov") { s.family = CovFamily::EfronCov; s.p = need("p"); return s; }
    if (name == "adjustable-cov") { s.family = CovFamily::AdjustableCov; s.a = need("a"); return s; }
    throw std::invalid_argument("unknown covariate rule family '" + name + "'");
}

std::string CovRuleSpec::to_string() const {
    std::ostringstream out;
    switch (family) {
        case CovFamily::Mini: out << "mini"; break;
        case CovFamily::MiniE: out << "mini-e:p=" << p; break;
        case CovFamily::StratC: out << "strat-c"; break;
        case CovFamily::StratCE: out << "strat-ce:p=" << p; break;
        case CovFamily::StratCJ: out << "strat-cj:a=" << a; break;
        case CovFamily::Atkinson: out << "atkinson"; break;
        case CovFamily::BayesCov: out << "bayes-cov:gamma=" << gamma; break;
        case CovFamily::EfronCov: out << "efron-cov:p=" << p; break;
        case CovFamily::AdjustableCov: out << "adjustable-cov:a=" << a; break;
    }
    return out.str();
}

double cov_rule_prob1(const CovRuleSpec& rule, const DesignState& design,
                      const Eigen::VectorXd& z) {
    if (!design.full_rank() || !design.nuisance_rank()) return 0.5;  // startup
    const double d1 = design.derivative(z, 0);
    const double d2 = design.derivative(z, 1);
    switch (rule.family) {
        case CovFamily::Atkinson: return prob_rule_A({d1, d2})[0];
        case CovFamily::BayesCov: return prob_rule_B_cov(rule.gamma, {d1, d2})[0];
        case CovFamily::EfronCov: return prob_rule_E_gen(rule.p, {d1, d2})[0];
        case CovFamily::AdjustableCov:
            return prob_rule_J_cov(rule.a, d1, d2, design.n());
        default:
            throw std::logic_error("cov_rule_prob1: rule needs stratum state");
    }
}

double strat_rule_prob1(const CovRuleSpec& rule, const StratumState& strata,
                        const PatientCovariates& cov) {
    switch (rule.family) {
        case CovFamily::Mini:
        case CovFamily::MiniE: {
            const double c1 = strata.minimization_score(cov, 0);
            const double c2 = strata.minimization_score(cov, 1);
            return prob_rule_M_ME(c1, c2, rule.family == CovFamily::MiniE, rule.p);
        }
        case CovFamily::StratC:
        case CovFamily::StratCE:
        case CovFamily::StratCJ: {
            const auto& cc = strata.cell_counts(cov.cell);
            if (rule.family == CovFamily::StratC)
                return prob_rule_C_family(cc.first, cc.second, CellVariant::C, 0.0);
            if (rule.family == CovFamily::StratCE)
                return prob_rule_C_family(cc.first, cc.second, CellVariant::CE, rule.p);
            return prob_rule_C_family(cc.first, cc.second, CellVariant::CJ, rule.a);
        }
        default:
            throw std::logic_error("strat_rule_prob1: rule needs the design state");
    }
}

}  // namespace bcd
