#include <algorithm>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "bcd/markov.hpp"
#include "bcd/metrics.hpp"
#include "bcd/report.hpp"
#include "bcd/simulator.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonOpts {
    int n_max = 200;
    long n_sim = 100000;
    uint64_t seed = 0;
    std::string covariates = "none";
    int workers = 0;
    std::string out;
    std::string format = "csv";
};

int parse_covariate_count(const std::string& text) {
    if (text == "none") return 0;
    const std::string prefix = "normal:m=";
    if (text.rfind(prefix, 0) == 0) {
        const int m = std::stoi(text.substr(prefix.size()));
        if (m < 1) throw std::invalid_argument("covariates: m must be >= 1");
        return m;
    }
    throw std::invalid_argument("covariates: expected 'none' or 'normal:m=<count>', got '" +
                                text + "'");
}

std::string timestamp_now() {
    char buf[32];
    std::time_t t = std::time(nullptr);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

void fill_metadata(bcd::ReportTable& table, const CommonOpts& opts) {
    table.metadata["version"] = kVersion;
    table.metadata["timestamp"] = timestamp_now();
    table.metadata["n"] = std::to_string(opts.n_max);
    table.metadata["nsim"] = std::to_string(opts.n_sim);
    table.metadata["seed"] = std::to_string(opts.seed);
    table.metadata["covariates"] = opts.covariates;
}

void emit(const bcd::ReportTable& table, const CommonOpts& opts) {
    std::ostream* out = &std::cout;
    std::ofstream file;
    if (!opts.out.empty()) {
        file.open(opts.out);
        if (!file) throw std::runtime_error("cannot open output file: " + opts.out);
        out = &file;
    }
    if (opts.format == "json")
        bcd::write_json(table, *out);
    else
        bcd::write_csv(table, *out);
}

bcd::StudyConfig make_config(const std::string& rule, const CommonOpts& opts) {
    bcd::StudyConfig config;
    config.rule = bcd::StudyRule::parse(rule);
    config.n_max = opts.n_max;
    config.n_sim = opts.n_sim;
    config.seed = opts.seed;
    config.covariate_count = parse_covariate_count(opts.covariates);
    config.workers = opts.workers;
    return config;
}

int cmd_simulate(const std::string& rule, const CommonOpts& opts) {
    const bcd::StudyConfig config = make_config(rule, opts);
    const bcd::StudyResult result = bcd::run_study(config);

    bcd::ReportTable table;
    table.kind = "per_n";
    fill_metadata(table, opts);
    table.metadata["rule"] = config.rule.to_string();
    table.columns = {"n", "loss_mean", "loss_se", "bias_mean", "bias_se", "loss_adj", "bias_adj"};
    for (const auto& m : result.per_n) {
        table.add_row({std::to_string(m.n), bcd::format_number(m.loss_mean),
                       bcd::format_number(m.loss_se), bcd::format_number(m.bias_mean),
                       bcd::format_number(m.bias_se),
                       bcd::format_number(result.loss_adj[m.n - 1]),
                       bcd::format_number(result.bias_adj[m.n - 1])});
    }
    emit(table, opts);
    return 0;
}

int cmd_exact(const std::string& rule_text, std::vector<int> ns, const CommonOpts& opts) {
    const bcd::RuleSpec rule = bcd::RuleSpec::parse(rule_text);
    if (ns.empty()) ns = {199, 200};

    bcd::ReportTable table;
    table.kind = "steady_state";
    fill_metadata(table, opts);
    table.metadata["rule"] = rule.to_string();
    table.columns = {"rule", "n", "parity", "loss_exact", "bias_exact", "p0_even"};

    auto row = [&](int n, double loss, double bias, double p0, bool has_p0) {
        table.add_row({rule.to_string(), std::to_string(n), n % 2 == 0 ? "even" : "odd",
                       bcd::format_number(loss), bcd::format_number(bias),
                       has_p0 ? bcd::format_number(p0) : ""});
    };

    switch (rule.family) {
        case bcd::RuleFamily::Random:
            for (int n : ns) row(n, 1.0, 0.0, 0.0, false);
            break;
        case bcd::RuleFamily::Deterministic: {
            const auto s = bcd::efron_steady_state(1.0);
            for (int n : ns) row(n, s.loss_at(n), s.bias_at(n), s.p0_even, true);
            break;
        }
        case bcd::RuleFamily::Efron: {
            if (rule.p == 0.5) {  // random coin: no steady-state formulas
                for (int n : ns) row(n, 1.0, 0.0, 0.0, false);
                break;
            }
            const auto s = bcd::efron_steady_state(rule.p);
            for (int n : ns) row(n, s.loss_at(n), s.bias_at(n), s.p0_even, true);
            break;
        }
        case bcd::RuleFamily::Adjustable: {
            const auto approx = bcd::adjustable_approx(rule.a);
            for (int n : ns)
                row(n, approx.loss_at(n), approx.bias_at(n), approx.cycle.at_even(0), true);
            break;
        }
        case bcd::RuleFamily::ImbalanceTolerance:
        case bcd::RuleFamily::BigStick: {
            const auto chain = bcd::build_chain(rule, rule.barrier);
            const auto cycle = bcd::stationary_cycle(chain);
            for (int n : ns)
                row(n, bcd::steady_loss_at(chain, cycle, n),
                    bcd::steady_bias_at(chain, cycle, n), cycle.at_even(0), true);
            break;
        }
        case bcd::RuleFamily::Smith:
        case bcd::RuleFamily::Wei: {
            const double rho = rule.family == bcd::RuleFamily::Wei ? 1.0 : rule.rho;
            for (int n : ns) {
                const auto s = bcd::smith_asymptotics(rho, n, 1);
                row(n, s.loss_inf, s.bias_n, 0.0, false);
            }
            break;
        }
        default:
            throw std::invalid_argument("no exact analysis for rule '" + rule.to_string() + "'");
    }
    emit(table, opts);
    return 0;
}

struct CompareRow {
    std::string rule;
    double loss_prev, loss_final, bias_prev, bias_final, loss_adj, bias_adj;
};

int cmd_compare(const std::vector<std::string>& rules, const CommonOpts& opts) {
    if (rules.size() < 2)
        throw std::invalid_argument("compare: need at least two rules");

    std::vector<CompareRow> out_rows;
    for (const auto& text : rules) {
        const bcd::StudyConfig config = make_config(text, opts);
        const bcd::StudyResult result = bcd::run_study(config);
        const int n = opts.n_max;
        out_rows.push_back({config.rule.to_string(), result.at(n - 1).loss_mean,
                            result.at(n).loss_mean, result.at(n - 1).bias_mean,
                            result.at(n).bias_mean, result.loss_adj_at(n),
                            result.bias_adj_at(n)});
    }
    std::sort(out_rows.begin(), out_rows.end(), [](const CompareRow& a, const CompareRow& b) {
        if (a.bias_adj != b.bias_adj) return a.bias_adj > b.bias_adj;
        return a.rule < b.rule;
    });

    bcd::ReportTable table;
    table.kind = "compare";
    fill_metadata(table, opts);
    table.columns = {"rule", "loss_prev", "loss_final", "bias_prev",
                     "bias_final", "loss_adj", "bias_adj"};
    for (const auto& r : out_rows)
        table.add_row({r.rule, bcd::format_number(r.loss_prev), bcd::format_number(r.loss_final),
                       bcd::format_number(r.bias_prev), bcd::format_number(r.bias_final),
                       bcd::format_number(r.loss_adj), bcd::format_number(r.bias_adj)});
    emit(table, opts);
    return 0;
}

int cmd_admissibility(const std::vector<std::string>& rules, std::vector<int> marks,
                      const CommonOpts& opts) {
    if (marks.empty()) marks = {15, 25, 50, 200};
    for (int m : marks)
        if (m < 2 || m > opts.n_max)
            throw std::invalid_argument("admissibility: marks must lie in 2..n_max");

    bcd::ReportTable table;
    table.kind = "admissibility";
    fill_metadata(table, opts);
    table.columns = {"rule", "n_mark", "bias_adj", "loss_adj"};
    for (const auto& text : rules) {
        const bcd::StudyConfig config = make_config(text, opts);
        const bcd::StudyResult result = bcd::run_study(config);
        for (const auto& pt : bcd::admissibility_trajectory(result, marks))
            table.add_row({config.rule.to_string(), std::to_string(pt.n),
                           bcd::format_number(pt.bias_adj), bcd::format_number(pt.loss_adj)});
    }
    emit(table, opts);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Biased-coin randomization rules: simulation and exact analysis"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string rule;
    std::vector<std::string> rules;
    std::vector<int> exact_ns;
    std::vector<int> marks;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--n", opts.n_max, "Trial length");
        cmd->add_option("--nsim", opts.n_sim, "Replicates");
        cmd->add_option("--seed", opts.seed, "Master seed");
        cmd->add_option("--covariates", opts.covariates, "'none' or 'normal:m=<count>'");
        cmd->add_option("--workers", opts.workers, "Worker threads (0 = auto)");
        cmd->add_option("--out", opts.out, "Output file (default stdout)");
        cmd->add_option("--format", opts.format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
    };

    auto* sim = app.add_subcommand("simulate", "Monte Carlo per-n loss and bias");
    sim->add_option("--rule", rule, "Rule spec, e.g. efron:p=0.6667")->required();
    add_common(sim);

    auto* exact = app.add_subcommand("exact", "Steady-state/asymptotic loss and bias");
    exact->add_option("--rule", rule, "Rule spec")->required();
    exact->add_option("--at", exact_ns, "Sample sizes (default 199 200)");
    add_common(exact);

    auto* compare = app.add_subcommand("compare", "Multi-rule comparison table");
    compare->add_option("--rules", rules, "Rule specs")->required()->expected(-1);
    add_common(compare);

    auto* admiss = app.add_subcommand("admissibility", "Bias/loss trajectory points");
    admiss->add_option("--rules", rules, "Rule specs")->required()->expected(-1);
    admiss->add_option("--marks", marks, "Sample-size marks (default 15 25 50 200)");
    add_common(admiss);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (sim->parsed()) return cmd_simulate(rule, opts);
        if (exact->parsed()) return cmd_exact(rule, exact_ns, opts);
        if (compare->parsed()) return cmd_compare(rules, opts);
        if (admiss->parsed()) return cmd_admissibility(rules, marks, opts);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
