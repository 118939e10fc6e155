#include "dsscan/study.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>

#include "dsscan/bootstrap.hpp"
#include "dsscan/errors.hpp"
#include "dsscan/parallel.hpp"

namespace dsscan {

std::pair<double, double> wald_interval(int successes, int n) {
    if (n <= 0) throw InvalidParameter("wald interval needs at least one trial");
    if (successes < 0 || successes > n)
        throw InvalidParameter("wald interval successes out of range");
    double p = static_cast<double>(successes) / n;
    double half = 1.96 * std::sqrt(p * (1.0 - p) / n);
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

StudyResult run_study(const StudyConfig& cfg,
                      const std::vector<ReplicateOutcome>& already_done,
                      const std::function<void(const ReplicateOutcome&)>& on_done) {
    cfg.scenario.validate();
    if (cfg.replicates < 1) throw InvalidParameter("study needs at least one replicate");

    StudyResult result;
    result.outcomes.resize(cfg.replicates);
    std::vector<char> have(cfg.replicates, 0);
    for (const ReplicateOutcome& done : already_done) {
        if (done.index < 0 || done.index >= cfg.replicates) continue;
        result.outcomes[done.index] = done;
        have[done.index] = 1;
    }
    std::vector<int> todo;
    for (int r = 0; r < cfg.replicates; ++r)
        if (!have[r]) todo.push_back(r);

    const std::vector<Label> labels{Label::All, Label::Syn, Label::Nonsyn};
    RngStream master(cfg.seed);
    std::mutex done_mutex;

    parallel_for(todo.size(), cfg.threads, [&](std::size_t i) {
        const int r = todo[i];
        ReplicateOutcome outcome;
        outcome.index = r;
        RngStream rep_rng = master.derive("study").derive(static_cast<std::uint64_t>(r));
        try {
            RngStream data_rng = rep_rng.derive("data");
            CodonAlignment aln = simulate_scenario(cfg.scenario, data_rng);
            BootstrapResult boot =
                bootstrap_test(aln, cfg.window, labels, cfg.bootstrap_b,
                               rep_rng.derive("boot").key(), 1);
            for (Label label : labels)
                outcome.p[static_cast<int>(label)] = boot.label_result(label).p_value;
            outcome.ok = true;
        } catch (const Error& err) {
            outcome.error = err.what();
        }
        result.outcomes[r] = outcome;
        if (on_done) {
            std::lock_guard<std::mutex> lock(done_mutex);
            on_done(result.outcomes[r]);
        }
    });

    for (Label label : labels) {
        StudyRow row;
        row.scenario = scenario_name(cfg.scenario.kind);
        row.label = label_name(label);
        for (const ReplicateOutcome& outcome : result.outcomes) {
            if (!outcome.ok) continue;
            ++row.replicates;
            if (outcome.p[static_cast<int>(label)] <= cfg.alpha) ++row.rejections;
        }
        row.rate = row.replicates > 0
                       ? static_cast<double>(row.rejections) / row.replicates
                       : 0.0;
        if (row.replicates > 0)
            std::tie(row.ci_low, row.ci_high) = wald_interval(row.rejections, row.replicates);
        result.rows.push_back(std::move(row));
    }
    for (const ReplicateOutcome& outcome : result.outcomes)
        if (!outcome.ok) ++result.failed;
    return result;
}

}  // namespace dsscan
