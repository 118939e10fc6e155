#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dsscan/dss.hpp"
#include "dsscan/simulate.hpp"

namespace dsscan {

struct StudyConfig {
    ScenarioConfig scenario;
    WindowSpec window{200, 12};
    int replicates = 100;
    int bootstrap_b = 100;
    double alpha = 0.05;
    std::uint64_t seed = 1;
    int threads = 1;
};

struct ReplicateOutcome {
    int index = -1;
    bool ok = false;
    std::array<double, 3> p{1.0, 1.0, 1.0};  // indexed by Label
    std::string error;
};

struct StudyRow {
    std::string scenario;
    std::string label;
    int replicates = 0;  // completed replicates contributing to the rate
    int rejections = 0;
    double rate = 0.0;
    double ci_low = 0.0;   // 95% Wald interval
    double ci_high = 0.0;
};

struct StudyResult {
    std::vector<ReplicateOutcome> outcomes;  // ordered by replicate index
    std::vector<StudyRow> rows;              // one per label (all, syn, nonsyn)
    int failed = 0;
};

std::pair<double, double> wald_interval(int successes, int n);

// Simulate `replicates` scenario datasets and bootstrap-test each; a
// replicate rejects for a label when its p-value is at or below alpha. Rates
// are tabulated per label. Previously completed outcomes can be passed in to
// resume an interrupted run; on_done (if set) fires once per fresh replicate
// under a lock, in completion order.
StudyResult run_study(const StudyConfig& cfg,
                      const std::vector<ReplicateOutcome>& already_done = {},
                      const std::function<void(const ReplicateOutcome&)>& on_done = nullptr);

}  // namespace dsscan
