#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dsscan/alignment.hpp"
#include "dsscan/dss.hpp"
#include "dsscan/m3_fit.hpp"
#include "dsscan/phylogeny.hpp"

namespace dsscan {

// Null model fitted to one alignment: a least-squares tree from the total
// distance matrix plus the omega-mixture parameters. Distances start from
// neutral parameters, then the tree is refit once under the fitted ones so
// simulated replicates match the scale the scan estimator sees.
struct NullFit {
    Phylogeny tree;
    double tree_ss = 0.0;
    M3FitResult m3;
    Eigen::VectorXd pi;
    double kappa = 2.0;
    double omega_bar = 1.0;  // mixture mean omega, the scan's plug-in
};

NullFit fit_null(const CodonAlignment& aln);

// Empirical exceedance p-value: #{samples >= observed} / #samples.
double empirical_p_value(double observed, std::span<const double> samples);
// Nearest-rank 95th percentile (ceil(0.95 n) smallest).
double percentile_95(std::span<const double> samples);

struct LabelBootstrap {
    Label label = Label::All;
    double observed = 0.0;
    double p_value = 1.0;
    double threshold95 = 0.0;
    std::vector<double> null_samples;  // length B; -inf marks degenerate replicates
    int degenerate = 0;
};

struct BootstrapResult {
    NullFit null_fit;
    ScanResult observed;
    std::vector<LabelBootstrap> labels;
    int B = 0;
    std::uint64_t seed = 0;

    const LabelBootstrap& label_result(Label label) const;
};

// Parametric bootstrap of the max-window statistic: simulate B replicates on
// the fitted null tree and mixture, rescan each with the same global plug-in
// parameters (replicates standardize against their own means), and compare
// the observed maxima against the null samples. Deterministic for a given
// seed regardless of thread count.
BootstrapResult bootstrap_test(const CodonAlignment& aln, const WindowSpec& spec,
                               const std::vector<Label>& labels, int B,
                               std::uint64_t seed, int threads = 1);

}  // namespace dsscan
