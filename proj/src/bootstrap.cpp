#include "dsscan/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dsscan/distances.hpp"
#include "dsscan/ls_fit.hpp"
#include "dsscan/parallel.hpp"
#include "dsscan/rng.hpp"
#include "dsscan/simulate.hpp"

namespace dsscan {

NullFit fit_null(const CodonAlignment& aln) {
    if (aln.n_taxa() < 4)
        throw FewerThanFourTaxa("null model fitting needs at least four taxa");

    NullFit fit;
    fit.pi = f1x4_frequencies(aln);

    // stage 0: neutral-parameter distances seed the tree for the mixture fit
    CodonModel seed_model = build_model(2.0, 1.0, fit.pi, aln.code);
    DistanceMatrix d0 = distance_matrix(aln, Label::All, seed_model);
    LsFit tree0 = ls_tree_search(d0.values, aln.taxa);

    fit.m3 = fit_m3(aln, tree0.tree);
    fit.kappa = fit.m3.params.kappa;
    fit.omega_bar = fit.m3.params.mean_omega();

    // stage 1: refit the tree under the fitted parameters
    CodonModel fitted_model = build_model(fit.kappa, fit.omega_bar, fit.pi, aln.code);
    DistanceMatrix d1 = distance_matrix(aln, Label::All, fitted_model);
    LsFit tree1 = ls_tree_search(d1.values, aln.taxa);
    fit.tree = tree1.tree;
    fit.tree_ss = tree1.ss;
    return fit;
}

double empirical_p_value(double observed, std::span<const double> samples) {
    if (samples.empty()) throw InvalidParameter("p-value needs at least one sample");
    int exceed = 0;
    for (double s : samples)
        if (s >= observed) ++exceed;
    return static_cast<double>(exceed) / static_cast<double>(samples.size());
}

double percentile_95(std::span<const double> samples) {
    if (samples.empty()) throw InvalidParameter("percentile needs at least one sample");
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(0.95 * static_cast<double>(sorted.size())));
    if (rank == 0) rank = 1;
    return sorted[rank - 1];
}

const LabelBootstrap& BootstrapResult::label_result(Label label) const {
    for (const LabelBootstrap& lb : labels)
        if (lb.label == label) return lb;
    throw InvalidParameter("label not present in bootstrap result");
}

BootstrapResult bootstrap_test(const CodonAlignment& aln, const WindowSpec& spec,
                               const std::vector<Label>& labels, int B,
                               std::uint64_t seed, int threads) {
    if (B < 1) throw InvalidParameter("bootstrap needs B >= 1 replicates");
    if (labels.empty()) throw InvalidParameter("bootstrap needs at least one label");

    BootstrapResult result;
    result.B = B;
    result.seed = seed;
    result.null_fit = fit_null(aln);

    CodonModel scan_model =
        build_model(result.null_fit.kappa, result.null_fit.omega_bar, result.null_fit.pi,
                    aln.code);
    // the observed scan must succeed; a fully degenerate input is an error
    result.observed = scan_alignment(aln, spec, labels, scan_model, threads);

    MixtureModel mixture =
        build_mixture(result.null_fit.m3.params, result.null_fit.pi, aln.code);
    const double neg_inf = -std::numeric_limits<double>::infinity();
    std::vector<std::array<double, 3>> maxima(
        static_cast<std::size_t>(B), {neg_inf, neg_inf, neg_inf});
    std::vector<char> degenerate(static_cast<std::size_t>(B), 0);

    RngStream master(seed);
    const int n_codons = aln.n_codons();
    parallel_for(static_cast<std::size_t>(B), threads, [&](std::size_t b) {
        RngStream rep_rng = master.derive("rep").derive(b);
        CodonAlignment rep =
            simulate_alignment(result.null_fit.tree, n_codons, mixture, rep_rng);
        try {
            ScanResult scan = scan_alignment(rep, spec, labels, scan_model, 1);
            for (const DssLandscape& land : scan.landscapes)
                maxima[b][static_cast<int>(land.label)] = land.dss_max;
        } catch (const DataError&) {
            degenerate[b] = 1;  // no usable windows: tallied as -inf samples
        }
    });

    for (Label label : labels) {
        LabelBootstrap lb;
        lb.label = label;
        lb.observed = result.observed.landscape(label).dss_max;
        lb.null_samples.resize(static_cast<std::size_t>(B));
        for (int b = 0; b < B; ++b) {
            lb.null_samples[b] = maxima[b][static_cast<int>(label)];
            if (degenerate[b]) ++lb.degenerate;
        }
        lb.p_value = empirical_p_value(lb.observed, lb.null_samples);
        lb.threshold95 = percentile_95(lb.null_samples);
        result.labels.push_back(std::move(lb));
    }
    return result;
}

}  // namespace dsscan
