#include "dsscan/dss.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "dsscan/errors.hpp"
#include "dsscan/ls_fit.hpp"
#include "dsscan/parallel.hpp"

namespace dsscan {

void WindowSpec::validate(int n_codons) const {
    if (window_codons < 2 || window_codons % 2 != 0)
        throw InvalidParameter("window length in codons must be even and at least 2");
    if (step_codons < 1) throw InvalidParameter("window step must be at least 1 codon");
    if (window_codons > n_codons) {
        std::ostringstream msg;
        msg << "window of " << window_codons << " codons exceeds alignment length "
            << n_codons;
        throw WindowTooLong(msg.str());
    }
}

std::vector<std::pair<int, int>> enumerate_windows(int n_codons, const WindowSpec& spec) {
    spec.validate(n_codons);
    std::vector<std::pair<int, int>> out;
    for (int s = 0; s + spec.window_codons <= n_codons; s += spec.step_codons)
        out.push_back({s, s + spec.window_codons});
    return out;
}

Eigen::MatrixXd standardize(const Eigen::MatrixXd& half_values, double global_mean) {
    double half_mean = upper_triangle_mean(half_values);
    if (half_mean <= kDegenerateMeanEps)
        throw DegenerateHalf("half-window distances have no signal to standardize");
    return half_values * (global_mean / half_mean);
}

double window_dss(const Eigen::MatrixXd& source_half, const Eigen::MatrixXd& sink_half,
                  double global_mean, const std::vector<std::string>& names) {
    Eigen::MatrixXd src = standardize(source_half, global_mean);
    Eigen::MatrixXd snk = standardize(sink_half, global_mean);
    LsFit optimized = ls_tree_search(src, names);
    LsFit refit = ols_branch_lengths(optimized.tree, snk);
    return refit.ss - optimized.ss;
}

const DssLandscape& ScanResult::landscape(Label label) const {
    for (const DssLandscape& l : landscapes)
        if (l.label == label) return l;
    throw InvalidParameter("label not present in scan result");
}

ScanResult scan_alignment(const CodonAlignment& aln, const WindowSpec& spec,
                          const std::vector<Label>& labels, const CodonModel& model,
                          int threads) {
    if (aln.n_taxa() < 4)
        throw FewerThanFourTaxa("window scanning needs at least four taxa");
    if (labels.empty()) throw InvalidParameter("no labels requested");
    auto windows = enumerate_windows(aln.n_codons(), spec);

    LabeledDistanceSet whole = labeled_distance_matrices(aln, 0, aln.n_codons(), model);
    std::array<double, 3> global_mean{};
    for (Label label : {Label::All, Label::Syn, Label::Nonsyn})
        global_mean[static_cast<int>(label)] = upper_triangle_mean(whole.values(label));

    struct Cell {
        double forward = std::numeric_limits<double>::quiet_NaN();
        double backward = std::numeric_limits<double>::quiet_NaN();
        bool skipped = true;
    };
    std::vector<std::array<Cell, 3>> cells(windows.size());
    std::vector<int> saturated(windows.size(), 0);

    const int half = spec.window_codons / 2;
    parallel_for(windows.size(), threads, [&](std::size_t wi) {
        auto [s, e] = windows[wi];
        LabeledDistanceSet h1, h2;
        try {
            h1 = labeled_distance_matrices(aln, s, s + half, model);
            h2 = labeled_distance_matrices(aln, s + half, e, model);
        } catch (const NoComparableSites&) {
            return;  // window unusable for every label
        }
        saturated[wi] = h1.saturated_pairs + h2.saturated_pairs;
        for (Label label : labels) {
            const int li = static_cast<int>(label);
            double gmean = global_mean[li];
            if (gmean <= kDegenerateMeanEps) continue;
            try {
                Cell cell;
                cell.forward = window_dss(h1.values(label), h2.values(label), gmean, aln.taxa);
                cell.backward = window_dss(h2.values(label), h1.values(label), gmean, aln.taxa);
                cell.skipped = false;
                cells[wi][li] = cell;
            } catch (const DegenerateHalf&) {
                // window stays skipped for this label
            }
        }
    });

    ScanResult result;
    result.spec = spec;
    result.saturated_pairs = whole.saturated_pairs;
    for (int w = 0; w < static_cast<int>(windows.size()); ++w)
        result.saturated_pairs += saturated[w];
    for (Label label : labels) {
        const int li = static_cast<int>(label);
        DssLandscape land;
        land.label = label;
        land.global_mean = global_mean[li];
        land.dss_max = -std::numeric_limits<double>::infinity();
        for (std::size_t wi = 0; wi < windows.size(); ++wi) {
            const Cell& cell = cells[wi][li];
            WindowDss w;
            w.start = windows[wi].first;
            w.end = windows[wi].second;
            w.skipped = cell.skipped;
            if (!cell.skipped) {
                w.forward = cell.forward;
                w.backward = cell.backward;
                w.dss = std::max(cell.forward, cell.backward);
                if (w.dss > land.dss_max) {
                    land.dss_max = w.dss;
                    land.argmax = static_cast<int>(wi);
                }
            } else {
                ++land.n_skipped;
            }
            land.windows.push_back(w);
        }
        if (land.argmax < 0) {
            std::ostringstream msg;
            msg << "every window degenerate for label " << label_name(label);
            throw AllWindowsDegenerate(msg.str());
        }
        result.landscapes.push_back(std::move(land));
    }
    return result;
}

}  // namespace dsscan
