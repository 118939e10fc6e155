#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dsscan/alignment.hpp"
#include "dsscan/codon_model.hpp"
#include "dsscan/distances.hpp"

namespace dsscan {

// Half-matrix means at or below this are treated as no signal.
constexpr double kDegenerateMeanEps = 1e-9;

struct WindowSpec {
    int window_codons = 200;
    int step_codons = 3;

    void validate(int n_codons) const;
};

// Window start offsets paired with their (exclusive) ends, 0-based codons.
std::vector<std::pair<int, int>> enumerate_windows(int n_codons, const WindowSpec& spec);

// Scale a half-window matrix so its pair mean matches the whole-alignment
// mean for the same label. Throws DegenerateHalf when the half carries no
// signal.
Eigen::MatrixXd standardize(const Eigen::MatrixXd& half_values, double global_mean);

// One-direction incongruence measure: fit the best least-squares tree on the
// source half, refit only branch lengths on the sink half with that topology
// held fixed, and return (sink refit SS) - (source optimized SS). Both halves
// are standardized against the whole-alignment mean first.
double window_dss(const Eigen::MatrixXd& source_half, const Eigen::MatrixXd& sink_half,
                  double global_mean, const std::vector<std::string>& names);

struct WindowDss {
    int start = 0;  // 0-based first codon
    int end = 0;    // exclusive
    double forward = 0.0;
    double backward = 0.0;
    double dss = 0.0;  // max of the two directions
    bool skipped = false;
};

struct DssLandscape {
    Label label = Label::All;
    double global_mean = 0.0;
    std::vector<WindowDss> windows;
    double dss_max = 0.0;
    int argmax = -1;  // window index of the maximum
    int n_skipped = 0;
};

struct ScanResult {
    WindowSpec spec;
    int saturated_pairs = 0;  // pairs at the divergence search bound anywhere
    std::vector<DssLandscape> landscapes;  // one per requested label, in order

    const DssLandscape& landscape(Label label) const;
};

// Sliding-window Dss landscapes for the requested labels under one global
// model. Window halves share divergence-time fits across labels. Throws
// AllWindowsDegenerate if some requested label retains no window.
ScanResult scan_alignment(const CodonAlignment& aln, const WindowSpec& spec,
                          const std::vector<Label>& labels, const CodonModel& model,
                          int threads = 1);

}  // namespace dsscan
