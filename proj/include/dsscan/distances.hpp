#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "dsscan/alignment.hpp"
#include "dsscan/codon_model.hpp"

namespace dsscan {

// Upper bound for the per-pair divergence time search, expected substitutions
// per codon. Pairs whose likelihood keeps rising at the bound are flagged as
// saturated and estimated at the bound.
constexpr double kMaxPairTime = 10.0;
constexpr double kPairTimeTol = 1e-7;

struct PairEstimate {
    double t_hat = 0.0;
    double d_syn = 0.0;     // expected synonymous substitutions per codon
    double d_nonsyn = 0.0;  // expected nonsynonymous substitutions per codon
    bool saturated = false;
    int usable_sites = 0;

    double d_all() const { return d_syn + d_nonsyn; }
    double distance(Label label) const {
        switch (label) {
            case Label::All: return d_all();
            case Label::Syn: return d_syn;
            case Label::Nonsyn: return d_nonsyn;
        }
        return 0.0;
    }
};

// Maximum-likelihood divergence time for one codon sequence pair under the
// model, then expected synonymous/nonsynonymous substitution counts over the
// path conditioned on the observed codons at both ends. Sites where either
// sequence is missing are excluded (pairwise deletion); throws
// NoComparableSites when nothing is left.
PairEstimate estimate_pair(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                           const CodonModel& model);

double estimate_pair_time(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                          const CodonModel& model);

double labeled_distance(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                        Label label, const CodonModel& model);

struct DistanceMatrix {
    Label label = Label::All;
    Eigen::MatrixXd values;  // symmetric, zero diagonal

    int n() const { return static_cast<int>(values.rows()); }
};

// Mean over unordered pairs (upper triangle).
double upper_triangle_mean(const Eigen::MatrixXd& m);

// All three labeled matrices plus the fitted times for codon columns
// [start, end) of the alignment; the time search is shared across labels.
struct LabeledDistanceSet {
    Eigen::MatrixXd t_hat;
    Eigen::MatrixXd d_all;
    Eigen::MatrixXd d_syn;
    Eigen::MatrixXd d_nonsyn;
    int saturated_pairs = 0;

    const Eigen::MatrixXd& values(Label label) const {
        switch (label) {
            case Label::All: return d_all;
            case Label::Syn: return d_syn;
            case Label::Nonsyn: return d_nonsyn;
        }
        return d_all;
    }
};

LabeledDistanceSet labeled_distance_matrices(const CodonAlignment& aln, int start, int end,
                                             const CodonModel& model);

// Expected synonymous / nonsynonymous substitution counts on [0, t] given the
// start and end codons: entry (i, j) is E[N_label | X(0)=i, X(t)=j].
struct ConditionalCounts {
    Eigen::MatrixXd syn;
    Eigen::MatrixXd nonsyn;
};

ConditionalCounts conditional_label_counts(const CodonModel& model, double t);

DistanceMatrix distance_matrix(const CodonAlignment& aln, Label label,
                               const CodonModel& model);

}  // namespace dsscan
