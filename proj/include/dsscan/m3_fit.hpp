#pragma once

#include "dsscan/alignment.hpp"
#include "dsscan/codon_model.hpp"
#include "dsscan/phylogeny.hpp"

namespace dsscan {

struct M3FitResult {
    M3Params params;            // canonical: classes sorted by ascending omega
    double log_likelihood = 0.0;
    bool degenerate = false;    // no variable sites: defaults returned
    bool converged = false;
    int sweeps = 0;
};

// Mixture log-likelihood of the alignment on a fixed tree (branch lengths in
// expected substitutions per codon under the mixture; frequencies F1x4 from
// the data). Tip names must match alignment taxa.
double mixture_log_likelihood(const CodonAlignment& aln, const Phylogeny& tree,
                              const M3Params& params);

// Maximum-likelihood fit of the three-class omega mixture by coordinate
// ascent: golden-section line searches for kappa (log scale) and each omega,
// EM-style reweighting for the class probabilities, every update accepted
// only if the likelihood improves. Stops when a sweep gains < 1e-6 log units
// (200 sweeps at most).
M3FitResult fit_m3(const CodonAlignment& aln, const Phylogeny& tree);

}  // namespace dsscan
