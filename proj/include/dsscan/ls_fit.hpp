#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "dsscan/phylogeny.hpp"

namespace dsscan {

// Tip index i in every tree below corresponds to row i of the distance
// matrix; callers keep taxon order consistent across matrices and trees.

struct LsFit {
    Phylogeny tree;  // OLS branch lengths, negatives clamped to zero
    double ss = 0.0; // residual sum of squares after clamping
};

// Neighbor-joining topology (branch lengths zeroed; ties broken toward the
// lexicographically smallest active pair).
Phylogeny nj_topology(const Eigen::MatrixXd& d, const std::vector<std::string>& names);

// Ordinary least-squares branch lengths on a fixed topology.
LsFit ols_branch_lengths(const Phylogeny& topology, const Eigen::MatrixXd& d);

// Every unrooted binary topology over the given tips, in a deterministic
// insertion order. Sizes grow as (2n-5)!!; refused for n > 8.
std::vector<Phylogeny> enumerate_topologies(const std::vector<std::string>& names);

// The one or two nearest-neighbor-interchange rearrangements of each internal
// edge, in deterministic edge order.
std::vector<Phylogeny> nni_neighbors(const Phylogeny& topology);

// Best least-squares tree: exhaustive for n <= 6, otherwise NJ followed by
// first-improvement NNI hill climbing.
LsFit ls_tree_search(const Eigen::MatrixXd& d, const std::vector<std::string>& names);

// The NJ + NNI climb on its own, regardless of taxon count.
LsFit ls_tree_search_heuristic(const Eigen::MatrixXd& d,
                               const std::vector<std::string>& names);

}  // namespace dsscan
