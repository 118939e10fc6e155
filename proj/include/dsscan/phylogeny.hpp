#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dsscan/errors.hpp"

namespace dsscan {

// Unrooted tree with named tips. Nodes 0..n_tips-1 are tips (in tip_names
// order); higher indices are internal. For n_tips >= 3 a valid tree is binary:
// tips have degree 1, internal nodes degree 3, 2*n_tips - 3 edges.
struct Phylogeny {
    struct Edge {
        int u = -1;
        int v = -1;
        double length = 0.0;
    };

    std::vector<std::string> tip_names;
    std::vector<Edge> edges;
    int n_nodes = 0;

    int n_tips() const { return static_cast<int>(tip_names.size()); }
    int n_edges() const { return static_cast<int>(edges.size()); }

    void validate() const;  // throws on malformed topology
    void scale_lengths(double factor);
    double total_length() const;

    // Path-length matrix between tips.
    Eigen::MatrixXd tip_distances() const;
    // For each unordered tip pair (k < l), the edge indices on the k-l path,
    // in row-major pair order: (0,1), (0,2), ..., (1,2), ...
    std::vector<std::vector<int>> tip_pair_paths() const;

    // The unordered tip-set split induced by each edge, as a bitmask over tip
    // indices, canonicalized to exclude tip 0. Topology identity ignores
    // lengths and internal node numbering.
    std::vector<std::uint64_t> splits() const;
    bool same_topology(const Phylogeny& other) const;

    std::string to_newick() const;
    static Phylogeny from_newick(std::string_view text);
};

inline int pair_index(int k, int l, int n) {
    // row-major upper triangle index of (k, l), k < l
    return k * n - k * (k + 1) / 2 + (l - k - 1);
}

}  // namespace dsscan
