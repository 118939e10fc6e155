#include "dsscan/ls_fit.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

void check_square(const Eigen::MatrixXd& d, std::size_t n_names) {
    if (d.rows() != d.cols() || d.rows() != static_cast<Eigen::Index>(n_names))
        throw InvalidParameter("distance matrix shape does not match taxon names");
}

}  // namespace

Phylogeny nj_topology(const Eigen::MatrixXd& d, const std::vector<std::string>& names) {
    const int n = static_cast<int>(names.size());
    check_square(d, names.size());
    if (n < 2) throw TooFewTaxa("neighbor joining needs at least two taxa");

    Phylogeny tree;
    tree.tip_names = names;
    if (n == 2) {
        tree.n_nodes = 2;
        tree.edges.push_back({0, 1, 0.0});
        return tree;
    }

    // working copy over active cluster nodes
    std::vector<int> active(n);
    for (int i = 0; i < n; ++i) active[i] = i;
    Eigen::MatrixXd dist = d;
    std::vector<int> pos(n);  // node -> row of dist
    for (int i = 0; i < n; ++i) pos[i] = i;

    int next_node = n;
    while (active.size() > 3) {
        const int r = static_cast<int>(active.size());
        std::vector<double> rowsum(r, 0.0);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) rowsum[i] += dist(pos[active[i]], pos[active[j]]);
        double best = std::numeric_limits<double>::infinity();
        int bi = -1, bj = -1;
        for (int i = 0; i < r; ++i) {
            for (int j = i + 1; j < r; ++j) {
                double q = (r - 2) * dist(pos[active[i]], pos[active[j]]) - rowsum[i] -
                           rowsum[j];
                if (q < best - 1e-12) {  // strict improvement keeps ties at first pair
                    best = q;
                    bi = i;
                    bj = j;
                }
            }
        }
        int a = active[bi], b = active[bj];
        int w = next_node++;
        tree.edges.push_back({w, a, 0.0});
        tree.edges.push_back({w, b, 0.0});
        // distances from the new cluster
        int slot = pos[a];  // reuse row of a
        for (int k : active) {
            if (k == a || k == b) continue;
            double dk =
                0.5 * (dist(pos[a], pos[k]) + dist(pos[b], pos[k]) - dist(pos[a], pos[b]));
            dist(slot, pos[k]) = dk;
            dist(pos[k], slot) = dk;
        }
        dist(slot, slot) = 0.0;
        active.erase(active.begin() + bj);
        active[bi] = w;
        pos.push_back(0);
        pos[w] = slot;
    }

    int hub = next_node++;
    for (int k : active) tree.edges.push_back({hub, k, 0.0});
    tree.n_nodes = next_node;
    tree.validate();
    return tree;
}

LsFit ols_branch_lengths(const Phylogeny& topology, const Eigen::MatrixXd& d) {
    check_square(d, topology.tip_names.size());
    const int n = topology.n_tips();
    const int n_edges = topology.n_edges();
    const auto paths = topology.tip_pair_paths();
    const int n_pairs = static_cast<int>(paths.size());

    Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(n_edges, n_edges);
    Eigen::VectorXd atd = Eigen::VectorXd::Zero(n_edges);
    Eigen::VectorXd dvec(n_pairs);
    {
        int p = 0;
        for (int k = 0; k < n; ++k) {
            for (int l = k + 1; l < n; ++l, ++p) {
                double dp = d(k, l);
                dvec[p] = dp;
                for (int e : paths[p]) {
                    atd[e] += dp;
                    for (int f : paths[p]) ata(e, f) += 1.0;
                }
            }
        }
    }

    Eigen::LDLT<Eigen::MatrixXd> solver(ata);
    if (solver.info() != Eigen::Success)
        throw SingularDesign("least-squares normal equations are singular");
    Eigen::VectorXd lengths = solver.solve(atd);
    if (!lengths.allFinite())
        throw SingularDesign("least-squares branch solve produced non-finite lengths");
    lengths = lengths.cwiseMax(0.0);

    LsFit fit;
    fit.tree = topology;
    for (int e = 0; e < n_edges; ++e) fit.tree.edges[e].length = lengths[e];
    double ss = 0.0;
    for (int p = 0; p < n_pairs; ++p) {
        double fitted = 0.0;
        for (int e : paths[p]) fitted += lengths[e];
        double resid = dvec[p] - fitted;
        ss += resid * resid;
    }
    fit.ss = ss;
    return fit;
}

std::vector<Phylogeny> enumerate_topologies(const std::vector<std::string>& names) {
    const int n = static_cast<int>(names.size());
    if (n < 3) throw TooFewTaxa("topology enumeration needs at least three taxa");
    if (n > 8) throw InvalidParameter("topology enumeration limited to 8 taxa");

    std::vector<Phylogeny> out;
    Phylogeny base;
    base.tip_names = names;
    base.n_nodes = n + 1;
    base.edges = {{n, 0, 0.0}, {n, 1, 0.0}, {n, 2, 0.0}};

    // depth-first edge insertion of tips 3..n-1
    std::vector<Phylogeny> frontier{base};
    for (int tip = 3; tip < n; ++tip) {
        std::vector<Phylogeny> grown;
        grown.reserve(frontier.size() * (2 * tip - 3));
        for (const Phylogeny& t : frontier) {
            for (int e = 0; e < t.n_edges(); ++e) {
                Phylogeny g = t;
                int w = g.n_nodes++;
                int v = g.edges[e].v;
                g.edges[e].v = w;
                g.edges.push_back({w, v, 0.0});
                g.edges.push_back({w, tip, 0.0});
                grown.push_back(std::move(g));
            }
        }
        frontier = std::move(grown);
    }
    out = std::move(frontier);
    return out;
}

std::vector<Phylogeny> nni_neighbors(const Phylogeny& topology) {
    const int n = topology.n_tips();
    std::vector<Phylogeny> out;
    if (n < 4) return out;

    // internal edges in deterministic (min node, max node) order
    std::vector<int> internal;
    for (int e = 0; e < topology.n_edges(); ++e)
        if (topology.edges[e].u >= n && topology.edges[e].v >= n) internal.push_back(e);
    std::sort(internal.begin(), internal.end(), [&](int a, int b) {
        auto key = [&](int e) {
            return std::pair(std::min(topology.edges[e].u, topology.edges[e].v),
                             std::max(topology.edges[e].u, topology.edges[e].v));
        };
        return key(a) < key(b);
    });

    for (int e : internal) {
        int u = topology.edges[e].u, v = topology.edges[e].v;
        // edges incident to u (other than e), sorted for determinism
        std::vector<int> u_side, v_side;
        for (int f = 0; f < topology.n_edges(); ++f) {
            if (f == e) continue;
            if (topology.edges[f].u == u || topology.edges[f].v == u) u_side.push_back(f);
            if (topology.edges[f].u == v || topology.edges[f].v == v) v_side.push_back(f);
        }
        auto other_end = [&](int f, int node) {
            return topology.edges[f].u == node ? topology.edges[f].v : topology.edges[f].u;
        };
        std::sort(u_side.begin(), u_side.end(),
                  [&](int a, int b) { return other_end(a, u) < other_end(b, u); });
        std::sort(v_side.begin(), v_side.end(),
                  [&](int a, int b) { return other_end(a, v) < other_end(b, v); });
        // swap the second u-subtree with each v-subtree in turn
        for (int which : {0, 1}) {
            Phylogeny g = topology;
            int fu = u_side[1], fv = v_side[which];
            int subtree_u = other_end(fu, u);
            int subtree_v = other_end(fv, v);
            auto reattach = [&](int f, int from, int to) {
                if (g.edges[f].u == from)
                    g.edges[f].u = to;
                else
                    g.edges[f].v = to;
            };
            // move subtree_u's edge to v and subtree_v's edge to u
            reattach(fu, u, v);
            reattach(fv, v, u);
            out.push_back(std::move(g));
        }
    }
    return out;
}

LsFit ls_tree_search(const Eigen::MatrixXd& d, const std::vector<std::string>& names) {
    const int n = static_cast<int>(names.size());
    check_square(d, names.size());
    if (n < 3) throw TooFewTaxa("tree search needs at least three taxa");

    if (n <= 6) {
        std::vector<Phylogeny> candidates = enumerate_topologies(names);
        LsFit best;
        bool have = false;
        for (const Phylogeny& t : candidates) {
            LsFit fit = ols_branch_lengths(t, d);
            if (!have || fit.ss < best.ss - 1e-15) {
                best = std::move(fit);
                have = true;
            }
        }
        return best;
    }
    return ls_tree_search_heuristic(d, names);
}

LsFit ls_tree_search_heuristic(const Eigen::MatrixXd& d,
                               const std::vector<std::string>& names) {
    const int n = static_cast<int>(names.size());
    check_square(d, names.size());
    if (n < 3) throw TooFewTaxa("tree search needs at least three taxa");

    Phylogeny current = nj_topology(d, names);
    LsFit best = ols_branch_lengths(current, d);
    bool improved = true;
    while (improved) {
        improved = false;
        for (const Phylogeny& nb : nni_neighbors(best.tree)) {
            LsFit fit = ols_branch_lengths(nb, d);
            if (fit.ss < best.ss - 1e-12) {
                best = std::move(fit);
                improved = true;
                break;  // first improvement, rescan from the new tree
            }
        }
    }
    return best;
}

}  // namespace dsscan
