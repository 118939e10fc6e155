#include "dsscan/phylogeny.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <queue>
#include <sstream>
#include <unordered_map>

namespace dsscan {

namespace {

std::vector<std::vector<std::pair<int, int>>> adjacency(const Phylogeny& tree) {
    // (neighbor node, edge index)
    std::vector<std::vector<std::pair<int, int>>> adj(tree.n_nodes);
    for (int e = 0; e < tree.n_edges(); ++e) {
        adj[tree.edges[e].u].push_back({tree.edges[e].v, e});
        adj[tree.edges[e].v].push_back({tree.edges[e].u, e});
    }
    return adj;
}

}  // namespace

void Phylogeny::validate() const {
    const int n = n_tips();
    if (n < 2) throw TooFewTaxa("tree needs at least two tips");
    if (n_nodes < n) throw InvalidParameter("tree node count below tip count");
    const int expected_edges = (n == 2) ? 1 : 2 * n - 3;
    if (n_edges() != expected_edges) {
        std::ostringstream msg;
        msg << "tree with " << n << " tips must have " << expected_edges << " edges, got "
            << n_edges();
        throw InvalidParameter(msg.str());
    }
    std::vector<int> degree(n_nodes, 0);
    for (const Edge& e : edges) {
        if (e.u < 0 || e.u >= n_nodes || e.v < 0 || e.v >= n_nodes || e.u == e.v)
            throw InvalidParameter("tree edge references invalid node");
        if (!(e.length >= 0.0) || !std::isfinite(e.length))
            throw InvalidParameter("tree edge length must be finite and non-negative");
        ++degree[e.u];
        ++degree[e.v];
    }
    for (int i = 0; i < n_nodes; ++i) {
        int want = (i < n) ? 1 : 3;
        if (n == 2) want = 1;
        if (degree[i] != want) {
            std::ostringstream msg;
            msg << "tree node " << i << " has degree " << degree[i] << ", expected " << want;
            throw InvalidParameter(msg.str());
        }
    }
    // connectivity
    auto adj = adjacency(*this);
    std::vector<char> seen(n_nodes, 0);
    std::queue<int> bfs;
    bfs.push(0);
    seen[0] = 1;
    int reached = 0;
    while (!bfs.empty()) {
        int x = bfs.front();
        bfs.pop();
        ++reached;
        for (auto [y, e] : adj[x])
            if (!seen[y]) {
                seen[y] = 1;
                bfs.push(y);
            }
    }
    if (reached != n_nodes) throw InvalidParameter("tree is not connected");
}

void Phylogeny::scale_lengths(double factor) {
    for (Edge& e : edges) e.length *= factor;
}

double Phylogeny::total_length() const {
    double total = 0.0;
    for (const Edge& e : edges) total += e.length;
    return total;
}

Eigen::MatrixXd Phylogeny::tip_distances() const {
    const int n = n_tips();
    auto adj = adjacency(*this);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> dist(n_nodes);
    std::vector<char> seen(n_nodes);
    for (int k = 0; k < n; ++k) {
        std::fill(seen.begin(), seen.end(), 0);
        dist[k] = 0.0;
        seen[k] = 1;
        std::queue<int> bfs;
        bfs.push(k);
        while (!bfs.empty()) {
            int x = bfs.front();
            bfs.pop();
            for (auto [y, e] : adj[x]) {
                if (seen[y]) continue;
                seen[y] = 1;
                dist[y] = dist[x] + edges[e].length;
                bfs.push(y);
            }
        }
        for (int l = 0; l < n; ++l) d(k, l) = dist[l];
    }
    return 0.5 * (d + d.transpose());
}

std::vector<std::vector<int>> Phylogeny::tip_pair_paths() const {
    const int n = n_tips();
    auto adj = adjacency(*this);
    std::vector<std::vector<int>> paths;
    paths.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
    std::vector<int> parent(n_nodes), parent_edge(n_nodes);
    std::vector<char> seen(n_nodes);
    for (int k = 0; k < n; ++k) {
        std::fill(seen.begin(), seen.end(), 0);
        seen[k] = 1;
        parent[k] = -1;
        std::queue<int> bfs;
        bfs.push(k);
        while (!bfs.empty()) {
            int x = bfs.front();
            bfs.pop();
            for (auto [y, e] : adj[x]) {
                if (seen[y]) continue;
                seen[y] = 1;
                parent[y] = x;
                parent_edge[y] = e;
                bfs.push(y);
            }
        }
        for (int l = k + 1; l < n; ++l) {
            std::vector<int> path;
            for (int x = l; x != k; x = parent[x]) path.push_back(parent_edge[x]);
            std::reverse(path.begin(), path.end());
            paths.push_back(std::move(path));
        }
    }
    return paths;
}

std::vector<std::uint64_t> Phylogeny::splits() const {
    const int n = n_tips();
    if (n > 64) throw InvalidParameter("split encoding supports at most 64 tips");
    auto adj = adjacency(*this);
    std::vector<std::uint64_t> masks;
    const std::uint64_t full = (n == 64) ? ~0ull : ((1ull << n) - 1);
    for (int e = 0; e < n_edges(); ++e) {
        // tips on the u-side of edge e
        std::uint64_t mask = 0;
        std::vector<char> seen(n_nodes, 0);
        std::queue<int> bfs;
        seen[edges[e].v] = 1;  // block crossing the edge
        bfs.push(edges[e].u);
        seen[edges[e].u] = 1;
        while (!bfs.empty()) {
            int x = bfs.front();
            bfs.pop();
            if (x < n) mask |= (1ull << x);
            for (auto [y, f] : adj[x]) {
                if (f == e || seen[y]) continue;
                seen[y] = 1;
                bfs.push(y);
            }
        }
        if (mask & 1ull) mask = full & ~mask;  // canonical side excludes tip 0
        masks.push_back(mask);
    }
    std::sort(masks.begin(), masks.end());
    return masks;
}

bool Phylogeny::same_topology(const Phylogeny& other) const {
    const int n = n_tips();
    if (n != other.n_tips()) return false;
    // tip indices may differ between the trees; compare splits by name
    std::unordered_map<std::string, int> mine;
    for (int i = 0; i < n; ++i) mine.emplace(tip_names[i], i);
    std::vector<int> remap(n);
    for (int j = 0; j < n; ++j) {
        auto it = mine.find(other.tip_names[j]);
        if (it == mine.end()) return false;
        remap[j] = it->second;
    }
    const std::uint64_t full = (n == 64) ? ~0ull : ((1ull << n) - 1);
    std::vector<std::uint64_t> theirs = other.splits();
    for (std::uint64_t& m : theirs) {
        std::uint64_t r = 0;
        for (int j = 0; j < n; ++j)
            if ((m >> j) & 1ull) r |= 1ull << remap[j];
        if (r & 1ull) r = full & ~r;  // canonical side excludes tip 0
        m = r;
    }
    std::sort(theirs.begin(), theirs.end());
    return splits() == theirs;
}

namespace {

void write_subtree(const Phylogeny& tree,
                   const std::vector<std::vector<std::pair<int, int>>>& adj, int node,
                   int from_edge, std::ostringstream& out) {
    if (node < tree.n_tips()) {
        out << tree.tip_names[node];
    } else {
        out << '(';
        bool first = true;
        for (auto [child, e] : adj[node]) {
            if (e == from_edge) continue;
            if (!first) out << ',';
            first = false;
            write_subtree(tree, adj, child, e, out);
            out << ':' << tree.edges[e].length;
        }
        out << ')';
    }
}

}  // namespace

std::string Phylogeny::to_newick() const {
    std::ostringstream out;
    out.precision(10);
    auto adj = adjacency(*this);
    if (n_tips() == 2) {
        out << '(' << tip_names[0] << ':' << edges[0].length << ',' << tip_names[1]
            << ":0);";
        return out.str();
    }
    // root the output at the internal node next to tip 0
    int hub = adj[0][0].first;
    out << '(';
    bool first = true;
    for (auto [child, e] : adj[hub]) {
        if (!first) out << ',';
        first = false;
        write_subtree(*this, adj, child, e, out);
        out << ':' << edges[e].length;
    }
    out << ");";
    return out.str();
}

namespace {

struct NewickParser {
    std::string_view text;
    std::size_t pos = 0;

    // parsed structure before node renumbering
    struct Node {
        std::string name;
        std::vector<int> children;
        double length = 0.0;  // edge to parent
    };
    std::vector<Node> nodes;

    void skip_space() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
    }

    [[noreturn]] void fail(const std::string& what) {
        std::ostringstream msg;
        msg << "newick: " << what << " at position " << pos;
        throw ParseError(msg.str());
    }

    int parse_clade() {
        skip_space();
        int id = static_cast<int>(nodes.size());
        nodes.emplace_back();
        if (pos < text.size() && text[pos] == '(') {
            ++pos;
            for (;;) {
                int child = parse_clade();
                nodes[id].children.push_back(child);
                skip_space();
                if (pos >= text.size()) fail("unterminated clade");
                if (text[pos] == ',') {
                    ++pos;
                    continue;
                }
                if (text[pos] == ')') {
                    ++pos;
                    break;
                }
                fail("expected ',' or ')'");
            }
        }
        skip_space();
        // optional label
        auto is_delim = [](char c) {
            return c == ',' || c == '(' || c == ')' || c == ':' || c == ';';
        };
        std::size_t start = pos;
        while (pos < text.size() && !is_delim(text[pos]) &&
               !std::isspace(static_cast<unsigned char>(text[pos])))
            ++pos;
        nodes[id].name = std::string(text.substr(start, pos - start));
        skip_space();
        if (pos < text.size() && text[pos] == ':') {
            ++pos;
            skip_space();
            std::size_t len_start = pos;
            while (pos < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.' ||
                    text[pos] == '-' || text[pos] == '+' || text[pos] == 'e' ||
                    text[pos] == 'E'))
                ++pos;
            try {
                nodes[id].length = std::stod(std::string(text.substr(len_start, pos - len_start)));
            } catch (const std::exception&) {
                fail("bad branch length");
            }
        }
        return id;
    }
};

}  // namespace

Phylogeny Phylogeny::from_newick(std::string_view text) {
    NewickParser parser{text};
    parser.skip_space();
    if (parser.pos >= text.size() || text[parser.pos] != '(')
        throw ParseError("newick: tree must start with '('");
    int root = parser.parse_clade();
    parser.skip_space();
    if (parser.pos >= text.size() || text[parser.pos] != ';')
        throw ParseError("newick: missing terminating ';'");
    ++parser.pos;
    parser.skip_space();
    if (parser.pos != text.size()) throw ParseError("newick: trailing characters");

    // collect tips in order of appearance, then internals
    const auto& pnodes = parser.nodes;
    std::vector<int> renumber(pnodes.size(), -1);
    std::vector<std::string> tip_names;
    for (std::size_t i = 0; i < pnodes.size(); ++i) {
        if (pnodes[i].children.empty()) {
            if (pnodes[i].name.empty()) throw ParseError("newick: unnamed tip");
            renumber[i] = static_cast<int>(tip_names.size());
            tip_names.push_back(pnodes[i].name);
        }
    }
    int next = static_cast<int>(tip_names.size());
    for (std::size_t i = 0; i < pnodes.size(); ++i)
        if (renumber[i] < 0) renumber[i] = next++;

    Phylogeny tree;
    tree.tip_names = std::move(tip_names);
    tree.n_nodes = next;
    for (std::size_t i = 0; i < pnodes.size(); ++i)
        for (int child : pnodes[i].children)
            tree.edges.push_back({renumber[i], renumber[child], pnodes[child].length});

    // splice out degree-2 nodes (e.g. a rooted input's root)
    for (;;) {
        std::vector<int> degree(tree.n_nodes, 0);
        for (const Edge& e : tree.edges) {
            ++degree[e.u];
            ++degree[e.v];
        }
        int target = -1;
        for (int i = tree.n_tips(); i < tree.n_nodes; ++i)
            if (degree[i] == 2) {
                target = i;
                break;
            }
        if (target < 0) break;
        int e1 = -1, e2 = -1;
        for (int e = 0; e < tree.n_edges(); ++e)
            if (tree.edges[e].u == target || tree.edges[e].v == target)
                (e1 < 0 ? e1 : e2) = e;
        int a = (tree.edges[e1].u == target) ? tree.edges[e1].v : tree.edges[e1].u;
        int b = (tree.edges[e2].u == target) ? tree.edges[e2].v : tree.edges[e2].u;
        double len = tree.edges[e1].length + tree.edges[e2].length;
        tree.edges[e1] = {a, b, len};
        tree.edges.erase(tree.edges.begin() + e2);
        // drop the node by renumbering the last node into its slot
        int last = tree.n_nodes - 1;
        if (target != last) {
            for (Edge& e : tree.edges) {
                if (e.u == last) e.u = target;
                if (e.v == last) e.v = target;
            }
        }
        --tree.n_nodes;
    }

    std::vector<std::string> sorted_names = tree.tip_names;
    std::sort(sorted_names.begin(), sorted_names.end());
    if (std::adjacent_find(sorted_names.begin(), sorted_names.end()) != sorted_names.end())
        throw DuplicateTaxon("newick: duplicate tip name");

    tree.validate();
    return tree;
}

}  // namespace dsscan
