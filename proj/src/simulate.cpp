#include "dsscan/simulate.hpp"

#include <algorithm>
#include <array>
#include <set>
#include <sstream>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

// Rooted traversal steps shared by the per-site state walk.
struct Walk {
    int root = 0;
    // (child node, parent node, edge index) in fixed pre-order
    std::vector<std::array<int, 3>> steps;
};

Walk make_walk(const Phylogeny& tree) {
    std::vector<std::vector<std::pair<int, int>>> adj(tree.n_nodes);
    for (int e = 0; e < tree.n_edges(); ++e) {
        adj[tree.edges[e].u].push_back({tree.edges[e].v, e});
        adj[tree.edges[e].v].push_back({tree.edges[e].u, e});
    }
    Walk walk;
    walk.root = (tree.n_tips() >= 3) ? adj[0][0].first : 0;
    std::vector<char> seen(tree.n_nodes, 0);
    std::vector<int> stack{walk.root};
    seen[walk.root] = 1;
    while (!stack.empty()) {
        int x = stack.back();
        stack.pop_back();
        for (auto [y, e] : adj[x]) {
            if (seen[y]) continue;
            seen[y] = 1;
            walk.steps.push_back({y, x, e});
            stack.push_back(y);
        }
    }
    return walk;
}

}  // namespace

CodonAlignment simulate_alignment(const Phylogeny& tree, int n_codons,
                                  const MixtureModel& mixture, RngStream& rng) {
    tree.validate();
    if (n_codons < 1) throw InvalidParameter("simulation length must be positive");
    const int n_states = static_cast<int>(mixture.pi.size());
    Walk walk = make_walk(tree);

    // per edge, per class: cumulative transition rows for inverse sampling
    std::vector<std::array<Eigen::MatrixXd, 3>> cdf(tree.n_edges());
    for (int e = 0; e < tree.n_edges(); ++e) {
        for (int c = 0; c < 3; ++c) {
            Eigen::MatrixXd P =
                mixture.classes[c].transition_probabilities(tree.edges[e].length);
            for (int i = 0; i < n_states; ++i)
                for (int j = 1; j < n_states; ++j) P(i, j) += P(i, j - 1);
            cdf[e][c] = std::move(P);
        }
    }
    std::vector<double> pi_cdf(n_states);
    {
        double acc = 0.0;
        for (int i = 0; i < n_states; ++i) {
            acc += mixture.pi[i];
            pi_cdf[i] = acc;
        }
    }
    const std::array<double, 3>& probs = mixture.params.probs;
    std::vector<double> class_weights(probs.begin(), probs.end());

    CodonAlignment aln;
    aln.taxa = tree.tip_names;
    aln.code = mixture.code;
    aln.rows.assign(tree.n_tips(), std::vector<std::int16_t>(n_codons));

    std::vector<int> state(tree.n_nodes);
    for (int s = 0; s < n_codons; ++s) {
        int cls = rng.discrete(class_weights);
        state[walk.root] = rng.discrete_from_cdf(pi_cdf);
        for (const auto& [child, parent, e] : walk.steps) {
            const Eigen::MatrixXd& rows = cdf[e][cls];
            double u = rng.uniform() * rows(state[parent], n_states - 1);
            // inverse CDF over the parent row
            int lo = 0, hi = n_states - 1;
            while (lo < hi) {
                int mid = (lo + hi) / 2;
                if (u < rows(state[parent], mid))
                    hi = mid;
                else
                    lo = mid + 1;
            }
            state[child] = lo;
        }
        for (int i = 0; i < tree.n_tips(); ++i)
            aln.rows[i][s] = static_cast<std::int16_t>(state[i]);
    }
    return aln;
}

const char* scenario_name(ScenarioKind kind) {
    switch (kind) {
        case ScenarioKind::Null: return "null";
        case ScenarioKind::Recombination: return "recombination";
        case ScenarioKind::Convergent: return "convergent";
    }
    return "?";
}

ScenarioKind scenario_from_name(std::string_view name) {
    if (name == "null") return ScenarioKind::Null;
    if (name == "recombination") return ScenarioKind::Recombination;
    if (name == "convergent") return ScenarioKind::Convergent;
    throw ConfigError("unknown scenario: " + std::string(name));
}

const char* diversity_name(Diversity d) {
    switch (d) {
        case Diversity::High: return "high";
        case Diversity::Medium: return "medium";
        case Diversity::Low: return "low";
    }
    return "?";
}

Diversity diversity_from_name(std::string_view name) {
    if (name == "high") return Diversity::High;
    if (name == "medium") return Diversity::Medium;
    if (name == "low") return Diversity::Low;
    throw ConfigError("unknown diversity level: " + std::string(name));
}

const char* syn_mix_name(SynMix m) {
    switch (m) {
        case SynMix::S50: return "50";
        case SynMix::S60: return "60";
        case SynMix::S75: return "75";
    }
    return "?";
}

SynMix syn_mix_from_name(std::string_view name) {
    if (name == "50") return SynMix::S50;
    if (name == "60") return SynMix::S60;
    if (name == "75") return SynMix::S75;
    throw ConfigError("unknown synonymous mix (use 50, 60 or 75): " + std::string(name));
}

M3Params preset_mixture(SynMix mix) {
    // The preset names are nominal synonymous shares. The stationary share of
    // a mixture is r / (r + mean omega) with r ~ 0.386, the synonymous
    // opportunity ratio of the universal code at kappa = 2 under uniform
    // frequencies, so the realized shares run a little above their labels
    // (54% / 60% / 78%). The weights themselves are the fixed study presets.
    M3Params params;
    params.kappa = 2.0;
    params.omegas = {0.1, 0.8, 3.2};
    switch (mix) {
        case SynMix::S50: params.probs = {0.74, 0.24, 0.02}; break;
        case SynMix::S60: params.probs = {0.85, 0.14, 0.01}; break;
        case SynMix::S75: params.probs = {0.99, 0.009, 0.001}; break;
    }
    return params;
}

double diversity_scale(Diversity d) {
    switch (d) {
        case Diversity::High: return 1.0;
        case Diversity::Medium: return 0.80;
        case Diversity::Low: return 0.67;
    }
    return 1.0;
}

Phylogeny scenario_tree_a() {
    return Phylogeny::from_newick(
        "((t1:0.25,t2:0.25):0.12,(t3:0.25,t4:0.25):0.12,t5:0.25);");
}

Phylogeny scenario_tree_b() {
    return Phylogeny::from_newick(
        "((t1:0.25,t5:0.25):0.12,(t3:0.25,t4:0.25):0.12,t2:0.25);");
}

void ScenarioConfig::validate() const {
    m3.validate();
    if (pi.size() == 0) throw ConfigError("scenario frequencies not set");
    if (kind == ScenarioKind::Recombination) {
        if (length_a < 1 || length_b < 1)
            throw ConfigError("recombination segment lengths must be positive");
        std::set<std::string> a(tree_a.tip_names.begin(), tree_a.tip_names.end());
        std::set<std::string> b(tree_b.tip_names.begin(), tree_b.tip_names.end());
        if (a != b) throw TaxaMismatch("recombination trees must share taxon names");
    } else {
        if (n_codons < 1) throw ConfigError("scenario length must be positive");
    }
    if (kind == ScenarioKind::Convergent) {
        if (target_taxa.size() != 2 || target_taxa[0] == target_taxa[1])
            throw ConfigError("convergence needs two distinct target taxa");
        if (region_start < 0 || region_end > n_codons || region_start >= region_end)
            throw ConfigError("convergence region out of range");
        if (convert_fraction < 0.0 || convert_fraction > 1.0)
            throw ConfigError("convert fraction must be in [0, 1]");
    }
}

ScenarioConfig make_scenario(ScenarioKind kind, Diversity diversity, SynMix mix) {
    ScenarioConfig cfg;
    cfg.kind = kind;
    cfg.tree_a = scenario_tree_a();
    cfg.tree_b = scenario_tree_b();
    double scale = diversity_scale(diversity);
    cfg.tree_a.scale_lengths(scale);
    cfg.tree_b.scale_lengths(scale);
    cfg.m3 = preset_mixture(mix);
    int n = GeneticCode::standard()->n_sense();
    cfg.pi = Eigen::VectorXd::Constant(n, 1.0 / n);
    return cfg;
}

CodonAlignment simulate_recombinant(const ScenarioConfig& cfg, RngStream& rng) {
    cfg.validate();
    MixtureModel mixture = build_mixture(cfg.m3, cfg.pi);
    RngStream rng_a = rng.derive("segA");
    RngStream rng_b = rng.derive("segB");
    CodonAlignment a = simulate_alignment(cfg.tree_a, cfg.length_a, mixture, rng_a);
    CodonAlignment b = simulate_alignment(cfg.tree_b, cfg.length_b, mixture, rng_b);

    CodonAlignment out;
    out.taxa = a.taxa;
    out.code = a.code;
    out.rows.resize(a.rows.size());
    for (int i = 0; i < a.n_taxa(); ++i) {
        auto it = std::find(b.taxa.begin(), b.taxa.end(), a.taxa[i]);
        if (it == b.taxa.end())
            throw TaxaMismatch("recombination trees must share taxon names");
        int bi = static_cast<int>(it - b.taxa.begin());
        out.rows[i] = a.rows[i];
        out.rows[i].insert(out.rows[i].end(), b.rows[bi].begin(), b.rows[bi].end());
    }
    return out;
}

std::pair<CodonAlignment, ConvergenceReport> induce_convergence(const CodonAlignment& aln,
                                                                const ScenarioConfig& cfg,
                                                                RngStream& rng) {
    const GeneticCode& code = *aln.code;
    int t1 = -1, t2 = -1;
    for (int i = 0; i < aln.n_taxa(); ++i) {
        if (aln.taxa[i] == cfg.target_taxa[0]) t1 = i;
        if (aln.taxa[i] == cfg.target_taxa[1]) t2 = i;
    }
    if (t1 < 0 || t2 < 0)
        throw TaxaMismatch("convergence target taxa missing from alignment");
    if (cfg.region_end > aln.n_codons())
        throw ConfigError("convergence region exceeds alignment length");

    ConvergenceReport report;
    report.variable_count = static_cast<int>(variable_sites(aln).size());

    // candidate sites: target amino acids differ, and some third amino acid
    // is reachable from both codons by a single nucleotide change
    struct SiteOption {
        int site;
        std::vector<std::pair<std::int16_t, std::int16_t>> swaps;
    };
    std::vector<SiteOption> eligible;
    for (int s = cfg.region_start; s < cfg.region_end; ++s) {
        std::int16_t ci = aln.rows[t1][s], cj = aln.rows[t2][s];
        if (ci == kMissingCodon || cj == kMissingCodon) continue;
        char ai = code.amino_acid(ci), aj = code.amino_acid(cj);
        if (ai == aj) continue;
        SiteOption option;
        option.site = s;
        for (const auto& ni : code.neighbors(ci)) {
            char target = code.amino_acid(ni.to);
            if (target == ai || target == aj) continue;
            for (const auto& nj : code.neighbors(cj)) {
                if (code.amino_acid(nj.to) != target) continue;
                option.swaps.push_back({static_cast<std::int16_t>(ni.to),
                                        static_cast<std::int16_t>(nj.to)});
            }
        }
        if (!option.swaps.empty()) eligible.push_back(std::move(option));
    }
    report.eligible = static_cast<int>(eligible.size());

    double demand = cfg.convert_fraction * report.variable_count;
    double q = eligible.empty() ? 0.0 : demand / report.eligible;
    if (q > 1.0) {
        report.insufficient = true;
        q = 1.0;
    }
    if (demand > 0 && eligible.empty()) report.insufficient = true;
    report.site_rate = q;

    CodonAlignment out = aln;
    for (const SiteOption& option : eligible) {
        if (rng.uniform() >= q) continue;
        std::size_t pick = std::min<std::size_t>(
            option.swaps.size() - 1,
            static_cast<std::size_t>(rng.uniform() * option.swaps.size()));
        out.rows[t1][option.site] = option.swaps[pick].first;
        out.rows[t2][option.site] = option.swaps[pick].second;
        ++report.converted;
    }
    return {std::move(out), report};
}

CodonAlignment simulate_scenario(const ScenarioConfig& cfg, RngStream& rng,
                                 ConvergenceReport* report) {
    cfg.validate();
    switch (cfg.kind) {
        case ScenarioKind::Recombination:
            return simulate_recombinant(cfg, rng);
        case ScenarioKind::Null: {
            MixtureModel mixture = build_mixture(cfg.m3, cfg.pi);
            RngStream sub = rng.derive("null");
            return simulate_alignment(cfg.tree_a, cfg.n_codons, mixture, sub);
        }
        case ScenarioKind::Convergent: {
            MixtureModel mixture = build_mixture(cfg.m3, cfg.pi);
            RngStream sub = rng.derive("null");
            CodonAlignment base = simulate_alignment(cfg.tree_a, cfg.n_codons, mixture, sub);
            RngStream conv = rng.derive("convert");
            auto [aln, rep] = induce_convergence(base, cfg, conv);
            if (report) *report = rep;
            return aln;
        }
    }
    throw ConfigError("unhandled scenario kind");
}

}  // namespace dsscan
