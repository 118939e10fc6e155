#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "dsscan/alignment.hpp"
#include "dsscan/codon_model.hpp"
#include "dsscan/phylogeny.hpp"
#include "dsscan/rng.hpp"

namespace dsscan {

// Evolve codon sequences down a tree under the omega mixture: each site draws
// a class, the root state comes from the stationary distribution, and states
// propagate along edges by the class transition probabilities. Tips are
// returned in tree tip order.
CodonAlignment simulate_alignment(const Phylogeny& tree, int n_codons,
                                  const MixtureModel& mixture, RngStream& rng);

enum class ScenarioKind { Null, Recombination, Convergent };
enum class Diversity { High, Medium, Low };
enum class SynMix { S50, S60, S75 };

const char* scenario_name(ScenarioKind kind);
ScenarioKind scenario_from_name(std::string_view name);
const char* diversity_name(Diversity d);
Diversity diversity_from_name(std::string_view name);
const char* syn_mix_name(SynMix m);
SynMix syn_mix_from_name(std::string_view name);

// Mixtures tuned so roughly 50% / 60% / 75% of substitutions are synonymous.
M3Params preset_mixture(SynMix mix);
double diversity_scale(Diversity d);

// The two five-taxon study trees: B equals A with the positions of t2 and t5
// exchanged, so the two segments of a recombinant disagree on topology.
Phylogeny scenario_tree_a();
Phylogeny scenario_tree_b();

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::Null;
    Phylogeny tree_a;
    Phylogeny tree_b;          // used by recombination only
    int length_a = 400;        // codons simulated on tree A
    int length_b = 632;        // codons simulated on tree B
    int n_codons = 1032;       // total length for null / convergent
    M3Params m3;
    Eigen::VectorXd pi;        // uniform unless overridden
    // convergence settings
    std::vector<std::string> target_taxa{"t2", "t5"};
    int region_start = 400;    // 0-based inclusive codon
    int region_end = 1032;     // exclusive
    double convert_fraction = 0.25;

    void validate() const;
};

ScenarioConfig make_scenario(ScenarioKind kind, Diversity diversity, SynMix mix);

// Concatenate a tree-A segment and a tree-B segment, joined by taxon name;
// the breakpoint sits after length_a codons.
CodonAlignment simulate_recombinant(const ScenarioConfig& cfg, RngStream& rng);

struct ConvergenceReport {
    int variable_count = 0;  // variable codon columns in the whole alignment
    int eligible = 0;        // convertible sites inside the region
    int converted = 0;
    double site_rate = 0.0;  // per-eligible-site conversion probability used
    bool insufficient = false;  // demand exceeded the eligible sites
};

// Overwrite selected sites in the target taxa with codons for a shared
// amino acid one nucleotide away in each, creating convergent signal without
// any shared history. Only the target rows change, only at chosen sites. The
// number converted targets convert_fraction of all variable sites.
std::pair<CodonAlignment, ConvergenceReport> induce_convergence(const CodonAlignment& aln,
                                                                const ScenarioConfig& cfg,
                                                                RngStream& rng);

// Dispatch on cfg.kind; convergence details are reported when non-null.
CodonAlignment simulate_scenario(const ScenarioConfig& cfg, RngStream& rng,
                                 ConvergenceReport* report = nullptr);

}  // namespace dsscan
