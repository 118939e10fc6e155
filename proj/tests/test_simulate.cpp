#include <cmath>
#include <set>

#include "doctest.h"
#include "dsscan/simulate.hpp"
#include "test_helpers.hpp"

using namespace dsscan;
using namespace dsscan::testing;

namespace {

Eigen::VectorXd uniform_pi() { return Eigen::VectorXd::Constant(61, 1.0 / 61); }

MixtureModel default_mixture() { return build_mixture(preset_mixture(SynMix::S60), uniform_pi()); }

}  // namespace

TEST_CASE("simulation is seed-deterministic and tip-ordered") {
    MixtureModel mix = default_mixture();
    Phylogeny tree = scenario_tree_a();
    RngStream r1(42), r2(42), r3(43);
    CodonAlignment a = simulate_alignment(tree, 120, mix, r1);
    CodonAlignment b = simulate_alignment(tree, 120, mix, r2);
    CodonAlignment c = simulate_alignment(tree, 120, mix, r3);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    CHECK(a.taxa == tree.tip_names);
    CHECK(a.n_codons() == 120);
    for (const auto& row : a.rows)
        for (auto s : row) CHECK(s != kMissingCodon);
}

TEST_CASE("zero-length trees copy the root state everywhere") {
    MixtureModel mix = default_mixture();
    Phylogeny tree = scenario_tree_a();
    tree.scale_lengths(0.0);
    RngStream rng(7);
    CodonAlignment aln = simulate_alignment(tree, 50, mix, rng);
    for (int i = 1; i < aln.n_taxa(); ++i) CHECK(aln.rows[i] == aln.rows[0]);
}

TEST_CASE("simulated codon frequencies track the stationary distribution") {
    MixtureModel mix = default_mixture();
    Phylogeny tree = scenario_tree_a();
    RngStream rng(99);
    CodonAlignment aln = simulate_alignment(tree, 4000, mix, rng);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(61);
    double total = 0;
    for (const auto& row : aln.rows)
        for (auto s : row) {
            counts[s] += 1;
            total += 1;
        }
    // tips are correlated through the tree, so allow generous slack around
    // the uniform stationary law; systematic bias would blow straight
    // through this
    for (int i = 0; i < 61; ++i) {
        double freq = counts[i] / total;
        CHECK(freq > 0.5 / 61);
        CHECK(freq < 2.0 / 61);
    }
}

TEST_CASE("pairwise identity matches the transition probabilities") {
    // two taxa at fixed divergence: the fraction of identical codon columns
    // has expectation sum_i pi_i P_ii(t)
    const double t = 0.5;
    M3Params single;
    single.omegas = {0.5, 0.5, 0.5};
    single.probs = {1, 0, 0};
    MixtureModel mix = build_mixture(single, uniform_pi());
    CodonModel model = build_model(single.kappa, 0.5, uniform_pi());
    Phylogeny pair;
    pair.tip_names = {"x", "y"};
    pair.n_nodes = 2;
    pair.edges = {{0, 1, t}};

    Eigen::MatrixXd P = model.transition_probabilities(t);
    double expect_same = 0.0;
    for (int i = 0; i < 61; ++i) expect_same += P(i, i) / 61.0;

    const int n = 20000;
    RngStream rng(2718);
    CodonAlignment aln = simulate_alignment(pair, n, mix, rng);
    int same = 0;
    for (int s = 0; s < n; ++s) same += (aln.rows[0][s] == aln.rows[1][s]);
    double se = std::sqrt(expect_same * (1 - expect_same) / n);
    CHECK(std::abs(double(same) / n - expect_same) < 4 * se);
}

TEST_CASE("an omega-zero mixture never changes the amino acid") {
    M3Params frozen;
    frozen.omegas = {0.0, 0.0, 0.0};
    frozen.probs = {1, 0, 0};
    MixtureModel mix = build_mixture(frozen, uniform_pi());
    Phylogeny tree = scenario_tree_a();
    RngStream rng(5);
    CodonAlignment aln = simulate_alignment(tree, 400, mix, rng);
    auto code = aln.code;
    int changed_sites = 0;
    for (int s = 0; s < aln.n_codons(); ++s) {
        char aa = code->amino_acid(aln.rows[0][s]);
        bool varies = false;
        for (int i = 1; i < aln.n_taxa(); ++i) {
            CHECK(code->amino_acid(aln.rows[i][s]) == aa);
            varies |= aln.rows[i][s] != aln.rows[0][s];
        }
        changed_sites += varies;
    }
    CHECK(changed_sites > 0);  // synonymous churn still happens
}

TEST_CASE("scenario presets") {
    // the three mixtures are fixed study constants
    M3Params p50 = preset_mixture(SynMix::S50);
    CHECK(p50.kappa == 2.0);
    CHECK(p50.omegas == std::array<double, 3>{0.1, 0.8, 3.2});
    CHECK(p50.probs == std::array<double, 3>{0.74, 0.24, 0.02});
    CHECK(preset_mixture(SynMix::S60).probs == std::array<double, 3>{0.85, 0.14, 0.01});
    CHECK(preset_mixture(SynMix::S75).probs == std::array<double, 3>{0.99, 0.009, 0.001});
    for (SynMix m : {SynMix::S50, SynMix::S60, SynMix::S75}) {
        M3Params p = preset_mixture(m);
        p.validate();
        CHECK(p.probs[0] + p.probs[1] + p.probs[2] == doctest::Approx(1.0));
    }
    CHECK(diversity_scale(Diversity::High) == 1.0);
    CHECK(diversity_scale(Diversity::Medium) < 1.0);
    CHECK(diversity_scale(Diversity::Low) < diversity_scale(Diversity::Medium));

    // the preset names order the synonymous share of the stationary flux and
    // sit near it; exact shares depend on the frequency model
    double previous = 0.0;
    for (auto [m, nominal] : {std::pair{SynMix::S50, 0.50}, {SynMix::S60, 0.60},
                              {SynMix::S75, 0.75}}) {
        M3Params p = preset_mixture(m);
        double syn_flux = 0.0;
        double total_flux = 0.0;
        for (int c = 0; c < 3; ++c) {
            CodonModel cm = build_model(p.kappa, p.omegas[c], uniform_pi());
            // class c contributes its share of the mixture's substitution flow
            ClassGenerator cg = build_class_generator(p.kappa, p.omegas[c], uniform_pi());
            syn_flux += p.probs[c] * cg.rate * cm.flux_syn;
            total_flux += p.probs[c] * cg.rate;
        }
        double share = syn_flux / total_flux;
        CHECK(share > previous);
        CHECK(std::abs(share - nominal) < 0.08);
        previous = share;
    }
}

TEST_CASE("study trees share taxa but not topology") {
    Phylogeny a = scenario_tree_a();
    Phylogeny b = scenario_tree_b();
    a.validate();
    b.validate();
    CHECK(a.n_tips() == 5);
    CHECK(b.n_tips() == 5);
    CHECK(std::set<std::string>(a.tip_names.begin(), a.tip_names.end()) ==
          std::set<std::string>(b.tip_names.begin(), b.tip_names.end()));
    CHECK_FALSE(a.same_topology(b));
    CHECK(a.total_length() == doctest::Approx(b.total_length()));
}

TEST_CASE("recombinant alignments concatenate two histories at the breakpoint") {
    ScenarioConfig cfg = make_scenario(ScenarioKind::Recombination, Diversity::High,
                                       SynMix::S60);
    cfg.validate();
    RngStream rng(31);
    CodonAlignment aln = simulate_recombinant(cfg, rng);
    CHECK(aln.n_codons() == cfg.length_a + cfg.length_b);
    CHECK(aln.n_codons() == 1032);
    CHECK(aln.n_taxa() == 5);

    // reproduce the two segments from the same derived streams and confirm
    // the concatenation is by taxon name
    MixtureModel mix = build_mixture(cfg.m3, cfg.pi);
    RngStream ra = RngStream(31).derive("segA");
    RngStream rb = RngStream(31).derive("segB");
    CodonAlignment sa = simulate_alignment(cfg.tree_a, cfg.length_a, mix, ra);
    CodonAlignment sb = simulate_alignment(cfg.tree_b, cfg.length_b, mix, rb);
    for (int i = 0; i < aln.n_taxa(); ++i) {
        const std::string& name = aln.taxa[i];
        int ia = -1, ib = -1;
        for (int k = 0; k < 5; ++k) {
            if (sa.taxa[k] == name) ia = k;
            if (sb.taxa[k] == name) ib = k;
        }
        REQUIRE(ia >= 0);
        REQUIRE(ib >= 0);
        for (int s = 0; s < cfg.length_a; ++s) CHECK(aln.rows[i][s] == sa.rows[ia][s]);
        for (int s = 0; s < cfg.length_b; ++s)
            CHECK(aln.rows[i][cfg.length_a + s] == sb.rows[ib][s]);
    }
}

TEST_CASE("convergence editing touches only the targets inside the region") {
    ScenarioConfig cfg = make_scenario(ScenarioKind::Convergent, Diversity::High,
                                       SynMix::S60);
    RngStream rng(77);
    RngStream data = rng.derive("null");
    MixtureModel mix = build_mixture(cfg.m3, cfg.pi);
    CodonAlignment base = simulate_alignment(cfg.tree_a, cfg.n_codons, mix, data);

    RngStream conv = rng.derive("convert");
    auto [edited, report] = induce_convergence(base, cfg, conv);
    CHECK(edited.n_codons() == base.n_codons());
    CHECK(report.variable_count == static_cast<int>(variable_sites(base).size()));
    CHECK(report.eligible > 0);
    CHECK(report.converted > 0);
    CHECK(report.converted <= report.eligible);

    auto code = base.code;
    std::vector<int> target_rows;
    for (const std::string& t : cfg.target_taxa) {
        for (int i = 0; i < base.n_taxa(); ++i)
            if (base.taxa[i] == t) target_rows.push_back(i);
    }
    REQUIRE(target_rows.size() == 2);

    int edits = 0;
    for (int i = 0; i < base.n_taxa(); ++i) {
        bool is_target = std::find(target_rows.begin(), target_rows.end(), i) !=
                         target_rows.end();
        for (int s = 0; s < base.n_codons(); ++s) {
            if (edited.rows[i][s] == base.rows[i][s]) continue;
            // every edit is in a target row, inside the region
            CHECK(is_target);
            CHECK(s >= cfg.region_start);
            CHECK(s < cfg.region_end);
            ++edits;
        }
    }
    CHECK(edits > 0);

    // converted sites leave the two targets with the same amino acid
    int agree = 0;
    for (int s = cfg.region_start; s < cfg.region_end; ++s) {
        bool touched = edited.rows[target_rows[0]][s] != base.rows[target_rows[0]][s] ||
                       edited.rows[target_rows[1]][s] != base.rows[target_rows[1]][s];
        if (!touched) continue;
        CHECK(code->amino_acid(edited.rows[target_rows[0]][s]) ==
              code->amino_acid(edited.rows[target_rows[1]][s]));
        ++agree;
    }
    CHECK(agree > 0);
}

TEST_CASE("convergence demand beyond eligibility is flagged") {
    ScenarioConfig cfg = make_scenario(ScenarioKind::Convergent, Diversity::High,
                                       SynMix::S60);
    cfg.convert_fraction = 1.0;  // ask for every variable site
    RngStream rng(78);
    ConvergenceReport report;
    CodonAlignment aln = simulate_scenario(cfg, rng, &report);
    CHECK(aln.n_codons() == cfg.n_codons);
    CHECK(report.insufficient);
    CHECK(report.converted == report.eligible);
}

TEST_CASE("zero conversion fraction is a null scenario") {
    ScenarioConfig cfg = make_scenario(ScenarioKind::Convergent, Diversity::High,
                                       SynMix::S60);
    cfg.convert_fraction = 0.0;
    RngStream rng(79);
    ConvergenceReport report;
    CodonAlignment conv = simulate_scenario(cfg, rng, &report);
    CHECK(report.converted == 0);

    ScenarioConfig null_cfg = make_scenario(ScenarioKind::Null, Diversity::High,
                                            SynMix::S60);
    RngStream rng2(79);
    CodonAlignment null_aln = simulate_scenario(null_cfg, rng2);
    CHECK(conv == null_aln);  // same stream, no edits applied
}

TEST_CASE("scenario name round trips") {
    for (ScenarioKind k :
         {ScenarioKind::Null, ScenarioKind::Recombination, ScenarioKind::Convergent})
        CHECK(scenario_from_name(scenario_name(k)) == k);
    for (Diversity d : {Diversity::High, Diversity::Medium, Diversity::Low})
        CHECK(diversity_from_name(diversity_name(d)) == d);
    for (SynMix m : {SynMix::S50, SynMix::S60, SynMix::S75})
        CHECK(syn_mix_from_name(syn_mix_name(m)) == m);
    CHECK_THROWS_AS(scenario_from_name("nope"), ConfigError);
    CHECK_THROWS_AS(diversity_from_name(""), ConfigError);
    CHECK_THROWS_AS(syn_mix_from_name("p125"), ConfigError);
}

TEST_CASE("diversity presets rescale the scenario trees") {
    ScenarioConfig hi = make_scenario(ScenarioKind::Null, Diversity::High, SynMix::S60);
    ScenarioConfig lo = make_scenario(ScenarioKind::Null, Diversity::Low, SynMix::S60);
    double ratio = lo.tree_a.total_length() / hi.tree_a.total_length();
    CHECK(ratio == doctest::Approx(diversity_scale(Diversity::Low)).epsilon(1e-12));
}
