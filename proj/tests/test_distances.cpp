#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "dsscan/distances.hpp"
#include "dsscan/simulate.hpp"
#include "test_helpers.hpp"

using namespace dsscan;
using namespace dsscan::testing;

namespace {

Eigen::VectorXd skewed_pi() {
    Eigen::VectorXd pi(61);
    for (int i = 0; i < 61; ++i) pi[i] = 1.0 + 0.03 * (i % 7);
    return pi / pi.sum();
}

M3Params point_mass(double kappa, double omega) {
    M3Params p;
    p.kappa = kappa;
    p.omegas = {omega, omega, omega};
    p.probs = {1.0, 0.0, 0.0};
    return p;
}

// Two-taxon alignment simulated at divergence t under a single-omega model.
CodonAlignment simulate_pair(const CodonModel& model, double t, int n_codons,
                             RngStream rng) {
    Phylogeny tree;
    tree.tip_names = {"x", "y"};
    tree.n_nodes = 2;
    tree.edges = {{0, 1, t}};
    MixtureModel mix = build_mixture(point_mass(model.kappa, model.omega), model.pi,
                                     model.code);
    return simulate_alignment(tree, n_codons, mix, rng);
}

}  // namespace

TEST_CASE("identical sequences estimate zero divergence") {
    CodonModel model = build_model(2.0, 0.5, Eigen::VectorXd::Constant(61, 1.0 / 61));
    std::vector<std::int16_t> a{0, 5, 17, 60, kMissingCodon, 33};
    PairEstimate est = estimate_pair(a, a, model);
    CHECK(est.t_hat == 0.0);
    CHECK(est.d_syn == 0.0);
    CHECK(est.d_nonsyn == 0.0);
    CHECK(est.usable_sites == 5);
    CHECK_FALSE(est.saturated);
}

TEST_CASE("pairs with no shared resolved sites are rejected") {
    CodonModel model = build_model(2.0, 0.5, Eigen::VectorXd::Constant(61, 1.0 / 61));
    std::vector<std::int16_t> a{0, kMissingCodon, 5};
    std::vector<std::int16_t> b{kMissingCodon, 3, kMissingCodon};
    CHECK_THROWS_AS(estimate_pair(a, b, model), NoComparableSites);
}

TEST_CASE("estimates are symmetric in the sequence order") {
    CodonModel model = build_model(2.0, 0.5, skewed_pi());
    CodonAlignment aln = simulate_pair(model, 0.5, 300, RngStream(42));
    PairEstimate ab = estimate_pair(aln.rows[0], aln.rows[1], model);
    PairEstimate ba = estimate_pair(aln.rows[1], aln.rows[0], model);
    CHECK(ab.t_hat == ba.t_hat);
    CHECK(ab.d_syn == ba.d_syn);
    CHECK(ab.d_nonsyn == ba.d_nonsyn);
    CHECK(ab.t_hat > 0.0);
}

TEST_CASE("conditional substitution counts match a jump-chain simulation") {
    // The expected-count machinery (spectral coupling integral) against a
    // direct Gillespie sampler that shares nothing with it but Q itself.
    CodonModel model = build_model(2.0, 0.3, skewed_pi());
    const double t = 0.6;
    ConditionalCounts cond = conditional_label_counts(model, t);

    struct Bucket {
        long n = 0;
        double syn_sum = 0, syn_sq = 0;
        double non_sum = 0, non_sq = 0;
    };
    std::map<std::pair<int, int>, Bucket> buckets;
    RngStream rng(2024);
    const int n_paths = 150000;
    for (int k = 0; k < n_paths; ++k) {
        int start = draw_stationary_state(model, rng);
        PathCounts pc = gillespie_path(model, start, t, rng);
        Bucket& b = buckets[{start, pc.end_state}];
        ++b.n;
        b.syn_sum += pc.syn;
        b.syn_sq += double(pc.syn) * pc.syn;
        b.non_sum += pc.nonsyn;
        b.non_sq += double(pc.nonsyn) * pc.nonsyn;
    }

    int tested = 0;
    for (const auto& [key, b] : buckets) {
        if (b.n < 1000) continue;
        ++tested;
        double syn_mean = b.syn_sum / b.n;
        double syn_se = std::sqrt(std::max(b.syn_sq / b.n - syn_mean * syn_mean, 1e-12) / b.n);
        double non_mean = b.non_sum / b.n;
        double non_se = std::sqrt(std::max(b.non_sq / b.n - non_mean * non_mean, 1e-12) / b.n);
        // the absolute floor covers buckets whose expected count (~1e-4) sits
        // below what a few thousand paths can resolve (zero observed events
        // gives a zero sample variance); the marginal-identity test below
        // pins the global scale far tighter
        CHECK(std::abs(cond.syn(key.first, key.second) - syn_mean) < 5.0 * syn_se + 1e-3);
        CHECK(std::abs(cond.nonsyn(key.first, key.second) - non_mean) < 5.0 * non_se + 1e-3);
    }
    // enough populated endpoint pairs to make the comparison meaningful
    CHECK(tested >= 30);
}

TEST_CASE("conditional counts marginalize to t times the labeled flux") {
    CodonModel model = build_model(2.5, 0.4, skewed_pi());
    for (double t : {0.05, 0.4, 1.2}) {
        ConditionalCounts cond = conditional_label_counts(model, t);
        Eigen::MatrixXd P = model.transition_probabilities(t);
        double syn = 0.0, non = 0.0;
        for (int i = 0; i < 61; ++i)
            for (int j = 0; j < 61; ++j) {
                syn += model.pi[i] * P(i, j) * cond.syn(i, j);
                non += model.pi[i] * P(i, j) * cond.nonsyn(i, j);
            }
        CHECK(syn == doctest::Approx(t * model.flux_syn).epsilon(1e-7));
        CHECK(non == doctest::Approx(t * model.flux_nonsyn).epsilon(1e-7));
        CHECK(syn + non == doctest::Approx(t).epsilon(1e-7));
    }
}

TEST_CASE("conditional counts at t=0 vanish") {
    CodonModel model = build_model(2.0, 0.5, skewed_pi());
    ConditionalCounts cond = conditional_label_counts(model, 0.0);
    for (int i = 0; i < 61; ++i) {
        CHECK(cond.syn(i, i) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
        CHECK(cond.nonsyn(i, i) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    }
}

TEST_CASE("estimate_pair is the pattern average of the conditional counts") {
    CodonModel model = build_model(2.0, 0.5, skewed_pi());
    CodonAlignment aln = simulate_pair(model, 0.45, 250, RngStream(7));
    PairEstimate est = estimate_pair(aln.rows[0], aln.rows[1], model);
    ConditionalCounts cond = conditional_label_counts(model, est.t_hat);
    double syn = 0.0, non = 0.0;
    int usable = 0;
    for (int s = 0; s < aln.n_codons(); ++s) {
        int i = aln.rows[0][s], j = aln.rows[1][s];
        if (i == kMissingCodon || j == kMissingCodon) continue;
        syn += cond.syn(i, j);
        non += cond.nonsyn(i, j);
        ++usable;
    }
    CHECK(est.usable_sites == usable);
    CHECK(est.d_syn == doctest::Approx(syn / usable).epsilon(1e-8));
    CHECK(est.d_nonsyn == doctest::Approx(non / usable).epsilon(1e-8));
}

TEST_CASE("divergence time recovery on simulated pairs") {
    CodonModel model = build_model(2.0, 0.5, Eigen::VectorXd::Constant(61, 1.0 / 61));
    const double t_true = 0.4;
    std::vector<double> t_hats;
    for (int rep = 0; rep < 60; ++rep) {
        CodonAlignment aln = simulate_pair(model, t_true, 1000, RngStream(100 + rep));
        PairEstimate est = estimate_pair(aln.rows[0], aln.rows[1], model);
        t_hats.push_back(est.t_hat);
        CHECK_FALSE(est.saturated);
        // the total distance tracks the fitted time closely
        CHECK(std::abs(est.d_all() - est.t_hat) < 0.1 * est.t_hat);
    }
    double mean = 0.0;
    for (double t : t_hats) mean += t;
    mean /= t_hats.size();
    CHECK(mean == doctest::Approx(t_true).epsilon(0.05));
    for (double t : t_hats) CHECK((t > 0.25 && t < 0.60));
}

TEST_CASE("labeled distances grow with divergence") {
    CodonModel model = build_model(2.0, 0.5, Eigen::VectorXd::Constant(61, 1.0 / 61));
    std::vector<double> times{0.05, 0.15, 0.3, 0.6, 1.0};
    std::vector<double> mean_all, mean_syn, mean_non;
    for (std::size_t k = 0; k < times.size(); ++k) {
        double all = 0, syn = 0, non = 0;
        const int reps = 12;
        for (int rep = 0; rep < reps; ++rep) {
            CodonAlignment aln =
                simulate_pair(model, times[k], 600, RngStream(1000 * k + rep));
            PairEstimate est = estimate_pair(aln.rows[0], aln.rows[1], model);
            all += est.d_all();
            syn += est.d_syn;
            non += est.d_nonsyn;
        }
        mean_all.push_back(all / reps);
        mean_syn.push_back(syn / reps);
        mean_non.push_back(non / reps);
    }
    for (std::size_t k = 1; k < times.size(); ++k) {
        CHECK(mean_all[k] > mean_all[k - 1]);
        CHECK(mean_syn[k] > mean_syn[k - 1]);
        CHECK(mean_non[k] > mean_non[k - 1]);
    }
}

TEST_CASE("saturation is flagged at the search bound") {
    CodonModel model = build_model(2.0, 0.5, Eigen::VectorXd::Constant(61, 1.0 / 61));
    // maximally conflicting short sequences push the estimate to the bound
    std::vector<std::int16_t> a, b;
    RngStream rng(5);
    for (int s = 0; s < 30; ++s) {
        int i = static_cast<int>(rng.uniform() * 61);
        int j = static_cast<int>(rng.uniform() * 61);
        if (i == j) j = (j + 17) % 61;
        a.push_back(static_cast<std::int16_t>(i));
        b.push_back(static_cast<std::int16_t>(j));
    }
    PairEstimate est = estimate_pair(a, b, model);
    CHECK(est.saturated);
    CHECK(est.t_hat > kMaxPairTime - 1e-2);
}

TEST_CASE("distance matrices are symmetric, zero-diagonal, and additive") {
    M3Params mix_params;
    mix_params.kappa = 2.0;
    mix_params.omegas = {0.1, 0.8, 2.0};
    mix_params.probs = {0.4, 0.4, 0.2};
    MixtureModel mix = build_mixture(mix_params, Eigen::VectorXd::Constant(61, 1.0 / 61));
    RngStream rng(9);
    Phylogeny tree = random_topology(default_names(5), rng, 0.1, 0.4, 0.05, 0.2);
    RngStream sim = rng.derive("sim");
    CodonAlignment aln = simulate_alignment(tree, 400, mix, sim);

    CodonModel scan_model =
        build_model(2.0, mix_params.mean_omega(), f1x4_frequencies(aln), aln.code);
    LabeledDistanceSet set = labeled_distance_matrices(aln, 0, aln.n_codons(), scan_model);
    for (int i = 0; i < 5; ++i) {
        CHECK(set.d_all(i, i) == 0.0);
        for (int j = 0; j < 5; ++j) {
            CHECK(set.d_all(i, j) == set.d_all(j, i));
            CHECK(set.d_all(i, j) ==
                  doctest::Approx(set.d_syn(i, j) + set.d_nonsyn(i, j)).epsilon(1e-12));
            if (i != j) CHECK(set.d_all(i, j) > 0.0);
        }
    }

    // the single-label convenience view matches the full set
    DistanceMatrix syn = distance_matrix(aln, Label::Syn, scan_model);
    CHECK((syn.values - set.d_syn).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("upper-triangle mean") {
    Eigen::MatrixXd m(3, 3);
    m << 0, 1, 2,
         1, 0, 4,
         2, 4, 0;
    CHECK(upper_triangle_mean(m) == doctest::Approx((1.0 + 2.0 + 4.0) / 3.0));
    CHECK(upper_triangle_mean(Eigen::MatrixXd::Zero(1, 1)) == 0.0);
}
