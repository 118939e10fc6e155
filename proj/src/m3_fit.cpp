#include "dsscan/m3_fit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

constexpr double kKappaLo = 0.01, kKappaHi = 100.0;
constexpr double kOmegaLo = 0.0, kOmegaHi = 20.0;
constexpr double kMinEdgeTime = 1e-8;  // zero-length edges would zero out P off-diagonals

// Pruning workspace for one alignment on one fixed tree. Site patterns are
// collapsed; partial likelihoods are propagated as (states x patterns)
// matrices so the inner loops are matrix products.
class TreeLikelihood {
public:
    TreeLikelihood(const CodonAlignment& aln, const Phylogeny& tree) : code_(aln.code) {
        tree.validate();
        const int n = aln.n_taxa();
        if (tree.n_tips() != n)
            throw TipMismatch("tree and alignment have different taxon counts");
        std::vector<int> row_of_tip(n);
        for (int i = 0; i < n; ++i) {
            auto it = std::find(aln.taxa.begin(), aln.taxa.end(), tree.tip_names[i]);
            if (it == aln.taxa.end())
                throw TipMismatch("tree tip not present in alignment: " + tree.tip_names[i]);
            row_of_tip[i] = static_cast<int>(it - aln.taxa.begin());
        }

        // collapse site patterns (tip-state tuples in tree tip order)
        std::map<std::vector<std::int16_t>, double> tally;
        std::vector<std::int16_t> key(n);
        for (int s = 0; s < aln.n_codons(); ++s) {
            for (int i = 0; i < n; ++i) key[i] = aln.rows[row_of_tip[i]][s];
            tally[key] += 1.0;
        }
        n_patterns_ = static_cast<int>(tally.size());
        states_.resize(n, std::vector<std::int16_t>(n_patterns_));
        counts_.resize(n_patterns_);
        int p = 0;
        for (const auto& [pattern, count] : tally) {
            for (int i = 0; i < n; ++i) states_[i][p] = pattern[i];
            counts_[p] = count;
            ++p;
        }

        n_tips_ = n;
        n_states_ = code_->n_sense();
        edge_time_.resize(tree.n_edges());
        for (int e = 0; e < tree.n_edges(); ++e)
            edge_time_[e] = std::max(tree.edges[e].length, kMinEdgeTime);

        // root at the internal node next to tip 0 (or at tip 0 for two taxa)
        std::vector<std::vector<std::pair<int, int>>> adj(tree.n_nodes);
        for (int e = 0; e < tree.n_edges(); ++e) {
            adj[tree.edges[e].u].push_back({tree.edges[e].v, e});
            adj[tree.edges[e].v].push_back({tree.edges[e].u, e});
        }
        root_ = (n >= 3) ? adj[0][0].first : 0;
        children_.resize(tree.n_nodes);
        std::vector<int> stack{root_};
        std::vector<char> seen(tree.n_nodes, 0);
        seen[root_] = 1;
        std::vector<int> order;
        while (!stack.empty()) {
            int x = stack.back();
            stack.pop_back();
            order.push_back(x);
            for (auto [y, e] : adj[x]) {
                if (seen[y]) continue;
                seen[y] = 1;
                children_[x].push_back({y, e});
                stack.push_back(y);
            }
        }
    }

    int n_patterns() const { return n_patterns_; }
    const Eigen::VectorXd& counts() const { return counts_; }
    double n_sites() const { return counts_.sum(); }

    // Log site likelihoods for a single omega class whose raw generator is
    // rescaled by `stretch` (shared mixture normalization).
    Eigen::VectorXd class_log_likelihood(const SpectralGenerator& gen, double stretch,
                                         const Eigen::VectorXd& pi) const {
        std::vector<Eigen::MatrixXd> P(edge_time_.size());
        for (std::size_t e = 0; e < edge_time_.size(); ++e)
            P[e] = gen.transition_probabilities(edge_time_[e] * stretch);

        Eigen::VectorXd log_scale = Eigen::VectorXd::Zero(n_patterns_);
        Eigen::MatrixXd root_partial = partial(root_, P, log_scale);

        Eigen::VectorXd out(n_patterns_);
        if (root_ < n_tips_) {
            // two-taxon case: the root is a tip and contributes its own state
            for (int p = 0; p < n_patterns_; ++p) {
                std::int16_t s = states_[root_][p];
                double lik = (s == kMissingCodon) ? pi.dot(root_partial.col(p))
                                                  : pi[s] * root_partial(s, p);
                out[p] = std::log(std::max(lik, 1e-300)) + log_scale[p];
            }
        } else {
            for (int p = 0; p < n_patterns_; ++p) {
                double lik = pi.dot(root_partial.col(p));
                out[p] = std::log(std::max(lik, 1e-300)) + log_scale[p];
            }
        }
        return out;
    }

    // Mixture combination over cached per-class log site likelihoods.
    double combine(const std::array<Eigen::VectorXd, 3>& log_site,
                   const std::array<double, 3>& probs) const {
        std::array<double, 3> logp{};
        for (int c = 0; c < 3; ++c)
            logp[c] = probs[c] > 0 ? std::log(probs[c])
                                   : -std::numeric_limits<double>::infinity();
        double ll = 0.0;
        for (int p = 0; p < n_patterns_; ++p) {
            double m = -std::numeric_limits<double>::infinity();
            for (int c = 0; c < 3; ++c) m = std::max(m, logp[c] + log_site[c][p]);
            if (!std::isfinite(m)) return -std::numeric_limits<double>::infinity();
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) acc += std::exp(logp[c] + log_site[c][p] - m);
            ll += counts_[p] * (m + std::log(acc));
        }
        return ll;
    }

    // Posterior class weights aggregated over sites (EM direction for probs).
    std::array<double, 3> class_responsibilities(
        const std::array<Eigen::VectorXd, 3>& log_site,
        const std::array<double, 3>& probs) const {
        std::array<double, 3> total{0.0, 0.0, 0.0};
        for (int p = 0; p < n_patterns_; ++p) {
            double m = -std::numeric_limits<double>::infinity();
            std::array<double, 3> term{};
            for (int c = 0; c < 3; ++c) {
                term[c] = probs[c] > 0
                              ? std::log(probs[c]) + log_site[c][p]
                              : -std::numeric_limits<double>::infinity();
                m = std::max(m, term[c]);
            }
            if (!std::isfinite(m)) continue;
            double denom = 0.0;
            for (int c = 0; c < 3; ++c) {
                term[c] = std::exp(term[c] - m);
                denom += term[c];
            }
            for (int c = 0; c < 3; ++c) total[c] += counts_[p] * term[c] / denom;
        }
        return total;
    }

private:
    Eigen::MatrixXd partial(int node, const std::vector<Eigen::MatrixXd>& P,
                            Eigen::VectorXd& log_scale) const {
        Eigen::MatrixXd out = Eigen::MatrixXd::Ones(n_states_, n_patterns_);
        for (auto [child, e] : children_[node]) {
            if (child < n_tips_) {
                const auto& st = states_[child];
                for (int p = 0; p < n_patterns_; ++p) {
                    if (st[p] == kMissingCodon) continue;  // missing tip: factor of one
                    out.col(p).array() *= P[e].col(st[p]).array();
                }
            } else {
                Eigen::MatrixXd msg = P[e] * partial(child, P, log_scale);
                out.array() *= msg.array();
            }
        }
        // rescale tiny columns so deep trees cannot underflow
        for (int p = 0; p < n_patterns_; ++p) {
            double cmax = out.col(p).maxCoeff();
            if (cmax > 0 && cmax < 1e-100) {
                out.col(p) /= cmax;
                log_scale[p] += std::log(cmax);
            }
        }
        return out;
    }

    std::shared_ptr<const GeneticCode> code_;
    int n_tips_ = 0;
    int n_states_ = 0;
    int n_patterns_ = 0;
    int root_ = 0;
    std::vector<std::vector<std::int16_t>> states_;  // [tip][pattern]
    Eigen::VectorXd counts_;
    std::vector<double> edge_time_;
    std::vector<std::vector<std::pair<int, int>>> children_;
};

// Golden-section maximization over [lo, hi]; returns the best evaluated point.
template <typename F>
std::pair<double, double> golden_max(F&& f, double lo, double hi, double tol) {
    constexpr double invphi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    double best_x = (fc > fd) ? c : d;
    double best_f = std::max(fc, fd);
    while (b - a > tol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
            if (fc > best_f) {
                best_f = fc;
                best_x = c;
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
            if (fd > best_f) {
                best_f = fd;
                best_x = d;
            }
        }
    }
    return {best_x, best_f};
}

struct FitState {
    M3Params params;
    std::array<ClassGenerator, 3> cls;
    double stretch = 1.0;
    std::array<Eigen::VectorXd, 3> log_site;
    double ll = -std::numeric_limits<double>::infinity();
};

class MixtureFitter {
public:
    MixtureFitter(const TreeLikelihood& tl, Eigen::VectorXd pi,
                  std::shared_ptr<const GeneticCode> code)
        : tl_(tl), pi_(std::move(pi)), code_(std::move(code)) {}

    // Full evaluation: rebuild every class generator, reprune, combine.
    double evaluate(const M3Params& params, FitState* out) const {
        FitState st;
        st.params = params;
        double mix_rate = 0.0;
        for (int c = 0; c < 3; ++c) {
            st.cls[c] = build_class_generator(params.kappa, params.omegas[c], pi_, code_);
            mix_rate += params.probs[c] * st.cls[c].rate;
        }
        return finish(st, mix_rate, out);
    }

    // Reuse generators from `base`, rebuilding only class `changed` (or none
    // when changed < 0, e.g. a weights-only move).
    double evaluate_from(const FitState& base, const M3Params& params, int changed,
                         FitState* out) const {
        FitState st;
        st.params = params;
        st.cls = base.cls;
        if (changed >= 0)
            st.cls[changed] =
                build_class_generator(params.kappa, params.omegas[changed], pi_, code_);
        double mix_rate = 0.0;
        for (int c = 0; c < 3; ++c) mix_rate += params.probs[c] * st.cls[c].rate;
        return finish(st, mix_rate, out);
    }

private:
    double finish(FitState& st, double mix_rate, FitState* out) const {
        if (!(mix_rate > 0.0)) return -std::numeric_limits<double>::infinity();
        st.stretch = 1.0 / mix_rate;
        for (int c = 0; c < 3; ++c)
            st.log_site[c] = tl_.class_log_likelihood(st.cls[c].gen, st.stretch, pi_);
        st.ll = tl_.combine(st.log_site, st.params.probs);
        if (std::isnan(st.ll)) {
            std::ostringstream msg;
            msg << "mixture likelihood is NaN at kappa=" << st.params.kappa << " omegas=("
                << st.params.omegas[0] << "," << st.params.omegas[1] << ","
                << st.params.omegas[2] << ")";
            throw NonFinite(msg.str());
        }
        if (out) *out = std::move(st);
        return out ? out->ll : st.ll;
    }

    const TreeLikelihood& tl_;
    Eigen::VectorXd pi_;
    std::shared_ptr<const GeneticCode> code_;
};

}  // namespace

double mixture_log_likelihood(const CodonAlignment& aln, const Phylogeny& tree,
                              const M3Params& params) {
    params.validate();
    TreeLikelihood tl(aln, tree);
    MixtureFitter fitter(tl, f1x4_frequencies(aln), aln.code);
    return fitter.evaluate(params, nullptr);
}

M3FitResult fit_m3(const CodonAlignment& aln, const Phylogeny& tree) {
    M3FitResult result;
    result.params = M3Params{};

    if (variable_sites(aln).empty()) {
        result.degenerate = true;
        result.converged = true;
        result.log_likelihood = mixture_log_likelihood(aln, tree, result.params);
        return result;
    }

    TreeLikelihood tl(aln, tree);
    MixtureFitter fitter(tl, f1x4_frequencies(aln), aln.code);

    FitState cur;
    fitter.evaluate(result.params, &cur);

    const int max_sweeps = 200;
    bool converged = false;
    int sweep = 0;
    while (sweep < max_sweeps && !converged) {
        ++sweep;
        const double ll_start = cur.ll;
        const bool wide = sweep <= 2;  // full boxes first, then local brackets

        // kappa, searched on the log scale
        {
            double lo = wide ? kKappaLo : std::max(kKappaLo, cur.params.kappa / 2.5);
            double hi = wide ? kKappaHi : std::min(kKappaHi, cur.params.kappa * 2.5);
            auto [x, fx] = golden_max(
                [&](double logk) {
                    M3Params trial = cur.params;
                    trial.kappa = std::exp(logk);
                    return fitter.evaluate(trial, nullptr);
                },
                std::log(lo), std::log(hi), 1e-3);
            if (fx > cur.ll) {
                M3Params trial = cur.params;
                trial.kappa = std::exp(x);
                FitState st;
                fitter.evaluate(trial, &st);
                if (st.ll > cur.ll) cur = std::move(st);
            }
        }

        // each omega class in turn
        for (int c = 0; c < 3; ++c) {
            double w = cur.params.omegas[c];
            double lo = wide ? kOmegaLo : std::max(kOmegaLo, 0.4 * w - 0.01);
            double hi = wide ? kOmegaHi : std::min(kOmegaHi, 2.5 * w + 0.05);
            double tol = std::max(1e-4, 1e-3 * w);
            auto [x, fx] = golden_max(
                [&](double om) {
                    M3Params trial = cur.params;
                    trial.omegas[c] = om;
                    return fitter.evaluate_from(cur, trial, c, nullptr);
                },
                lo, hi, tol);
            if (fx > cur.ll) {
                M3Params trial = cur.params;
                trial.omegas[c] = x;
                FitState st;
                fitter.evaluate_from(cur, trial, c, &st);
                if (st.ll > cur.ll) cur = std::move(st);
            }
        }

        // class weights: EM direction with backtracking (the shared mixture
        // normalization couples the weights to the time scale, so the raw EM
        // step is checked against the likelihood before acceptance)
        {
            auto resp = tl.class_responsibilities(cur.log_site, cur.params.probs);
            double total = resp[0] + resp[1] + resp[2];
            if (total > 0) {
                std::array<double, 3> target{resp[0] / total, resp[1] / total,
                                             resp[2] / total};
                for (double eta : {1.0, 0.5, 0.25}) {
                    M3Params trial = cur.params;
                    for (int c = 0; c < 3; ++c)
                        trial.probs[c] =
                            (1.0 - eta) * cur.params.probs[c] + eta * target[c];
                    FitState st;
                    fitter.evaluate_from(cur, trial, -1, &st);
                    if (st.ll > cur.ll) {
                        cur = std::move(st);
                        break;
                    }
                }
            }
        }

        if (cur.ll - ll_start < 1e-6) converged = true;
    }

    result.params = cur.params.canonical();
    result.log_likelihood = cur.ll;
    result.converged = converged;
    result.sweeps = sweep;
    return result;
}

}  // namespace dsscan
