#include "dsscan/distances.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

struct PairPatterns {
    // canonical (i <= j) state pairs with multiplicities; reversibility makes
    // both the likelihood and the conditional counts orientation-free
    std::vector<int> from;
    std::vector<int> to;
    Eigen::VectorXd count;
    int usable = 0;
    bool any_difference = false;
};

PairPatterns collect_patterns(std::span<const std::int16_t> a,
                              std::span<const std::int16_t> b) {
    if (a.size() != b.size())
        throw InvalidParameter("pair sequences differ in length");
    std::map<std::pair<int, int>, double> tally;
    int usable = 0;
    for (std::size_t s = 0; s < a.size(); ++s) {
        if (a[s] == kMissingCodon || b[s] == kMissingCodon) continue;
        int i = a[s], j = b[s];
        if (i > j) std::swap(i, j);
        tally[{i, j}] += 1.0;
        ++usable;
    }
    PairPatterns out;
    out.usable = usable;
    out.from.reserve(tally.size());
    out.to.reserve(tally.size());
    out.count.resize(static_cast<Eigen::Index>(tally.size()));
    Eigen::Index k = 0;
    for (const auto& [key, c] : tally) {
        out.from.push_back(key.first);
        out.to.push_back(key.second);
        out.count[k++] = c;
        if (key.first != key.second) out.any_difference = true;
    }
    return out;
}

// Per-pattern spectral weights: row p holds pi_i * U(i,m) * Uinv(m,j), so the
// pattern's joint probability at time t is row . exp(gamma t).
Eigen::MatrixXd pattern_weights(const PairPatterns& pat, const CodonModel& model) {
    const Eigen::Index np = pat.count.size();
    const int n = static_cast<int>(model.pi.size());
    Eigen::MatrixXd W(np, n);
    for (Eigen::Index p = 0; p < np; ++p) {
        int i = pat.from[p], j = pat.to[p];
        W.row(p) = model.pi[i] *
                   (model.gen.U.row(i).array() * model.gen.Uinv.col(j).transpose().array());
    }
    return W;
}

double log_likelihood(const Eigen::MatrixXd& W, const Eigen::VectorXd& counts,
                      const Eigen::VectorXd& gamma, double t) {
    Eigen::VectorXd e = (gamma.array() * t).exp();
    Eigen::ArrayXd probs = (W * e).array().max(1e-300);
    return (counts.array() * probs.log()).sum();
}

// Golden-section maximization of the pair log-likelihood over [0, kMaxPairTime].
double golden_section_time(const Eigen::MatrixXd& W, const Eigen::VectorXd& counts,
                           const Eigen::VectorXd& gamma) {
    constexpr double invphi = 0.6180339887498949;
    double a = 0.0, b = kMaxPairTime;
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = log_likelihood(W, counts, gamma, c);
    double fd = log_likelihood(W, counts, gamma, d);
    while (b - a > kPairTimeTol) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = log_likelihood(W, counts, gamma, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = log_likelihood(W, counts, gamma, d);
        }
    }
    return 0.5 * (a + b);
}

// Integral coupling matrix for expected-count calculations:
// H(m,n) = (exp(gamma_m t) - exp(gamma_n t)) / (gamma_m - gamma_n),
// degenerating to t * exp(gamma t) on (near-)equal eigenvalues.
Eigen::MatrixXd coupling_matrix(const Eigen::VectorXd& gamma, double t) {
    const Eigen::Index n = gamma.size();
    Eigen::VectorXd e = (gamma.array() * t).exp();
    Eigen::MatrixXd H(n, n);
    for (Eigen::Index m = 0; m < n; ++m) {
        for (Eigen::Index k = 0; k <= m; ++k) {
            double diff = gamma[m] - gamma[k];
            double h;
            if (std::abs(diff) < 1e-9) {
                h = t * std::exp(0.5 * (gamma[m] + gamma[k]) * t);
            } else {
                h = (e[m] - e[k]) / diff;
            }
            H(m, k) = h;
            H(k, m) = h;
        }
    }
    return H;
}

}  // namespace

double upper_triangle_mean(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    if (n < 2) return 0.0;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) sum += m(i, j);
    return sum / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
}

PairEstimate estimate_pair(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                           const CodonModel& model) {
    PairPatterns pat = collect_patterns(a, b);
    if (pat.usable == 0)
        throw NoComparableSites("no codon columns where both sequences are resolved");

    PairEstimate out;
    out.usable_sites = pat.usable;
    if (!pat.any_difference) return out;  // identical where comparable: t = 0

    Eigen::MatrixXd W = pattern_weights(pat, model);
    const Eigen::VectorXd& gamma = model.gen.eigenvalues;
    out.t_hat = golden_section_time(W, pat.count, gamma);
    out.saturated = (kMaxPairTime - out.t_hat) < 1e-3;

    // Expected synonymous / nonsynonymous substitution counts on [0, t_hat],
    // conditioned on the endpoint codons of each site.
    Eigen::MatrixXd H = coupling_matrix(gamma, out.t_hat);
    Eigen::MatrixXd Wsyn = model.Bsyn.cwiseProduct(H);
    Eigen::MatrixXd Wnon = model.Bnonsyn.cwiseProduct(H);
    Eigen::VectorXd e = (gamma.array() * out.t_hat).exp();

    const int n = static_cast<int>(model.pi.size());
    // group patterns by start state so each left product is done once
    std::vector<int> row_of(n, -1);
    Eigen::MatrixXd left_syn, left_non, left_prob;
    {
        int distinct = 0;
        for (std::size_t p = 0; p < pat.from.size(); ++p)
            if (row_of[pat.from[p]] < 0) row_of[pat.from[p]] = distinct++;
        left_syn.resize(distinct, n);
        left_non.resize(distinct, n);
        left_prob.resize(distinct, n);
        for (int i = 0; i < n; ++i) {
            int r = row_of[i];
            if (r < 0) continue;
            left_syn.row(r) = model.gen.U.row(i) * Wsyn;
            left_non.row(r) = model.gen.U.row(i) * Wnon;
            left_prob.row(r) = model.gen.U.row(i).array() * e.transpose().array();
        }
    }

    double sum_syn = 0.0, sum_non = 0.0;
    for (std::size_t p = 0; p < pat.from.size(); ++p) {
        int r = row_of[pat.from[p]];
        auto uinv_col = model.gen.Uinv.col(pat.to[p]);
        double prob = std::max(left_prob.row(r).dot(uinv_col), 1e-300);
        double m_syn = left_syn.row(r).dot(uinv_col) / prob;
        double m_non = left_non.row(r).dot(uinv_col) / prob;
        sum_syn += pat.count[p] * std::max(m_syn, 0.0);
        sum_non += pat.count[p] * std::max(m_non, 0.0);
    }
    out.d_syn = sum_syn / pat.usable;
    out.d_nonsyn = sum_non / pat.usable;
    return out;
}

double estimate_pair_time(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                          const CodonModel& model) {
    return estimate_pair(a, b, model).t_hat;
}

double labeled_distance(std::span<const std::int16_t> a, std::span<const std::int16_t> b,
                        Label label, const CodonModel& model) {
    return estimate_pair(a, b, model).distance(label);
}

LabeledDistanceSet labeled_distance_matrices(const CodonAlignment& aln, int start, int end,
                                             const CodonModel& model) {
    const int n = aln.n_taxa();
    if (start < 0 || end > aln.n_codons() || start >= end)
        throw OutOfRange("codon range out of bounds for distance matrices");
    LabeledDistanceSet out;
    out.t_hat = Eigen::MatrixXd::Zero(n, n);
    out.d_all = Eigen::MatrixXd::Zero(n, n);
    out.d_syn = Eigen::MatrixXd::Zero(n, n);
    out.d_nonsyn = Eigen::MatrixXd::Zero(n, n);
    const std::size_t len = static_cast<std::size_t>(end - start);
    for (int k = 0; k < n; ++k) {
        std::span<const std::int16_t> row_k(aln.rows[k].data() + start, len);
        for (int l = k + 1; l < n; ++l) {
            std::span<const std::int16_t> row_l(aln.rows[l].data() + start, len);
            PairEstimate est = estimate_pair(row_k, row_l, model);
            out.t_hat(k, l) = out.t_hat(l, k) = est.t_hat;
            out.d_syn(k, l) = out.d_syn(l, k) = est.d_syn;
            out.d_nonsyn(k, l) = out.d_nonsyn(l, k) = est.d_nonsyn;
            out.d_all(k, l) = out.d_all(l, k) = est.d_all();
            if (est.saturated) ++out.saturated_pairs;
        }
    }
    return out;
}

ConditionalCounts conditional_label_counts(const CodonModel& model, double t) {
    if (t < 0.0) throw InvalidParameter("conditional counts need t >= 0");
    const Eigen::VectorXd& gamma = model.gen.eigenvalues;
    Eigen::MatrixXd H = coupling_matrix(gamma, t);
    Eigen::VectorXd e = (gamma.array() * t).exp();
    Eigen::MatrixXd P =
        (model.gen.U * e.asDiagonal() * model.gen.Uinv).cwiseMax(1e-300);
    ConditionalCounts out;
    out.syn = (model.gen.U * model.Bsyn.cwiseProduct(H) * model.gen.Uinv)
                  .cwiseQuotient(P)
                  .cwiseMax(0.0);
    out.nonsyn = (model.gen.U * model.Bnonsyn.cwiseProduct(H) * model.gen.Uinv)
                     .cwiseQuotient(P)
                     .cwiseMax(0.0);
    return out;
}

DistanceMatrix distance_matrix(const CodonAlignment& aln, Label label,
                               const CodonModel& model) {
    LabeledDistanceSet set = labeled_distance_matrices(aln, 0, aln.n_codons(), model);
    DistanceMatrix out;
    out.label = label;
    out.values = set.values(label);
    return out;
}

}  // namespace dsscan
