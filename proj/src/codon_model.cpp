#include "dsscan/codon_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "dsscan/errors.hpp"

namespace dsscan {

const char* label_name(Label label) {
    switch (label) {
        case Label::All: return "all";
        case Label::Syn: return "syn";
        case Label::Nonsyn: return "nonsyn";
    }
    return "?";
}

Label label_from_name(std::string_view name) {
    if (name == "all" || name == "ALL") return Label::All;
    if (name == "syn" || name == "SYN") return Label::Syn;
    if (name == "nonsyn" || name == "NONSYN") return Label::Nonsyn;
    throw InvalidParameter("unknown label: " + std::string(name));
}

Eigen::MatrixXd SpectralGenerator::transition_probabilities(double t) const {
    if (!(t >= 0.0)) throw InvalidParameter("transition probabilities need t >= 0");
    Eigen::VectorXd e = (eigenvalues.array() * t).exp();
    Eigen::MatrixXd P = U * e.asDiagonal() * Uinv;
    // clean up round-off: probabilities live in [0, 1]
    P = P.cwiseMax(0.0).cwiseMin(1.0);
    return P;
}

SpectralGenerator spectral_decompose(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi) {
    const auto n = Q.rows();
    Eigen::VectorXd sqrt_pi = pi.array().sqrt();
    Eigen::VectorXd inv_sqrt_pi = sqrt_pi.cwiseInverse();
    // similar symmetric matrix: diag(sqrt pi) Q diag(1/sqrt pi)
    Eigen::MatrixXd S = sqrt_pi.asDiagonal() * Q * inv_sqrt_pi.asDiagonal();
    S = 0.5 * (S + S.transpose());  // enforce exact symmetry
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
    if (solver.info() != Eigen::Success)
        throw NonFinite("eigendecomposition of rate matrix failed");
    SpectralGenerator out;
    out.Q = Q;
    out.eigenvalues = solver.eigenvalues();
    out.U = inv_sqrt_pi.asDiagonal() * solver.eigenvectors();
    out.Uinv = solver.eigenvectors().transpose() * sqrt_pi.asDiagonal();
    (void)n;
    return out;
}

namespace {

void check_pi(const Eigen::VectorXd& pi, int n_sense) {
    if (pi.size() != n_sense) {
        std::ostringstream msg;
        msg << "frequency vector has " << pi.size() << " entries, expected " << n_sense;
        throw InvalidParameter(msg.str());
    }
    if ((pi.array() <= 0.0).any())
        throw InvalidParameter("codon frequencies must be strictly positive");
    if (std::abs(pi.sum() - 1.0) > 1e-8)
        throw InvalidParameter("codon frequencies must sum to 1");
}

// Unnormalized generator; returns the stationary substitution rate and the
// synonymous share of it.
struct RawGenerator {
    Eigen::MatrixXd Q;
    double rate = 0.0;
    double syn_rate = 0.0;
};

RawGenerator raw_generator(double kappa, double omega, const Eigen::VectorXd& pi,
                           const GeneticCode& code) {
    if (!(kappa > 0.0)) throw InvalidParameter("kappa must be positive");
    if (!(omega >= 0.0)) throw InvalidParameter("omega must be non-negative");
    const int n = code.n_sense();
    RawGenerator out;
    out.Q = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double leave = 0.0;
        for (const auto& nb : code.neighbors(i)) {
            double rate = pi[nb.to];
            if (nb.transition) rate *= kappa;
            if (!nb.synonymous) rate *= omega;
            out.Q(i, nb.to) = rate;
            leave += rate;
            out.rate += pi[i] * rate;
            if (nb.synonymous) out.syn_rate += pi[i] * rate;
        }
        out.Q(i, i) = -leave;
    }
    return out;
}

}  // namespace

double CodonModel::labeled_flux(Label label) const {
    switch (label) {
        case Label::All: return flux_syn + flux_nonsyn;
        case Label::Syn: return flux_syn;
        case Label::Nonsyn: return flux_nonsyn;
    }
    return 0.0;
}

CodonModel build_model(double kappa, double omega, const Eigen::VectorXd& pi,
                       std::shared_ptr<const GeneticCode> code) {
    if (!code) code = GeneticCode::standard();
    check_pi(pi, code->n_sense());
    RawGenerator raw = raw_generator(kappa, omega, pi, *code);
    if (!(raw.rate > 0.0))
        throw InvalidParameter("substitution rate is zero; cannot normalize generator");

    CodonModel model;
    model.kappa = kappa;
    model.omega = omega;
    model.pi = pi;
    model.code = code;
    model.gen = spectral_decompose(raw.Q / raw.rate, pi);
    model.flux_syn = raw.syn_rate / raw.rate;
    model.flux_nonsyn = 1.0 - model.flux_syn;

    // label-restricted off-diagonal rate matrices, conjugated into the
    // spectral basis once so jump counting is cheap later
    const int n = code->n_sense();
    Eigen::MatrixXd Qsyn = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd Qnon = Eigen::MatrixXd::Zero(n, n);
    const Eigen::MatrixXd& Q = model.gen.Q;
    for (int i = 0; i < n; ++i) {
        for (const auto& nb : code->neighbors(i)) {
            if (nb.synonymous)
                Qsyn(i, nb.to) = Q(i, nb.to);
            else
                Qnon(i, nb.to) = Q(i, nb.to);
        }
    }
    model.Bsyn = model.gen.Uinv * Qsyn * model.gen.U;
    model.Bnonsyn = model.gen.Uinv * Qnon * model.gen.U;
    return model;
}

M3Params M3Params::canonical() const {
    M3Params out = *this;
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return omegas[a] < omegas[b]; });
    for (int k = 0; k < 3; ++k) {
        out.omegas[k] = omegas[order[k]];
        out.probs[k] = probs[order[k]];
    }
    return out;
}

void M3Params::validate() const {
    if (!(kappa > 0.0)) throw InvalidParameter("mixture kappa must be positive");
    double total = 0.0;
    for (int k = 0; k < 3; ++k) {
        if (!(omegas[k] >= 0.0)) throw InvalidParameter("mixture omegas must be >= 0");
        if (!(probs[k] >= 0.0)) throw InvalidParameter("mixture weights must be >= 0");
        total += probs[k];
    }
    if (std::abs(total - 1.0) > 1e-8)
        throw InvalidParameter("mixture weights must sum to 1");
}

ClassGenerator build_class_generator(double kappa, double omega, const Eigen::VectorXd& pi,
                                     std::shared_ptr<const GeneticCode> code) {
    if (!code) code = GeneticCode::standard();
    check_pi(pi, code->n_sense());
    RawGenerator raw = raw_generator(kappa, omega, pi, *code);
    ClassGenerator out;
    out.gen = spectral_decompose(raw.Q, pi);
    out.rate = raw.rate;
    return out;
}

MixtureModel build_mixture(const M3Params& params, const Eigen::VectorXd& pi,
                           std::shared_ptr<const GeneticCode> code) {
    if (!code) code = GeneticCode::standard();
    params.validate();
    check_pi(pi, code->n_sense());

    std::array<RawGenerator, 3> raw;
    double mix_rate = 0.0;
    for (int k = 0; k < 3; ++k) {
        raw[k] = raw_generator(params.kappa, params.omegas[k], pi, *code);
        mix_rate += params.probs[k] * raw[k].rate;
    }
    if (!(mix_rate > 0.0))
        throw InvalidParameter("mixture substitution rate is zero; cannot normalize");

    MixtureModel model;
    model.params = params;
    model.pi = pi;
    model.code = code;
    for (int k = 0; k < 3; ++k)
        model.classes[k] = spectral_decompose(raw[k].Q / mix_rate, pi);
    return model;
}

}  // namespace dsscan
