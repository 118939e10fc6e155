#pragma once

#include <array>
#include <memory>
#include <string>

#include <Eigen/Core>

#include "dsscan/genetic_code.hpp"

namespace dsscan {

enum class Label { All, Syn, Nonsyn };

const char* label_name(Label label);
Label label_from_name(std::string_view name);

// Spectral factorization of a reversible rate matrix: Q = U diag(gamma) Uinv,
// obtained by symmetrizing with the stationary distribution. Eigenvalues are
// real and non-positive.
struct SpectralGenerator {
    Eigen::MatrixXd Q;
    Eigen::VectorXd eigenvalues;  // gamma
    Eigen::MatrixXd U;
    Eigen::MatrixXd Uinv;

    Eigen::MatrixXd transition_probabilities(double t) const;
};

SpectralGenerator spectral_decompose(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi);

// Codon substitution model: single-nucleotide exchanges with transition bias
// kappa and nonsynonymous/synonymous ratio omega, target-frequency weighted,
// scaled to one expected substitution per codon per unit time at stationarity.
struct CodonModel {
    double kappa = 2.0;
    double omega = 1.0;
    Eigen::VectorXd pi;
    SpectralGenerator gen;
    // Uinv * Q_L * U for the synonymous / nonsynonymous restrictions of Q,
    // the label-specific pieces used in expected substitution counting.
    Eigen::MatrixXd Bsyn;
    Eigen::MatrixXd Bnonsyn;
    double flux_syn = 0.0;     // stationary fraction of synonymous flow
    double flux_nonsyn = 0.0;  // complements to 1 after normalization
    std::shared_ptr<const GeneticCode> code;

    Eigen::MatrixXd transition_probabilities(double t) const {
        return gen.transition_probabilities(t);
    }
    double labeled_flux(Label label) const;
};

CodonModel build_model(double kappa, double omega, const Eigen::VectorXd& pi,
                       std::shared_ptr<const GeneticCode> code = nullptr);

// Three-class discrete mixture over omega with shared kappa and frequencies.
struct M3Params {
    double kappa = 2.0;
    std::array<double, 3> omegas{0.1, 0.8, 3.2};
    std::array<double, 3> probs{1.0 / 3, 1.0 / 3, 1.0 / 3};

    double mean_omega() const {
        return probs[0] * omegas[0] + probs[1] * omegas[1] + probs[2] * omegas[2];
    }
    // Sort classes by ascending omega, carrying the weights along.
    M3Params canonical() const;
    void validate() const;
};

// Class generators share one time scale: the mixture-averaged substitution
// rate is one per codon per unit time.
struct MixtureModel {
    M3Params params;
    Eigen::VectorXd pi;
    std::array<SpectralGenerator, 3> classes;
    std::shared_ptr<const GeneticCode> code;
};

MixtureModel build_mixture(const M3Params& params, const Eigen::VectorXd& pi,
                           std::shared_ptr<const GeneticCode> code = nullptr);

// One omega class in its raw (unnormalized) time scale together with its
// stationary substitution rate. The mixture fitter combines these itself,
// rescaling time as the weights move.
struct ClassGenerator {
    SpectralGenerator gen;
    double rate = 0.0;
};

ClassGenerator build_class_generator(double kappa, double omega, const Eigen::VectorXd& pi,
                                     std::shared_ptr<const GeneticCode> code = nullptr);

}  // namespace dsscan
