// Python bindings for the dsscan core: alignment I/O, scenario simulation,
// Dss landscapes, and the parametric bootstrap. Heavy results come back as
// plain dicts/arrays so downstream analysis stays in numpy/pandas land.
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dsscan/alignment.hpp"
#include "dsscan/bootstrap.hpp"
#include "dsscan/codon_model.hpp"
#include "dsscan/distances.hpp"
#include "dsscan/dss.hpp"
#include "dsscan/errors.hpp"
#include "dsscan/ls_fit.hpp"
#include "dsscan/m3_fit.hpp"
#include "dsscan/phylogeny.hpp"
#include "dsscan/rng.hpp"
#include "dsscan/simulate.hpp"

namespace py = pybind11;
using namespace dsscan;

namespace {

SeqFormat format_from_name(const std::string& name) {
    if (name == "auto") return SeqFormat::Auto;
    if (name == "fasta") return SeqFormat::Fasta;
    if (name == "phylip") return SeqFormat::Phylip;
    throw InvalidParameter("format must be auto, fasta, or phylip: " + name);
}

std::vector<Label> labels_from_names(const std::vector<std::string>& names) {
    std::vector<Label> labels;
    labels.reserve(names.size());
    for (const std::string& n : names) labels.push_back(label_from_name(n));
    return labels;
}

CodonModel model_for(const CodonAlignment& aln, double kappa, double omega) {
    return build_model(kappa, omega, f1x4_frequencies(aln), aln.code);
}

py::dict landscape_dict(const DssLandscape& ls) {
    py::list windows;
    for (const WindowDss& w : ls.windows) {
        py::dict row;
        row["start"] = w.start;
        row["end"] = w.end;
        row["forward"] = w.forward;
        row["backward"] = w.backward;
        row["dss"] = w.dss;
        row["skipped"] = w.skipped;
        windows.append(row);
    }
    py::dict out;
    out["label"] = std::string(label_name(ls.label));
    out["global_mean"] = ls.global_mean;
    out["windows"] = windows;
    out["dss"] = ls.dss_max;
    out["argmax"] = ls.argmax;
    out["n_skipped"] = ls.n_skipped;
    return out;
}

py::dict m3_dict(const M3Params& p) {
    py::dict out;
    out["kappa"] = p.kappa;
    out["omegas"] = std::vector<double>(p.omegas.begin(), p.omegas.end());
    out["probs"] = std::vector<double>(p.probs.begin(), p.probs.end());
    return out;
}

ScenarioConfig scenario_config(const std::string& scenario, const std::string& diversity,
                               const std::string& syn_mix) {
    return make_scenario(scenario_from_name(scenario), diversity_from_name(diversity),
                         syn_mix_from_name(syn_mix));
}

}  // namespace

PYBIND11_MODULE(dsscan, m) {
    m.doc() = "Sliding-window Dss scans of codon alignments with synonymous/"
              "nonsynonymous decomposition and a parametric bootstrap";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
    py::register_exception<UsageError>(m, "UsageError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<CodonAlignment>(m, "Alignment")
        .def_property_readonly("taxa",
                               [](const CodonAlignment& a) { return a.taxa; })
        .def_property_readonly("n_taxa", &CodonAlignment::n_taxa)
        .def_property_readonly("n_codons", &CodonAlignment::n_codons)
        .def("codon",
             [](const CodonAlignment& a, int taxon, int site) {
                 if (taxon < 0 || taxon >= a.n_taxa() || site < 0 || site >= a.n_codons())
                     throw py::index_error("taxon/site out of range");
                 return static_cast<int>(a.rows[taxon][site]);
             },
             py::arg("taxon"), py::arg("site"),
             "Sense codon index (0..60), or -1 for missing data")
        .def("to_fasta", [](const CodonAlignment& a) { return to_fasta(a); })
        .def("to_phylip", [](const CodonAlignment& a) { return to_phylip(a); })
        .def("slice",
             [](const CodonAlignment& a, int start, int end) {
                 return slice_codons(a, start, end);
             },
             py::arg("start"), py::arg("end"), "Codon columns [start, end), 0-based")
        .def("variable_sites",
             [](const CodonAlignment& a) { return variable_sites(a); })
        .def("__eq__", [](const CodonAlignment& a,
                          const CodonAlignment& b) { return a == b; })
        .def("__repr__", [](const CodonAlignment& a) {
            return "<Alignment " + std::to_string(a.n_taxa()) + " taxa x " +
                   std::to_string(a.n_codons()) + " codons>";
        });

    m.def("parse",
          [](const std::string& text, const std::string& format) {
              return parse_alignment(text, format_from_name(format));
          },
          py::arg("text"), py::arg("format") = "auto",
          "Parse FASTA or sequential PHYLIP text into a codon alignment");

    m.def("read",
          [](const std::string& path, const std::string& format) {
              return read_alignment_file(path, format_from_name(format));
          },
          py::arg("path"), py::arg("format") = "auto");

    m.def("windows",
          [](int n_codons, int window_codons, int step_codons) {
              WindowSpec spec{window_codons, step_codons};
              return enumerate_windows(n_codons, spec);
          },
          py::arg("n_codons"), py::arg("window_codons") = 200, py::arg("step_codons") = 3,
          "Window (start, end) codon offsets, 0-based end-exclusive");

    m.def("distance_matrices",
          [](const CodonAlignment& aln, double kappa, double omega) {
              CodonModel model = model_for(aln, kappa, omega);
              LabeledDistanceSet set =
                  labeled_distance_matrices(aln, 0, aln.n_codons(), model);
              py::dict out;
              out["t_hat"] = set.t_hat;
              out["all"] = set.d_all;
              out["syn"] = set.d_syn;
              out["nonsyn"] = set.d_nonsyn;
              out["saturated_pairs"] = set.saturated_pairs;
              return out;
          },
          py::arg("alignment"), py::arg("kappa") = 2.0, py::arg("omega") = 1.0,
          "Pairwise divergence times plus labeled distance matrices");

    m.def("scan",
          [](const CodonAlignment& aln, int window_codons, int step_codons,
             const std::vector<std::string>& labels, double kappa, double omega,
             int threads) {
              WindowSpec spec{window_codons, step_codons};
              ScanResult res =
                  scan_alignment(aln, spec, labels_from_names(labels), model_for(aln, kappa, omega), threads);
              py::dict out;
              for (const DssLandscape& ls : res.landscapes)
                  out[label_name(ls.label)] = landscape_dict(ls);
              out["saturated_pairs"] = res.saturated_pairs;
              return out;
          },
          py::arg("alignment"), py::arg("window_codons") = 200, py::arg("step_codons") = 3,
          py::arg("labels") = std::vector<std::string>{"all", "syn", "nonsyn"},
          py::arg("kappa") = 2.0, py::arg("omega") = 1.0, py::arg("threads") = 1,
          "Sliding-window Dss landscapes under fixed model parameters");

    m.def("fit_null",
          [](const CodonAlignment& aln) {
              NullFit fit = fit_null(aln);
              py::dict out;
              out["tree"] = fit.tree.to_newick();
              out["tree_ss"] = fit.tree_ss;
              out["kappa"] = fit.kappa;
              out["omega_bar"] = fit.omega_bar;
              out["m3"] = m3_dict(fit.m3.params);
              out["log_likelihood"] = fit.m3.log_likelihood;
              out["degenerate"] = fit.m3.degenerate;
              return out;
          },
          py::arg("alignment"),
          "Least-squares tree plus omega-mixture fit used as the bootstrap null");

    m.def("bootstrap_test",
          [](const CodonAlignment& aln, int window_codons, int step_codons, int B,
             std::uint64_t seed, const std::vector<std::string>& labels, int threads) {
              WindowSpec spec{window_codons, step_codons};
              BootstrapResult res =
                  bootstrap_test(aln, spec, labels_from_names(labels), B, seed, threads);
              py::dict out;
              out["B"] = res.B;
              out["seed"] = res.seed;
              out["kappa"] = res.null_fit.kappa;
              out["omega_bar"] = res.null_fit.omega_bar;
              out["tree"] = res.null_fit.tree.to_newick();
              py::dict per_label;
              for (const LabelBootstrap& lb : res.labels) {
                  py::dict row;
                  row["observed"] = lb.observed;
                  row["p_value"] = lb.p_value;
                  row["threshold95"] = lb.threshold95;
                  row["null_samples"] = lb.null_samples;
                  row["degenerate"] = lb.degenerate;
                  per_label[label_name(lb.label)] = row;
              }
              out["labels"] = per_label;
              return out;
          },
          py::arg("alignment"), py::arg("window_codons") = 200, py::arg("step_codons") = 3,
          py::arg("B") = 500, py::arg("seed") = 0,
          py::arg("labels") = std::vector<std::string>{"all", "syn", "nonsyn"},
          py::arg("threads") = 1,
          "Parametric bootstrap of the max-window Dss statistic");

    m.def("p_value",
          [](double observed, const std::vector<double>& samples) {
              return empirical_p_value(observed, samples);
          },
          py::arg("observed"), py::arg("samples"),
          "Empirical exceedance p-value: #{samples >= observed} / #samples");

    m.def("percentile95",
          [](const std::vector<double>& samples) { return percentile_95(samples); },
          py::arg("samples"), "Nearest-rank 95th percentile");

    m.def("simulate",
          [](const std::string& scenario, const std::string& diversity,
             const std::string& syn_mix, std::uint64_t seed,
             std::optional<int> codons) -> py::object {
              ScenarioConfig cfg = scenario_config(scenario, diversity, syn_mix);
              if (codons) {
                  if (cfg.kind == ScenarioKind::Recombination)
                      throw InvalidParameter(
                          "recombination length is length_a + length_b; codons= does not apply");
                  cfg.n_codons = *codons;
                  if (cfg.kind == ScenarioKind::Convergent) {
                      cfg.region_start = *codons / 2;
                      cfg.region_end = *codons;
                  }
              }
              cfg.validate();
              RngStream rng(seed);
              ConvergenceReport report;
              CodonAlignment aln = simulate_scenario(cfg, rng, &report);
              if (cfg.kind != ScenarioKind::Convergent) return py::cast(aln);
              py::dict rep;
              rep["variable_sites"] = report.variable_count;
              rep["eligible_sites"] = report.eligible;
              rep["converted_sites"] = report.converted;
              rep["insufficient"] = report.insufficient;
              return py::make_tuple(aln, rep);
          },
          py::arg("scenario") = "null", py::arg("diversity") = "high",
          py::arg("syn_mix") = "60", py::arg("seed") = 0, py::arg("codons") = py::none(),
          "Simulate one scenario alignment; convergent scenarios also return a report");

    m.def("simulate_tree",
          [](const std::string& newick, int n_codons, double kappa,
             const std::vector<double>& omegas, const std::vector<double>& probs,
             std::uint64_t seed) {
              Phylogeny tree = Phylogeny::from_newick(newick);
              M3Params params;
              params.kappa = kappa;
              if (omegas.size() != 3 || probs.size() != 3)
                  throw InvalidParameter("omegas and probs must each have 3 entries");
              std::copy(omegas.begin(), omegas.end(), params.omegas.begin());
              std::copy(probs.begin(), probs.end(), params.probs.begin());
              params.validate();
              MixtureModel mix =
                  build_mixture(params, Eigen::VectorXd::Constant(61, 1.0 / 61));
              RngStream rng(seed);
              return simulate_alignment(tree, n_codons, mix, rng);
          },
          py::arg("newick"), py::arg("n_codons"), py::arg("kappa") = 2.0,
          py::arg("omegas") = std::vector<double>{0.1, 0.8, 3.2},
          py::arg("probs") = std::vector<double>{0.8097, 0.1803, 0.01},
          py::arg("seed") = 0,
          "Evolve codons down an arbitrary newick tree under an omega mixture");

    m.def("fit_m3",
          [](const CodonAlignment& aln, const std::string& newick) {
              M3FitResult fit = fit_m3(aln, Phylogeny::from_newick(newick));
              py::dict out;
              out["params"] = m3_dict(fit.params);
              out["log_likelihood"] = fit.log_likelihood;
              out["degenerate"] = fit.degenerate;
              out["converged"] = fit.converged;
              out["sweeps"] = fit.sweeps;
              return out;
          },
          py::arg("alignment"), py::arg("tree"),
          "Maximum-likelihood three-class omega mixture on a fixed tree");

    m.def("nj_tree",
          [](const Eigen::MatrixXd& d, const std::vector<std::string>& names) {
              return nj_topology(d, names).to_newick();
          },
          py::arg("distances"), py::arg("names"),
          "Neighbor-joining topology as newick");

    m.def("ls_tree",
          [](const Eigen::MatrixXd& d, const std::vector<std::string>& names) {
              LsFit fit = ls_tree_search(d, names);
              return py::make_tuple(fit.tree.to_newick(), fit.ss);
          },
          py::arg("distances"), py::arg("names"),
          "Least-squares tree (exhaustive for <= 6 taxa, NJ+NNI beyond) and its "
          "residual sum of squares");

    m.def("tree_distances",
          [](const std::string& newick) {
              Phylogeny t = Phylogeny::from_newick(newick);
              return py::make_tuple(t.tip_names, t.tip_distances());
          },
          py::arg("newick"), "Tip names and the patristic distance matrix");
}
