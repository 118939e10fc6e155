// dsscan: sliding-window Dss scans of codon alignments, parametric bootstrap
// significance tests, scenario simulation, and power/false-positive studies.
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dsscan/alignment.hpp"
#include "dsscan/bootstrap.hpp"
#include "dsscan/dss.hpp"
#include "dsscan/errors.hpp"
#include "dsscan/kv_config.hpp"
#include "dsscan/rng.hpp"
#include "dsscan/simulate.hpp"
#include "dsscan/study.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dsscan;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// Shortest round-trip decimal rendering, shared by CSV and JSON output so
// runs compare byte-for-byte.
std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    return json(x).dump();
}

std::uint64_t fnv1a_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read file for digest: " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 14];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
        if (!in) break;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("short write to " + path.string());
}

// Run manifest: every command drops one next to its outputs, and `replay`
// re-executes from it and verifies the recorded digests.
class ManifestBuilder {
public:
    ManifestBuilder(std::string command, fs::path out_dir)
        : out_dir_(std::move(out_dir)), start_(std::chrono::steady_clock::now()) {
        doc_["tool"] = "dsscan";
        doc_["version"] = kToolVersion;
        doc_["command"] = std::move(command);
        doc_["inputs"] = json::object();
        doc_["outputs"] = json::object();
    }

    json& params() { return doc_["parameters"]; }

    void add_input(const fs::path& path) {
        doc_["inputs"][path.string()] = hex64(fnv1a_file(path));
    }

    // write file contents under the output directory and record the digest
    void emit(const std::string& name, const std::string& text) {
        write_text(out_dir_ / name, text);
        doc_["outputs"][name] = hex64(fnv1a_file(out_dir_ / name));
    }

    void finish() {
        auto wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_);
        doc_["wall_seconds"] = wall.count();
        write_text(out_dir_ / "manifest.json", doc_.dump(2) + "\n");
    }

    const json& doc() const { return doc_; }

private:
    fs::path out_dir_;
    json doc_;
    std::chrono::steady_clock::time_point start_;
};

// ---- shared option blocks ---------------------------------------------------

struct WindowOptions {
    int window_nt = 0;   // nucleotides, must be divisible by 3
    int step_nt = 0;
    int window_codons = 0;
    int step_codons = 0;

    void attach(CLI::App* cmd, int default_window, int default_step) {
        cmd->add_option("--window", window_nt,
                        "Window size in nucleotides (divisible by 3; default " +
                            std::to_string(3 * default_window) + ")");
        cmd->add_option("--step", step_nt,
                        "Step size in nucleotides (divisible by 3; default " +
                            std::to_string(3 * default_step) + ")");
        cmd->add_option("--window-codons", window_codons, "Window size in codons");
        cmd->add_option("--step-codons", step_codons, "Step size in codons");
    }

    WindowSpec resolve(int default_window = 200, int default_step = 3) const {
        WindowSpec spec{default_window, default_step};
        if (window_nt && window_codons)
            throw UsageError("give --window or --window-codons, not both");
        if (step_nt && step_codons) throw UsageError("give --step or --step-codons, not both");
        if (window_nt) {
            if (window_nt % 3) throw UsageError("--window must be divisible by 3");
            spec.window_codons = window_nt / 3;
        } else if (window_codons) {
            spec.window_codons = window_codons;
        }
        if (step_nt) {
            if (step_nt % 3) throw UsageError("--step must be divisible by 3");
            spec.step_codons = step_nt / 3;
        } else if (step_codons) {
            spec.step_codons = step_codons;
        }
        return spec;
    }
};

std::vector<Label> parse_labels(const std::string& csv) {
    std::vector<Label> labels;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        labels.push_back(label_from_name(item));
    }
    if (labels.empty()) throw UsageError("--labels must name at least one of all,syn,nonsyn");
    for (std::size_t i = 0; i < labels.size(); ++i)
        for (std::size_t j = i + 1; j < labels.size(); ++j)
            if (labels[i] == labels[j]) throw UsageError("--labels lists a label twice");
    return labels;
}

std::string labels_csv(const std::vector<Label>& labels) {
    std::string out;
    for (const Label& l : labels) {
        if (!out.empty()) out += ",";
        out += label_name(l);
    }
    return out;
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> seed) {
    if (seed) return *seed;
    std::random_device rd;
    std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    std::cerr << "note: no --seed given; using " << s << "\n";
    return s;
}

// ---- CSV writers ------------------------------------------------------------

// Landscape rows use 1-based codon coordinates; `mid` is the first codon of
// the second half-window, matching how landscapes are plotted.
std::string landscape_csv(const DssLandscape& land, int window_codons,
                          std::optional<double> threshold) {
    std::ostringstream out;
    out << "start,mid,end,dss_forward,dss_backward,dss,skipped";
    if (threshold) out << ",threshold95";
    out << "\n";
    for (const WindowDss& w : land.windows) {
        int start1 = w.start + 1;
        int mid1 = w.start + window_codons / 2 + 1;
        out << start1 << "," << mid1 << "," << w.end << ",";
        if (w.skipped) {
            out << ",,,1";
        } else {
            out << fmt_double(w.forward) << "," << fmt_double(w.backward) << ","
                << fmt_double(w.dss) << ",0";
        }
        if (threshold) out << "," << fmt_double(*threshold);
        out << "\n";
    }
    return out.str();
}

json landscape_summary(const DssLandscape& land) {
    json j;
    j["label"] = label_name(land.label);
    j["global_mean"] = land.global_mean;
    j["dss_max"] = land.dss_max;
    j["argmax_start"] = land.windows[land.argmax].start + 1;  // 1-based
    j["argmax_end"] = land.windows[land.argmax].end;
    j["n_windows"] = land.windows.size();
    j["n_skipped"] = land.n_skipped;
    return j;
}

json m3_json(const M3Params& p) {
    json j;
    j["kappa"] = p.kappa;
    j["omegas"] = p.omegas;
    j["probs"] = p.probs;
    j["mean_omega"] = p.mean_omega();
    return j;
}

// JSON cannot carry -inf; degenerate replicate maxima become null.
json null_samples_json(const std::vector<double>& samples) {
    json arr = json::array();
    for (double s : samples) {
        if (std::isinf(s) && s < 0)
            arr.push_back(nullptr);
        else
            arr.push_back(s);
    }
    return arr;
}

// ---- scenario plumbing ------------------------------------------------------

int kv_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        int out = std::stoi(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for " + key + ": " + v);
    }
}

double kv_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad number for " + key + ": " + v);
    }
}

std::uint64_t kv_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        std::uint64_t out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("bad seed for " + key + ": " + v);
    }
}

// Scenario selection: CLI presets, optionally refined by a key=value file.
// File keys win over the preset flags; the manifest records resolved values.
struct ScenarioOptions {
    std::string scenario = "null";
    std::string diversity = "high";
    std::string syn_mix = "60";
    std::string config_file;

    void attach(CLI::App* cmd) {
        cmd->add_option("--scenario", scenario, "null, recombination, or convergent");
        cmd->add_option("--diversity", diversity, "high, medium, or low");
        cmd->add_option("--syn-mix", syn_mix, "target synonymous share: 50, 60, or 75");
        cmd->add_option("--scenario-config", config_file,
                        "key=value file overriding scenario fields");
    }

    // `extra` receives unconsumed keys the caller may claim (study settings);
    // leftovers raise ConfigError inside apply_overrides.
    ScenarioConfig resolve(std::map<std::string, std::string>* extra = nullptr) {
        std::map<std::string, std::string> kv;
        if (!config_file.empty()) kv = parse_kv_file(config_file);
        if (auto it = kv.find("scenario"); it != kv.end()) {
            scenario = it->second;
            kv.erase(it);
        }
        if (auto it = kv.find("diversity"); it != kv.end()) {
            diversity = it->second;
            kv.erase(it);
        }
        if (auto it = kv.find("syn_mix"); it != kv.end()) {
            syn_mix = it->second;
            kv.erase(it);
        }
        if (extra) {
            // peel off keys the caller understands before scenario parsing
            for (auto it = kv.begin(); it != kv.end();) {
                if (extra->count(it->first)) {
                    (*extra)[it->first] = it->second;
                    it = kv.erase(it);
                } else {
                    ++it;
                }
            }
        }
        ScenarioConfig cfg = make_scenario(scenario_from_name(scenario),
                                           diversity_from_name(diversity),
                                           syn_mix_from_name(syn_mix));
        apply_overrides(cfg, kv);
        cfg.validate();
        return cfg;
    }

    static void apply_overrides(ScenarioConfig& cfg,
                                const std::map<std::string, std::string>& kv) {
        for (const auto& [key, value] : kv) {
            if (key == "codons")
                cfg.n_codons = kv_int(key, value);
            else if (key == "length_a")
                cfg.length_a = kv_int(key, value);
            else if (key == "length_b")
                cfg.length_b = kv_int(key, value);
            else if (key == "tree_a")
                cfg.tree_a = Phylogeny::from_newick(value);
            else if (key == "tree_b")
                cfg.tree_b = Phylogeny::from_newick(value);
            else if (key == "targets") {
                cfg.target_taxa.clear();
                std::stringstream ss(value);
                std::string t;
                while (std::getline(ss, t, ','))
                    if (!t.empty()) cfg.target_taxa.push_back(t);
            } else if (key == "region_start")
                cfg.region_start = kv_int(key, value) - 1;  // 1-based in files
            else if (key == "region_end")
                cfg.region_end = kv_int(key, value);
            else if (key == "convert_fraction")
                cfg.convert_fraction = kv_double(key, value);
            else if (key == "kappa")
                cfg.m3.kappa = kv_double(key, value);
            else
                throw ConfigError("unknown scenario key: " + key);
        }
        if (cfg.kind == ScenarioKind::Recombination)
            cfg.n_codons = cfg.length_a + cfg.length_b;
    }
};

json scenario_json(const ScenarioConfig& cfg) {
    json j;
    j["kind"] = scenario_name(cfg.kind);
    j["m3"] = m3_json(cfg.m3);
    j["tree_a"] = cfg.tree_a.to_newick();
    if (cfg.kind == ScenarioKind::Recombination) {
        j["tree_b"] = cfg.tree_b.to_newick();
        j["length_a"] = cfg.length_a;
        j["length_b"] = cfg.length_b;
        j["breakpoint_codon"] = cfg.length_a;  // last codon of the first segment
    } else {
        j["codons"] = cfg.n_codons;
    }
    if (cfg.kind == ScenarioKind::Convergent) {
        j["targets"] = cfg.target_taxa;
        j["region_start"] = cfg.region_start + 1;
        j["region_end"] = cfg.region_end;
        j["convert_fraction"] = cfg.convert_fraction;
    }
    return j;
}

// ---- subcommand implementations ----------------------------------------------

struct CommonArgs {
    std::string alignment;
    std::string out_dir = ".";
    std::string labels = "all,syn,nonsyn";
    std::optional<std::uint64_t> seed;
    int threads = 1;
};

// Plug-in model for scanning: fitted once globally unless overridden.
CodonModel resolve_scan_model(const CodonAlignment& aln, std::optional<double> kappa,
                              std::optional<double> omega, json& fitted_out) {
    if (kappa && omega) {
        fitted_out["source"] = "fixed";
        fitted_out["kappa"] = *kappa;
        fitted_out["omega_bar"] = *omega;
        return build_model(*kappa, *omega, f1x4_frequencies(aln), aln.code);
    }
    NullFit fit = fit_null(aln);
    fitted_out["source"] = "fitted";
    fitted_out["kappa"] = fit.kappa;
    fitted_out["omega_bar"] = fit.omega_bar;
    fitted_out["m3"] = m3_json(fit.m3.params);
    fitted_out["tree"] = fit.tree.to_newick();
    fitted_out["degenerate"] = fit.m3.degenerate;
    if (kappa) fitted_out["kappa"] = *kappa;
    if (omega) fitted_out["omega_bar"] = *omega;
    double k = kappa.value_or(fit.kappa);
    double w = omega.value_or(fit.omega_bar);
    return build_model(k, w, fit.pi, aln.code);
}

int cmd_scan(const CommonArgs& common, const WindowOptions& wopt,
             std::optional<double> kappa, std::optional<double> omega) {
    CodonAlignment aln = read_alignment_file(common.alignment);
    WindowSpec spec = wopt.resolve();
    std::vector<Label> labels = parse_labels(common.labels);

    ManifestBuilder manifest("scan", common.out_dir);
    manifest.add_input(common.alignment);
    manifest.params()["alignment"] = common.alignment;
    manifest.params()["window_codons"] = spec.window_codons;
    manifest.params()["step_codons"] = spec.step_codons;
    manifest.params()["labels"] = labels_csv(labels);
    manifest.params()["threads"] = common.threads;
    if (kappa) manifest.params()["kappa"] = *kappa;
    if (omega) manifest.params()["omega"] = *omega;

    json model_info;
    CodonModel model = resolve_scan_model(aln, kappa, omega, model_info);
    ScanResult res = scan_alignment(aln, spec, labels, model, common.threads);

    json result;
    result["tool"] = "dsscan";
    result["version"] = kToolVersion;
    result["command"] = "scan";
    result["n_taxa"] = aln.n_taxa();
    result["n_codons"] = aln.n_codons();
    result["window_codons"] = spec.window_codons;
    result["step_codons"] = spec.step_codons;
    result["model"] = model_info;
    result["saturated_pairs"] = res.saturated_pairs;
    result["landscapes"] = json::object();
    for (const DssLandscape& land : res.landscapes) {
        result["landscapes"][label_name(land.label)] = landscape_summary(land);
        manifest.emit(std::string("landscape_") + label_name(land.label) + ".csv",
                      landscape_csv(land, spec.window_codons, std::nullopt));
    }
    manifest.emit("result.json", result.dump(2) + "\n");
    manifest.finish();
    return 0;
}

int cmd_test(const CommonArgs& common, const WindowOptions& wopt, int B, double alpha) {
    CodonAlignment aln = read_alignment_file(common.alignment);
    WindowSpec spec = wopt.resolve();
    std::vector<Label> labels = parse_labels(common.labels);
    std::uint64_t seed = resolve_seed(common.seed);

    ManifestBuilder manifest("test", common.out_dir);
    manifest.add_input(common.alignment);
    manifest.params()["alignment"] = common.alignment;
    manifest.params()["window_codons"] = spec.window_codons;
    manifest.params()["step_codons"] = spec.step_codons;
    manifest.params()["labels"] = labels_csv(labels);
    manifest.params()["B"] = B;
    manifest.params()["alpha"] = alpha;
    manifest.params()["seed"] = seed;
    manifest.params()["threads"] = common.threads;

    BootstrapResult boot = bootstrap_test(aln, spec, labels, B, seed, common.threads);

    json result;
    result["tool"] = "dsscan";
    result["version"] = kToolVersion;
    result["command"] = "test";
    result["n_taxa"] = aln.n_taxa();
    result["n_codons"] = aln.n_codons();
    result["window_codons"] = spec.window_codons;
    result["step_codons"] = spec.step_codons;
    result["B"] = B;
    result["alpha"] = alpha;
    result["seed"] = seed;
    result["null_tree"] = boot.null_fit.tree.to_newick();
    result["null_m3"] = m3_json(boot.null_fit.m3.params);
    result["kappa"] = boot.null_fit.kappa;
    result["omega_bar"] = boot.null_fit.omega_bar;
    result["saturated_pairs"] = boot.observed.saturated_pairs;
    result["labels"] = json::object();

    std::map<std::string, bool> significant;
    for (const LabelBootstrap& lb : boot.labels) {
        json j;
        j["observed"] = lb.observed;
        j["p_value"] = lb.p_value;
        j["threshold95"] = lb.threshold95;
        j["degenerate_replicates"] = lb.degenerate;
        j["significant"] = lb.p_value <= alpha;
        j["null_samples"] = null_samples_json(lb.null_samples);
        j["landscape"] = landscape_summary(boot.observed.landscape(lb.label));
        result["labels"][label_name(lb.label)] = j;
        significant[label_name(lb.label)] = lb.p_value <= alpha;

        manifest.emit(std::string("landscape_") + label_name(lb.label) + ".csv",
                      landscape_csv(boot.observed.landscape(lb.label), spec.window_codons,
                                    lb.threshold95));
    }

    // interpretation: recombination shows up in the synonymous signal,
    // convergent selection does not
    if (significant.size() == 3) {
        bool all_sig = significant["all"], syn_sig = significant["syn"],
             nonsyn_sig = significant["nonsyn"];
        const char* decision = "no signal";
        if (all_sig && syn_sig)
            decision = "recombination-consistent";
        else if ((all_sig || nonsyn_sig) && !syn_sig)
            decision = "convergence-consistent";
        result["decision"] = decision;
    }

    manifest.emit("result.json", result.dump(2) + "\n");
    manifest.finish();
    return 0;
}

int cmd_simulate(ScenarioOptions sopt, const std::string& out_dir, int replicates,
                 std::optional<std::uint64_t> seed_opt, const std::string& format) {
    if (replicates < 1) throw UsageError("--replicates must be positive");
    if (format != "fasta" && format != "phylip")
        throw UsageError("--format must be fasta or phylip");
    ScenarioConfig cfg = sopt.resolve();
    std::uint64_t seed = resolve_seed(seed_opt);

    ManifestBuilder manifest("simulate", out_dir);
    manifest.params()["scenario"] = scenario_name(cfg.kind);
    manifest.params()["diversity"] = sopt.diversity;
    manifest.params()["syn_mix"] = sopt.syn_mix;
    if (!sopt.config_file.empty()) {
        manifest.params()["scenario_config"] = sopt.config_file;
        manifest.add_input(sopt.config_file);
    }
    manifest.params()["replicates"] = replicates;
    manifest.params()["seed"] = seed;
    manifest.params()["format"] = format;
    manifest.params()["scenario_detail"] = scenario_json(cfg);

    json reps = json::array();
    for (int r = 0; r < replicates; ++r) {
        RngStream rng = RngStream(seed).derive("sim").derive(static_cast<std::uint64_t>(r));
        ConvergenceReport report;
        CodonAlignment aln = simulate_scenario(cfg, rng, &report);
        char name[64];
        std::snprintf(name, sizeof name, "replicate_%04d.%s", r,
                      format == "fasta" ? "fasta" : "phy");
        manifest.emit(name, format == "fasta" ? to_fasta(aln) : to_phylip(aln));
        json meta;
        meta["file"] = name;
        meta["stream"] = hex64(rng.key());
        if (cfg.kind == ScenarioKind::Convergent) {
            meta["variable_sites"] = report.variable_count;
            meta["eligible_sites"] = report.eligible;
            meta["converted_sites"] = report.converted;
            meta["insufficient"] = report.insufficient;
        }
        reps.push_back(meta);
    }
    manifest.params()["replicate_detail"] = reps;
    manifest.finish();
    return 0;
}

// replicates.csv carries per-replicate outcomes so interrupted studies can
// resume without repeating finished work.
std::string replicates_csv(const std::vector<ReplicateOutcome>& outcomes) {
    std::ostringstream out;
    out << "index,ok,p_all,p_syn,p_nonsyn,error\n";
    for (const ReplicateOutcome& o : outcomes) {
        out << o.index << "," << (o.ok ? 1 : 0) << ",";
        if (o.ok) {
            out << fmt_double(o.p[0]) << "," << fmt_double(o.p[1]) << ","
                << fmt_double(o.p[2]);
        } else {
            out << ",,";
        }
        std::string err = o.error;
        for (char& c : err)
            if (c == ',' || c == '\n') c = ';';
        out << "," << err << "\n";
    }
    return out.str();
}

std::vector<ReplicateOutcome> parse_replicates_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::vector<ReplicateOutcome> out;
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (header) {
            header = false;
            continue;
        }
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        while (fields.size() < 6) fields.push_back("");
        ReplicateOutcome o;
        o.index = std::stoi(fields[0]);
        o.ok = fields[1] == "1";
        if (o.ok) {
            o.p[0] = std::stod(fields[2]);
            o.p[1] = std::stod(fields[3]);
            o.p[2] = std::stod(fields[4]);
        }
        o.error = fields[5];
        out.push_back(o);
    }
    return out;
}

std::string study_csv(const StudyResult& res) {
    std::ostringstream out;
    out << "scenario,label,replicates,rejections,rate,ci_low,ci_high\n";
    for (const StudyRow& row : res.rows) {
        out << row.scenario << "," << row.label << "," << row.replicates << ","
            << row.rejections << "," << fmt_double(row.rate) << ","
            << fmt_double(row.ci_low) << "," << fmt_double(row.ci_high) << "\n";
    }
    return out.str();
}

int cmd_study(ScenarioOptions sopt, const std::string& out_dir, int replicates,
              int B, double alpha, const WindowOptions& wopt,
              std::optional<std::uint64_t> seed_opt, int threads, bool resume) {
    // study-level settings may live in the same config file as the scenario
    std::map<std::string, std::string> extra = {
        {"replicates", ""}, {"bootstrap", ""},      {"alpha", ""},
        {"seed", ""},       {"window_codons", ""},  {"step_codons", ""}};
    StudyConfig cfg;
    cfg.scenario = sopt.resolve(&extra);
    cfg.window = wopt.resolve(200, 12);
    if (!extra["replicates"].empty()) replicates = kv_int("replicates", extra["replicates"]);
    if (!extra["bootstrap"].empty()) B = kv_int("bootstrap", extra["bootstrap"]);
    if (!extra["alpha"].empty()) alpha = kv_double("alpha", extra["alpha"]);
    if (!extra["seed"].empty()) seed_opt = kv_u64("seed", extra["seed"]);
    if (!extra["window_codons"].empty())
        cfg.window.window_codons = kv_int("window_codons", extra["window_codons"]);
    if (!extra["step_codons"].empty())
        cfg.window.step_codons = kv_int("step_codons", extra["step_codons"]);
    cfg.replicates = replicates;
    cfg.bootstrap_b = B;
    cfg.alpha = alpha;
    cfg.threads = threads;

    // Resuming only makes sense against the identical study: check the
    // recorded manifest and refuse to mix rows from different parameters.
    // alpha and the replicate target may change; they do not affect rows.
    fs::path out(out_dir);
    std::vector<ReplicateOutcome> already;
    json prev_params;
    const bool resuming = resume && fs::exists(out / "replicates.csv");
    if (resuming) {
        std::ifstream prev_in(out / "manifest.json");
        if (!prev_in)
            throw DataError("--resume: no manifest.json next to replicates.csv in " + out_dir);
        json prev;
        try {
            prev_in >> prev;
        } catch (const json::exception& e) {
            throw DataError("--resume: manifest.json unreadable: " + std::string(e.what()));
        }
        prev_params = prev.value("parameters", json::object());
        // a resumed run may omit --seed; the recorded one carries on
        if (!seed_opt && prev_params.contains("seed"))
            seed_opt = prev_params["seed"].get<std::uint64_t>();
    }
    cfg.seed = resolve_seed(seed_opt);
    if (resuming) {
        const json must_match = {{"scenario_detail", scenario_json(cfg.scenario)},
                                 {"B", cfg.bootstrap_b},
                                 {"seed", cfg.seed},
                                 {"window_codons", cfg.window.window_codons},
                                 {"step_codons", cfg.window.step_codons}};
        for (const auto& [key, value] : must_match.items())
            if (prev_params.value(key, json()) != value)
                throw DataError("--resume: " + key +
                                " differs from the recorded run; refusing to mix replicates");
        already = parse_replicates_csv(out / "replicates.csv");
    }

    ManifestBuilder manifest("study", out_dir);
    manifest.params()["scenario"] = scenario_name(cfg.scenario.kind);
    manifest.params()["diversity"] = sopt.diversity;
    manifest.params()["syn_mix"] = sopt.syn_mix;
    if (!sopt.config_file.empty()) {
        manifest.params()["scenario_config"] = sopt.config_file;
        manifest.add_input(sopt.config_file);
    }
    manifest.params()["replicates"] = cfg.replicates;
    manifest.params()["B"] = cfg.bootstrap_b;
    manifest.params()["alpha"] = cfg.alpha;
    manifest.params()["window_codons"] = cfg.window.window_codons;
    manifest.params()["step_codons"] = cfg.window.step_codons;
    manifest.params()["seed"] = cfg.seed;
    manifest.params()["threads"] = cfg.threads;
    manifest.params()["scenario_detail"] = scenario_json(cfg.scenario);
    manifest.params()["resumed_replicates"] = already.size();

    // progress lands on stderr; the CSV is rewritten after every replicate so
    // an interrupted run can resume
    fs::create_directories(out);
    std::vector<ReplicateOutcome> done = already;
    auto flush_csv = [&](const std::vector<ReplicateOutcome>& outcomes) {
        write_text(out / "replicates.csv", replicates_csv(outcomes));
    };
    StudyResult res = run_study(cfg, already, [&](const ReplicateOutcome& o) {
        done.push_back(o);
        std::vector<ReplicateOutcome> sorted = done;
        std::sort(sorted.begin(), sorted.end(),
                  [](const ReplicateOutcome& a, const ReplicateOutcome& b) {
                      return a.index < b.index;
                  });
        flush_csv(sorted);
        std::cerr << "replicate " << o.index << (o.ok ? " done" : " failed") << "\n";
    });

    manifest.emit("replicates.csv", replicates_csv(res.outcomes));
    manifest.emit("study.csv", study_csv(res));

    json result;
    result["tool"] = "dsscan";
    result["version"] = kToolVersion;
    result["command"] = "study";
    result["replicates"] = cfg.replicates;
    result["failed"] = res.failed;
    result["B"] = cfg.bootstrap_b;
    result["alpha"] = cfg.alpha;
    result["seed"] = cfg.seed;
    result["rows"] = json::array();
    for (const StudyRow& row : res.rows) {
        json j;
        j["scenario"] = row.scenario;
        j["label"] = row.label;
        j["replicates"] = row.replicates;
        j["rejections"] = row.rejections;
        j["rate"] = row.rate;
        j["ci_low"] = row.ci_low;
        j["ci_high"] = row.ci_high;
        result["rows"].push_back(j);
    }
    manifest.emit("result.json", result.dump(2) + "\n");
    manifest.finish();
    return 0;
}

int cmd_replay(const std::string& manifest_path, const std::string& out_dir) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot read manifest: " + manifest_path);
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("manifest is not valid JSON: " + std::string(e.what()));
    }
    if (doc.value("tool", "") != "dsscan") throw DataError("manifest not produced by dsscan");
    std::string command = doc.value("command", "");
    json params = doc.value("parameters", json::object());

    // inputs must still match what the original run saw (bind the object to a
    // local: iterating items() of the value() temporary would dangle)
    const json inputs = doc.value("inputs", json::object());
    for (auto& [path, digest] : inputs.items()) {
        std::string now = hex64(fnv1a_file(path));
        if (now != digest.get<std::string>())
            throw DataError("input changed since the original run: " + path);
    }

    CommonArgs common;
    common.out_dir = out_dir;
    WindowOptions wopt;
    int rc = 0;
    if (command == "scan" || command == "test") {
        common.alignment = params.at("alignment").get<std::string>();
        common.labels = params.at("labels").get<std::string>();
        common.threads = params.value("threads", 1);
        wopt.window_codons = params.at("window_codons").get<int>();
        wopt.step_codons = params.at("step_codons").get<int>();
        if (command == "scan") {
            std::optional<double> kappa, omega;
            if (params.contains("kappa")) kappa = params["kappa"].get<double>();
            if (params.contains("omega")) omega = params["omega"].get<double>();
            rc = cmd_scan(common, wopt, kappa, omega);
        } else {
            common.seed = params.at("seed").get<std::uint64_t>();
            rc = cmd_test(common, wopt, params.at("B").get<int>(),
                          params.at("alpha").get<double>());
        }
    } else if (command == "simulate" || command == "study") {
        ScenarioOptions sopt;
        sopt.scenario = params.at("scenario").get<std::string>();
        sopt.diversity = params.at("diversity").get<std::string>();
        sopt.syn_mix = params.at("syn_mix").get<std::string>();
        sopt.config_file = params.value("scenario_config", "");
        if (command == "simulate") {
            rc = cmd_simulate(sopt, out_dir, params.at("replicates").get<int>(),
                              params.at("seed").get<std::uint64_t>(),
                              params.at("format").get<std::string>());
        } else {
            wopt.window_codons = params.at("window_codons").get<int>();
            wopt.step_codons = params.at("step_codons").get<int>();
            rc = cmd_study(sopt, out_dir, params.at("replicates").get<int>(),
                           params.at("B").get<int>(), params.at("alpha").get<double>(),
                           wopt, params.at("seed").get<std::uint64_t>(),
                           params.value("threads", 1), false);
        }
    } else {
        throw DataError("manifest has unknown command: " + command);
    }
    if (rc != 0) return rc;

    // compare every recorded output digest against the fresh run
    int mismatches = 0;
    const json outputs = doc.value("outputs", json::object());
    for (auto& [name, digest] : outputs.items()) {
        std::string now = hex64(fnv1a_file(fs::path(out_dir) / name));
        bool ok = now == digest.get<std::string>();
        std::cout << (ok ? "match    " : "MISMATCH ") << name << "\n";
        if (!ok) ++mismatches;
    }
    if (mismatches > 0) {
        std::cerr << "error: " << mismatches << " output(s) differ from the manifest\n";
        return 2;
    }
    std::cout << "replay reproduced " << outputs.size() << " output file(s) exactly\n";
    return 0;
}

// CLI11 option callbacks signal bad values by returning false, which CLI11
// turns into a usage error instead of a crash further in.
bool parse_into(const std::string& text, std::optional<double>& out) {
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) return false;
        out = v;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

bool parse_into(const std::string& text, std::optional<std::uint64_t>& out) {
    try {
        std::size_t used = 0;
        std::uint64_t v = std::stoull(text, &used);
        if (used != text.size()) return false;
        out = v;
        return true;
    } catch (const std::exception&) {
        return false;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sliding-window Dss scans of codon alignments: detect phylogenetic "
                 "incongruence, split it into synonymous and nonsynonymous signal, and "
                 "test significance with a parametric bootstrap."};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a key=value file");

    CommonArgs common;
    WindowOptions wopt;
    std::optional<double> kappa, omega;
    int B = 500;
    double alpha = 0.05;

    // scan
    CLI::App* scan = app.add_subcommand("scan", "Compute Dss landscapes for an alignment");
    scan->add_option("alignment", common.alignment, "FASTA or PHYLIP codon alignment")
        ->required();
    wopt.attach(scan, 200, 3);
    scan->add_option("--labels", common.labels, "Comma list of all,syn,nonsyn");
    scan->add_option("--out", common.out_dir, "Output directory (default .)");
    scan->add_option("--threads", common.threads, "Worker threads (does not affect results)");
    scan->add_option("--kappa", [&kappa](const std::vector<std::string>& v) {
        return parse_into(v[0], kappa);
    }, "Fix the transition/transversion ratio instead of fitting it");
    scan->add_option("--omega", [&omega](const std::vector<std::string>& v) {
        return parse_into(v[0], omega);
    }, "Fix the nonsynonymous/synonymous ratio instead of fitting it");

    // test
    CLI::App* test = app.add_subcommand(
        "test", "Scan plus parametric bootstrap significance test");
    test->add_option("alignment", common.alignment, "FASTA or PHYLIP codon alignment")
        ->required();
    wopt.attach(test, 200, 3);
    test->add_option("--labels", common.labels, "Comma list of all,syn,nonsyn");
    test->add_option("--B", B, "Bootstrap replicates (default 500)");
    test->add_option("--alpha", alpha, "Significance level (default 0.05)");
    test->add_option("--seed", [&common](const std::vector<std::string>& v) {
        return parse_into(v[0], common.seed);
    }, "Random seed (generated and logged when absent)");
    test->add_option("--out", common.out_dir, "Output directory (default .)");
    test->add_option("--threads", common.threads, "Worker threads (does not affect results)");

    // simulate
    ScenarioOptions sopt;
    int replicates = 1;
    std::string format = "fasta";
    std::optional<std::uint64_t> sim_seed;
    CLI::App* simulate = app.add_subcommand("simulate", "Generate scenario alignments");
    sopt.attach(simulate);
    simulate->add_option("--replicates", replicates, "Alignments to generate (default 1)");
    simulate->add_option("--format", format, "fasta or phylip (default fasta)");
    simulate->add_option("--seed", [&sim_seed](const std::vector<std::string>& v) {
        return parse_into(v[0], sim_seed);
    }, "Random seed (generated and logged when absent)");
    simulate->add_option("--out", common.out_dir, "Output directory (default .)");

    // study
    ScenarioOptions study_sopt;
    int study_replicates = 100;
    int study_B = 100;
    double study_alpha = 0.05;
    std::optional<std::uint64_t> study_seed;
    int study_threads = 1;
    bool resume = false;
    WindowOptions study_wopt;
    CLI::App* study = app.add_subcommand(
        "study", "Replicate a scenario and tabulate rejection rates");
    study_sopt.attach(study);
    study->add_option("--replicates", study_replicates, "Scenario replicates (default 100)");
    study->add_option("--B", study_B, "Bootstrap replicates per scenario (default 100)");
    study->add_option("--alpha", study_alpha, "Significance level (default 0.05)");
    study_wopt.attach(study, 200, 12);
    study->add_option("--seed", [&study_seed](const std::vector<std::string>& v) {
        return parse_into(v[0], study_seed);
    }, "Random seed (generated and logged when absent)");
    study->add_option("--out", common.out_dir, "Output directory (default .)");
    study->add_option("--threads", study_threads, "Worker threads (does not affect results)");
    study->add_flag("--resume", resume, "Reuse finished replicates from replicates.csv");

    // replay
    std::string manifest_path;
    std::string replay_out = "replay_out";
    CLI::App* replay = app.add_subcommand("replay", "Re-run a manifest and verify digests");
    replay->add_option("manifest", manifest_path, "manifest.json from a previous run")
        ->required();
    replay->add_option("--out", replay_out, "Directory for the re-run outputs");

    try {
        app.parse(argc, argv);
        if (scan->parsed()) return cmd_scan(common, wopt, kappa, omega);
        if (test->parsed()) return cmd_test(common, wopt, B, alpha);
        if (simulate->parsed())
            return cmd_simulate(sopt, common.out_dir, replicates, sim_seed, format);
        if (study->parsed())
            return cmd_study(study_sopt, common.out_dir, study_replicates, study_B,
                             study_alpha, study_wopt, study_seed, study_threads, resume);
        if (replay->parsed()) return cmd_replay(manifest_path, replay_out);
        return 1;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);     // prints help/usage text
        return rc == 0 ? 0 : 1;   // --help exits 0, bad arguments exit 1
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
