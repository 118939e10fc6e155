#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "dsscan/genetic_code.hpp"

namespace dsscan {

// Sense-codon index per column, or kMissingCodon for anything unresolvable
// (gaps, ambiguity characters, a terminal stop codon).
constexpr std::int16_t kMissingCodon = -1;

struct CodonAlignment {
    std::vector<std::string> taxa;
    std::vector<std::vector<std::int16_t>> rows;  // rows[taxon][codon]
    std::shared_ptr<const GeneticCode> code;

    int n_taxa() const { return static_cast<int>(taxa.size()); }
    int n_codons() const { return rows.empty() ? 0 : static_cast<int>(rows[0].size()); }

    bool operator==(const CodonAlignment& other) const {
        return taxa == other.taxa && rows == other.rows;
    }
};

enum class SeqFormat { Auto, Fasta, Phylip };

// Parse FASTA or sequential PHYLIP into codon states. Validates: equal row
// lengths, length divisible by 3, unique non-empty taxon names, no internal
// stop codons. A stop in the final column becomes missing data.
CodonAlignment parse_alignment(std::string_view text, SeqFormat format = SeqFormat::Auto,
                               std::shared_ptr<const GeneticCode> code = nullptr);

CodonAlignment read_alignment_file(const std::filesystem::path& path,
                                   SeqFormat format = SeqFormat::Auto,
                                   std::shared_ptr<const GeneticCode> code = nullptr);

// FASTA with 60-column wrapped sequence lines; missing codons are "---".
std::string to_fasta(const CodonAlignment& aln);
// Sequential PHYLIP (header, then one "name  sequence" record per taxon).
std::string to_phylip(const CodonAlignment& aln);

// Codon columns [start, end), 0-based.
CodonAlignment slice_codons(const CodonAlignment& aln, int start, int end);

// 0-based indices of columns with at least two distinct non-missing states.
std::vector<int> variable_sites(const CodonAlignment& aln);

// F1x4 codon frequencies: empirical nucleotide frequencies pooled over all
// positions, zero counts floored at 1e-6, product per codon renormalized
// over sense codons.
Eigen::VectorXd f1x4_frequencies(const CodonAlignment& aln);

}  // namespace dsscan
