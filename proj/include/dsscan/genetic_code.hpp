#pragma once

#include <array>
#include <istream>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "dsscan/errors.hpp"

namespace dsscan {

// Nucleotides are indexed A=0, C=1, G=2, T=3; a codon's packed code is
// 16*n1 + 4*n2 + n3 in [0, 64). Sense codons get dense indices 0..n_sense-1
// in packed-code order; stop codons have no sense index.
class GeneticCode {
public:
    struct Neighbor {
        int to;            // sense index of the neighboring codon
        int position;      // 0..2, which codon position differs
        bool transition;   // A<->G or C<->T
        bool synonymous;   // same encoded amino acid
    };

    // The standard nuclear code (61 sense codons, stops TAA/TAG/TGA).
    static std::shared_ptr<const GeneticCode> standard();

    // Load an alternative code: 64 whitespace-separated "TRIPLET AA" records,
    // with '*' marking stops. Every triplet must appear exactly once.
    static std::shared_ptr<const GeneticCode> from_table(std::istream& in);

    int n_sense() const { return static_cast<int>(sense_triplets_.size()); }

    // -1 for stops and for triplets containing non-ACGT characters.
    int sense_index(std::string_view triplet) const;
    bool is_stop(std::string_view triplet) const;

    const std::string& triplet(int sense_idx) const { return sense_triplets_[sense_idx]; }
    char amino_acid(int sense_idx) const { return sense_aa_[sense_idx]; }
    bool synonymous(int i, int j) const { return sense_aa_[i] == sense_aa_[j]; }

    // All sense codons reachable by a single nucleotide change.
    const std::vector<Neighbor>& neighbors(int sense_idx) const {
        return neighbors_[sense_idx];
    }

    static int nucleotide_index(char c);
    static bool is_transition(int a, int b) {
        return (a == 0 && b == 2) || (a == 2 && b == 0) || (a == 1 && b == 3) ||
               (b == 1 && a == 3);
    }

private:
    GeneticCode() = default;
    void finalize(const std::array<char, 64>& aa_by_packed);

    std::vector<std::string> sense_triplets_;
    std::vector<char> sense_aa_;
    std::array<int, 64> sense_by_packed_{};   // -1 for stops
    std::array<char, 64> aa_by_packed_{};
    std::vector<std::vector<Neighbor>> neighbors_;
};

}  // namespace dsscan
