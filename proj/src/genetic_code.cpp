#include "dsscan/genetic_code.hpp"

#include <cctype>
#include <sstream>

namespace dsscan {

namespace {

constexpr char kBases[4] = {'A', 'C', 'G', 'T'};

// Standard nuclear code keyed by triplet, in A/C/G/T alphabetical order.
constexpr const char* kStandardCode =
    "AAA K AAC N AAG K AAT N ACA T ACC T ACG T ACT T "
    "AGA R AGC S AGG R AGT S ATA I ATC I ATG M ATT I "
    "CAA Q CAC H CAG Q CAT H CCA P CCC P CCG P CCT P "
    "CGA R CGC R CGG R CGT R CTA L CTC L CTG L CTT L "
    "GAA E GAC D GAG E GAT D GCA A GCC A GCG A GCT A "
    "GGA G GGC G GGG G GGT G GTA V GTC V GTG V GTT V "
    "TAA * TAC Y TAG * TAT Y TCA S TCC S TCG S TCT S "
    "TGA * TGC C TGG W TGT C TTA L TTC F TTG L TTT F";

int packed_code(std::string_view triplet) {
    if (triplet.size() != 3) return -1;
    int code = 0;
    for (char c : triplet) {
        int b = GeneticCode::nucleotide_index(c);
        if (b < 0) return -1;
        code = code * 4 + b;
    }
    return code;
}

std::array<char, 64> parse_code_table(std::istream& in) {
    std::array<char, 64> aa{};
    aa.fill('\0');
    std::string triplet, sym;
    int records = 0;
    while (in >> triplet >> sym) {
        int code = packed_code(triplet);
        if (code < 0) throw ParseError("genetic code table: bad triplet '" + triplet + "'");
        if (sym.size() != 1 || !(std::isupper(static_cast<unsigned char>(sym[0])) || sym[0] == '*'))
            throw ParseError("genetic code table: bad amino acid symbol '" + sym + "'");
        if (aa[code] != '\0')
            throw ParseError("genetic code table: duplicate triplet '" + triplet + "'");
        aa[code] = sym[0];
        ++records;
    }
    if (records != 64) {
        std::ostringstream msg;
        msg << "genetic code table: expected 64 records, got " << records;
        throw ParseError(msg.str());
    }
    return aa;
}

}  // namespace

int GeneticCode::nucleotide_index(char c) {
    switch (c) {
        case 'A': case 'a': return 0;
        case 'C': case 'c': return 1;
        case 'G': case 'g': return 2;
        case 'T': case 't':
        case 'U': case 'u': return 3;  // RNA input
        default: return -1;
    }
}

void GeneticCode::finalize(const std::array<char, 64>& aa_by_packed) {
    aa_by_packed_ = aa_by_packed;
    sense_by_packed_.fill(-1);
    for (int code = 0; code < 64; ++code) {
        if (aa_by_packed[code] == '*') continue;
        std::string trip = {kBases[code / 16], kBases[(code / 4) % 4], kBases[code % 4]};
        sense_by_packed_[code] = static_cast<int>(sense_triplets_.size());
        sense_triplets_.push_back(trip);
        sense_aa_.push_back(aa_by_packed[code]);
    }
    if (sense_triplets_.empty()) throw ParseError("genetic code table: no sense codons");

    neighbors_.resize(sense_triplets_.size());
    for (int i = 0; i < n_sense(); ++i) {
        const std::string& from = sense_triplets_[i];
        for (int pos = 0; pos < 3; ++pos) {
            int orig = nucleotide_index(from[pos]);
            for (int b = 0; b < 4; ++b) {
                if (b == orig) continue;
                std::string alt = from;
                alt[pos] = kBases[b];
                int j = sense_by_packed_[packed_code(alt)];
                if (j < 0) continue;  // stop codon: substitution not allowed
                neighbors_[i].push_back(
                    {j, pos, is_transition(orig, b), synonymous(i, j)});
            }
        }
    }
}

std::shared_ptr<const GeneticCode> GeneticCode::standard() {
    static std::shared_ptr<const GeneticCode> instance = [] {
        std::istringstream in(kStandardCode);
        return from_table(in);
    }();
    return instance;
}

std::shared_ptr<const GeneticCode> GeneticCode::from_table(std::istream& in) {
    auto aa = parse_code_table(in);
    auto code = std::shared_ptr<GeneticCode>(new GeneticCode());
    code->finalize(aa);
    return code;
}

int GeneticCode::sense_index(std::string_view triplet) const {
    int code = packed_code(triplet);
    if (code < 0) return -1;
    return sense_by_packed_[code];
}

bool GeneticCode::is_stop(std::string_view triplet) const {
    int code = packed_code(triplet);
    return code >= 0 && aa_by_packed_[code] == '*';
}

}  // namespace dsscan
