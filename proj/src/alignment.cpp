#include "dsscan/alignment.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

#include "dsscan/errors.hpp"

namespace dsscan {

namespace {

bool is_sequence_char(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '-' || c == '.' ||
           c == '?' || c == '*' || c == '~';
}

struct RawAlignment {
    std::vector<std::string> names;
    std::vector<std::string> seqs;
};

RawAlignment parse_fasta(std::string_view text) {
    RawAlignment out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::string* current = nullptr;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '>') {
            std::string name = line.substr(1);
            // name is the first whitespace-delimited token of the header
            auto ws = name.find_first_of(" \t");
            if (ws != std::string::npos) name.resize(ws);
            if (name.empty()) throw ParseError("fasta: empty sequence name");
            out.names.push_back(name);
            out.seqs.emplace_back();
            current = &out.seqs.back();
        } else {
            if (!current) throw ParseError("fasta: sequence data before first header");
            for (char c : line) {
                if (std::isspace(static_cast<unsigned char>(c))) continue;
                if (!is_sequence_char(c))
                    throw ParseError(std::string("fasta: unexpected character '") + c +
                                     "' in sequence " + out.names.back());
                current->push_back(c);
            }
        }
    }
    if (out.names.empty()) throw ParseError("fasta: no sequences found");
    return out;
}

RawAlignment parse_phylip(std::string_view text) {
    std::istringstream in{std::string(text)};
    long n = 0, len = 0;
    if (!(in >> n >> len) || n <= 0 || len <= 0)
        throw ParseError("phylip: bad header (expected taxon count and length)");
    RawAlignment out;
    for (long i = 0; i < n; ++i) {
        std::string name;
        if (!(in >> name)) throw ParseError("phylip: unexpected end of input before name");
        std::string seq;
        seq.reserve(static_cast<std::size_t>(len));
        char c;
        while (static_cast<long>(seq.size()) < len && in.get(c)) {
            if (std::isspace(static_cast<unsigned char>(c))) continue;
            if (!is_sequence_char(c))
                throw ParseError(std::string("phylip: unexpected character '") + c +
                                 "' in sequence " + name);
            seq.push_back(c);
        }
        if (static_cast<long>(seq.size()) < len)
            throw ParseError("phylip: sequence " + name + " shorter than declared length");
        out.names.push_back(name);
        out.seqs.push_back(std::move(seq));
    }
    return out;
}

}  // namespace

CodonAlignment parse_alignment(std::string_view text, SeqFormat format,
                               std::shared_ptr<const GeneticCode> code) {
    if (!code) code = GeneticCode::standard();
    if (format == SeqFormat::Auto) {
        auto first = text.find_first_not_of(" \t\r\n");
        if (first == std::string_view::npos) throw ParseError("empty alignment input");
        format = (text[first] == '>') ? SeqFormat::Fasta : SeqFormat::Phylip;
    }
    RawAlignment raw =
        (format == SeqFormat::Fasta) ? parse_fasta(text) : parse_phylip(text);

    if (raw.names.size() < 2) throw TooFewTaxa("alignment needs at least two sequences");
    std::set<std::string> seen;
    for (const auto& name : raw.names)
        if (!seen.insert(name).second) throw DuplicateTaxon("duplicate taxon name: " + name);

    const std::size_t nt_len = raw.seqs[0].size();
    for (std::size_t i = 0; i < raw.seqs.size(); ++i) {
        if (raw.seqs[i].size() != nt_len) {
            std::ostringstream msg;
            msg << "sequence " << raw.names[i] << " has length " << raw.seqs[i].size()
                << ", expected " << nt_len;
            throw RaggedAlignment(msg.str());
        }
    }
    if (nt_len == 0) throw ParseError("alignment has zero-length sequences");
    if (nt_len % 3 != 0) {
        std::ostringstream msg;
        msg << "alignment length " << nt_len << " is not a multiple of 3";
        throw NotCodonAligned(msg.str());
    }

    const int n_codons = static_cast<int>(nt_len / 3);
    CodonAlignment aln;
    aln.taxa = raw.names;
    aln.code = code;
    aln.rows.resize(raw.names.size());
    for (std::size_t i = 0; i < raw.seqs.size(); ++i) {
        auto& row = aln.rows[i];
        row.resize(n_codons);
        const std::string& seq = raw.seqs[i];
        for (int s = 0; s < n_codons; ++s) {
            std::string_view trip(seq.data() + 3 * s, 3);
            int idx = code->sense_index(trip);
            if (idx < 0 && code->is_stop(trip)) {
                if (s + 1 < n_codons) {
                    std::ostringstream msg;
                    msg << "internal stop codon " << trip << " in " << raw.names[i]
                        << " at codon " << (s + 1);
                    throw InternalStop(msg.str());
                }
                // terminal stop: treat as missing data
            }
            row[s] = static_cast<std::int16_t>(idx < 0 ? kMissingCodon : idx);
        }
    }
    return aln;
}

CodonAlignment read_alignment_file(const std::filesystem::path& path, SeqFormat format,
                                   std::shared_ptr<const GeneticCode> code) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open alignment file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_alignment(buf.str(), format, std::move(code));
}

std::string to_fasta(const CodonAlignment& aln) {
    std::ostringstream out;
    for (int i = 0; i < aln.n_taxa(); ++i) {
        out << '>' << aln.taxa[i] << '\n';
        std::string seq;
        seq.reserve(static_cast<std::size_t>(aln.n_codons()) * 3);
        for (std::int16_t s : aln.rows[i])
            seq += (s == kMissingCodon) ? "---" : aln.code->triplet(s);
        for (std::size_t pos = 0; pos < seq.size(); pos += 60)
            out << seq.substr(pos, 60) << '\n';
    }
    return out.str();
}

std::string to_phylip(const CodonAlignment& aln) {
    std::ostringstream out;
    out << aln.n_taxa() << ' ' << aln.n_codons() * 3 << '\n';
    for (int i = 0; i < aln.n_taxa(); ++i) {
        out << aln.taxa[i] << "  ";
        for (std::int16_t s : aln.rows[i])
            out << ((s == kMissingCodon) ? "---" : aln.code->triplet(s));
        out << '\n';
    }
    return out.str();
}

CodonAlignment slice_codons(const CodonAlignment& aln, int start, int end) {
    if (start < 0 || end > aln.n_codons() || start >= end) {
        std::ostringstream msg;
        msg << "codon slice [" << start << ", " << end << ") out of range for length "
            << aln.n_codons();
        throw OutOfRange(msg.str());
    }
    CodonAlignment out;
    out.taxa = aln.taxa;
    out.code = aln.code;
    out.rows.resize(aln.rows.size());
    for (std::size_t i = 0; i < aln.rows.size(); ++i)
        out.rows[i].assign(aln.rows[i].begin() + start, aln.rows[i].begin() + end);
    return out;
}

std::vector<int> variable_sites(const CodonAlignment& aln) {
    std::vector<int> out;
    for (int s = 0; s < aln.n_codons(); ++s) {
        int first = kMissingCodon;
        bool variable = false;
        for (int i = 0; i < aln.n_taxa() && !variable; ++i) {
            std::int16_t v = aln.rows[i][s];
            if (v == kMissingCodon) continue;
            if (first == kMissingCodon)
                first = v;
            else if (v != first)
                variable = true;
        }
        if (variable) out.push_back(s);
    }
    return out;
}

Eigen::VectorXd f1x4_frequencies(const CodonAlignment& aln) {
    const GeneticCode& code = *aln.code;
    double counts[4] = {0, 0, 0, 0};
    for (const auto& row : aln.rows) {
        for (std::int16_t s : row) {
            if (s == kMissingCodon) continue;
            for (char c : code.triplet(s)) counts[GeneticCode::nucleotide_index(c)] += 1.0;
        }
    }
    double total = counts[0] + counts[1] + counts[2] + counts[3];
    double freq[4];
    if (total <= 0.0) {
        freq[0] = freq[1] = freq[2] = freq[3] = 0.25;
    } else {
        double renorm = 0.0;
        for (int b = 0; b < 4; ++b) {
            freq[b] = std::max(counts[b] / total, 1e-6);
            renorm += freq[b];
        }
        for (int b = 0; b < 4; ++b) freq[b] /= renorm;
    }
    Eigen::VectorXd pi(code.n_sense());
    for (int i = 0; i < code.n_sense(); ++i) {
        const std::string& trip = code.triplet(i);
        pi[i] = freq[GeneticCode::nucleotide_index(trip[0])] *
                freq[GeneticCode::nucleotide_index(trip[1])] *
                freq[GeneticCode::nucleotide_index(trip[2])];
    }
    pi /= pi.sum();
    return pi;
}

}  // namespace dsscan
