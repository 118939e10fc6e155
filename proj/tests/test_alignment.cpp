#include <string>

#include "doctest.h"
#include "dsscan/alignment.hpp"
#include "test_helpers.hpp"

using namespace dsscan;

TEST_CASE("FASTA parsing maps codons to sense indices") {
    auto code = GeneticCode::standard();
    CodonAlignment aln = parse_alignment(">alpha\nATGAAA\n>beta\nATGAAG\n");
    REQUIRE(aln.n_taxa() == 2);
    REQUIRE(aln.n_codons() == 2);
    CHECK(aln.taxa[0] == "alpha");
    CHECK(aln.taxa[1] == "beta");
    CHECK(aln.rows[0][0] == code->sense_index("ATG"));
    CHECK(aln.rows[0][1] == code->sense_index("AAA"));
    CHECK(aln.rows[1][1] == code->sense_index("AAG"));
}

TEST_CASE("FASTA handles wrapped lines, case, and description tails") {
    CodonAlignment aln = parse_alignment(">a description text\natg\nAAA\n>b\nATGAAA\n");
    CHECK(aln.taxa[0] == "a");
    CHECK(aln.rows[0] == aln.rows[1]);
}

TEST_CASE("PHYLIP parses to the same states as FASTA") {
    CodonAlignment f = parse_alignment(">a\nATGAAA\n>b\nATGAAG\n", SeqFormat::Fasta);
    CodonAlignment p = parse_alignment(" 2 6\na  ATGAAA\nb  ATGAAG\n", SeqFormat::Phylip);
    CHECK(f == p);

    // auto-detection picks the right reader for both
    CHECK(parse_alignment(">a\nATGAAA\n>b\nATGAAG\n") == f);
    CHECK(parse_alignment("2 6\na  ATGAAA\nb  ATGAAG\n") == f);
}

TEST_CASE("gaps, ambiguity codes, and terminal stops become missing data") {
    auto code = GeneticCode::standard();
    CodonAlignment aln = parse_alignment(">a\nATG---NNNTAA\n>b\nATGAAAAGRCAT\n");
    REQUIRE(aln.n_codons() == 4);
    CHECK(aln.rows[0][0] == code->sense_index("ATG"));
    CHECK(aln.rows[0][1] == kMissingCodon);  // gap codon
    CHECK(aln.rows[0][2] == kMissingCodon);  // fully ambiguous
    CHECK(aln.rows[0][3] == kMissingCodon);  // terminal stop
    CHECK(aln.rows[1][2] == kMissingCodon);  // partial ambiguity (AGR)
    CHECK(aln.rows[1][3] == code->sense_index("CAT"));
}

TEST_CASE("malformed inputs are rejected with specific errors") {
    CHECK_THROWS_AS(parse_alignment(">a\nATGAAA\n>b\nATG\n"), RaggedAlignment);
    CHECK_THROWS_AS(parse_alignment(">a\nATGA\n>b\nATGA\n"), NotCodonAligned);
    CHECK_THROWS_AS(parse_alignment(">a\nATG\n>a\nATG\n"), DuplicateTaxon);
    CHECK_THROWS_AS(parse_alignment(">a\nTAAATG\n>b\nAAAATG\n"), InternalStop);
    CHECK_THROWS_AS(parse_alignment(">a\nATGAAA\n"), TooFewTaxa);
    CHECK_THROWS_AS(parse_alignment(""), ParseError);
    CHECK_THROWS_AS(parse_alignment("2 6\na ATGAAA\n"), ParseError);
}

TEST_CASE("writers round-trip, including missing codons") {
    RngStream rng(11);
    auto code = GeneticCode::standard();
    CodonAlignment aln;
    aln.code = code;
    aln.taxa = {"t1", "a_very_long_taxon_name", "t3"};
    aln.rows.resize(3);
    for (auto& row : aln.rows) {
        for (int s = 0; s < 37; ++s) {
            bool missing = rng.uniform() < 0.1;
            row.push_back(missing ? kMissingCodon
                                  : static_cast<std::int16_t>(rng.uniform() * 61));
        }
    }
    CHECK(parse_alignment(to_fasta(aln), SeqFormat::Fasta) == aln);
    CHECK(parse_alignment(to_phylip(aln), SeqFormat::Phylip) == aln);
}

TEST_CASE("slice_codons takes a half-open codon range") {
    CodonAlignment aln = parse_alignment(">a\nATGAAACCC\n>b\nATGAAGCCC\n");
    CodonAlignment mid = slice_codons(aln, 1, 3);
    CHECK(mid.n_codons() == 2);
    CHECK(mid.taxa == aln.taxa);
    CHECK(mid.rows[0][0] == aln.rows[0][1]);
    CHECK(mid.rows[1][1] == aln.rows[1][2]);
    CHECK_THROWS_AS(slice_codons(aln, 2, 1), OutOfRange);
    CHECK_THROWS_AS(slice_codons(aln, 0, 4), OutOfRange);
    CHECK_THROWS_AS(slice_codons(aln, -1, 2), OutOfRange);
}

TEST_CASE("variable_sites needs two distinct resolved states") {
    // col 0: constant; col 1: varies; col 2: one missing + equal rest;
    // col 3: one missing + two distinct states
    CodonAlignment aln = parse_alignment(
        ">a\nATGAAACCCGGG\n"
        ">b\nATGAAGCCCGGA\n"
        ">c\nATGAAA---NNN\n");
    CHECK(variable_sites(aln) == std::vector<int>{1, 3});
}

TEST_CASE("F1x4 frequencies come from pooled nucleotide counts") {
    // 4 codons of AAA and 2 of CCC across two taxa: 12 A, 6 C, 0 G, 0 T
    CodonAlignment aln = parse_alignment(">a\nAAAAAACCC\n>b\nAAAAAACCC\n");
    Eigen::VectorXd pi = f1x4_frequencies(aln);
    auto code = GeneticCode::standard();
    REQUIRE(pi.size() == 61);
    CHECK(pi.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK((pi.array() > 0.0).all());

    // zero counts are floored, so G/T codons keep strictly positive mass;
    // pi(AAA)/pi(ACC) = fa^3 / (fa fc^2) = (fa/fc)^2 = (12/6)^2
    double fa = 12.0 / 18.0, fc = 6.0 / 18.0;
    double ratio = pi[code->sense_index("AAA")] / pi[code->sense_index("ACC")];
    CHECK(ratio == doctest::Approx((fa / fc) * (fa / fc)).epsilon(1e-3));
    CHECK(pi[code->sense_index("GGG")] > 0.0);
    CHECK(pi[code->sense_index("AAA")] > pi[code->sense_index("CCC")]);

    // a balanced alignment gives (near) uniform frequencies
    CodonAlignment even = parse_alignment(">a\nACGTAC\n>b\nGTACGT\n");
    Eigen::VectorXd pu = f1x4_frequencies(even);
    for (int i = 0; i < pu.size(); ++i)
        CHECK(pu[i] == doctest::Approx(1.0 / 61).epsilon(1e-9));
}

TEST_CASE("missing codons are excluded from F1x4 counts") {
    CodonAlignment with = parse_alignment(">a\nAAA---\n>b\nAAACCC\n");
    CodonAlignment without = parse_alignment(">a\nAAA\n>b\nAAA\n");
    // the gap codon contributes nothing; only b's CCC shifts the counts
    Eigen::VectorXd pi = f1x4_frequencies(with);
    auto code = GeneticCode::standard();
    CHECK(pi[code->sense_index("AAA")] > pi[code->sense_index("CCC")]);
    (void)without;
}
