#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nmips/expr.hpp"

namespace nmips {

/// Raised when an input violates a documented precondition (malformed
/// chromosome, out-of-range gene, ...).
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

struct Terminal {
    enum class Kind : std::uint8_t { Variable, ConstantPlaceholder };
    Kind kind = Kind::Variable;
    Var var = Var::X;

    static Terminal variable(Var v) { return {Kind::Variable, v}; }
    static Terminal constant() { return {Kind::ConstantPlaceholder, Var::X}; }
};

/// Per-task ordered symbol set; the order fixes the gene-to-symbol mapping.
struct SymbolLibrary {
    std::vector<Op> functions;
    std::vector<Terminal> terminals;
};

inline constexpr int kConstantPlaceholders = 2;

/// Variables followed by `kConstantPlaceholders` constant slots.
SymbolLibrary make_library(std::vector<Op> functions, std::span<const Var> variables,
                           int constant_placeholders = kConstantPlaceholders);

/// Union of half-open integer intervals: the legal values of one gene.
struct GeneDomain {
    std::vector<std::pair<int, int>> intervals;

    [[nodiscard]] int size() const;
    [[nodiscard]] bool contains(int gene) const;
    /// k-th legal value in ascending order, 0 <= k < size().
    [[nodiscard]] int at(int k) const;
};

/// Unified integer layout shared by every task. Genes in [0,A) are functions,
/// [A,B) ADF calls, [B,C) terminals and [C,D) ADF arguments.
struct EncodingSpec {
    int head_len = 0;
    int tail_len = 0;
    int num_adfs = 0;
    int num_adf_args = 0;
    int bound_a = 0;
    int bound_b = 0;
    int bound_c = 0;
    int bound_d = 0;
    int max_arity = 0;
    std::vector<int> per_task_fn_counts;
    std::vector<int> per_task_term_counts;

    [[nodiscard]] int gene_len() const { return head_len + tail_len; }
    [[nodiscard]] int genome_len() const { return (1 + num_adfs) * gene_len(); }
    /// Legal values at a genome position (head/tail, main/ADF aware).
    [[nodiscard]] GeneDomain domain(int position) const;
};

struct Chromosome {
    std::vector<std::int32_t> genes;

    friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

EncodingSpec build_encoding_space(std::span<const SymbolLibrary> libraries, int head_len, int num_adfs,
                                  int num_adf_args);

Chromosome random_chromosome(const EncodingSpec& spec, std::mt19937_64& rng);

/// Throws ContractError naming the first offending position.
void validate_chromosome(const Chromosome& chromosome, const EncodingSpec& spec);

/// floor((gene - lower) / (upper - lower) * count), in [0, count - 1].
int scale_gene(int gene, int lower, int upper, int count);

/// Number of leading genes of a Karva section that the breadth-first reading
/// consumes. Section 0 is the main function, section i the (i-1)-th ADF.
int karva_used_length(const Chromosome& chromosome, const EncodingSpec& spec, const SymbolLibrary& library,
                      int section);

/// Two-phase decoding (segment identification, then task-specific scaling)
/// followed by breadth-first Karva construction. Constant placeholders become
/// fresh constants initialised to 1.0; only ADFs reachable from the main
/// function are materialised.
ExprTree decode(const Chromosome& chromosome, const EncodingSpec& spec, const SymbolLibrary& library);

/// Parenthesised infix; constants use the shortest round-trip decimal form.
std::string to_infix(const ExprTree& tree);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& message, std::size_t position);
    [[nodiscard]] std::size_t position() const { return position_; }

private:
    std::size_t position_;
};

/// Infix parser for + - * / sin cos exp log, variables x y z t, pi and real
/// literals. Accepts the unicode minus, times and middle-dot signs. Numeric
/// literals become tunable constants.
ExprTree parse_expr(std::string_view text);

} // namespace nmips
