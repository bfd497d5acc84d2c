#include "nmips/genome.hpp"

#include <algorithm>
#include <cmath>

namespace nmips {

SymbolLibrary make_library(std::vector<Op> functions, std::span<const Var> variables, int constant_placeholders)
{
    SymbolLibrary lib;
    lib.functions = std::move(functions);
    for (Var v : variables) lib.terminals.push_back(Terminal::variable(v));
    for (int i = 0; i < constant_placeholders; ++i) lib.terminals.push_back(Terminal::constant());
    return lib;
}

int GeneDomain::size() const
{
    int total = 0;
    for (auto [lo, hi] : intervals) total += hi - lo;
    return total;
}

bool GeneDomain::contains(int gene) const
{
    return std::any_of(intervals.begin(), intervals.end(),
                       [gene](const auto& iv) { return gene >= iv.first && gene < iv.second; });
}

int GeneDomain::at(int k) const
{
    for (auto [lo, hi] : intervals) {
        if (k < hi - lo) return lo + k;
        k -= hi - lo;
    }
    throw ContractError("GeneDomain::at: index out of range");
}

namespace {

    GeneDomain make_domain(std::vector<std::pair<int, int>> parts)
    {
        GeneDomain d;
        for (auto [lo, hi] : parts) {
            if (lo >= hi) continue;
            if (!d.intervals.empty() && d.intervals.back().second == lo) {
                d.intervals.back().second = hi;
            } else {
                d.intervals.emplace_back(lo, hi);
            }
        }
        return d;
    }

} // namespace

GeneDomain EncodingSpec::domain(int position) const
{
    if (position < 0 || position >= genome_len()) {
        throw ContractError("EncodingSpec::domain: position " + std::to_string(position) + " out of range");
    }
    const int section = position / gene_len();
    const bool head = position % gene_len() < head_len;
    if (section == 0) {
        return head ? make_domain({{0, bound_d}}) : make_domain({{bound_b, bound_c}});
    }
    if (!head) return make_domain({{bound_b, bound_d}});
    // ADF i may only call ADFs with a larger index.
    const int adf = section - 1;
    return make_domain({{0, bound_a}, {bound_a + adf + 1, bound_b}, {bound_b, bound_d}});
}

EncodingSpec build_encoding_space(std::span<const SymbolLibrary> libraries, int head_len, int num_adfs,
                                  int num_adf_args)
{
    if (libraries.empty()) throw std::invalid_argument("build_encoding_space: empty task list");
    if (head_len < 1) throw std::invalid_argument("build_encoding_space: head_len must be >= 1");
    if (num_adfs < 0 || num_adf_args < 0) {
        throw std::invalid_argument("build_encoding_space: ADF counts must be non-negative");
    }
    EncodingSpec spec;
    spec.head_len = head_len;
    spec.num_adfs = num_adfs;
    spec.num_adf_args = num_adf_args;
    int max_fn = 0;
    int max_term = 0;
    int max_arity = 0;
    for (std::size_t i = 0; i < libraries.size(); ++i) {
        const auto& lib = libraries[i];
        if (lib.functions.empty()) {
            throw std::invalid_argument("build_encoding_space: task " + std::to_string(i) + " has no functions");
        }
        if (lib.terminals.empty()) {
            throw std::invalid_argument("build_encoding_space: task " + std::to_string(i) + " has no terminals");
        }
        spec.per_task_fn_counts.push_back(static_cast<int>(lib.functions.size()));
        spec.per_task_term_counts.push_back(static_cast<int>(lib.terminals.size()));
        max_fn = std::max(max_fn, static_cast<int>(lib.functions.size()));
        max_term = std::max(max_term, static_cast<int>(lib.terminals.size()));
        for (Op op : lib.functions) max_arity = std::max(max_arity, arity(op));
    }
    // ADF calls are internal nodes too; their arity must fit the tail bound.
    if (num_adfs > 0) max_arity = std::max(max_arity, num_adf_args);
    spec.max_arity = max_arity;
    spec.tail_len = head_len * (max_arity - 1) + 1;
    spec.bound_a = max_fn;
    spec.bound_b = spec.bound_a + num_adfs;
    spec.bound_c = spec.bound_b + max_term;
    spec.bound_d = spec.bound_c + num_adf_args;
    return spec;
}

Chromosome random_chromosome(const EncodingSpec& spec, std::mt19937_64& rng)
{
    Chromosome c;
    c.genes.resize(static_cast<std::size_t>(spec.genome_len()));
    for (int p = 0; p < spec.genome_len(); ++p) {
        const GeneDomain d = spec.domain(p);
        std::uniform_int_distribution<int> pick(0, d.size() - 1);
        c.genes[static_cast<std::size_t>(p)] = d.at(pick(rng));
    }
    return c;
}

void validate_chromosome(const Chromosome& chromosome, const EncodingSpec& spec)
{
    if (static_cast<int>(chromosome.genes.size()) != spec.genome_len()) {
        throw ContractError("chromosome length " + std::to_string(chromosome.genes.size()) + " != "
                            + std::to_string(spec.genome_len()));
    }
    for (int p = 0; p < spec.genome_len(); ++p) {
        const int g = chromosome.genes[static_cast<std::size_t>(p)];
        if (!spec.domain(p).contains(g)) {
            throw ContractError("gene " + std::to_string(g) + " illegal at position " + std::to_string(p));
        }
    }
}

int scale_gene(int gene, int lower, int upper, int count)
{
    if (count < 1) throw ContractError("scale_gene: count must be >= 1");
    if (gene < lower || gene >= upper) {
        throw ContractError("scale_gene: gene " + std::to_string(gene) + " outside [" + std::to_string(lower) + ", "
                            + std::to_string(upper - 1) + "]");
    }
    // Integer form of floor((gene - lower) / (upper - lower) * count).
    const long long num = static_cast<long long>(gene - lower) * count;
    return static_cast<int>(num / (upper - lower));
}

namespace {

    struct Symbol {
        NodeKind kind;
        Op op = Op::Add;
        int index = 0; // ADF, terminal or argument index
        int arity = 0;
    };

    Symbol classify(int gene, int section, const EncodingSpec& spec, const SymbolLibrary& lib)
    {
        if (section == 0 && gene >= spec.bound_c) {
            // ADF arguments have no meaning in the main function.
            gene = spec.bound_b + (gene - spec.bound_c) % (spec.bound_c - spec.bound_b);
        }
        if (gene < spec.bound_a) {
            const int i = scale_gene(gene, 0, spec.bound_a, static_cast<int>(lib.functions.size()));
            const Op op = lib.functions[static_cast<std::size_t>(i)];
            return {NodeKind::Function, op, i, arity(op)};
        }
        if (gene < spec.bound_b) {
            const int adf = scale_gene(gene, spec.bound_a, spec.bound_b, spec.num_adfs);
            if (section != 0 && adf <= section - 1) {
                throw ContractError("ADF " + std::to_string(section - 1) + " calls ADF " + std::to_string(adf));
            }
            return {NodeKind::AdfCall, Op::Add, adf, spec.num_adf_args};
        }
        if (gene < spec.bound_c) {
            const int t = scale_gene(gene, spec.bound_b, spec.bound_c, static_cast<int>(lib.terminals.size()));
            return {lib.terminals[static_cast<std::size_t>(t)].kind == Terminal::Kind::Variable ? NodeKind::Variable
                                                                                                : NodeKind::Constant,
                    Op::Add, t, 0};
        }
        return {NodeKind::AdfArg, Op::Add, scale_gene(gene, spec.bound_c, spec.bound_d, spec.num_adf_args), 0};
    }

    std::vector<Symbol> read_section(const Chromosome& c, const EncodingSpec& spec, const SymbolLibrary& lib,
                                     int section)
    {
        const int base = section * spec.gene_len();
        std::vector<Symbol> syms;
        int needed = 1;
        for (int i = 0; i < needed; ++i) {
            if (i >= spec.gene_len()) throw ContractError("Karva section overruns its gene string");
            syms.push_back(classify(c.genes[static_cast<std::size_t>(base + i)], section, spec, lib));
            needed += syms.back().arity;
        }
        return syms;
    }

    NodePtr build_section(const std::vector<Symbol>& syms, const SymbolLibrary& lib, std::vector<double>& constants,
                          std::vector<bool>& adf_called)
    {
        const std::size_t n = syms.size();
        std::vector<std::size_t> first_child(n);
        std::size_t next = 1;
        for (std::size_t i = 0; i < n; ++i) {
            first_child[i] = next;
            next += static_cast<std::size_t>(syms[i].arity);
        }
        // Constant slots are numbered in reading order.
        std::vector<int> const_slot(n, -1);
        for (std::size_t i = 0; i < n; ++i) {
            if (syms[i].kind == NodeKind::Constant) {
                const_slot[i] = static_cast<int>(constants.size());
                constants.push_back(1.0);
            }
        }
        std::vector<NodePtr> nodes(n);
        for (std::size_t k = n; k-- > 0;) {
            const Symbol& s = syms[k];
            std::vector<NodePtr> kids;
            for (int a = 0; a < s.arity; ++a) kids.push_back(nodes[first_child[k] + static_cast<std::size_t>(a)]);
            switch (s.kind) {
            case NodeKind::Function:
                nodes[k] = make_function(s.op, std::move(kids));
                break;
            case NodeKind::AdfCall:
                adf_called[static_cast<std::size_t>(s.index)] = true;
                nodes[k] = make_adf_call(s.index, std::move(kids));
                break;
            case NodeKind::Variable:
                nodes[k] = make_variable(lib.terminals[static_cast<std::size_t>(s.index)].var);
                break;
            case NodeKind::Constant:
                nodes[k] = make_constant(const_slot[k]);
                break;
            case NodeKind::AdfArg:
                nodes[k] = make_adf_arg(s.index);
                break;
            case NodeKind::Literal:
                break;
            }
        }
        return nodes[0];
    }

} // namespace

int karva_used_length(const Chromosome& chromosome, const EncodingSpec& spec, const SymbolLibrary& library,
                      int section)
{
    return static_cast<int>(read_section(chromosome, spec, library, section).size());
}

ExprTree decode(const Chromosome& chromosome, const EncodingSpec& spec, const SymbolLibrary& library)
{
    validate_chromosome(chromosome, spec);
    std::vector<double> constants;
    std::vector<bool> called(static_cast<std::size_t>(spec.num_adfs), false);
    NodePtr root = build_section(read_section(chromosome, spec, library, 0), library, constants, called);
    std::vector<NodePtr> adfs(static_cast<std::size_t>(spec.num_adfs));
    // Calls only go to higher-indexed ADFs, so one ascending sweep finds all.
    for (int i = 0; i < spec.num_adfs; ++i) {
        if (!called[static_cast<std::size_t>(i)]) continue;
        adfs[static_cast<std::size_t>(i)]
            = build_section(read_section(chromosome, spec, library, i + 1), library, constants, called);
    }
    return ExprTree(std::move(root), std::move(constants), std::move(adfs));
}

} // namespace nmips
