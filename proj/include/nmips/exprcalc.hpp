#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "nmips/expr.hpp"

namespace nmips {

using Point = std::array<double, kNumVars>;

inline Point make_point(double x, double y, double z, double t) { return {x, y, z, t}; }

/// Column-major batch of points. Every column has size() entries; columns of
/// variables a task does not use hold zeros.
class PointSet {
public:
    PointSet() = default;
    explicit PointSet(std::size_t n) { resize(n); }

    void resize(std::size_t n);
    void push_back(const Point& p);
    void set(std::size_t i, const Point& p);
    void append(const PointSet& other);

    [[nodiscard]] std::size_t size() const { return n_; }
    [[nodiscard]] bool empty() const { return n_ == 0; }
    [[nodiscard]] Point at(std::size_t i) const;
    [[nodiscard]] std::span<const double> column(Var v) const { return cols_[static_cast<std::size_t>(v)]; }
    [[nodiscard]] std::span<double> column(Var v) { return cols_[static_cast<std::size_t>(v)]; }

private:
    std::array<std::vector<double>, kNumVars> cols_;
    std::size_t n_ = 0;
};

/// Scalar evaluation; nullopt marks a non-finite (invalid) result anywhere in
/// the tree. ADF calls are inlined on the fly.
std::optional<double> eval(const ExprTree& tree, const Point& point);

/// Exact symbolic partial derivative of the inlined tree. Literal subtrees are
/// folded and 0/1 identities removed; nothing else is simplified.
ExprTree differentiate(const ExprTree& tree, Var var, int order = 1);

/// Symbolic derivative with respect to tunable constant `index`.
ExprTree differentiate_constant(const ExprTree& tree, int index);

/// d eval / d c_j at a point; nullopt when the evaluation is invalid.
std::optional<std::vector<double>> grad_constants(const ExprTree& tree, const Point& point);

/// Node builders that fold literal arithmetic and 0/1 identities.
namespace build {
    NodePtr lit(double v);
    NodePtr add(NodePtr a, NodePtr b);
    NodePtr sub(NodePtr a, NodePtr b);
    NodePtr mul(NodePtr a, NodePtr b);
    NodePtr div(NodePtr a, NodePtr b);
    NodePtr sin(NodePtr a);
    NodePtr cos(NodePtr a);
    NodePtr exp(NodePtr a);
    NodePtr log(NodePtr a);
    bool is_literal(const NodePtr& n, double v);
} // namespace build

/// Flat instruction list in topological order; shared subtrees appear once.
class Program {
public:
    enum class Code : std::uint8_t { Var, Const, Lit, Add, Sub, Mul, Div, Sin, Cos, Exp, Log };

    struct Instruction {
        Code code = Code::Lit;
        int a = -1;
        int b = -1;
        int index = 0;
        double value = 0.0;
    };

    [[nodiscard]] const std::vector<Instruction>& code() const { return code_; }
    [[nodiscard]] std::size_t num_constants() const { return num_constants_; }
    [[nodiscard]] bool empty() const { return code_.empty(); }

    /// Values at every point. Returns false if any intermediate is non-finite.
    bool evaluate(const PointSet& points, std::span<const double> constants, std::vector<double>& out) const;

    /// Values plus forward-mode tangents w.r.t. every constant; `grad` is
    /// laid out as grad[j * n + i] for constant j and point i.
    bool evaluate_with_gradient(const PointSet& points, std::span<const double> constants, std::vector<double>& out,
                                std::vector<double>& grad) const;

    friend Program compile(const ExprTree& tree);

private:
    std::vector<Instruction> code_;
    std::vector<std::vector<int>> deps_; // constants each instruction depends on
    std::size_t num_constants_ = 0;
    int output_ = -1;
};

Program compile(const ExprTree& tree);

} // namespace nmips
