#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <string>

#include "nmips/genome.hpp"

namespace nmips {

namespace {

    int precedence(const Node& n)
    {
        if (n.kind != NodeKind::Function) return 3;
        switch (n.op) {
        case Op::Add:
        case Op::Sub:
            return 1;
        case Op::Mul:
        case Op::Div:
            return 2;
        default:
            return 3;
        }
    }

    std::string format_number(double v)
    {
        char buf[64];
        auto res = std::to_chars(buf, buf + sizeof(buf), v);
        std::string s(buf, res.ptr);
        if (v < 0) return "(" + s + ")";
        return s;
    }

    void emit(const Node& n, const ExprTree& tree, std::string& out)
    {
        switch (n.kind) {
        case NodeKind::Variable:
            out += var_name(n.var);
            return;
        case NodeKind::Constant:
            out += format_number(tree.constants().at(static_cast<std::size_t>(n.index)));
            return;
        case NodeKind::Literal:
            out += format_number(n.literal);
            return;
        case NodeKind::AdfCall:
        case NodeKind::AdfArg:
            throw ContractError("to_infix: ADF nodes must be inlined first");
        case NodeKind::Function:
            break;
        }
        if (arity(n.op) == 1) {
            out += op_name(n.op);
            out += '(';
            emit(*n.children[0], tree, out);
            out += ')';
            return;
        }
        const int p = precedence(n);
        const Node& lhs = *n.children[0];
        const Node& rhs = *n.children[1];
        const bool wrap_l = precedence(lhs) < p;
        const bool wrap_r = precedence(rhs) < p || (precedence(rhs) == p && (n.op == Op::Sub || n.op == Op::Div));
        if (wrap_l) out += '(';
        emit(lhs, tree, out);
        if (wrap_l) out += ')';
        if (p == 1) {
            out += ' ';
            out += op_name(n.op);
            out += ' ';
        } else {
            out += op_name(n.op);
        }
        if (wrap_r) out += '(';
        emit(rhs, tree, out);
        if (wrap_r) out += ')';
    }

    class Parser {
    public:
        explicit Parser(std::string_view text)
            : src_(normalise(text))
        {
        }

        ExprTree parse()
        {
            NodePtr root = expression();
            skip_ws();
            if (pos_ < src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
            return ExprTree(std::move(root), std::move(constants_));
        }

    private:
        // Maps the unicode operator glyphs onto ASCII; keeps byte positions of
        // ASCII input intact.
        static std::string normalise(std::string_view text)
        {
            std::string out;
            out.reserve(text.size());
            for (std::size_t i = 0; i < text.size(); ++i) {
                const auto c = static_cast<unsigned char>(text[i]);
                if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x88
                    && static_cast<unsigned char>(text[i + 2]) == 0x92) {
                    out += '-';
                    i += 2;
                } else if ((c == 0xC3 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x97)
                           || (c == 0xC2 && i + 1 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0xB7)) {
                    out += '*';
                    i += 1;
                } else {
                    out += static_cast<char>(c);
                }
            }
            return out;
        }

        [[noreturn]] void fail(const std::string& msg) const
        {
            throw ParseError(msg + " at position " + std::to_string(pos_), pos_);
        }

        void skip_ws()
        {
            while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }

        bool accept(char c)
        {
            skip_ws();
            if (pos_ < src_.size() && src_[pos_] == c) {
                ++pos_;
                return true;
            }
            return false;
        }

        NodePtr expression()
        {
            NodePtr lhs = term();
            for (;;) {
                if (accept('+')) {
                    lhs = make_function(Op::Add, {lhs, term()});
                } else if (accept('-')) {
                    lhs = make_function(Op::Sub, {lhs, term()});
                } else {
                    return lhs;
                }
            }
        }

        NodePtr term()
        {
            NodePtr lhs = unary();
            for (;;) {
                if (accept('*')) {
                    lhs = make_function(Op::Mul, {lhs, unary()});
                } else if (accept('/')) {
                    lhs = make_function(Op::Div, {lhs, unary()});
                } else {
                    return lhs;
                }
            }
        }

        NodePtr unary()
        {
            if (accept('-')) {
                skip_ws();
                if (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
                    return number(-1.0);
                }
                return make_function(Op::Mul, {make_literal(-1.0), unary()});
            }
            if (accept('+')) return unary();
            return primary();
        }

        NodePtr number(double sign)
        {
            double v = 0.0;
            const char* first = src_.data() + pos_;
            auto [ptr, ec] = std::from_chars(first, src_.data() + src_.size(), v);
            if (ec != std::errc()) fail("malformed number");
            pos_ += static_cast<std::size_t>(ptr - first);
            constants_.push_back(sign * v);
            return make_constant(static_cast<int>(constants_.size() - 1));
        }

        NodePtr primary()
        {
            skip_ws();
            if (pos_ >= src_.size()) fail("unexpected end of input");
            const char c = src_[pos_];
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number(1.0);
            if (c == '(') {
                ++pos_;
                NodePtr inner = expression();
                if (!accept(')')) fail("expected ')'");
                return inner;
            }
            if (std::isalpha(static_cast<unsigned char>(c))) {
                const std::size_t start = pos_;
                while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_]))) ++pos_;
                const std::string_view name(src_.data() + start, pos_ - start);
                if (auto v = var_from_name(name)) return make_variable(*v);
                if (name == "pi") return make_literal(std::numbers::pi);
                Op op;
                if (name == "sin") {
                    op = Op::Sin;
                } else if (name == "cos") {
                    op = Op::Cos;
                } else if (name == "exp") {
                    op = Op::Exp;
                } else if (name == "log") {
                    op = Op::Log;
                } else {
                    pos_ = start;
                    fail("unknown symbol '" + std::string(name) + "'");
                }
                if (!accept('(')) fail("expected '(' after " + std::string(name));
                NodePtr arg = expression();
                if (!accept(')')) fail("expected ')'");
                return make_function(op, {arg});
            }
            fail("unexpected '" + std::string(1, c) + "'");
        }

        std::string src_;
        std::size_t pos_ = 0;
        std::vector<double> constants_;
    };

} // namespace

ParseError::ParseError(const std::string& message, std::size_t position)
    : std::runtime_error(message)
    , position_(position)
{
}

std::string to_infix(const ExprTree& tree)
{
    if (tree.empty()) return "";
    const ExprTree flat = tree.inlined();
    std::string out;
    emit(*flat.root(), flat, out);
    return out;
}

ExprTree parse_expr(std::string_view text) { return Parser(text).parse(); }

} // namespace nmips
