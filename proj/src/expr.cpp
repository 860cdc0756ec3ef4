#include "expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>

namespace msj {

namespace {

struct Token {
    enum class Kind { Number, Ident, Plus, Minus, Star, Slash, LParen, RParen, End };
    Kind kind;
    std::size_t offset;
    double number = 0.0;
    std::string_view text;
};

class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) { advance(); }

    const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_.offset = pos_;
        if (pos_ >= src_.size()) {
            tok_.kind = Token::Kind::End;
            return;
        }
        char c = src_[pos_];
        switch (c) {
            case '+': tok_.kind = Token::Kind::Plus; ++pos_; return;
            case '-': tok_.kind = Token::Kind::Minus; ++pos_; return;
            case '*': tok_.kind = Token::Kind::Star; ++pos_; return;
            case '/': tok_.kind = Token::Kind::Slash; ++pos_; return;
            case '(': tok_.kind = Token::Kind::LParen; ++pos_; return;
            case ')': tok_.kind = Token::Kind::RParen; ++pos_; return;
            default: break;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            double value = 0.0;
            auto res = std::from_chars(src_.data() + pos_, src_.data() + src_.size(), value);
            if (res.ec != std::errc() || res.ptr == src_.data() + pos_)
                throw ParseError("invalid number at offset " + std::to_string(pos_), pos_);
            tok_.kind = Token::Kind::Number;
            tok_.number = value;
            pos_ = static_cast<std::size_t>(res.ptr - src_.data());
            return;
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos_;
            while (pos_ < src_.size() &&
                   (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
            tok_.kind = Token::Kind::Ident;
            tok_.text = src_.substr(start, pos_ - start);
            return;
        }
        throw ParseError(std::string("unexpected character '") + c + "' at offset " +
                             std::to_string(pos_),
                         pos_);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    Token tok_;
};

class Parser {
public:
    explicit Parser(std::string_view src) : lex_(src) {}

    int parse_all(std::vector<IntensityExpr::Node>& nodes) {
        nodes_ = &nodes;
        int root = expression();
        const Token& t = lex_.peek();
        if (t.kind != Token::Kind::End)
            throw ParseError("unexpected trailing input at offset " + std::to_string(t.offset),
                             t.offset);
        return root;
    }

private:
    using Op = IntensityExpr::Op;

    int add_node(Op op, double value = 0.0, int lhs = -1, int rhs = -1) {
        nodes_->push_back({op, value, lhs, rhs});
        return static_cast<int>(nodes_->size()) - 1;
    }

    int expression() {
        int lhs = term();
        for (;;) {
            Token::Kind k = lex_.peek().kind;
            if (k == Token::Kind::Plus || k == Token::Kind::Minus) {
                lex_.take();
                int rhs = term();
                lhs = add_node(k == Token::Kind::Plus ? Op::Add : Op::Sub, 0.0, lhs, rhs);
            } else {
                return lhs;
            }
        }
    }

    int term() {
        int lhs = factor();
        for (;;) {
            Token::Kind k = lex_.peek().kind;
            if (k == Token::Kind::Star || k == Token::Kind::Slash) {
                lex_.take();
                int rhs = factor();
                lhs = add_node(k == Token::Kind::Star ? Op::Mul : Op::Div, 0.0, lhs, rhs);
            } else {
                return lhs;
            }
        }
    }

    int factor() {
        if (lex_.peek().kind == Token::Kind::Minus) {
            lex_.take();
            int child = factor();
            return add_node(Op::Neg, 0.0, child);
        }
        return primary();
    }

    int primary() {
        Token t = lex_.take();
        switch (t.kind) {
            case Token::Kind::Number:
                return add_node(Op::Const, t.number);
            case Token::Kind::LParen: {
                int inner = expression();
                expect_rparen();
                return inner;
            }
            case Token::Kind::Ident: {
                if (t.text == "t") return add_node(Op::VarT);
                if (t.text == "u") return add_node(Op::VarU);
                Op fn;
                if (t.text == "sin")
                    fn = Op::Sin;
                else if (t.text == "cos")
                    fn = Op::Cos;
                else if (t.text == "exp")
                    fn = Op::Exp;
                else if (t.text == "log")
                    fn = Op::Log;
                else
                    throw ParseError("unknown identifier '" + std::string(t.text) +
                                         "' at offset " + std::to_string(t.offset),
                                     t.offset);
                Token open = lex_.take();
                if (open.kind != Token::Kind::LParen)
                    throw ParseError("expected '(' after function name at offset " +
                                         std::to_string(open.offset),
                                     open.offset);
                int arg = expression();
                expect_rparen();
                return add_node(fn, 0.0, arg);
            }
            case Token::Kind::End:
                throw ParseError("unexpected end of input at offset " + std::to_string(t.offset),
                                 t.offset);
            default:
                throw ParseError("unexpected token at offset " + std::to_string(t.offset),
                                 t.offset);
        }
    }

    void expect_rparen() {
        Token t = lex_.take();
        if (t.kind != Token::Kind::RParen)
            throw ParseError("expected ')' at offset " + std::to_string(t.offset), t.offset);
    }

    Lexer lex_;
    std::vector<IntensityExpr::Node>* nodes_ = nullptr;
};

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

int precedence(IntensityExpr::Op op) {
    using Op = IntensityExpr::Op;
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Neg: return 3;
        default: return 4;
    }
}

}  // namespace

IntensityExpr IntensityExpr::parse(std::string_view text) {
    IntensityExpr expr;
    Parser parser(text);
    expr.root_ = parser.parse_all(expr.nodes_);
    for (const Node& n : expr.nodes_) {
        if (n.op == Op::VarU) expr.uses_duration_ = true;
        if (n.op == Op::Div) expr.has_division_ = true;
    }
    return expr;
}

IntensityExpr IntensityExpr::sum(const IntensityExpr& lhs, const IntensityExpr& rhs) {
    IntensityExpr expr;
    expr.nodes_ = lhs.nodes_;
    int offset = static_cast<int>(expr.nodes_.size());
    for (Node n : rhs.nodes_) {
        if (n.lhs >= 0) n.lhs += offset;
        if (n.rhs >= 0) n.rhs += offset;
        expr.nodes_.push_back(n);
    }
    expr.nodes_.push_back({Op::Add, 0.0, lhs.root_, rhs.root_ + offset});
    expr.root_ = static_cast<int>(expr.nodes_.size()) - 1;
    expr.uses_duration_ = lhs.uses_duration_ || rhs.uses_duration_;
    expr.has_division_ = lhs.has_division_ || rhs.has_division_;
    return expr;
}

double IntensityExpr::eval_impl(double t, double u, bool u_present) const {
    // Nodes are created children-first by the parser, so a single forward
    // pass evaluates every node before its parent.
    thread_local std::vector<double> vals;
    vals.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& n = nodes_[i];
        double a = n.lhs >= 0 ? vals[static_cast<std::size_t>(n.lhs)] : 0.0;
        double b = n.rhs >= 0 ? vals[static_cast<std::size_t>(n.rhs)] : 0.0;
        switch (n.op) {
            case Op::Const: vals[i] = n.value; break;
            case Op::VarT: vals[i] = t; break;
            case Op::VarU:
                if (!u_present)
                    throw ValidationError("expression uses duration u but none was supplied");
                vals[i] = u;
                break;
            case Op::Neg: vals[i] = -a; break;
            case Op::Sin: vals[i] = std::sin(a); break;
            case Op::Cos: vals[i] = std::cos(a); break;
            case Op::Exp: vals[i] = std::exp(a); break;
            case Op::Log: vals[i] = std::log(a); break;
            case Op::Add: vals[i] = a + b; break;
            case Op::Sub: vals[i] = a - b; break;
            case Op::Mul: vals[i] = a * b; break;
            case Op::Div: vals[i] = a / b; break;
        }
    }
    return vals[static_cast<std::size_t>(root_)];
}

double IntensityExpr::eval(double t) const { return eval_impl(t, 0.0, false); }

double IntensityExpr::eval(double t, double u) const { return eval_impl(t, u, true); }

std::string IntensityExpr::str() const {
    // Iterative pretty-printer would obscure the precedence rules; the tree
    // depth is tiny, recursion is fine.
    struct Printer {
        const std::vector<Node>& nodes;

        std::string print(int idx) const {
            const Node& n = nodes[static_cast<std::size_t>(idx)];
            switch (n.op) {
                case Op::Const: return format_double(n.value);
                case Op::VarT: return "t";
                case Op::VarU: return "u";
                case Op::Neg: return "-" + child(n.lhs, precedence(Op::Neg), false);
                case Op::Sin: return "sin(" + print(n.lhs) + ")";
                case Op::Cos: return "cos(" + print(n.lhs) + ")";
                case Op::Exp: return "exp(" + print(n.lhs) + ")";
                case Op::Log: return "log(" + print(n.lhs) + ")";
                case Op::Add:
                    return child(n.lhs, 1, false) + " + " + child(n.rhs, 1, true);
                case Op::Sub:
                    return child(n.lhs, 1, false) + " - " + child(n.rhs, 1, true);
                case Op::Mul:
                    return child(n.lhs, 2, false) + "*" + child(n.rhs, 2, true);
                case Op::Div:
                    return child(n.lhs, 2, false) + "/" + child(n.rhs, 2, true);
            }
            return {};
        }

        // Left-associative grammar: right operands need parentheses at equal
        // precedence, everything needs them below the parent level.
        std::string child(int idx, int parent_prec, bool strict) const {
            int p = precedence(nodes[static_cast<std::size_t>(idx)].op);
            bool parens = strict ? (p <= parent_prec) : (p < parent_prec);
            std::string s = print(idx);
            return parens ? "(" + s + ")" : s;
        }
    };
    return Printer{nodes_}.print(root_);
}

double IntensityExpr::upper_bound(double t_lo, double t_hi, double u_lo, double u_hi) const {
    constexpr int kSteps = 64;
    constexpr double kSafety = 1.2;
    if (!(t_lo < t_hi)) throw ValidationError("upper_bound requires t_lo < t_hi");

    int u_steps = uses_duration_ ? kSteps : 0;
    double dt = (t_hi - t_lo) / kSteps;
    double du = u_steps > 0 ? (u_hi - u_lo) / u_steps : 0.0;

    double best = -std::numeric_limits<double>::infinity();
    for (int i = 0; i <= kSteps; ++i) {
        double t = i == kSteps ? t_hi : t_lo + i * dt;
        for (int j = 0; j <= u_steps; ++j) {
            double u = j == u_steps ? u_hi : u_lo + j * du;
            double v = eval_impl(t, u, uses_duration_);
            if (!std::isfinite(v))
                throw ValidationError("non-finite value at (t=" + format_double(t) +
                                      ", u=" + format_double(u) + ") during bound scan");
            if (v > best) best = v;
        }
    }
    return best > 0.0 ? kSafety * best : 0.0;
}

bool IntensityExpr::operator==(const IntensityExpr& other) const {
    // Structural comparison via parallel traversal (node layouts may differ).
    struct Cmp {
        const std::vector<Node>& a;
        const std::vector<Node>& b;

        bool eq(int ia, int ib) const {
            if ((ia < 0) != (ib < 0)) return false;
            if (ia < 0) return true;
            const Node& na = a[static_cast<std::size_t>(ia)];
            const Node& nb = b[static_cast<std::size_t>(ib)];
            if (na.op != nb.op) return false;
            if (na.op == Op::Const && !(na.value == nb.value)) return false;
            return eq(na.lhs, nb.lhs) && eq(na.rhs, nb.rhs);
        }
    };
    return Cmp{nodes_, other.nodes_}.eq(root_, other.root_);
}

}  // namespace msj
