#include <cctype>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "sedi/errors.hpp"
#include "sedi/payoffs.hpp"

namespace sedi {

namespace {

// Grammar:
//   expr    := term (('+'|'-') term)*
//   term    := factor (('*'|'/') factor)*
//   factor  := '-' factor | primary
//   primary := number | coord | func '(' expr (',' expr)? ')' | '(' expr ')'
//   coord   := 'x' digits          (1-based)
//   func    := 'max' | 'exp' | 'log'

struct Node {
    enum class Kind { Constant, Coord, Add, Sub, Mul, Div, Neg, Max, Exp, Log };
    Kind kind;
    double value = 0.0;
    int coord = 0;
    std::unique_ptr<Node> lhs;
    std::unique_ptr<Node> rhs;
};

using NodePtr = std::unique_ptr<Node>;

double eval(const Node& node, const VectorXd& x) {
    switch (node.kind) {
        case Node::Kind::Constant: return node.value;
        case Node::Kind::Coord: return x[node.coord];
        case Node::Kind::Add: return eval(*node.lhs, x) + eval(*node.rhs, x);
        case Node::Kind::Sub: return eval(*node.lhs, x) - eval(*node.rhs, x);
        case Node::Kind::Mul: return eval(*node.lhs, x) * eval(*node.rhs, x);
        case Node::Kind::Div: return eval(*node.lhs, x) / eval(*node.rhs, x);
        case Node::Kind::Neg: return -eval(*node.lhs, x);
        case Node::Kind::Max: return std::max(eval(*node.lhs, x), eval(*node.rhs, x));
        case Node::Kind::Exp: return std::exp(eval(*node.lhs, x));
        case Node::Kind::Log: return std::log(eval(*node.lhs, x));
    }
    return 0.0;
}

class Parser {
public:
    Parser(const std::string& text, int n) : text_(text), n_(n) {}

    NodePtr parse() {
        NodePtr root = parse_expr();
        skip_ws();
        if (pos_ != text_.size()) fail("trailing characters");
        return root;
    }

private:
    NodePtr parse_expr() {
        NodePtr node = parse_term();
        for (;;) {
            skip_ws();
            if (consume('+')) {
                node = binary(Node::Kind::Add, std::move(node), parse_term());
            } else if (consume('-')) {
                node = binary(Node::Kind::Sub, std::move(node), parse_term());
            } else {
                return node;
            }
        }
    }

    NodePtr parse_term() {
        NodePtr node = parse_factor();
        for (;;) {
            skip_ws();
            if (consume('*')) {
                node = binary(Node::Kind::Mul, std::move(node), parse_factor());
            } else if (consume('/')) {
                node = binary(Node::Kind::Div, std::move(node), parse_factor());
            } else {
                return node;
            }
        }
    }

    NodePtr parse_factor() {
        skip_ws();
        if (consume('-')) {
            auto node = std::make_unique<Node>();
            node->kind = Node::Kind::Neg;
            node->lhs = parse_factor();
            return node;
        }
        return parse_primary();
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of expression");
        const char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (consume('(')) {
            NodePtr node = parse_expr();
            expect(')');
            return node;
        }
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
        return nullptr;
    }

    NodePtr parse_number() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '+' || text_[end] == '-') && end > pos_ &&
                 (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
            ++end;
        auto node = std::make_unique<Node>();
        node->kind = Node::Kind::Constant;
        try {
            node->value = std::stod(text_.substr(pos_, end - pos_));
        } catch (const std::exception&) {
            fail("malformed number");
        }
        pos_ = end;
        return node;
    }

    NodePtr parse_ident() {
        std::size_t end = pos_;
        while (end < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[end])))) ++end;
        const std::string ident = text_.substr(pos_, end - pos_);
        pos_ = end;
        if (ident.size() >= 2 && ident[0] == 'x') {
            int idx = 0;
            for (std::size_t k = 1; k < ident.size(); ++k) {
                if (!std::isdigit(static_cast<unsigned char>(ident[k]))) fail("bad coordinate '" + ident + "'");
                idx = idx * 10 + (ident[k] - '0');
            }
            if (idx < 1 || idx > n_) fail("coordinate '" + ident + "' out of range");
            auto node = std::make_unique<Node>();
            node->kind = Node::Kind::Coord;
            node->coord = idx - 1;
            return node;
        }
        if (ident == "max") {
            expect('(');
            auto node = std::make_unique<Node>();
            node->kind = Node::Kind::Max;
            node->lhs = parse_expr();
            expect(',');
            node->rhs = parse_expr();
            expect(')');
            return node;
        }
        if (ident == "exp" || ident == "log") {
            expect('(');
            auto node = std::make_unique<Node>();
            node->kind = ident == "exp" ? Node::Kind::Exp : Node::Kind::Log;
            node->lhs = parse_expr();
            expect(')');
            return node;
        }
        fail("unknown identifier '" + ident + "'");
        return nullptr;
    }

    NodePtr binary(Node::Kind kind, NodePtr lhs, NodePtr rhs) {
        auto node = std::make_unique<Node>();
        node->kind = kind;
        node->lhs = std::move(lhs);
        node->rhs = std::move(rhs);
        return node;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!consume(c)) fail(std::string("expected '") + c + "'");
    }

    [[noreturn]] void fail(const std::string& what) {
        throw config_error("payoff expression: " + what);
    }

    const std::string& text_;
    int n_;
    std::size_t pos_ = 0;
};

}  // namespace

Payoff payoff_from_expression(const std::string& expression, int n, double growth_C,
                              bool smooth_complement) {
    Parser parser(expression, n);
    std::shared_ptr<Node> root(parser.parse().release());
    Payoff payoff;
    payoff.kind = "expr";
    payoff.growth_C = growth_C;
    payoff.smooth_complement = smooth_complement;
    payoff.f = [root, n](const VectorXd& x) {
        if (x.size() != n) throw std::invalid_argument("payoff expression: state dimension mismatch");
        return eval(*root, x);
    };
    return payoff;
}

}  // namespace sedi
