#pragma once

// Metric-coefficient expression language.
//
// Grammar (standard infix, ^ right-associative):
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?
//   primary := number | constant | coordinate | function '(' expr ')' | '(' expr ')'
//
// Precedence: ^ > unary minus > * / > + -.  So -x^2 is -(x^2) and 2^-1 is 0.5.
// Constants: pi, e.  Functions: sin cos tan sinh cosh tanh exp log sqrt abs.

#include "rkit/error.hpp"
#include "rkit/linalg.hpp"

#include <array>
#include <cctype>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rkit {

// ---------------------------------------------------------------------------
// Second-order forward-mode dual number: value, gradient, Hessian (upper triangle).

class Dual2 {
public:
    static constexpr int kTri = kMaxDim * (kMaxDim + 1) / 2;

    Dual2() = default;
    Dual2(int n, double value) : n_(n), v_(value) {}

    static Dual2 variable(int n, int index, double value) {
        Dual2 d(n, value);
        d.g_[static_cast<std::size_t>(index)] = 1.0;
        return d;
    }

    [[nodiscard]] int dim() const { return n_; }
    [[nodiscard]] double value() const { return v_; }
    [[nodiscard]] double grad(int i) const { return g_[static_cast<std::size_t>(i)]; }
    [[nodiscard]] double hess(int i, int j) const { return h_[tri(i, j)]; }

    [[nodiscard]] Vec gradient() const {
        Vec out(n_);
        for (int i = 0; i < n_; ++i) out(i) = g_[static_cast<std::size_t>(i)];
        return out;
    }
    [[nodiscard]] Mat hessian() const {
        Mat out(n_, n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j) out(i, j) = hess(i, j);
        return out;
    }

    /// Apply a scalar function given its value and first two derivatives at value().
    [[nodiscard]] Dual2 chain(double f0, double f1, double f2) const {
        Dual2 out(n_, f0);
        for (int i = 0; i < n_; ++i) out.g_[idx(i)] = f1 * g_[idx(i)];
        for (int i = 0; i < n_; ++i)
            for (int j = i; j < n_; ++j)
                out.h_[tri(i, j)] = f1 * h_[tri(i, j)] + f2 * g_[idx(i)] * g_[idx(j)];
        return out;
    }

    friend Dual2 operator+(const Dual2& a, const Dual2& b) {
        Dual2 out(a.n_, a.v_ + b.v_);
        for (int i = 0; i < a.n_; ++i) out.g_[idx(i)] = a.g_[idx(i)] + b.g_[idx(i)];
        for (int k = 0; k < tri_size(a.n_); ++k) out.h_[static_cast<std::size_t>(k)] = a.h_[static_cast<std::size_t>(k)] + b.h_[static_cast<std::size_t>(k)];
        return out;
    }
    friend Dual2 operator-(const Dual2& a, const Dual2& b) {
        Dual2 out(a.n_, a.v_ - b.v_);
        for (int i = 0; i < a.n_; ++i) out.g_[idx(i)] = a.g_[idx(i)] - b.g_[idx(i)];
        for (int k = 0; k < tri_size(a.n_); ++k) out.h_[static_cast<std::size_t>(k)] = a.h_[static_cast<std::size_t>(k)] - b.h_[static_cast<std::size_t>(k)];
        return out;
    }
    friend Dual2 operator-(const Dual2& a) {
        Dual2 out(a.n_, -a.v_);
        for (int i = 0; i < a.n_; ++i) out.g_[idx(i)] = -a.g_[idx(i)];
        for (int k = 0; k < tri_size(a.n_); ++k) out.h_[static_cast<std::size_t>(k)] = -a.h_[static_cast<std::size_t>(k)];
        return out;
    }
    friend Dual2 operator*(const Dual2& a, const Dual2& b) {
        Dual2 out(a.n_, a.v_ * b.v_);
        for (int i = 0; i < a.n_; ++i) out.g_[idx(i)] = a.g_[idx(i)] * b.v_ + a.v_ * b.g_[idx(i)];
        for (int i = 0; i < a.n_; ++i)
            for (int j = i; j < a.n_; ++j)
                out.h_[out.tri(i, j)] = a.h_[out.tri(i, j)] * b.v_ + a.v_ * b.h_[out.tri(i, j)] +
                                        a.g_[idx(i)] * b.g_[idx(j)] + a.g_[idx(j)] * b.g_[idx(i)];
        return out;
    }
    [[nodiscard]] Dual2 reciprocal() const {
        const double r = 1.0 / v_;
        return chain(r, -r * r, 2.0 * r * r * r);
    }

private:
    static std::size_t idx(int i) { return static_cast<std::size_t>(i); }
    static int tri_size(int n) { return n * (n + 1) / 2; }
    [[nodiscard]] std::size_t tri(int i, int j) const {
        if (i > j) std::swap(i, j);
        return static_cast<std::size_t>(i * n_ - i * (i - 1) / 2 + (j - i));
    }

    int n_ = 0;
    double v_ = 0.0;
    std::array<double, kMaxDim> g_{};
    std::array<double, kTri> h_{};
};

// ---------------------------------------------------------------------------

enum class Func { Sin, Cos, Tan, Sinh, Cosh, Tanh, Exp, Log, Sqrt, Abs };

inline constexpr std::array<std::string_view, 10> kFuncNames = {
    "sin", "cos", "tan", "sinh", "cosh", "tanh", "exp", "log", "sqrt", "abs"};

/// Immutable expression tree over a fixed coordinate list. Copies share storage.
class Expression {
public:
    enum class Op { Num, Const, Var, Neg, Add, Sub, Mul, Div, Pow, Call };

    struct Node {
        Op op;
        double value = 0.0;  // Num / Const
        int index = 0;       // Var: coordinate index; Call: Func; Const: 0 = pi, 1 = e
        int a = -1;
        int b = -1;
        bool has_var = false;
    };

    Expression() = default;

    static Expression parse(std::string_view source, std::vector<std::string> coords);

    static Expression constant(double c, std::vector<std::string> coords) {
        Expression e;
        e.coords_ = std::move(coords);
        auto nodes = std::make_shared<std::vector<Node>>();
        nodes->push_back(Node{Op::Num, c});
        e.nodes_ = std::move(nodes);
        e.root_ = 0;
        return e;
    }

    [[nodiscard]] bool empty() const { return !nodes_; }
    [[nodiscard]] int arity() const { return static_cast<int>(coords_.size()); }
    [[nodiscard]] const std::vector<std::string>& coords() const { return coords_; }
    [[nodiscard]] const Node& node(int i) const { return (*nodes_)[static_cast<std::size_t>(i)]; }
    [[nodiscard]] int root() const { return root_; }

    [[nodiscard]] int depth() const { return depth_of(root_); }

    [[nodiscard]] double eval(std::span<const double> point) const {
        check_arity(point.size());
        return eval_node(root_, point);
    }
    [[nodiscard]] double eval(const Vec& point) const {
        return eval(std::span<const double>(point.data(), static_cast<std::size_t>(point.size())));
    }

    /// Value, gradient and Hessian by nested forward-mode duals.
    [[nodiscard]] Dual2 eval2(const Vec& point) const {
        check_arity(static_cast<std::size_t>(point.size()));
        return eval2_node(root_, point);
    }

    /// Third derivatives d/d(dir) of the Hessian, by central differences of eval2.
    [[nodiscard]] Mat eval_third_fd(const Vec& point, int dir) const {
        const double h = std::cbrt(std::numeric_limits<double>::epsilon()) *
                         std::max(1.0, std::abs(point(dir)));
        Vec plus = point, minus = point;
        plus(dir) += h;
        minus(dir) -= h;
        const Mat hp = eval2(plus).hessian();
        const Mat hm = eval2(minus).hessian();
        return (hp - hm) / (2.0 * h);
    }

    /// Canonical infix form; re-parsing it yields an equivalent tree.
    [[nodiscard]] std::string print() const { return print_node(root_); }

    /// Symbolic partial derivative with respect to coordinate `var`.
    [[nodiscard]] Expression derivative(int var) const;

    /// Same tree over a different coordinate list; coordinates are matched by name.
    [[nodiscard]] Expression rebind(const std::vector<std::string>& coords) const;

private:
    friend class ExprBuilder;

    void check_arity(std::size_t n) const {
        if (n != coords_.size())
            throw Error(ErrorKind::BadParam, "point has " + std::to_string(n) + " entries, expression expects " +
                                                 std::to_string(coords_.size()));
    }

    int depth_of(int i) const {
        const Node& nd = node(i);
        int d = 0;
        if (nd.a >= 0) d = std::max(d, depth_of(nd.a));
        if (nd.b >= 0) d = std::max(d, depth_of(nd.b));
        return d + 1;
    }

    static double apply(Func f, double x) {
        switch (f) {
            case Func::Sin: return std::sin(x);
            case Func::Cos: return std::cos(x);
            case Func::Tan: return std::tan(x);
            case Func::Sinh: return std::sinh(x);
            case Func::Cosh: return std::cosh(x);
            case Func::Tanh: return std::tanh(x);
            case Func::Exp: return std::exp(x);
            case Func::Log:
                if (x <= 0.0) throw Error(ErrorKind::DomainFault, "log of nonpositive argument " + fmt17(x));
                return std::log(x);
            case Func::Sqrt:
                if (x < 0.0) throw Error(ErrorKind::DomainFault, "sqrt of negative argument " + fmt17(x));
                return std::sqrt(x);
            case Func::Abs: return std::abs(x);
        }
        return 0.0;
    }

    static Dual2 apply(Func f, const Dual2& u) {
        const double x = u.value();
        switch (f) {
            case Func::Sin: return u.chain(std::sin(x), std::cos(x), -std::sin(x));
            case Func::Cos: return u.chain(std::cos(x), -std::sin(x), -std::cos(x));
            case Func::Tan: {
                const double t = std::tan(x), s = 1.0 + t * t;
                return u.chain(t, s, 2.0 * t * s);
            }
            case Func::Sinh: return u.chain(std::sinh(x), std::cosh(x), std::sinh(x));
            case Func::Cosh: return u.chain(std::cosh(x), std::sinh(x), std::cosh(x));
            case Func::Tanh: {
                const double t = std::tanh(x), s = 1.0 - t * t;
                return u.chain(t, s, -2.0 * t * s);
            }
            case Func::Exp: {
                const double e = std::exp(x);
                return u.chain(e, e, e);
            }
            case Func::Log:
                if (x <= 0.0) throw Error(ErrorKind::DomainFault, "log of nonpositive argument " + fmt17(x));
                return u.chain(std::log(x), 1.0 / x, -1.0 / (x * x));
            case Func::Sqrt: {
                if (x < 0.0) throw Error(ErrorKind::DomainFault, "sqrt of negative argument " + fmt17(x));
                if (x == 0.0) throw Error(ErrorKind::DomainFault, "sqrt is not differentiable at 0");
                const double s = std::sqrt(x);
                return u.chain(s, 0.5 / s, -0.25 / (s * x));
            }
            case Func::Abs: return u.chain(std::abs(x), x < 0.0 ? -1.0 : 1.0, 0.0);
        }
        return u;
    }

    static bool integral_exponent(double k) { return std::abs(k) <= 1e6 && k == std::nearbyint(k); }

    static double pow_value(double a, double b, bool const_exponent) {
        if (const_exponent && integral_exponent(b)) {
            if (a == 0.0 && b < 0.0) throw Error(ErrorKind::DomainFault, "division by zero in negative power");
            return std::pow(a, b);
        }
        if (a <= 0.0)
            throw Error(ErrorKind::DomainFault, "nonpositive base " + fmt17(a) + " with non-integer exponent");
        return std::exp(b * std::log(a));
    }

    double eval_node(int i, std::span<const double> p) const {
        const Node& nd = node(i);
        switch (nd.op) {
            case Op::Num:
            case Op::Const: return nd.value;
            case Op::Var: return p[static_cast<std::size_t>(nd.index)];
            case Op::Neg: return -eval_node(nd.a, p);
            case Op::Add: return eval_node(nd.a, p) + eval_node(nd.b, p);
            case Op::Sub: return eval_node(nd.a, p) - eval_node(nd.b, p);
            case Op::Mul: return eval_node(nd.a, p) * eval_node(nd.b, p);
            case Op::Div: {
                const double den = eval_node(nd.b, p);
                if (den == 0.0) throw Error(ErrorKind::DomainFault, "division by zero");
                return eval_node(nd.a, p) / den;
            }
            case Op::Pow: return pow_value(eval_node(nd.a, p), eval_node(nd.b, p), !node(nd.b).has_var);
            case Op::Call: return apply(static_cast<Func>(nd.index), eval_node(nd.a, p));
        }
        return 0.0;
    }

    Dual2 eval2_node(int i, const Vec& p) const {
        const Node& nd = node(i);
        const int n = static_cast<int>(p.size());
        switch (nd.op) {
            case Op::Num:
            case Op::Const: return Dual2(n, nd.value);
            case Op::Var: return Dual2::variable(n, nd.index, p(nd.index));
            case Op::Neg: return -eval2_node(nd.a, p);
            case Op::Add: return eval2_node(nd.a, p) + eval2_node(nd.b, p);
            case Op::Sub: return eval2_node(nd.a, p) - eval2_node(nd.b, p);
            case Op::Mul: return eval2_node(nd.a, p) * eval2_node(nd.b, p);
            case Op::Div: {
                const Dual2 den = eval2_node(nd.b, p);
                if (den.value() == 0.0) throw Error(ErrorKind::DomainFault, "division by zero");
                return eval2_node(nd.a, p) * den.reciprocal();
            }
            case Op::Pow: {
                const Dual2 base = eval2_node(nd.a, p);
                const Node& ex = node(nd.b);
                if (!ex.has_var) {
                    const double k = eval_node(nd.b, std::span<const double>(p.data(), static_cast<std::size_t>(n)));
                    const double a = base.value();
                    if (integral_exponent(k)) {
                        if (k == 0.0) return Dual2(n, 1.0);
                        if (a == 0.0 && k < 0.0)
                            throw Error(ErrorKind::DomainFault, "division by zero in negative power");
                        const double f0 = std::pow(a, k);
                        const double f1 = k * std::pow(a, k - 1.0);
                        const double f2 = k == 1.0 ? 0.0 : k * (k - 1.0) * std::pow(a, k - 2.0);
                        return base.chain(f0, f1, f2);
                    }
                    if (a <= 0.0)
                        throw Error(ErrorKind::DomainFault,
                                    "nonpositive base " + fmt17(a) + " with non-integer exponent");
                    return base.chain(std::pow(a, k), k * std::pow(a, k - 1.0), k * (k - 1.0) * std::pow(a, k - 2.0));
                }
                if (base.value() <= 0.0)
                    throw Error(ErrorKind::DomainFault,
                                "nonpositive base " + fmt17(base.value()) + " with variable exponent");
                const Dual2 lg = apply(Func::Log, base);
                return apply(Func::Exp, eval2_node(nd.b, p) * lg);
            }
            case Op::Call: return apply(static_cast<Func>(nd.index), eval2_node(nd.a, p));
        }
        return Dual2(n, 0.0);
    }

    static int precedence(Op op) {
        switch (op) {
            case Op::Add:
            case Op::Sub: return 1;
            case Op::Mul:
            case Op::Div: return 2;
            case Op::Neg: return 3;
            case Op::Pow: return 4;
            default: return 5;
        }
    }

    std::string print_node(int i) const {
        const Node& nd = node(i);
        auto wrap = [&](int child, bool paren) {
            return paren ? "(" + print_node(child) + ")" : print_node(child);
        };
        const int prec = precedence(nd.op);
        switch (nd.op) {
            case Op::Num: return fmt17(nd.value);
            case Op::Const: return nd.index == 0 ? "pi" : "e";
            case Op::Var: return coords_[static_cast<std::size_t>(nd.index)];
            case Op::Neg: return "-" + wrap(nd.a, precedence(node(nd.a).op) < 3);
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                const char* sym = nd.op == Op::Add ? " + " : nd.op == Op::Sub ? " - " : nd.op == Op::Mul ? "*" : "/";
                return wrap(nd.a, precedence(node(nd.a).op) < prec) + sym +
                       wrap(nd.b, precedence(node(nd.b).op) <= prec);
            }
            case Op::Pow:
                return wrap(nd.a, precedence(node(nd.a).op) <= 4) + "^" + wrap(nd.b, precedence(node(nd.b).op) < 3);
            case Op::Call:
                return std::string(kFuncNames[static_cast<std::size_t>(nd.index)]) + "(" + print_node(nd.a) + ")";
        }
        return {};
    }

    std::shared_ptr<const std::vector<Node>> nodes_;
    int root_ = -1;
    std::vector<std::string> coords_;
};

// ---------------------------------------------------------------------------
// Tree construction with light folding of 0 and 1; used by the parser and by
// symbolic differentiation.

class ExprBuilder {
public:
    using Op = Expression::Op;
    using Node = Expression::Node;

    explicit ExprBuilder(std::vector<Node> seed = {}) : nodes_(std::move(seed)) {}

    int num(double v) { return push(Node{Op::Num, v}); }
    int konst(int which) { return push(Node{Op::Const, which == 0 ? M_PI : M_E, which}); }
    int var(int i) {
        Node nd{Op::Var};
        nd.index = i;
        nd.has_var = true;
        return push(nd);
    }
    int unary(Op op, int a, int index = 0) {
        Node nd{op};
        nd.a = a;
        nd.index = index;
        nd.has_var = nodes_[static_cast<std::size_t>(a)].has_var;
        return push(nd);
    }
    int binary(Op op, int a, int b) {
        Node nd{op};
        nd.a = a;
        nd.b = b;
        nd.has_var = nodes_[static_cast<std::size_t>(a)].has_var || nodes_[static_cast<std::size_t>(b)].has_var;
        return push(nd);
    }

    // Folding helpers for generated trees.
    [[nodiscard]] bool is_num(int i, double v) const {
        const Node& nd = nodes_[static_cast<std::size_t>(i)];
        return nd.op == Op::Num && nd.value == v;
    }
    int add(int a, int b) {
        if (is_num(a, 0.0)) return b;
        if (is_num(b, 0.0)) return a;
        return binary(Op::Add, a, b);
    }
    int sub(int a, int b) {
        if (is_num(b, 0.0)) return a;
        if (is_num(a, 0.0)) return neg(b);
        return binary(Op::Sub, a, b);
    }
    int mul(int a, int b) {
        if (is_num(a, 0.0) || is_num(b, 0.0)) return num(0.0);
        if (is_num(a, 1.0)) return b;
        if (is_num(b, 1.0)) return a;
        return binary(Op::Mul, a, b);
    }
    int div(int a, int b) {
        if (is_num(a, 0.0)) return num(0.0);
        if (is_num(b, 1.0)) return a;
        return binary(Op::Div, a, b);
    }
    int neg(int a) {
        if (is_num(a, 0.0)) return a;
        return unary(Op::Neg, a);
    }
    int call(Func f, int a) { return unary(Op::Call, a, static_cast<int>(f)); }
    int pow(int a, int b) { return binary(Op::Pow, a, b); }

    Expression finish(int root, std::vector<std::string> coords) {
        Expression e;
        e.nodes_ = std::make_shared<const std::vector<Node>>(std::move(nodes_));
        e.root_ = root;
        e.coords_ = std::move(coords);
        return e;
    }

    [[nodiscard]] const Node& at(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

private:
    int push(const Node& nd) {
        nodes_.push_back(nd);
        return static_cast<int>(nodes_.size()) - 1;
    }

    std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    Parser(std::string_view src, const std::vector<std::string>& coords) : src_(src), coords_(coords) {}

    int parse_all() {
        skip_ws();
        if (pos_ >= src_.size()) fail({"expression"}, "empty expression");
        const int root = parse_expr();
        skip_ws();
        if (pos_ < src_.size()) fail({"operator", "end of input"}, std::string("unexpected '") + src_[pos_] + "'");
        return root;
    }

    ExprBuilder& builder() { return b_; }

private:
    [[noreturn]] void fail(std::vector<std::string> expected, const std::string& msg) const {
        throw ParseError(line_, col_, std::move(expected), msg);
    }

    void advance() {
        if (src_[pos_] == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            advance();
            return true;
        }
        return false;
    }

    int parse_expr() {
        int lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = b_.binary(Expression::Op::Add, lhs, parse_term());
            else if (accept('-')) lhs = b_.binary(Expression::Op::Sub, lhs, parse_term());
            else return lhs;
        }
    }

    int parse_term() {
        int lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = b_.binary(Expression::Op::Mul, lhs, parse_unary());
            else if (accept('/')) lhs = b_.binary(Expression::Op::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    int parse_unary() {
        if (accept('-')) return b_.unary(Expression::Op::Neg, parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    int parse_power() {
        const int base = parse_primary();
        if (accept('^')) return b_.binary(Expression::Op::Pow, base, parse_unary());
        return base;
    }

    int parse_primary() {
        skip_ws();
        static const std::vector<std::string> kPrimary = {"number", "identifier", "(", "-"};
        if (pos_ >= src_.size()) fail(kPrimary, "unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            advance();
            const int inner = parse_expr();
            if (!accept(')')) fail({")"}, "unbalanced parenthesis");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail(kPrimary, std::string("unexpected '") + c + "'");
    }

    int parse_number() {
        const std::size_t start = pos_;
        const int start_col = col_;
        auto digits = [&] {
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
        };
        digits();
        if (pos_ < src_.size() && src_[pos_] == '.') {
            advance();
            digits();
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            const std::size_t save = pos_;
            const int save_col = col_;
            advance();
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) advance();
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                digits();
            } else {
                pos_ = save;
                col_ = save_col;
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        if (text == ".") throw ParseError(line_, start_col, {"number"}, "malformed number");
        return b_.num(std::stod(text));
    }

    int parse_identifier() {
        const std::size_t start = pos_;
        const int start_col = col_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            advance();
        const std::string name(src_.substr(start, pos_ - start));
        for (std::size_t i = 0; i < coords_.size(); ++i)
            if (coords_[i] == name) return b_.var(static_cast<int>(i));
        for (std::size_t f = 0; f < kFuncNames.size(); ++f) {
            if (kFuncNames[f] == name) {
                if (!accept('(')) fail({"("}, "function '" + name + "' needs an argument list");
                const int arg = parse_expr();
                if (!accept(')')) fail({")"}, "unclosed argument list of '" + name + "'");
                return b_.call(static_cast<Func>(f), arg);
            }
        }
        if (name == "pi") return b_.konst(0);
        if (name == "e") return b_.konst(1);
        throw Error(ErrorKind::UnknownIdentifier, "'" + name + "' at line " + std::to_string(line_) + ", column " +
                                                      std::to_string(start_col));
    }

    std::string_view src_;
    const std::vector<std::string>& coords_;
    ExprBuilder b_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

}  // namespace detail

inline Expression Expression::parse(std::string_view source, std::vector<std::string> coords) {
    detail::Parser p(source, coords);
    const int root = p.parse_all();
    return p.builder().finish(root, std::move(coords));
}

inline Expression Expression::derivative(int var) const {
    ExprBuilder b(*nodes_);
    // memoized recursion over the shared arena
    std::vector<int> memo(nodes_->size(), -1);
    auto d = [&](auto&& self, int i) -> int {
        if (memo[static_cast<std::size_t>(i)] >= 0) return memo[static_cast<std::size_t>(i)];
        const Node nd = b.at(i);
        int out = 0;
        if (!nd.has_var) {
            out = b.num(0.0);
        } else {
            switch (nd.op) {
                case Op::Num:
                case Op::Const: out = b.num(0.0); break;
                case Op::Var: out = b.num(nd.index == var ? 1.0 : 0.0); break;
                case Op::Neg: out = b.neg(self(self, nd.a)); break;
                case Op::Add: out = b.add(self(self, nd.a), self(self, nd.b)); break;
                case Op::Sub: out = b.sub(self(self, nd.a), self(self, nd.b)); break;
                case Op::Mul:
                    out = b.add(b.mul(self(self, nd.a), nd.b), b.mul(nd.a, self(self, nd.b)));
                    break;
                case Op::Div: {
                    const int num = b.sub(b.mul(self(self, nd.a), nd.b), b.mul(nd.a, self(self, nd.b)));
                    out = b.div(num, b.pow(nd.b, b.num(2.0)));
                    break;
                }
                case Op::Pow: {
                    const int da = self(self, nd.a);
                    if (!b.at(nd.b).has_var) {
                        const int km1 = b.sub(nd.b, b.num(1.0));
                        out = b.mul(b.mul(nd.b, b.pow(nd.a, km1)), da);
                    } else {
                        const int db = self(self, nd.b);
                        const int inner = b.add(b.mul(db, b.call(Func::Log, nd.a)), b.div(b.mul(nd.b, da), nd.a));
                        out = b.mul(i, inner);
                    }
                    break;
                }
                case Op::Call: {
                    const int da = self(self, nd.a);
                    const int a = nd.a;
                    switch (static_cast<Func>(nd.index)) {
                        case Func::Sin: out = b.mul(b.call(Func::Cos, a), da); break;
                        case Func::Cos: out = b.neg(b.mul(b.call(Func::Sin, a), da)); break;
                        case Func::Tan: out = b.div(da, b.pow(b.call(Func::Cos, a), b.num(2.0))); break;
                        case Func::Sinh: out = b.mul(b.call(Func::Cosh, a), da); break;
                        case Func::Cosh: out = b.mul(b.call(Func::Sinh, a), da); break;
                        case Func::Tanh: out = b.div(da, b.pow(b.call(Func::Cosh, a), b.num(2.0))); break;
                        case Func::Exp: out = b.mul(i, da); break;
                        case Func::Log: out = b.div(da, a); break;
                        case Func::Sqrt: out = b.div(da, b.mul(b.num(2.0), i)); break;
                        case Func::Abs: out = b.mul(b.div(a, i), da); break;
                    }
                    break;
                }
            }
        }
        memo[static_cast<std::size_t>(i)] = out;
        return out;
    };
    const int root = d(d, root_);
    return b.finish(root, coords_);
}

inline Expression Expression::rebind(const std::vector<std::string>& coords) const {
    std::vector<Node> nodes = *nodes_;
    for (Node& nd : nodes) {
        if (nd.op != Op::Var) continue;
        const std::string& name = coords_[static_cast<std::size_t>(nd.index)];
        int found = -1;
        for (std::size_t i = 0; i < coords.size(); ++i)
            if (coords[i] == name) found = static_cast<int>(i);
        if (found < 0) throw Error(ErrorKind::UnknownIdentifier, "'" + name + "' missing from target coordinates");
        nd.index = found;
    }
    ExprBuilder b(std::move(nodes));
    return b.finish(root_, coords);
}

}  // namespace rkit
