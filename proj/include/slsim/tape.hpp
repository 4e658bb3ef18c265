#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slsim/errors.hpp"

namespace slsim::ad {

// Primitive operations recorded on the tape. sum/dot are n-ary (operands live
// in a side array) so wide reductions cost one node instead of a chain.
enum class Op : uint8_t {
    leaf,
    add, sub, mul, div,
    neg, addc, mulc, rsubc, rdivc,
    expv, logv, sqrtv, sigmoidv, sinv, cosv, absv, max0v, sqrv,
    sum, dot,
};

inline const char* op_name(Op op) {
    switch (op) {
        case Op::leaf: return "leaf";
        case Op::add: return "add";
        case Op::sub: return "sub";
        case Op::mul: return "mul";
        case Op::div: return "div";
        case Op::neg: return "neg";
        case Op::addc: return "addc";
        case Op::mulc: return "mulc";
        case Op::rsubc: return "rsubc";
        case Op::rdivc: return "rdivc";
        case Op::expv: return "exp";
        case Op::logv: return "log";
        case Op::sqrtv: return "sqrt";
        case Op::sigmoidv: return "sigmoid";
        case Op::sinv: return "sin";
        case Op::cosv: return "cos";
        case Op::absv: return "abs";
        case Op::max0v: return "max0";
        case Op::sqrv: return "sqr";
        case Op::sum: return "sum";
        case Op::dot: return "dot";
    }
    return "?";
}

struct Node {
    Op op;
    int32_t a = -1; // input id, or offset into args for sum/dot
    int32_t b = -1; // second input id, or operand count for sum/dot
    double c = 0.0; // constant operand for *c ops
};

// Record of a single forward evaluation. Appending is strictly sequential, so
// node order is a topological order and both replay and backward are
// deterministic by construction.
class Tape {
public:
    int32_t leaf(double v) {
        nodes_.push_back({Op::leaf, -1, -1, 0.0});
        vals_.push_back(v);
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    int32_t rec1(Op op, int32_t a, double c, double value) {
        nodes_.push_back({op, a, -1, c});
        vals_.push_back(value);
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    int32_t rec2(Op op, int32_t a, int32_t b, double value) {
        nodes_.push_back({op, a, b, 0.0});
        vals_.push_back(value);
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    int32_t rec_sum(const int32_t* ids, int count, double value) {
        int32_t off = static_cast<int32_t>(args_.size());
        args_.insert(args_.end(), ids, ids + count);
        nodes_.push_back({Op::sum, off, count, 0.0});
        vals_.push_back(value);
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    // args stored interleaved: x0,y0,x1,y1,... push_back keeps the growth
    // geometric; an exact reserve here would reallocate on every call.
    int32_t rec_dot(const int32_t* xs, const int32_t* ys, int count, double value) {
        int32_t off = static_cast<int32_t>(args_.size());
        for (int i = 0; i < count; ++i) {
            args_.push_back(xs[i]);
            args_.push_back(ys[i]);
        }
        nodes_.push_back({Op::dot, off, count, 0.0});
        vals_.push_back(value);
        return static_cast<int32_t>(nodes_.size()) - 1;
    }

    double val(int32_t id) const { return vals_[id]; }
    void set_leaf(int32_t id, double v) {
        if (nodes_[id].op != Op::leaf)
            throw contract_error("set_leaf: node " + std::to_string(id) + " is not a leaf");
        vals_[id] = v;
    }

    size_t size() const { return nodes_.size(); }
    void clear() {
        nodes_.clear();
        vals_.clear();
        args_.clear();
    }
    void reserve(size_t n) {
        nodes_.reserve(n);
        vals_.reserve(n);
    }

    // Recomputes every non-leaf value in recording order; with unchanged
    // leaves this reproduces vals_ bit for bit.
    void replay() {
        for (size_t i = 0; i < nodes_.size(); ++i) {
            const Node& n = nodes_[i];
            if (n.op == Op::leaf) continue;
            vals_[i] = eval(n);
        }
    }

    // Reverse sweep from `loss`; returns one adjoint per node. Adjoints of
    // nodes recorded after `loss` are zero by topological order.
    std::vector<double> gradient(int32_t loss) const {
        if (loss < 0 || loss >= static_cast<int32_t>(nodes_.size()))
            throw contract_error("gradient: loss node out of range");
        std::vector<double> adj(nodes_.size(), 0.0);
        adj[loss] = 1.0;
        for (int32_t i = loss; i >= 0; --i) {
            double g = adj[i];
            if (g == 0.0) continue;
            if (!std::isfinite(g))
                throw numeric_error("non-finite adjoint at node " + std::to_string(i) +
                                    " (" + op_name(nodes_[i].op) + ")");
            const Node& n = nodes_[i];
            switch (n.op) {
                case Op::leaf: break;
                case Op::add: adj[n.a] += g; adj[n.b] += g; break;
                case Op::sub: adj[n.a] += g; adj[n.b] -= g; break;
                case Op::mul: adj[n.a] += g * vals_[n.b]; adj[n.b] += g * vals_[n.a]; break;
                case Op::div:
                    adj[n.a] += g / vals_[n.b];
                    adj[n.b] -= g * vals_[i] / vals_[n.b];
                    break;
                case Op::neg: adj[n.a] -= g; break;
                case Op::addc: adj[n.a] += g; break;
                case Op::mulc: adj[n.a] += g * n.c; break;
                case Op::rsubc: adj[n.a] -= g; break;
                case Op::rdivc: adj[n.a] -= g * vals_[i] / vals_[n.a]; break;
                case Op::expv: adj[n.a] += g * vals_[i]; break;
                case Op::logv: adj[n.a] += g / vals_[n.a]; break;
                case Op::sqrtv: adj[n.a] += g * 0.5 / vals_[i]; break;
                case Op::sigmoidv: adj[n.a] += g * vals_[i] * (1.0 - vals_[i]); break;
                case Op::sinv: adj[n.a] += g * std::cos(vals_[n.a]); break;
                case Op::cosv: adj[n.a] -= g * std::sin(vals_[n.a]); break;
                case Op::absv: adj[n.a] += vals_[n.a] > 0 ? g : (vals_[n.a] < 0 ? -g : 0.0); break;
                case Op::max0v: adj[n.a] += vals_[n.a] > 0 ? g : 0.0; break;
                case Op::sqrv: adj[n.a] += g * 2.0 * vals_[n.a]; break;
                case Op::sum:
                    for (int k = 0; k < n.b; ++k) adj[args_[n.a + k]] += g;
                    break;
                case Op::dot:
                    for (int k = 0; k < n.b; ++k) {
                        int32_t x = args_[n.a + 2 * k], y = args_[n.a + 2 * k + 1];
                        adj[x] += g * vals_[y];
                        adj[y] += g * vals_[x];
                    }
                    break;
            }
        }
        return adj;
    }

private:
    double eval(const Node& n) const {
        switch (n.op) {
            case Op::leaf: return 0.0; // unreachable
            case Op::add: return vals_[n.a] + vals_[n.b];
            case Op::sub: return vals_[n.a] - vals_[n.b];
            case Op::mul: return vals_[n.a] * vals_[n.b];
            case Op::div: return vals_[n.a] / vals_[n.b];
            case Op::neg: return -vals_[n.a];
            case Op::addc: return vals_[n.a] + n.c;
            case Op::mulc: return vals_[n.a] * n.c;
            case Op::rsubc: return n.c - vals_[n.a];
            case Op::rdivc: return n.c / vals_[n.a];
            case Op::expv: return std::exp(vals_[n.a]);
            case Op::logv: return std::log(vals_[n.a]);
            case Op::sqrtv: return std::sqrt(vals_[n.a]);
            case Op::sigmoidv: return 1.0 / (1.0 + std::exp(-vals_[n.a]));
            case Op::sinv: return std::sin(vals_[n.a]);
            case Op::cosv: return std::cos(vals_[n.a]);
            case Op::absv: return std::fabs(vals_[n.a]);
            case Op::max0v: return vals_[n.a] > 0 ? vals_[n.a] : 0.0;
            case Op::sqrv: return vals_[n.a] * vals_[n.a];
            case Op::sum: {
                double s = 0.0;
                for (int k = 0; k < n.b; ++k) s += vals_[args_[n.a + k]];
                return s;
            }
            case Op::dot: {
                double s = 0.0;
                for (int k = 0; k < n.b; ++k)
                    s += vals_[args_[n.a + 2 * k]] * vals_[args_[n.a + 2 * k + 1]];
                return s;
            }
        }
        return 0.0;
    }

    std::vector<Node> nodes_;
    std::vector<double> vals_;
    std::vector<int32_t> args_;
};

// Handle to one tape node. Cheap to copy; all arithmetic appends to the tape
// the operands live on.
struct Var {
    Tape* tape = nullptr;
    int32_t id = -1;

    Var() = default;
    Var(Tape* t, int32_t i) : tape(t), id(i) {}
    double value() const { return tape->val(id); }
};

inline Var make_var(Tape& tape, double v) { return Var(&tape, tape.leaf(v)); }

inline Var operator+(Var a, Var b) {
    return Var(a.tape, a.tape->rec2(Op::add, a.id, b.id, a.value() + b.value()));
}
inline Var operator-(Var a, Var b) {
    return Var(a.tape, a.tape->rec2(Op::sub, a.id, b.id, a.value() - b.value()));
}
inline Var operator*(Var a, Var b) {
    return Var(a.tape, a.tape->rec2(Op::mul, a.id, b.id, a.value() * b.value()));
}
inline Var operator/(Var a, Var b) {
    return Var(a.tape, a.tape->rec2(Op::div, a.id, b.id, a.value() / b.value()));
}
inline Var operator-(Var a) {
    return Var(a.tape, a.tape->rec1(Op::neg, a.id, 0.0, -a.value()));
}
inline Var operator+(Var a, double c) {
    return Var(a.tape, a.tape->rec1(Op::addc, a.id, c, a.value() + c));
}
inline Var operator+(double c, Var a) { return a + c; }
inline Var operator-(Var a, double c) { return a + (-c); }
inline Var operator-(double c, Var a) {
    return Var(a.tape, a.tape->rec1(Op::rsubc, a.id, c, c - a.value()));
}
inline Var operator*(Var a, double c) {
    return Var(a.tape, a.tape->rec1(Op::mulc, a.id, c, a.value() * c));
}
inline Var operator*(double c, Var a) { return a * c; }
inline Var operator/(Var a, double c) { return a * (1.0 / c); }
inline Var operator/(double c, Var a) {
    return Var(a.tape, a.tape->rec1(Op::rdivc, a.id, c, c / a.value()));
}
inline Var& operator+=(Var& a, Var b) { a = a + b; return a; }
inline Var& operator-=(Var& a, Var b) { a = a - b; return a; }
inline Var& operator*=(Var& a, Var b) { a = a * b; return a; }
inline Var& operator+=(Var& a, double c) { a = a + c; return a; }
inline Var& operator*=(Var& a, double c) { a = a * c; return a; }

inline Var exp(Var a) {
    return Var(a.tape, a.tape->rec1(Op::expv, a.id, 0.0, std::exp(a.value())));
}
inline Var log(Var a) {
    return Var(a.tape, a.tape->rec1(Op::logv, a.id, 0.0, std::log(a.value())));
}
inline Var sqrt(Var a) {
    return Var(a.tape, a.tape->rec1(Op::sqrtv, a.id, 0.0, std::sqrt(a.value())));
}
inline Var sigmoid(Var a) {
    return Var(a.tape, a.tape->rec1(Op::sigmoidv, a.id, 0.0, 1.0 / (1.0 + std::exp(-a.value()))));
}
inline Var sin(Var a) {
    return Var(a.tape, a.tape->rec1(Op::sinv, a.id, 0.0, std::sin(a.value())));
}
inline Var cos(Var a) {
    return Var(a.tape, a.tape->rec1(Op::cosv, a.id, 0.0, std::cos(a.value())));
}
inline Var abs(Var a) {
    return Var(a.tape, a.tape->rec1(Op::absv, a.id, 0.0, std::fabs(a.value())));
}
// max(0, x); derivative 0 at x == 0 (subgradient choice).
inline Var max0(Var a) {
    return Var(a.tape, a.tape->rec1(Op::max0v, a.id, 0.0, a.value() > 0 ? a.value() : 0.0));
}
inline Var sqr(Var a) {
    return Var(a.tape, a.tape->rec1(Op::sqrv, a.id, 0.0, a.value() * a.value()));
}

} // namespace slsim::ad
