#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace msj {

// Arithmetic expressions over calendar time t and duration u, restricted to
// {+, -, *, /, unary minus, sin, cos, exp, log} and decimal constants.
// Immutable after parse; evaluation is pure, so instances may be shared and
// evaluated concurrently.
class IntensityExpr {
public:
    enum class Op : std::uint8_t {
        Const,
        VarT,
        VarU,
        Neg,
        Sin,
        Cos,
        Exp,
        Log,
        Add,
        Sub,
        Mul,
        Div,
    };

    struct Node {
        Op op;
        double value = 0.0;  // Const only
        int lhs = -1;
        int rhs = -1;
    };

    // Throws ParseError (with byte offset) on malformed input or identifiers
    // other than t, u, sin, cos, exp, log.
    static IntensityExpr parse(std::string_view text);

    // Builds lhs + rhs without reparsing; used for per-state exit intensities.
    static IntensityExpr sum(const IntensityExpr& lhs, const IntensityExpr& rhs);

    double eval(double t) const;
    double eval(double t, double u) const;

    bool uses_duration() const { return uses_duration_; }
    bool has_division() const { return has_division_; }

    // Canonical form: minimal parentheses, shortest round-trip constants,
    // spaces around +/- only. parse(str()) reproduces the AST exactly.
    std::string str() const;

    // B >= sup over [t_lo, t_hi] x [u_lo, u_hi], via a dense grid scan
    // (step <= range/64 per active axis) times a 1.2 safety factor.
    // Returns 0 only when the scan maximum is <= 0. Throws on non-finite
    // values encountered during the scan.
    double upper_bound(double t_lo, double t_hi, double u_lo, double u_hi) const;

    bool operator==(const IntensityExpr& other) const;

    const std::vector<Node>& nodes() const { return nodes_; }
    int root() const { return root_; }

private:
    double eval_impl(double t, double u, bool u_present) const;

    std::vector<Node> nodes_;
    int root_ = -1;
    bool uses_duration_ = false;
    bool has_division_ = false;
};

}  // namespace msj
