#pragma once

#include <string>
#include <vector>

#include "expr.hpp"

namespace msj {

// State labels are interned: files and configs carry strings, everything
// internal uses dense indices.
struct StateSpace {
    std::vector<std::string> labels;

    int size() const { return static_cast<int>(labels.size()); }

    // -1 when absent.
    int find(std::string_view label) const;

    const std::string& label(int idx) const { return labels[static_cast<std::size_t>(idx)]; }
};

enum class ModelKind { Markov, SemiMarkov };

struct ModelTransition {
    int from;
    int to;
    IntensityExpr expr;
};

struct IntensityModel {
    StateSpace states;
    std::vector<bool> absorbing;  // indexed by state
    ModelKind kind = ModelKind::Markov;
    std::vector<ModelTransition> transitions;  // sorted by (from, to)

    bool is_absorbing(int state) const { return absorbing[static_cast<std::size_t>(state)]; }

    std::vector<int> outgoing(int state) const;  // transition indices

    std::vector<std::pair<int, int>> transition_pairs() const;

    // Structural checks plus a nonnegativity/finiteness grid scan of every
    // expression over [0, horizon] (4096 points; 64x64 for duration-dependent
    // expressions). Throws ValidationError.
    void validate(double horizon) const;
};

}  // namespace msj
