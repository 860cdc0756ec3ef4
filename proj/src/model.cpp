#include "model.hpp"

#include <cmath>
#include <set>

namespace msj {

int StateSpace::find(std::string_view label) const {
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return static_cast<int>(i);
    return -1;
}

std::vector<int> IntensityModel::outgoing(int state) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < transitions.size(); ++i)
        if (transitions[i].from == state) out.push_back(static_cast<int>(i));
    return out;
}

std::vector<std::pair<int, int>> IntensityModel::transition_pairs() const {
    std::vector<std::pair<int, int>> out;
    out.reserve(transitions.size());
    for (const auto& tr : transitions) out.emplace_back(tr.from, tr.to);
    return out;
}

void IntensityModel::validate(double horizon) const {
    if (states.size() == 0) throw ValidationError("model has no states");
    {
        std::set<std::string> seen;
        for (const auto& l : states.labels)
            if (!seen.insert(l).second)
                throw ValidationError("duplicate state label '" + l + "'");
    }
    if (absorbing.size() != static_cast<std::size_t>(states.size()))
        throw ValidationError("absorbing flags do not match the state count");
    if (transitions.empty()) throw ValidationError("model has no transitions");
    if (!(horizon > 0.0)) throw ValidationError("horizon must be positive");

    std::set<std::pair<int, int>> seen_pairs;
    for (const auto& tr : transitions) {
        const std::string name =
            states.label(tr.from) + " -> " + states.label(tr.to);
        if (tr.from == tr.to)
            throw ValidationError("self transition " + name + " is not allowed");
        if (!seen_pairs.insert({tr.from, tr.to}).second)
            throw ValidationError("duplicate transition " + name);
        if (is_absorbing(tr.from))
            throw ValidationError("transition " + name + " departs an absorbing state");
        if (kind == ModelKind::Markov && tr.expr.uses_duration())
            throw ValidationError("markov model but transition " + name +
                                  " depends on duration u");

        // Nonnegativity scan over the simulation horizon.
        auto check = [&](double t, double u) {
            double v = tr.expr.uses_duration() ? tr.expr.eval(t, u) : tr.expr.eval(t);
            if (!std::isfinite(v))
                throw ValidationError("transition " + name + " is non-finite at t=" +
                                      std::to_string(t) + ", u=" + std::to_string(u));
            if (v < 0.0)
                throw ValidationError("transition " + name + " is negative at t=" +
                                      std::to_string(t) + ", u=" + std::to_string(u) +
                                      " (value " + std::to_string(v) + ")");
        };
        if (tr.expr.uses_duration()) {
            constexpr int kSide = 64;  // 64 x 64 = 4096 scan points
            for (int i = 0; i <= kSide; ++i)
                for (int j = 0; j <= kSide; ++j)
                    check(horizon * i / kSide, horizon * j / kSide);
        } else {
            constexpr int kPoints = 4096;
            for (int i = 0; i <= kPoints; ++i) check(horizon * i / kPoints, 0.0);
        }
    }
}

}  // namespace msj
