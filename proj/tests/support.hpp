#pragma once

// Shared builders for the simulation-study models used across tests.

#include <string>
#include <vector>

#include "model.hpp"
#include "simulate.hpp"

namespace msjtest {

// Three-state time-inhomogeneous Markov model: total exit intensities
// 0.1 + 0.002 t + 0.05 sin(t/2) from state 1 (splitting 9:1 between states
// 2 and 3) and 0.06 + 0.002 t + 0.05 sin(t/2) from state 2 (all to state 3).
inline msj::IntensityModel markov_study_model() {
    msj::IntensityModel model;
    model.states.labels = {"1", "2", "3"};
    model.absorbing = {false, false, true};
    model.kind = msj::ModelKind::Markov;
    model.transitions.push_back(
        {0, 1, msj::IntensityExpr::parse("0.09 + 0.0018*t + 0.045*sin(t/2)")});
    model.transitions.push_back(
        {0, 2, msj::IntensityExpr::parse("0.01 + 0.0002*t + 0.005*sin(t/2)")});
    model.transitions.push_back(
        {1, 2, msj::IntensityExpr::parse("0.06 + 0.002*t + 0.05*sin(t/2)")});
    return model;
}

// Semi-Markov variant: transitions out of state 1 depend on calendar time
// only; 2 -> 3 picks up a duration-dependent logistic reactivation term.
inline msj::IntensityModel semimarkov_study_model() {
    msj::IntensityModel model;
    model.states.labels = {"1", "2", "3"};
    model.absorbing = {false, false, true};
    model.kind = msj::ModelKind::SemiMarkov;
    model.transitions.push_back({0, 1, msj::IntensityExpr::parse("0.09 + 0.0018*t")});
    model.transitions.push_back({0, 2, msj::IntensityExpr::parse("0.01 + 0.0002*t")});
    model.transitions.push_back(
        {1, 2, msj::IntensityExpr::parse(
                   "0.09 + 0.001*t*(1 + 0.1*u) + 0.2/(1 + exp(0.5*(u - 4)))")});
    return model;
}

// Analytic occupation probability for the Markov study model:
// P(Z_20 = 1, 20 <= R) = exp(-int_0^20 lambda_1) * P(R >= 20).
inline double p1c_at_20() {
    double integral = 2.0 + 0.4 + 0.1 * (1.0 - std::cos(10.0));
    return std::exp(-integral) * (2.0 / 3.0);
}

inline double mu12_at(double t) { return 0.09 + 0.0018 * t + 0.045 * std::sin(t / 2.0); }

}  // namespace msjtest
