#pragma once

#include <string>
#include <vector>

#include "navforge/harness.hpp"

namespace navforge {

struct EvalConfig {
    std::string checkpoint_path;
    std::string map_file;
    std::string roster_file;  // empty: sample a 15-pair roster from `seed`
    int trials = 500;
    int eval_timeout = 1500;  // steps
    bool deterministic_policy = true;
    uint64_t seed = 1;
};

struct ConfidenceInterval {
    double lo = 0.0;
    double hi = 0.0;
};

// Normal-approximation interval p +- z * sqrt(p(1-p)/n), clipped to [0,1].
ConfidenceInterval binomial_ci_normal(int successes, int trials, double confidence);
// Wilson score interval at the same confidence.
ConfidenceInterval binomial_ci_wilson(int successes, int trials, double confidence);

// Inverse standard-normal CDF (Acklam's rational approximation).
double probit(double p);

struct TrialRecord {
    int trial = 0;
    int pair_index = 0;
    Outcome outcome = Outcome::TimedOut;
    int steps = 0;
    double path_length = 0.0;  // m
};

struct EvalReport {
    int trials = 0;
    int successes = 0;
    int collisions = 0;
    int timeouts = 0;
    double success_rate = 0.0;
    double collision_rate = 0.0;
    double timeout_rate = 0.0;
    ConfidenceInterval normal90, normal99, wilson90, wilson99;
    std::vector<TrialRecord> records;

    std::string to_csv() const;
    std::string summary() const;
};

// Runs `trials` episodes of the frozen policy, cycling the roster
// (trial i uses pair i mod roster size). The roster is validated against
// the map before any trial runs.
EvalReport run_eval(const EvalConfig& cfg);

// Per-map success rates across methods; rows follow map_labels, columns
// method_labels. Cells print at one decimal; row bests are flagged, ties
// flag every winner.
struct SuccessTable {
    std::vector<std::string> map_labels;
    std::vector<std::string> method_labels;
    std::vector<std::vector<double>> rates;  // [map][method], fractions
};

std::string success_table_text(const SuccessTable& table);
std::string success_table_csv(const SuccessTable& table);

// Moving-average return curves as a self-contained SVG, one polyline per
// labeled log, plus an exact-value CSV sidecar.
struct LabeledSeries {
    std::string label;
    std::vector<double> values;
};

std::string reward_plot_svg(const std::vector<LabeledSeries>& series);
std::string reward_plot_csv(const std::vector<LabeledSeries>& series);

}  // namespace navforge
