#include "navforge/evalcli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace navforge {

double probit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw std::invalid_argument("probit: p must be in (0, 1)");
    // Acklam's rational approximation, |relative error| < 1.15e-9.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double q, r;
    if (p < plow) {
        q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - plow) {
        q = std::sqrt(-2.0 * std::log(1.0 - p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

ConfidenceInterval binomial_ci_normal(int successes, int trials, double confidence) {
    if (trials <= 0)
        throw std::invalid_argument("binomial_ci: trials must be positive");
    if (successes < 0 || successes > trials)
        throw std::invalid_argument("binomial_ci: successes out of range");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("binomial_ci: confidence must be in (0, 1)");
    const double p = static_cast<double>(successes) / trials;
    const double z = probit(0.5 + confidence / 2.0);
    const double half = z * std::sqrt(p * (1.0 - p) / trials);
    return {std::max(0.0, p - half), std::min(1.0, p + half)};
}

ConfidenceInterval binomial_ci_wilson(int successes, int trials, double confidence) {
    if (trials <= 0)
        throw std::invalid_argument("binomial_ci: trials must be positive");
    if (successes < 0 || successes > trials)
        throw std::invalid_argument("binomial_ci: successes out of range");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("binomial_ci: confidence must be in (0, 1)");
    const double p = static_cast<double>(successes) / trials;
    const double n = trials;
    const double z = probit(0.5 + confidence / 2.0);
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::string EvalReport::to_csv() const {
    std::string out = "trial,pair_index,outcome,steps,path_length\n";
    for (const auto& r : records) {
        out += std::to_string(r.trial);
        out += ',';
        out += std::to_string(r.pair_index);
        out += ',';
        out += to_string(r.outcome);
        out += ',';
        out += std::to_string(r.steps);
        out += ',';
        out += format_double(r.path_length);
        out += '\n';
    }
    return out;
}

std::string EvalReport::summary() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "trials %d: success %.1f%% (%d), collision %.1f%% (%d), "
                  "timeout %.1f%% (%d)\n"
                  "success CI  90%%: normal [%.3f, %.3f], wilson [%.3f, %.3f]\n"
                  "success CI  99%%: normal [%.3f, %.3f], wilson [%.3f, %.3f]\n",
                  trials, 100.0 * success_rate, successes, 100.0 * collision_rate,
                  collisions, 100.0 * timeout_rate, timeouts, normal90.lo,
                  normal90.hi, wilson90.lo, wilson90.hi, normal99.lo, normal99.hi,
                  wilson99.lo, wilson99.hi);
    return buf;
}

EvalReport run_eval(const EvalConfig& cfg) {
    if (cfg.trials < 1)
        throw ConfigError("eval: trials must be >= 1");
    PolicyHandle policy = load_policy(cfg.checkpoint_path);
    if (policy.obs_dim() != kObsDim)
        throw IoError("eval: checkpoint observation dimension " +
                      std::to_string(policy.obs_dim()) + " != " +
                      std::to_string(kObsDim));
    GridMap map = load_map_file(cfg.map_file);

    ScenarioRoster roster;
    if (!cfg.roster_file.empty()) {
        roster = load_roster_file(cfg.roster_file);
    } else {
        roster = sample_roster(map, cfg.seed, policy.sim.robot_radius, 15, 2.0);
    }
    if (roster.pairs.empty())
        throw ConfigError("eval: roster is empty");
    validate_roster(roster, map, policy.sim.robot_radius);

    ObsConfig obs_cfg;
    obs_cfg.normalize = policy.normalize_obs;
    obs_cfg.max_range = policy.sim.max_range;
    obs_cfg.map_diag = std::hypot(map.width_m(), map.height_m());

    EvalReport report;
    report.trials = cfg.trials;
    for (int trial = 0; trial < cfg.trials; ++trial) {
        const auto& pair = roster.pairs[trial % roster.pairs.size()];
        Rng rng(derive_seed(cfg.seed, 0x7472ULL + trial));

        EpisodeState ep;
        ep.robot.pose = pair.start;
        ep.goal = pair.goal;
        ep.timeout = cfg.eval_timeout;

        double path_length = 0.0;
        LidarScan sc = scan(map, ep.robot, policy.sim.max_range);
        Observation obs = build_observation(ep, sc, obs_cfg);
        while (ep.status == EpisodeStatus::Running) {
            std::array<double, 2> a =
                policy.act(obs.flatten(), !cfg.deterministic_policy, rng);
            Point2 before = ep.robot.pose.position;
            ep = step(ep, to_physical(a), policy.sim, map).state;
            path_length += dist(before, ep.robot.pose.position);
            sc = scan(map, ep.robot, policy.sim.max_range);
            obs = build_observation(ep, sc, obs_cfg);
        }

        TrialRecord rec;
        rec.trial = trial;
        rec.pair_index = static_cast<int>(trial % roster.pairs.size());
        rec.steps = ep.step_count;
        rec.path_length = path_length;
        switch (ep.status) {
            case EpisodeStatus::Arrived:
                rec.outcome = Outcome::Arrived;
                report.successes += 1;
                break;
            case EpisodeStatus::Collided:
                rec.outcome = Outcome::Collided;
                report.collisions += 1;
                break;
            default:
                rec.outcome = Outcome::TimedOut;
                report.timeouts += 1;
                break;
        }
        report.records.push_back(rec);
    }

    report.success_rate = static_cast<double>(report.successes) / report.trials;
    report.collision_rate = static_cast<double>(report.collisions) / report.trials;
    report.timeout_rate = static_cast<double>(report.timeouts) / report.trials;
    report.normal90 = binomial_ci_normal(report.successes, report.trials, 0.90);
    report.normal99 = binomial_ci_normal(report.successes, report.trials, 0.99);
    report.wilson90 = binomial_ci_wilson(report.successes, report.trials, 0.90);
    report.wilson99 = binomial_ci_wilson(report.successes, report.trials, 0.99);
    return report;
}

std::string success_table_text(const SuccessTable& table) {
    std::ostringstream out;
    size_t label_width = 8;
    for (const auto& m : table.map_labels)
        label_width = std::max(label_width, m.size());
    out << std::string(label_width, ' ');
    for (const auto& m : table.method_labels)
        out << " | " << m;
    out << "\n";
    for (size_t row = 0; row < table.map_labels.size(); ++row) {
        const auto& rates = table.rates[row];
        double best = *std::max_element(rates.begin(), rates.end());
        out << table.map_labels[row]
            << std::string(label_width - table.map_labels[row].size(), ' ');
        for (size_t col = 0; col < rates.size(); ++col) {
            char cell[32];
            std::snprintf(cell, sizeof(cell), "%.1f%%%s", 100.0 * rates[col],
                          rates[col] == best ? " *" : "");
            out << " | " << cell;
        }
        out << "\n";
    }
    return out.str();
}

std::string success_table_csv(const SuccessTable& table) {
    std::string out = "map";
    for (const auto& m : table.method_labels) {
        out += ',';
        out += m;
    }
    out += '\n';
    for (size_t row = 0; row < table.map_labels.size(); ++row) {
        out += table.map_labels[row];
        for (double rate : table.rates[row]) {
            char cell[16];
            std::snprintf(cell, sizeof(cell), ",%.1f", 100.0 * rate);
            out += cell;
        }
        out += '\n';
    }
    return out;
}

namespace {

struct PlotExtent {
    double min_v, max_v;
    size_t max_n;
};

PlotExtent series_extent(const std::vector<LabeledSeries>& series) {
    PlotExtent e{0.0, 1.0, 1};
    bool first = true;
    for (const auto& s : series) {
        e.max_n = std::max(e.max_n, s.values.size());
        for (double v : s.values) {
            if (first) {
                e.min_v = e.max_v = v;
                first = false;
            } else {
                e.min_v = std::min(e.min_v, v);
                e.max_v = std::max(e.max_v, v);
            }
        }
    }
    if (e.max_v == e.min_v) {
        e.max_v += 1.0;
        e.min_v -= 1.0;
    }
    return e;
}

}  // namespace

std::string reward_plot_svg(const std::vector<LabeledSeries>& series) {
    const int W = 900, H = 540;
    const int ml = 70, mr = 170, mt = 30, mb = 50;
    const double pw = W - ml - mr, ph = H - mt - mb;
    static const char* palette[] = {"#c62828", "#1565c0", "#2e7d32", "#ef6c00",
                                    "#6a1b9a", "#00838f"};
    PlotExtent e = series_extent(series);

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
        << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << H - mb << "\" x2=\"" << W - mr
        << "\" y2=\"" << H - mb << "\" stroke=\"black\"/>\n";
    // Axis labels and y ticks.
    for (int tick = 0; tick <= 4; ++tick) {
        double v = e.min_v + (e.max_v - e.min_v) * tick / 4.0;
        double y = H - mb - ph * tick / 4.0;
        svg << "<line x1=\"" << ml - 4 << "\" y1=\"" << y << "\" x2=\"" << ml
            << "\" y2=\"" << y << "\" stroke=\"black\"/>\n";
        char label[32];
        std::snprintf(label, sizeof(label), "%.1f", v);
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << y + 4
            << "\" font-size=\"12\" text-anchor=\"end\">" << label << "</text>\n";
    }
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << H - 12
        << "\" font-size=\"13\" text-anchor=\"middle\">episode</text>\n";
    svg << "<text x=\"18\" y=\"" << mt + ph / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
        << mt + ph / 2 << ")\">moving-average return</text>\n";

    for (size_t s = 0; s < series.size(); ++s) {
        const auto& vals = series[s].values;
        const char* color = palette[s % 6];
        if (!vals.empty()) {
            svg << "<polyline fill=\"none\" stroke=\"" << color
                << "\" stroke-width=\"1.5\" points=\"";
            for (size_t i = 0; i < vals.size(); ++i) {
                double x = ml + (e.max_n > 1
                                     ? pw * static_cast<double>(i) / (e.max_n - 1)
                                     : 0.0);
                double y = H - mb - ph * (vals[i] - e.min_v) / (e.max_v - e.min_v);
                svg << x << ',' << y << ' ';
            }
            svg << "\"/>\n";
        }
        double ly = mt + 18.0 * (s + 1);
        svg << "<line x1=\"" << W - mr + 12 << "\" y1=\"" << ly << "\" x2=\""
            << W - mr + 36 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << W - mr + 42 << "\" y=\"" << ly + 4
            << "\" font-size=\"12\">" << series[s].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string reward_plot_csv(const std::vector<LabeledSeries>& series) {
    std::string out = "episode";
    size_t max_n = 0;
    for (const auto& s : series) {
        out += ',';
        out += s.label;
        max_n = std::max(max_n, s.values.size());
    }
    out += '\n';
    for (size_t i = 0; i < max_n; ++i) {
        out += std::to_string(i);
        for (const auto& s : series) {
            out += ',';
            if (i < s.values.size())
                out += format_double(s.values[i]);
        }
        out += '\n';
    }
    return out;
}

}  // namespace navforge
