#include "csdelay/cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "csdelay/errors.hpp"
#include "csdelay/simulation.hpp"

namespace csdelay::cli {

using nlohmann::json;

namespace {

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

template <typename T>
json optional_json(const std::optional<T>& x) {
    return x ? finite_or_null(*x) : json(nullptr);
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out << text;
}

double norm(const Vector& a) {
    double s = 0.0;
    for (double x : a) s += x * x;
    return std::sqrt(s);
}

double velocity_scale(const EnsembleState& s) {
    double total = 0.0;
    for (std::size_t i = 0; i < s.n; ++i) {
        double sq = 0.0;
        for (double c : s.velocity(i)) sq += c * c;
        total += std::sqrt(sq);
    }
    return total > 0.0 ? total : 1.0;
}

struct RunSummary {
    SimulationRun run;
    std::vector<DiagnosticsRecord> records;  // nodes >= 0
    FlockingVerdict verdict = FlockingVerdict::NotDecided;
};

RunSummary simulate(const RunConfig& config, const InitialDatum& datum, const ModelParams& params,
                    bool retain_full) {
    SimulationOptions options;
    options.m = config.integration.m;
    options.t_end = config.integration.t_end;
    options.retain_full = retain_full;
    RunSummary out;
    out.run = simulate_ensemble(datum, params, options);
    const NodeSeries& s = out.run.series;
    out.records.reserve(s.size());
    for (long k = 0; k <= s.last_index(); ++k) {
        out.records.push_back(make_record(s, k, params));
    }
    out.verdict = detect_flocking(out.records, config.flocking, out.run.status == IntegrationStatus::Diverged);
    return out;
}

std::vector<double> origin_values(const std::vector<double>& values, const NodeSeries& s) {
    return {values.begin() + static_cast<std::ptrdiff_t>(s.origin_pos()), values.end()};
}

int oscillation_events(const std::vector<double>& V) {
    double top = 0.0;
    for (double v : V) {
        if (std::isfinite(v)) top = std::max(top, v);
    }
    return count_increase_events(V, 1e-12 * top);
}

json check_json(const InequalityCheck& c) {
    return {{"id", c.id},
            {"applicable", c.applicable},
            {"evaluated", c.evaluated},
            {"violations", c.violations},
            {"worst_margin", finite_or_null(c.worst_margin)},
            {"worst_time", c.worst_time},
            {"passed", c.passed()}};
}

InequalityOptions inequality_options(const InitialDatum& datum, const ModelParams& params) {
    InequalityOptions o;
    o.L0 = initial_L0(datum, params);
    o.dX0 = position_diameter(datum.state(0.0));
    return o;
}

std::optional<CriticalDelayReport> critical_delay(const InitialDatum& datum, const ModelParams& params) {
    const InitialDatumReport init = analyze_datum(datum, params);
    if (init.V0 <= 0.0 || init.D0 <= 0.0) {
        return std::nullopt;
    }
    const std::optional<double> tau_eval =
        params.tau > 0.0 ? std::optional<double>(params.tau) : std::nullopt;
    const double alpha = params.kernel.alpha();
    if (datum.constant) {
        return critical_delay_constant(params.lambda, alpha, init.V0, init.D0, tau_eval);
    }
    auto L0_of_tau = [&datum, params](double tau) {
        ModelParams q = params;
        q.tau = tau;
        return initial_L0(datum, q);
    };
    return critical_delay_general(params.lambda, init.M0, L0_of_tau, alpha, tau_eval);
}

TailConstants tail_constants(const Kernel& kernel) {
    if (kernel.kind() == KernelKind::Constant) {
        return {0.5, kernel.value(), 1.0};
    }
    const double beta = kernel.beta();
    if (beta < 0.5) {
        // psi(r) r^(2 beta) = (r^2 / (1 + r^2))^beta >= 2^(-beta) on r >= 1
        return {beta > 0.0 ? 1.0 - 2.0 * beta : 0.5, 0.999 * std::pow(2.0, -beta), 1.0};
    }
    return {};
}

json assumption_json(const AssumptionCheck& a) {
    json j = {{"passed", a.passed}, {"worst_margin", finite_or_null(a.worst_margin)}, {"worst_radius", a.worst_radius}};
    if (!a.note.empty()) j["note"] = a.note;
    return j;
}

// Max of |central FD of y - y'| over interior nodes t > 0, relative to max |y'|.
double derivative_mismatch(const std::vector<double>& y, const std::vector<double>& rate, const NodeSeries& s) {
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t p = s.origin_pos() + 1; p + 1 < y.size(); ++p) {
        const double fd = (y[p + 1] - y[p - 1]) / (2.0 * s.h);
        worst = std::max(worst, std::abs(fd - rate[p]));
        scale = std::max(scale, std::abs(rate[p]));
    }
    return scale > 0.0 ? worst / scale : worst;
}

}  // namespace

SimulateOutput run_simulate(const RunConfig& config) {
    const ModelParams params = model_params(config);
    const InitialDatum datum = make_datum(config);
    const RunSummary sum = simulate(config, datum, params, false);
    const NodeSeries& s = sum.run.series;
    const std::size_t d = datum.d;
    const bool diverged = sum.run.status == IntegrationStatus::Diverged;

    std::ostringstream csv;
    csv << "t,V,D,dX,phi,L";
    for (std::size_t c = 1; c <= d; ++c) csv << ",p_" << c;
    csv << '\n';

    double min_L = std::numeric_limits<double>::infinity();
    double max_L = -std::numeric_limits<double>::infinity();
    double drift = 0.0;
    const Vector p0 = momentum(datum.state(0.0));
    const long last = s.last_index();
    for (long k = 0; k <= last; ++k) {
        const DiagnosticsRecord& r = sum.records[static_cast<std::size_t>(k)];
        const bool has_L = r.L && s.m > 0 && k > s.m;
        if (has_L && std::isfinite(*r.L)) {
            min_L = std::min(min_L, *r.L);
            max_L = std::max(max_L, *r.L);
        }
        Vector dp = r.momentum;
        for (std::size_t c = 0; c < d; ++c) dp[c] -= p0[c];
        if (std::isfinite(norm(dp))) drift = std::max(drift, norm(dp));
        if (k % config.outputs.stride != 0 && k != last) continue;
        csv << num(r.t) << ',' << num(r.V) << ',' << num(r.D) << ',' << num(r.dX) << ',' << num(r.phi) << ',';
        if (has_L) csv << num(*r.L);
        for (double pc : r.momentum) csv << ',' << num(pc);
        csv << '\n';
    }

    json summary;
    summary["status"] = diverged ? "Diverged" : "Completed";
    summary["blowup_time"] = diverged ? json(sum.run.blowup_time) : json(nullptr);
    summary["verdict"] = to_string(sum.verdict);
    summary["final_V"] = finite_or_null(sum.records.back().V);
    summary["final_t"] = sum.records.back().t;
    summary["min_L"] = finite_or_null(min_L);
    summary["max_L"] = finite_or_null(max_L);
    summary["momentum_drift"] = drift;
    summary["momentum_drift_relative"] = drift / velocity_scale(datum.state(0.0));
    const std::vector<double> V = origin_values(s.V, s);
    summary["oscillation"] = {{"increase_events", oscillation_events(V)}};
    json ledger = json::array();
    if (!diverged && s.m > 0) {
        const InequalityLedger l = check_inequalities(s, params, inequality_options(datum, params));
        for (const auto& c : l.checks) ledger.push_back(check_json(c));
        summary["inequalities_passed"] = l.all_passed();
    }
    summary["inequalities"] = ledger;
    summary["config"] = to_json(config);
    return {csv.str(), summary, diverged};
}

json report_to_json(const CriticalDelayReport& r) {
    json conditions = json::array();
    for (const auto& c : r.conditions) {
        conditions.push_back({{"id", c.id}, {"satisfied", c.satisfied}, {"margin", finite_or_null(c.margin)}});
    }
    return {{"l0", r.l0},
            {"m0", optional_json(r.m0)},
            {"k", optional_json(r.k)},
            {"mu", r.mu},
            {"tau1", r.tau1},
            {"tau2", r.tau2},
            {"tau_c", r.tau_c},
            {"omega", optional_json(r.omega)},
            {"path", to_string(r.path)},
            {"conditions", conditions},
            {"all_satisfied", r.all_satisfied()}};
}

json run_critical_delay(const RunConfig& config) {
    const ModelParams params = model_params(config);
    const InitialDatum datum = make_datum(config);
    const std::optional<CriticalDelayReport> report = critical_delay(datum, params);
    json out;
    if (report) {
        out = report_to_json(*report);
        out["tau_c_infinite"] = false;
        if (!datum.constant) {
            out["m0_low_confidence"] = initial_M0(datum, params).low_confidence;
        }
    } else {
        out = {{"l0", initial_L0(datum, params)},
               {"m0", nullptr},
               {"k", nullptr},
               {"mu", nullptr},
               {"tau1", nullptr},
               {"tau2", nullptr},
               {"tau_c", nullptr},
               {"omega", nullptr},
               {"path", datum.constant ? "ConstantDatum" : "GeneralDatum"},
               {"conditions", json::array()},
               {"tau_c_infinite", true},
               {"note", "initial velocities coincide: V(0) = D(0) = 0, so the ensemble is already aligned "
                        "and any delay is admissible"}};
    }
    out["config"] = to_json(config);
    return out;
}

std::vector<SweepRow> run_sweep(const RunConfig& config, unsigned threads) {
    const std::vector<double>& values = config.sweep.values;
    std::vector<SweepRow> rows(values.size());
    if (values.empty()) {
        return rows;
    }
    auto one = [&](std::size_t i) {
        RunConfig c = config;
        const double value = values[i];
        if (c.sweep.axis == "tau") {
            c.model.tau = value;
        } else if (c.sweep.axis == "lambda") {
            c.model.lambda = value;
        } else {
            c.ensemble.n = static_cast<std::size_t>(value);
        }
        const ModelParams params = model_params(c);
        const InitialDatum datum = make_datum(c);
        const RunSummary sum = simulate(c, datum, params, false);
        SweepRow row;
        row.value = value;
        row.verdict = sum.verdict;
        row.final_V = sum.records.back().V;
        row.oscillations = oscillation_events(origin_values(sum.run.series.V, sum.run.series));
        if (c.sweep.axis == "N") {
            const InitialDatumReport init = analyze_datum(datum, params);
            if (init.V0 > 0.0 && init.D0 > 0.0) {
                row.tau_c = critical_delay_constant(params.lambda, params.kernel.alpha(), init.V0, init.D0).tau_c;
            }
        }
        rows[i] = row;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(values.size())));
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto work = [&] {
        for (std::size_t i = next++; i < values.size(); i = next++) {
            try {
                one(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream csv;
    csv << "value,verdict,final_V,tau_c,oscillations\n";
    for (const auto& r : rows) {
        csv << num(r.value) << ',' << to_string(r.verdict) << ',' << num(r.final_V) << ',';
        if (r.tau_c) csv << num(*r.tau_c);
        csv << ',' << r.oscillations << '\n';
    }
    return csv.str();
}

json run_validate(const RunConfig& config) {
    const ModelParams params = model_params(config);
    if (params.tau <= 0.0) {
        throw SchemaError("/model/tau", "validate needs a positive delay");
    }
    const InitialDatum datum = make_datum(config);
    const RunSummary sum = simulate(config, datum, params, true);
    const NodeSeries& s = sum.run.series;
    const bool diverged = sum.run.status == IntegrationStatus::Diverged;

    json out;
    out["status"] = diverged ? "Diverged" : "Completed";
    out["verdict"] = to_string(sum.verdict);
    bool all = !diverged;

    json ledger = json::array();
    if (!diverged) {
        const InequalityLedger l = check_inequalities(s, params, inequality_options(datum, params));
        for (const auto& c : l.checks) ledger.push_back(check_json(c));
        all = all && l.all_passed();
    }
    out["inequalities"] = ledger;

    json bf = {{"applicable", false}};
    if (!diverged) {
        if (const auto report = critical_delay(datum, params); report && params.tau < report->tau_c) {
            const std::span<const double> D(s.D);
            const BackwardForwardCheck c =
                verify_backward_forward(D, s.m, params.lambda, report->mu, params.tau);
            bf = {{"applicable", true},
                  {"mu", report->mu},
                  {"tau_c", report->tau_c},
                  {"passed", c.passed},
                  {"checked", c.checked},
                  {"violations", c.violations},
                  {"worst_margin", finite_or_null(c.worst_margin)},
                  {"worst_time", c.worst_time}};
            all = all && c.passed;
        } else {
            bf["note"] = "delay is not below the critical delay, so the estimate is not implied";
        }
    }
    out["backward_forward"] = bf;

    std::vector<double> grid{0.0};
    for (int i = 0; i <= 200; ++i) grid.push_back(std::pow(10.0, -3.0 + 7.0 * i / 200.0));
    const TailConstants tail = tail_constants(params.kernel);
    const KernelValidation kv = validate_kernel(params.kernel, grid, tail);
    out["kernel"] = {{"description", params.kernel.describe()},
                     {"tail_constants", {{"gamma", tail.gamma}, {"c", tail.c}, {"R", tail.R}}},
                     {"bounded", assumption_json(kv.bounded)},
                     {"monotone", assumption_json(kv.monotone)},
                     {"tail", assumption_json(kv.tail)},
                     {"log_lipschitz", assumption_json(kv.log_lipschitz)},
                     {"passed", kv.all_passed()}};
    all = all && kv.all_passed();

    if (!diverged) {
        const double dv = derivative_mismatch(s.V, s.V_rate, s);
        const double dd = derivative_mismatch(s.D, s.D_rate, s);
        const bool ok = dv < 1e-3 && dd < 1e-3;
        out["derivative_consistency"] = {{"V_relative_mismatch", dv}, {"D_relative_mismatch", dd}, {"passed", ok}};
        all = all && ok;
    }
    out["all_passed"] = all;
    out["config"] = to_json(config);
    return out;
}

std::string run_feedback_csv(const RunConfig& config) {
    const FeedbackProblem problem = feedback_problem(config);
    const FeedbackSolution sol = exact_solve(problem);
    const double dt = problem.tau / config.feedback.samples_per_delay;
    const auto count = static_cast<long>(std::ceil(problem.t_end / dt - 1e-9));
    std::ostringstream csv;
    csv << "t,u\n";
    for (long k = 0; k <= count; ++k) {
        const double t = std::min(problem.t_end, dt * static_cast<double>(k));
        csv << num(t) << ',' << num(sol(t)) << '\n';
    }
    return csv.str();
}

json run_feedback_summary(const RunConfig& config) {
    const FeedbackProblem problem = feedback_problem(config);
    const FeedbackSolution sol = exact_solve(problem);
    const std::optional<double> change = first_sign_change(sol);
    return {{"lambda_tau", problem.lambda_tau()},
            {"regime", to_string(classify_feedback(problem.lambda_tau()))},
            {"first_sign_change", change ? json(*change) : json(nullptr)},
            {"intervals", sol.intervals()},
            {"config", to_json(config)}};
}

int cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir) {
    const SimulateOutput out = run_simulate(config);
    write_file(out_dir / config.outputs.csv, out.csv);
    write_file(out_dir / config.outputs.json, out.summary.dump(2) + "\n");
    return out.diverged ? kExitDiverged : kExitOk;
}

int cmd_critical_delay(const RunConfig& config, const std::filesystem::path& out_dir) {
    write_file(out_dir / config.outputs.json, run_critical_delay(config).dump(2) + "\n");
    return kExitOk;
}

int cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, unsigned threads) {
    const std::vector<SweepRow> rows = run_sweep(config, threads);
    write_file(out_dir / config.outputs.csv, sweep_csv(rows));
    json table = json::array();
    for (const auto& r : rows) {
        table.push_back({{"value", r.value},
                         {"verdict", to_string(r.verdict)},
                         {"final_V", finite_or_null(r.final_V)},
                         {"tau_c", optional_json(r.tau_c)},
                         {"oscillations", r.oscillations}});
    }
    write_file(out_dir / config.outputs.json,
               json{{"axis", config.sweep.axis}, {"rows", table}, {"config", to_json(config)}}.dump(2) + "\n");
    return kExitOk;
}

int cmd_validate(const RunConfig& config, const std::filesystem::path& out_dir) {
    const json report = run_validate(config);
    write_file(out_dir / config.outputs.json, report.dump(2) + "\n");
    return report["status"] == "Diverged" ? kExitDiverged : kExitOk;
}

int cmd_feedback(const RunConfig& config, const std::filesystem::path& out_dir) {
    write_file(out_dir / config.outputs.csv, run_feedback_csv(config));
    write_file(out_dir / config.outputs.json, run_feedback_summary(config).dump(2) + "\n");
    return kExitOk;
}

}  // namespace csdelay::cli
