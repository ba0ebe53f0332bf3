#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "csdelay/cli/config.hpp"
#include "csdelay/diagnostics.hpp"
#include "csdelay/theory.hpp"

namespace csdelay::cli {

enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitSchema = 2, kExitDiverged = 3 };

struct SimulateOutput {
    std::string csv;
    nlohmann::json summary;
    bool diverged = false;
};

/// Integrates the configured ensemble. CSV columns: t,V,D,dX,phi,L,p_1..p_d.
SimulateOutput run_simulate(const RunConfig& config);

/// CriticalDelayReport for the configured datum; tau_c is null for an
/// equal-velocity datum.
nlohmann::json run_critical_delay(const RunConfig& config);
nlohmann::json report_to_json(const CriticalDelayReport& report);

struct SweepRow {
    double value = 0.0;
    FlockingVerdict verdict = FlockingVerdict::NotDecided;
    double final_V = 0.0;
    std::optional<double> tau_c;
    int oscillations = 0;
};

std::vector<SweepRow> run_sweep(const RunConfig& config, unsigned threads);
std::string sweep_csv(const std::vector<SweepRow>& rows);

nlohmann::json run_validate(const RunConfig& config);

/// (t, u) samples of the exact feedback solution.
std::string run_feedback_csv(const RunConfig& config);
nlohmann::json run_feedback_summary(const RunConfig& config);

/// File-writing front ends; return the process exit code.
int cmd_simulate(const RunConfig& config, const std::filesystem::path& out_dir);
int cmd_critical_delay(const RunConfig& config, const std::filesystem::path& out_dir);
int cmd_sweep(const RunConfig& config, const std::filesystem::path& out_dir, unsigned threads);
int cmd_validate(const RunConfig& config, const std::filesystem::path& out_dir);
int cmd_feedback(const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace csdelay::cli
