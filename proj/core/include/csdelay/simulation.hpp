#pragma once

#include <optional>

#include "csdelay/cs_model.hpp"
#include "csdelay/dde_engine.hpp"
#include "csdelay/diagnostics.hpp"

namespace csdelay {

struct SimulationOptions {
    int m = 20;
    double t_end = 10.0;
    double undelayed_step = 1e-3;  ///< only used when tau == 0
    bool retain_full = false;
};

struct SimulationRun {
    NodeSeries series;
    IntegrationStatus status = IntegrationStatus::Completed;
    double blowup_time = 0.0;
    EnsembleState final_state;
    std::optional<HistoryBuffer> history;  ///< kept when retain_full is set
};

/// Integrates the delayed ensemble from `datum`, recording scalars at every node.
SimulationRun simulate_ensemble(const InitialDatum& datum, const ModelParams& params,
                                const SimulationOptions& options);

}  // namespace csdelay
