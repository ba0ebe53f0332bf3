#include "csdelay/simulation.hpp"

#include "csdelay/errors.hpp"

namespace csdelay {

SimulationRun simulate_ensemble(const InitialDatum& datum, const ModelParams& params,
                                const SimulationOptions& options) {
    params.validate();
    const std::size_t n = datum.n;
    const std::size_t d = datum.d;
    const DelayRhs rhs = make_delay_rhs(params, n, d);
    SimulationRun run;

    if (params.tau == 0.0) {
        SeriesRecorder recorder(params, n, d, 0, options.undelayed_step);
        const Observer obs = recorder.observer();
        OdeResult res = integrate_instantaneous(rhs, datum.state(0.0).pack(), options.undelayed_step,
                                                options.t_end, std::span<const Observer>(&obs, 1));
        run.series = recorder.take();
        run.status = res.status;
        run.blowup_time = res.blowup_time;
        run.final_state = EnsembleState::unpack(res.state, n, d);
        return run;
    }

    StepperConfig config;
    config.tau = params.tau;
    config.m = options.m;
    config.t_end = options.t_end;
    config.state_dim = 2 * n * d;
    config.retain_full = options.retain_full;
    config.validate();

    SeriesRecorder recorder(params, n, d, options.m, config.step());
    recorder.record_datum(datum);
    const Observer obs = recorder.observer();
    IntegrationResult res = integrate(rhs, make_history(datum, params.tau, options.m, options.retain_full),
                                      config, std::span<const Observer>(&obs, 1));
    run.series = recorder.take();
    run.status = res.status;
    run.blowup_time = res.blowup_time;
    run.final_state = EnsembleState::unpack(res.history.state(res.history.last_index()), n, d);
    if (options.retain_full) {
        run.history = std::move(res.history);
    }
    return run;
}

}  // namespace csdelay
