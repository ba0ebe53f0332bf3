#include "csdelay/cli/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "csdelay/errors.hpp"

namespace csdelay::cli {

using nlohmann::json;

SchemaError::SchemaError(std::string path, const std::string& message)
    : std::runtime_error(path + ": " + message), path_(std::move(path)) {}

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can
// be rejected.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) {
            throw SchemaError(path_.empty() ? "/" : path_, "expected an object");
        }
    }

    [[nodiscard]] std::string at(const std::string& key) const { return path_ + "/" + key; }
    [[nodiscard]] bool has(const std::string& key) const { return node_.contains(key); }

    const json* get(const std::string& key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    void number(const std::string& key, double& out) {
        if (const json* j = get(key)) {
            if (!j->is_number()) throw SchemaError(at(key), "expected a number");
            out = j->get<double>();
            if (!std::isfinite(out)) throw SchemaError(at(key), "must be finite");
        }
    }

    template <typename Int>
    void integer(const std::string& key, Int& out) {
        if (const json* j = get(key)) {
            if (!j->is_number_integer() && !j->is_number_unsigned()) {
                throw SchemaError(at(key), "expected an integer");
            }
            if constexpr (std::is_unsigned_v<Int>) {
                if (j->is_number_integer() && j->get<long long>() < 0) {
                    throw SchemaError(at(key), "must be non-negative");
                }
            }
            out = j->get<Int>();
        }
    }

    void boolean(const std::string& key, bool& out) {
        if (const json* j = get(key)) {
            if (!j->is_boolean()) throw SchemaError(at(key), "expected a boolean");
            out = j->get<bool>();
        }
    }

    void string(const std::string& key, std::string& out) {
        if (const json* j = get(key)) {
            if (!j->is_string()) throw SchemaError(at(key), "expected a string");
            out = j->get<std::string>();
        }
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (const json* j = get(key)) {
            if (!j->is_array()) throw SchemaError(at(key), "expected an array of numbers");
            out.clear();
            for (std::size_t i = 0; i < j->size(); ++i) {
                const json& e = (*j)[i];
                if (!e.is_number()) throw SchemaError(at(key) + "/" + std::to_string(i), "expected a number");
                out.push_back(e.get<double>());
                if (!std::isfinite(out.back())) {
                    throw SchemaError(at(key) + "/" + std::to_string(i), "must be finite");
                }
            }
        }
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.count(item.key())) {
                throw SchemaError(at(item.key()), "unknown key");
            }
        }
    }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

template <typename Fn>
void sub(Section& parent, const std::string& key, Fn&& fn) {
    if (const json* j = parent.get(key)) {
        Section s(*j, parent.at(key));
        fn(s);
        s.finish();
    }
}

void require(bool ok, const std::string& path, const std::string& message) {
    if (!ok) throw SchemaError(path, message);
}

void check(const RunConfig& c) {
    require(c.model.lambda > 0.0, "/model/lambda", "must be > 0");
    require(c.model.tau >= 0.0, "/model/tau", "must be >= 0");
    const auto& k = c.model.kernel;
    require(k.kind == "cucker_smale" || k.kind == "constant", "/model/kernel/kind",
            "must be \"cucker_smale\" or \"constant\"");
    require(k.beta >= 0.0, "/model/kernel/beta", "must be >= 0");
    require(k.value > 0.0 && k.value <= 1.0, "/model/kernel/value", "must lie in (0, 1]");

    const auto& e = c.ensemble;
    require(e.n >= 1, "/ensemble/n", "must be >= 1");
    require(e.d >= 1, "/ensemble/d", "must be >= 1");
    const auto& dt = e.datum;
    require(dt.kind == "random" || dt.kind == "explicit", "/ensemble/datum/kind",
            "must be \"random\" or \"explicit\"");
    const std::size_t flat = e.n * e.d;
    if (dt.kind == "random") {
        require(dt.box >= 0.0, "/ensemble/datum/box", "must be >= 0");
        require(dt.spread >= 0.0, "/ensemble/datum/spread", "must be >= 0");
        require(dt.x.empty(), "/ensemble/datum/x", "only valid for an explicit datum");
        require(dt.v.empty(), "/ensemble/datum/v", "only valid for an explicit datum");
    } else {
        require(dt.x.size() == flat, "/ensemble/datum/x", "needs n*d = " + std::to_string(flat) + " entries");
        require(dt.v.size() == flat, "/ensemble/datum/v", "needs n*d = " + std::to_string(flat) + " entries");
    }
    if (dt.constant) {
        require(dt.acceleration.empty(), "/ensemble/datum/acceleration", "only valid when constant is false");
    } else {
        require(dt.acceleration.size() == flat, "/ensemble/datum/acceleration",
                "needs n*d = " + std::to_string(flat) + " entries");
    }

    require(c.integration.m >= 2, "/integration/m", "must be >= 2");
    require(c.integration.t_end > 0.0, "/integration/t_end", "must be > 0");
    require(c.outputs.stride >= 1, "/outputs/stride", "must be >= 1");
    require(!c.outputs.csv.empty(), "/outputs/csv", "must not be empty");
    require(!c.outputs.json.empty(), "/outputs/json", "must not be empty");
    require(c.flocking.v_tol > 0.0, "/flocking/v_tol", "must be > 0");
    require(c.flocking.dx_cap > 0.0, "/flocking/dx_cap", "must be > 0");

    const auto& s = c.sweep;
    require(s.axis == "tau" || s.axis == "lambda" || s.axis == "N", "/sweep/axis",
            "must be \"tau\", \"lambda\" or \"N\"");
    for (std::size_t i = 0; i < s.values.size(); ++i) {
        const std::string p = "/sweep/values/" + std::to_string(i);
        const double v = s.values[i];
        if (s.axis == "tau") require(v >= 0.0, p, "delay must be >= 0");
        if (s.axis == "lambda") require(v > 0.0, p, "coupling must be > 0");
        if (s.axis == "N") require(v >= 2.0 && v == std::floor(v), p, "agent count must be an integer >= 2");
    }
    if (s.axis == "N" && !s.values.empty()) {
        require(dt.kind == "random", "/sweep/axis", "an N sweep needs a random datum");
        require(dt.constant, "/sweep/axis", "an N sweep needs a constant datum");
    }

    const auto& f = c.feedback;
    require(f.lambda > 0.0, "/feedback/lambda", "must be > 0");
    require(f.tau > 0.0, "/feedback/tau", "must be > 0");
    require(f.u0 != 0.0, "/feedback/u0", "must be nonzero");
    require(f.t_end > 0.0, "/feedback/t_end", "must be > 0");
    require(f.t_end <= kMaxFeedbackIntervals * f.tau, "/feedback/t_end",
            "exact solver supports at most " + std::to_string(kMaxFeedbackIntervals) + " delays");
    require(f.samples_per_delay >= 1, "/feedback/samples_per_delay", "must be >= 1");
}

}  // namespace

RunConfig parse_config(const json& doc) {
    RunConfig c;
    Section root(doc, "");
    sub(root, "model", [&](Section& s) {
        s.number("lambda", c.model.lambda);
        s.number("tau", c.model.tau);
        sub(s, "kernel", [&](Section& k) {
            k.string("kind", c.model.kernel.kind);
            k.number("beta", c.model.kernel.beta);
            k.number("value", c.model.kernel.value);
        });
    });
    sub(root, "ensemble", [&](Section& s) {
        s.integer("n", c.ensemble.n);
        s.integer("d", c.ensemble.d);
        sub(s, "datum", [&](Section& d) {
            d.string("kind", c.ensemble.datum.kind);
            d.number("box", c.ensemble.datum.box);
            d.number("spread", c.ensemble.datum.spread);
            d.numbers("x", c.ensemble.datum.x);
            d.numbers("v", c.ensemble.datum.v);
            d.boolean("constant", c.ensemble.datum.constant);
            d.numbers("acceleration", c.ensemble.datum.acceleration);
        });
    });
    sub(root, "integration", [&](Section& s) {
        s.integer("m", c.integration.m);
        s.number("t_end", c.integration.t_end);
    });
    sub(root, "outputs", [&](Section& s) {
        s.string("csv", c.outputs.csv);
        s.string("json", c.outputs.json);
        s.integer("stride", c.outputs.stride);
    });
    sub(root, "flocking", [&](Section& s) {
        s.number("v_tol", c.flocking.v_tol);
        s.number("dx_cap", c.flocking.dx_cap);
    });
    sub(root, "sweep", [&](Section& s) {
        s.string("axis", c.sweep.axis);
        s.numbers("values", c.sweep.values);
    });
    sub(root, "feedback", [&](Section& s) {
        s.number("lambda", c.feedback.lambda);
        s.number("tau", c.feedback.tau);
        s.number("u0", c.feedback.u0);
        s.number("t_end", c.feedback.t_end);
        s.integer("samples_per_delay", c.feedback.samples_per_delay);
    });
    root.integer("seed", c.seed);
    root.finish();
    check(c);
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw SchemaError("/", "cannot open config file " + path);
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("/", std::string("malformed JSON: ") + e.what());
    }
    return parse_config(doc);
}

json to_json(const RunConfig& c) {
    json datum = {{"kind", c.ensemble.datum.kind}, {"constant", c.ensemble.datum.constant}};
    if (c.ensemble.datum.kind == "random") {
        datum["box"] = c.ensemble.datum.box;
        datum["spread"] = c.ensemble.datum.spread;
    } else {
        datum["x"] = c.ensemble.datum.x;
        datum["v"] = c.ensemble.datum.v;
    }
    if (!c.ensemble.datum.constant) {
        datum["acceleration"] = c.ensemble.datum.acceleration;
    }
    json kernel = {{"kind", c.model.kernel.kind}};
    if (c.model.kernel.kind == "cucker_smale") {
        kernel["beta"] = c.model.kernel.beta;
    } else {
        kernel["value"] = c.model.kernel.value;
    }
    return {
        {"model", {{"lambda", c.model.lambda}, {"tau", c.model.tau}, {"kernel", kernel}}},
        {"ensemble", {{"n", c.ensemble.n}, {"d", c.ensemble.d}, {"datum", datum}}},
        {"integration", {{"m", c.integration.m}, {"t_end", c.integration.t_end}}},
        {"outputs", {{"csv", c.outputs.csv}, {"json", c.outputs.json}, {"stride", c.outputs.stride}}},
        {"flocking", {{"v_tol", c.flocking.v_tol}, {"dx_cap", c.flocking.dx_cap}}},
        {"sweep", {{"axis", c.sweep.axis}, {"values", c.sweep.values}}},
        {"feedback",
         {{"lambda", c.feedback.lambda},
          {"tau", c.feedback.tau},
          {"u0", c.feedback.u0},
          {"t_end", c.feedback.t_end},
          {"samples_per_delay", c.feedback.samples_per_delay}}},
        {"seed", c.seed},
    };
}

Kernel make_kernel(const KernelSpec& spec) {
    return spec.kind == "constant" ? Kernel::constant(spec.value) : Kernel::cucker_smale(spec.beta);
}

ModelParams model_params(const RunConfig& c) {
    ModelParams p;
    p.lambda = c.model.lambda;
    p.tau = c.model.tau;
    p.kernel = make_kernel(c.model.kernel);
    return p;
}

InitialDatum make_datum(const RunConfig& c) {
    const auto& e = c.ensemble;
    EnsembleState at0 = e.datum.kind == "random"
                            ? random_cloud(e.n, e.d, e.datum.box, e.datum.spread, c.seed)
                            : EnsembleState(e.n, e.d, e.datum.x, e.datum.v);
    if (e.datum.constant) {
        return constant_datum(std::move(at0));
    }
    return linear_ramp_datum(std::move(at0), e.datum.acceleration);
}

FeedbackProblem feedback_problem(const RunConfig& c) {
    return {c.feedback.lambda, c.feedback.tau, c.feedback.u0, c.feedback.t_end};
}

}  // namespace csdelay::cli
