#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "ztseg/behavior.hpp"
#include "ztseg/context_risk.hpp"
#include "ztseg/engine.hpp"
#include "ztseg/errors.hpp"
#include "ztseg/geo.hpp"
#include "ztseg/peer_clustering.hpp"
#include "ztseg/segmentation.hpp"
#include "ztseg/simharness.hpp"

namespace py = pybind11;
using namespace ztseg;

namespace {

std::string audit_text(const std::vector<AuditRecord>& records) {
  std::ostringstream out;
  write_audit_log(out, records);
  return out.str();
}

std::string events_text(const std::vector<AccessEvent>& events) {
  std::ostringstream out;
  write_event_log(out, events);
  return out.str();
}

FeatureVector as_features(const Vec6& v) {
  FeatureVector f;
  f.values = v;
  return f;
}

}  // namespace

PYBIND11_MODULE(_ztseg, m) {
  m.doc() = "Identity-based threat segmentation engine";

  auto base = py::register_exception<Error>(m, "Error");
  auto validation = py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", validation.ptr());
  py::register_exception<OrderingError>(m, "OrderingError", validation.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ContractViolation>(m, "ContractViolation", base.ptr());
  py::register_exception<ArgumentError>(m, "ArgumentError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<ReferenceError>(m, "ReferenceError", base.ptr());
  py::register_exception<CoverageError>(m, "CoverageError", base.ptr());
  py::register_exception<NumericalError>(m, "NumericalError", base.ptr());

  py::enum_<Action>(m, "Action")
      .value("Login", Action::Login)
      .value("Read", Action::Read)
      .value("Write", Action::Write)
      .value("Admin", Action::Admin);

  py::enum_<Tier>(m, "Tier", py::arithmetic())
      .value("Allow", Tier::Allow)
      .value("StepUp", Tier::StepUp)
      .value("Restrict", Tier::Restrict)
      .value("Quarantine", Tier::Quarantine);

  py::enum_<Judgment>(m, "Judgment")
      .value("FalsePositive", Judgment::FalsePositive)
      .value("TruePositive", Judgment::TruePositive)
      .value("MissedThreat", Judgment::MissedThreat);

  py::class_<GeoPoint>(m, "GeoPoint")
      .def(py::init<double, double>(), py::arg("lat"), py::arg("lon"))
      .def_readwrite("lat", &GeoPoint::lat)
      .def_readwrite("lon", &GeoPoint::lon);

  m.def("haversine_km", &haversine_km, py::arg("a"), py::arg("b"));

  py::class_<AccessEvent>(m, "AccessEvent")
      .def(py::init([](std::string event_id, std::string identity_id, Timestamp timestamp,
                       std::string resource_id, Action action, GeoPoint geo, std::string device_id,
                       std::string source_ip, bool success) {
             return AccessEvent{std::move(event_id), std::move(identity_id), timestamp,
                                std::move(resource_id), action, geo, std::move(device_id),
                                std::move(source_ip), success};
           }),
           py::arg("event_id"), py::arg("identity_id"), py::arg("timestamp"), py::arg("resource_id"),
           py::arg("action"), py::arg("geo"), py::arg("device_id"), py::arg("source_ip"),
           py::arg("success") = true)
      .def_readwrite("event_id", &AccessEvent::event_id)
      .def_readwrite("identity_id", &AccessEvent::identity_id)
      .def_readwrite("timestamp", &AccessEvent::timestamp)
      .def_readwrite("resource_id", &AccessEvent::resource_id)
      .def_readwrite("action", &AccessEvent::action)
      .def_readwrite("geo", &AccessEvent::geo)
      .def_readwrite("device_id", &AccessEvent::device_id)
      .def_readwrite("source_ip", &AccessEvent::source_ip)
      .def_readwrite("success", &AccessEvent::success)
      .def("to_json", &serialize_event);

  m.def("validate_event", [](const AccessEvent& e) { return validate_event(e).violations; });
  m.def("parse_event_log", [](const std::string& text) { return parse_event_log(std::string_view(text)); });
  m.def("write_event_log", &events_text);
  m.def("pseudonymize", [](const std::string& id, const std::string& salt) { return pseudonymize(id, salt).token; },
        py::arg("identifier"), py::arg("salt"));

  // behavior
  py::class_<BehaviorBaseline>(m, "BehaviorBaseline")
      .def(py::init<std::string, double>(), py::arg("identity_id") = "",
           py::arg("epsilon") = BehaviorBaseline::kDefaultEpsilon)
      .def("update", [](BehaviorBaseline& b, const Vec6& v) { b.update(as_features(v)); })
      .def_property_readonly("n", &BehaviorBaseline::n)
      .def_property_readonly("mean", &BehaviorBaseline::mean)
      .def("covariance", &BehaviorBaseline::covariance)
      .def("distance", [](const BehaviorBaseline& b, const Vec6& v) { return mahalanobis_distance(as_features(v), b); });

  m.def("mahalanobis_distance",
        py::overload_cast<const Vec6&, const Vec6&, const Mat6&>(&mahalanobis_distance),
        py::arg("point"), py::arg("mean"), py::arg("covariance"));
  m.def("anomaly_score",
        [](double distance, const BehaviorBaseline& b, std::uint64_t warmup) {
          const auto s = anomaly_score(distance, b, warmup);
          return py::make_tuple(s.score, s.warmup);
        },
        py::arg("distance"), py::arg("baseline"), py::arg("warmup_threshold") = kDefaultWarmupThreshold);

  // risk and decisions
  m.def("risk_score", &risk_score, py::arg("anomaly"), py::arg("context"), py::arg("w1"), py::arg("w2"));
  m.def("aggregate_risk", [](const std::vector<std::pair<double, double>>& factors) {
    std::vector<RiskFactor> f;
    for (const auto& [value, weight] : factors) f.push_back({"", value, weight});
    return aggregate_risk(f);
  });

  py::class_<Thresholds>(m, "Thresholds")
      .def(py::init<>())
      .def(py::init<double, double, double>(), py::arg("step_up"), py::arg("restrict"), py::arg("quarantine"))
      .def_readwrite("step_up", &Thresholds::step_up)
      .def_readwrite("restrict", &Thresholds::restrict)
      .def_readwrite("quarantine", &Thresholds::quarantine)
      .def("is_valid", &Thresholds::is_valid);

  m.def("decide",
        [](double risk, const Thresholds& t, bool quarantined) {
          const auto d = decide(risk, t, quarantined);
          return py::make_tuple(d.tier, d.reasons);
        },
        py::arg("risk"), py::arg("thresholds") = Thresholds{}, py::arg("quarantined") = false);
  m.def("adjust_thresholds", &adjust_thresholds, py::arg("thresholds"), py::arg("judgment"), py::arg("tier"),
        py::arg("rate") = 0.05);

  // peers
  py::class_<ClusterModel>(m, "ClusterModel")
      .def_readonly("k", &ClusterModel::k)
      .def_readonly("centroids", &ClusterModel::centroids)
      .def_readonly("labels", &ClusterModel::labels)
      .def_readonly("inertia", &ClusterModel::inertia)
      .def_readonly("iterations", &ClusterModel::iterations)
      .def_readonly("inertia_trace", &ClusterModel::inertia_trace);
  m.def("kmeans", [](const std::vector<Vec6>& points, int k, std::uint64_t seed) { return kmeans(points, k, seed); },
        py::arg("points"), py::arg("k"), py::arg("seed") = 0);
  m.def("peer_deviation", &peer_deviation, py::arg("identity_mean"), py::arg("model"));

  // graph
  py::class_<AccessGraph>(m, "AccessGraph")
      .def(py::init<>())
      .def("record_access",
           py::overload_cast<const std::string&, const std::string&, Timestamp>(&AccessGraph::record_access))
      .def("quarantine",
           [](AccessGraph& g, const std::string& id, Timestamp ts) { return g.quarantine(id, ts).deactivated; })
      .def("release", &AccessGraph::release)
      .def("blast_radius", &AccessGraph::blast_radius)
      .def("is_quarantined", &AccessGraph::is_quarantined)
      .def("check_invariants", &AccessGraph::check_invariants);

  // engine
  py::class_<EngineConfig>(m, "EngineConfig")
      .def(py::init<>())
      .def_static("from_json", [](const std::string& text) { return config_from_json(nlohmann::json::parse(text)); })
      .def("to_json", [](const EngineConfig& c) { return config_to_json(c).dump(); })
      .def_readwrite("thresholds", &EngineConfig::thresholds)
      .def_readwrite("salt", &EngineConfig::salt)
      .def_readwrite("warmup_threshold", &EngineConfig::warmup_threshold);

  py::class_<AuditRecord>(m, "AuditRecord")
      .def_readonly("event_id", &AuditRecord::event_id)
      .def_readonly("identity", &AuditRecord::identity)
      .def_readonly("timestamp", &AuditRecord::timestamp)
      .def_readonly("anomaly", &AuditRecord::anomaly)
      .def_readonly("context", &AuditRecord::context)
      .def_readonly("risk", &AuditRecord::risk)
      .def_readonly("tier", &AuditRecord::tier)
      .def_readonly("reasons", &AuditRecord::reasons)
      .def("to_json", &serialize_audit);

  py::class_<Engine>(m, "Engine")
      .def(py::init<EngineConfig>(), py::arg("config") = EngineConfig{})
      .def("process_event", [](Engine& e, const AccessEvent& ev) { return e.process_event(ev).audit; })
      .def("replay", [](Engine& e, const std::vector<AccessEvent>& events) { return replay(e, events).audit; })
      .def("apply_feedback",
           [](Engine& e, const std::string& event_id, Judgment j) { e.apply_feedback({event_id, j}); })
      .def("release", &Engine::release)
      .def("blast_radius", [](const Engine& e, const std::string& id) { return e.graph().blast_radius(id); })
      .def_property_readonly("thresholds", &Engine::thresholds);

  m.def("write_audit_log", &audit_text);

  // simulation harness
  py::class_<Metrics>(m, "Metrics")
      .def_readonly("recall", &Metrics::recall)
      .def_readonly("false_positive_rate", &Metrics::false_positive_rate)
      .def_readonly("mean_containment", &Metrics::mean_containment)
      .def_readonly("contained", &Metrics::contained)
      .def_readonly("uncontained", &Metrics::uncontained);

  m.def("simulate",
        [](const std::string& spec_json, const std::string& config_json) {
          const ScenarioSpec spec = scenario_from_json(nlohmann::json::parse(spec_json));
          const Scenario scenario = generate_scenario(spec);
          const EngineConfig base = config_json.empty() ? EngineConfig{} : config_from_json(nlohmann::json::parse(config_json));
          const EngineConfig config = scenario_engine_config(spec, base);
          const GroundTruth truth = scenario.truth.pseudonymized(config.salt);
          Engine engine(config);
          const auto dyn = replay(engine, scenario.events);
          StaticEngine static_engine(config);
          const auto stat = replay_static(static_engine, scenario.events);
          const auto report = compare(evaluate(dyn.audit, truth), evaluate(stat.audit, truth));
          py::dict out;
          out["events"] = scenario.events;
          out["audit"] = dyn.audit;
          out["report"] = report_to_json(report).dump();
          out["text"] = render_text(report);
          return out;
        },
        py::arg("spec_json") = "{}", py::arg("config_json") = "");
}
