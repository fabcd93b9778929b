#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "gpdm/committee.hpp"
#include "gpdm/domains.hpp"
#include "gpdm/harness.hpp"
#include "gpdm/kernel.hpp"
#include "gpdm/ontology.hpp"

namespace py = pybind11;

namespace {

py::dict row_to_dict(const gpdm::ResultRow& r) {
  py::dict d;
  d["strategy"] = r.strategy;
  d["domain"] = r.domain;
  d["train_dialogues"] = r.train_dialogues;
  d["seed"] = r.seed;
  d["reward"] = r.stats.reward.mean;
  d["reward_ci"] = r.stats.reward.ci95;
  d["success"] = r.stats.success.mean;
  d["success_ci"] = r.stats.success.ci95;
  d["turns"] = r.stats.turns.mean;
  d["turns_ci"] = r.stats.turns.ci95;
  return d;
}

py::list run_config(const std::string& command, const std::string& config_json,
                    const std::string& out_dir) {
  gpdm::ExperimentConfig cfg = gpdm::config_from_json(nlohmann::json::parse(config_json));
  std::filesystem::create_directories(out_dir);
  std::vector<gpdm::ResultRow> rows;
  if (command == "train") {
    rows = gpdm::run_train(cfg, out_dir);
  } else if (command == "multiagent") {
    rows = gpdm::run_multiagent(cfg, out_dir);
  } else if (command == "committee") {
    if (cfg.strategies.empty()) cfg.strategies = {"MBCM"};
    for (const auto& s : cfg.strategies)
      if (s != "MBCM")
        throw std::invalid_argument("committee trains home-domain members; use multiagent for " +
                                    s);
    rows = gpdm::run_multiagent(cfg, out_dir);
  } else if (command == "adapt") {
    rows = gpdm::run_adapt(cfg, out_dir);
  } else if (command == "evaluate") {
    rows = gpdm::run_evaluate(cfg, out_dir);
  } else if (command == "entropy") {
    gpdm::run_entropy(cfg, out_dir);
  } else {
    throw std::invalid_argument("unsupported command: " + command);
  }
  py::list out;
  for (const auto& r : rows) out.append(row_to_dict(r));
  return out;
}

std::string domain_info_json(const std::string& name) {
  gpdm::DomainModel m = gpdm::builtin_domain_model(name);
  nlohmann::json j;
  j["domain"] = m.ontology.domain;
  j["entities"] = m.db.entities.size();
  const std::pair<gpdm::SlotClass, const char*> classes[] = {
      {gpdm::SlotClass::Name, "name"},
      {gpdm::SlotClass::Requestable, "requestable"},
      {gpdm::SlotClass::Informable, "informable"},
  };
  for (const auto& [cls, key] : classes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rs : m.ordering.of_class(cls))
      arr.push_back({{"slot", rs.slot},
                     {"entropy", rs.entropy},
                     {"rank", rs.rank},
                     {"cardinality", m.ontology.at(rs.slot).values.size()}});
    j[key] = std::move(arr);
  }
  return j.dump();
}

std::string match_info_json(const std::string& a, const std::string& b,
                            const std::string& mode) {
  gpdm::DomainModel ma = gpdm::builtin_domain_model(a);
  gpdm::DomainModel mb = gpdm::builtin_domain_model(b);
  gpdm::KernelSpec spec = gpdm::make_kernel_spec({&ma, &mb}, mode);
  nlohmann::json j;
  j["mode"] = mode;
  j["maps"] = nlohmann::json::array();
  for (const auto& m : spec.maps) j["maps"].push_back(gpdm::slot_map_to_json(m));
  return j.dump();
}

std::pair<double, double> bcm(const std::vector<std::pair<double, double>>& estimates,
                              double k_star) {
  std::vector<gpdm::QEstimate> es;
  es.reserve(estimates.size());
  for (const auto& [m, v] : estimates) es.push_back({m, v});
  gpdm::QEstimate q = gpdm::bcm_combine(es, k_star);
  return {q.mean, q.variance};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Gaussian-process dialogue policy core";
  m.attr("__version__") = "1.0.0";
  m.def("builtin_domains", &gpdm::builtin_domain_names,
        "names of the built-in domain catalog");
  m.def("domain_info_json", &domain_info_json, py::arg("name"),
        "JSON description of a built-in domain: slots, entropies, ranks");
  m.def("match_info_json", &match_info_json, py::arg("a"), py::arg("b"),
        py::arg("mode") = "auto", "JSON cross-domain slot matching between two domains");
  m.def("bcm_combine", &bcm, py::arg("estimates"), py::arg("k_star"),
        "combine (mean, variance) estimates into one posterior");
  m.def("run_config", &run_config, py::arg("command"), py::arg("config_json"),
        py::arg("out_dir"),
        "run an experiment config; returns result rows for the evaluating commands");
}
