#include "gpdm/belief.hpp"

#include <algorithm>
#include <stdexcept>

namespace gpdm {
namespace {

void normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total <= 0.0) throw std::logic_error("belief distribution lost all mass");
  for (double& x : v) x /= total;
}

int find_value(const SlotSpec& spec, const std::string& v) {
  for (std::size_t i = 0; i < spec.values.size(); ++i)
    if (spec.values[i] == v) return static_cast<int>(i);
  return -1;
}

}  // namespace

int BeliefState::node_index(const std::string& slot) const {
  for (std::size_t i = 0; i < goals.size(); ++i)
    if (goals[i].slot == slot) return static_cast<int>(i);
  return -1;
}

const GoalNode& BeliefState::goal(const std::string& slot) const {
  int i = node_index(slot);
  if (i < 0) throw std::out_of_range("belief has no goal node for slot '" + slot + "'");
  return goals[i];
}

const HistoryNode& BeliefState::history(const std::string& slot) const {
  int i = node_index(slot);
  if (i < 0) throw std::out_of_range("belief has no history node for slot '" + slot + "'");
  return histories[i];
}

BeliefState init_belief(const DomainModel& model) {
  BeliefState b;
  b.domain = model.ontology.domain;
  auto add = [&](const std::string& slot) {
    const SlotSpec& spec = model.ontology.at(slot);
    GoalNode g;
    g.slot = slot;
    g.dist.assign(spec.values.size() + 1, 0.0);
    g.dist.back() = 1.0;  // all mass on none
    b.goals.push_back(std::move(g));
    HistoryNode h;
    h.slot = slot;
    h.dist = {1.0, 0.0, 0.0, 0.0};
    b.histories.push_back(h);
  };
  add(model.ontology.name_slot().name);
  for (const auto& r : model.ordering.of_class(SlotClass::Requestable)) add(r.slot);
  return b;
}

BeliefState update_belief(const BeliefState& b, const NBestInput& obs,
                          const DialogueAct& last_system_act, const DomainModel& model,
                          std::vector<std::string>* rejected) {
  obs.validate();
  BeliefState out = b;
  auto reject = [&](const NBestHypothesis& h, const char* why) {
    if (rejected) rejected->push_back(std::string(why) + ": " + render_act(h.act));
  };

  // Inform mass per goal node: lambda plus the per-value observation vector.
  std::vector<double> lambda(out.goals.size(), 0.0);
  std::vector<std::vector<double>> obs_mass(out.goals.size());
  for (std::size_t i = 0; i < out.goals.size(); ++i)
    obs_mass[i].assign(out.goals[i].dist.size(), 0.0);

  for (const auto& h : obs.hypotheses) {
    if (h.act.type == ActType::Inform) {
      int node = out.node_index(h.act.slot);
      if (node < 0) {
        reject(h, "unknown or non-goal slot");
        continue;
      }
      const SlotSpec& spec = model.ontology.at(h.act.slot);
      if (h.act.value == "dontcare") {
        double share = h.confidence / static_cast<double>(spec.values.size());
        for (std::size_t v = 0; v < spec.values.size(); ++v) obs_mass[node][v] += share;
      } else {
        int v = find_value(spec, h.act.value);
        if (v < 0) {
          reject(h, "unknown value");
          continue;
        }
        obs_mass[node][v] += h.confidence;
      }
      lambda[node] += h.confidence;
    } else if (h.act.type == ActType::Request) {
      if (h.confidence <= 0.5) continue;
      const SlotSpec* spec = model.ontology.find(h.act.slot);
      if (!spec || spec->cls != SlotClass::Informable) {
        reject(h, "request of non-informable slot");
        continue;
      }
      auto it = std::lower_bound(out.requested.begin(), out.requested.end(), h.act.slot);
      if (it == out.requested.end() || *it != h.act.slot) out.requested.insert(it, h.act.slot);
    }
  }

  for (std::size_t i = 0; i < out.goals.size(); ++i) {
    if (lambda[i] <= 0.0) continue;
    auto& dist = out.goals[i].dist;
    for (std::size_t v = 0; v < dist.size(); ++v)
      dist[v] = (1.0 - lambda[i]) * dist[v] + obs_mass[i][v];
    normalize(dist);
  }

  // History transitions: a user inform dominates whatever the system did.
  for (std::size_t i = 0; i < out.histories.size(); ++i) {
    if (lambda[i] > 0.0) {
      out.histories[i].dist = {0.0, 1.0, 0.0, 0.0};
    } else if (out.histories[i].slot == last_system_act.slot && !last_system_act.slot.empty()) {
      if (last_system_act.type == ActType::Request)
        out.histories[i].dist = {0.0, 0.0, 1.0, 0.0};
      else if (last_system_act.type == ActType::Confirm || last_system_act.type == ActType::Select)
        out.histories[i].dist = {0.0, 0.0, 0.0, 1.0};
    }
  }
  return out;
}

std::vector<double> sorted_goal_vector(const GoalNode& g) {
  if (g.dist.empty()) throw std::logic_error("goal node with empty distribution");
  std::vector<double> out(g.dist.begin(), g.dist.end() - 1);
  std::sort(out.begin(), out.end(), std::greater<double>());
  out.push_back(g.dist.back());
  return out;
}

FeatureVector feature_vector(const BeliefState& b) {
  FeatureVector f;
  f.domain = b.domain;
  f.nodes.reserve(b.goals.size() * 2);
  for (std::size_t i = 0; i < b.goals.size(); ++i) {
    NodeVec g;
    g.slot = b.goals[i].slot;
    g.kind = 0;
    g.values = sorted_goal_vector(b.goals[i]);
    f.nodes.push_back(std::move(g));
    NodeVec h;
    h.slot = b.histories[i].slot;
    h.kind = 1;
    h.values.assign(b.histories[i].dist.begin(), b.histories[i].dist.end());
    f.nodes.push_back(std::move(h));
  }
  return f;
}

std::shared_ptr<const FeatureVector> share_features(FeatureVector f) {
  return std::make_shared<const FeatureVector>(std::move(f));
}

}  // namespace gpdm
