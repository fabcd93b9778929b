#include "gpdm/dm.hpp"

#include <algorithm>
#include <mutex>
#include <stdexcept>
#include <unordered_map>

namespace gpdm {

namespace {

// indices of the two largest value entries (none excluded); ties keep the
// first declared value
std::pair<int, int> top_two(const GoalNode& g) {
  int n = static_cast<int>(g.dist.size()) - 1;
  int i1 = -1, i2 = -1;
  for (int i = 0; i < n; ++i) {
    if (i1 < 0 || g.dist[i] > g.dist[i1]) {
      i2 = i1;
      i1 = i;
    } else if (i2 < 0 || g.dist[i] > g.dist[i2]) {
      i2 = i;
    }
  }
  return {i1, i2};
}

}  // namespace

std::vector<SummaryAction> candidate_actions(const BeliefState& b, const DomainModel& model,
                                             const DMConfig& cfg) {
  std::vector<SummaryAction> out;
  for (const auto& rs : model.ordering.of_class(SlotClass::Requestable)) {
    out.push_back({SummaryKind::Request, rs.slot});
    const GoalNode& g = b.goal(rs.slot);
    auto [i1, i2] = top_two(g);
    double p1 = i1 >= 0 ? g.dist[i1] : 0.0;
    double p2 = i2 >= 0 ? g.dist[i2] : 0.0;
    if (i1 >= 0 && p1 > cfg.confirm_threshold) out.push_back({SummaryKind::Confirm, rs.slot});
    if (i2 >= 0 && p1 > cfg.select_threshold && p2 > cfg.select_threshold)
      out.push_back({SummaryKind::Select, rs.slot});
  }
  out.push_back({SummaryKind::Inform, ""});
  out.push_back({SummaryKind::Repeat, ""});
  out.push_back({SummaryKind::Bye, ""});
  return out;
}

DialogueAct summary_to_master(const SummaryAction& a, const BeliefState& b,
                              const DomainModel& model) {
  switch (a.kind) {
    case SummaryKind::Request:
      return DialogueAct{ActType::Request, a.slot, "", {}};
    case SummaryKind::Confirm: {
      const GoalNode& g = b.goal(a.slot);
      auto [i1, i2] = top_two(g);
      (void)i2;
      std::string v = i1 >= 0 ? model.ontology.at(a.slot).values[i1] : "";
      return DialogueAct{ActType::Confirm, a.slot, v, {}};
    }
    case SummaryKind::Select: {
      const GoalNode& g = b.goal(a.slot);
      auto [i1, i2] = top_two(g);
      if (i1 < 0 || i2 < 0) throw std::logic_error("select needs two goal values");
      const auto& vals = model.ontology.at(a.slot).values;
      return DialogueAct{ActType::Select, a.slot, vals[i1], {{a.slot, vals[i2]}}};
    }
    case SummaryKind::Repeat:
      return DialogueAct{ActType::Repeat, "", "", {}};
    case SummaryKind::Bye:
      return DialogueAct{ActType::Bye, "", "", {}};
    case SummaryKind::Inform:
      break;
    case SummaryKind::Terminal:
      throw std::logic_error("terminal actions are trace anchors, never realized");
  }

  const std::string& name_slot = model.ontology.name_slot().name;
  if (model.db.entities.empty())
    return DialogueAct{ActType::Inform, "", "", {{name_slot, "none"}}};

  // constraints: the top non-none value of every requestable slot that has
  // any mass on it
  std::vector<std::pair<std::string, std::string>> constraints;
  for (const auto& rs : model.ordering.of_class(SlotClass::Requestable)) {
    const GoalNode& g = b.goal(rs.slot);
    auto [i1, i2] = top_two(g);
    (void)i2;
    if (i1 >= 0 && g.dist[i1] > 0.0)
      constraints.emplace_back(rs.slot, model.ontology.at(rs.slot).values[i1]);
  }

  const Entity* best = nullptr;
  int best_matches = -1;
  const std::string* best_name = nullptr;
  for (const auto& e : model.db.entities) {
    auto nit = e.find(name_slot);
    if (nit == e.end()) continue;
    int matches = 0;
    for (const auto& c : constraints) {
      auto it = e.find(c.first);
      if (it != e.end() && it->second == c.second) ++matches;
    }
    if (matches > best_matches || (matches == best_matches && nit->second < *best_name)) {
      best = &e;
      best_matches = matches;
      best_name = &nit->second;
    }
  }
  if (!best) return DialogueAct{ActType::Inform, "", "", {{name_slot, "none"}}};

  DialogueAct offer{ActType::Inform, "", "", {}};
  offer.items.emplace_back(name_slot, *best_name);
  for (const auto& sp : model.ontology.slots) {
    if (sp.cls != SlotClass::Requestable) continue;
    auto it = best->find(sp.name);
    if (it != best->end()) offer.items.emplace_back(sp.name, it->second);
  }
  for (const auto& r : b.requested) {
    auto it = best->find(r);
    if (it != best->end()) offer.items.emplace_back(r, it->second);
  }
  return offer;
}

DialogueAct DialogueActor::realize(const SummaryAction& a, const BeliefState& b,
                                   const DomainModel& model) {
  return summary_to_master(a, b, model);
}

void DialogueActor::begin_dialogue(const UserGoal&, const DomainModel&) {}

void DialogueActor::observe_episode(const Episode&) {}

SummaryAction GPActor::choose(const BeliefState& b,
                              const std::shared_ptr<const FeatureVector>& features,
                              const std::vector<SummaryAction>& candidates, bool train,
                              std::mt19937_64& rng, TurnRecord& rec) {
  TurnContext ctx = policy_->prepare(features, b.domain);
  return train ? policy_->select_action(ctx, candidates, rng, &rec.chosen)
               : policy_->greedy_action(ctx, candidates, &rec.chosen);
}

void GPActor::observe_episode(const Episode& ep) {
  if (ep.turns.empty()) return;
  auto [points, rewards] = episode_trace(ep);
  policy_->ingest_episode(points, rewards);
}

SummaryAction OracleActor::choose(const BeliefState&,
                                  const std::shared_ptr<const FeatureVector>&,
                                  const std::vector<SummaryAction>&, bool, std::mt19937_64&,
                                  TurnRecord&) {
  return SummaryAction{SummaryKind::Inform, ""};
}

void OracleActor::begin_dialogue(const UserGoal& goal, const DomainModel&) { goal_ = goal; }

DialogueAct OracleActor::realize(const SummaryAction& a, const BeliefState& b,
                                 const DomainModel& model) {
  if (a.kind != SummaryKind::Inform || goal_.target_names.empty())
    return summary_to_master(a, b, model);
  const std::string& name_slot = model.ontology.name_slot().name;
  for (const auto& e : model.db.entities) {
    auto nit = e.find(name_slot);
    if (nit == e.end() || nit->second != goal_.target_names.front()) continue;
    DialogueAct offer{ActType::Inform, "", "", {}};
    offer.items.emplace_back(name_slot, nit->second);
    for (const auto& sp : model.ontology.slots) {
      if (sp.cls == SlotClass::Name) continue;
      auto it = e.find(sp.name);
      if (it != e.end()) offer.items.emplace_back(sp.name, it->second);
    }
    return offer;
  }
  return summary_to_master(a, b, model);
}

std::shared_ptr<const FeatureVector> terminal_features(const std::string& domain) {
  static std::mutex mu;
  static std::unordered_map<std::string, std::shared_ptr<const FeatureVector>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(domain);
  if (it != cache.end()) return it->second;
  auto f = std::make_shared<FeatureVector>();
  f->domain = domain;
  return cache.emplace(domain, std::move(f)).first->second;
}

std::pair<std::vector<Point>, std::vector<double>> episode_trace(const Episode& ep) {
  if (ep.turns.empty()) throw std::invalid_argument("cannot trace an empty episode");
  std::vector<Point> points;
  std::vector<double> rewards;
  points.reserve(ep.turns.size() + 1);
  rewards.reserve(ep.turns.size());
  for (const auto& t : ep.turns) {
    points.push_back(Point{t.features, t.action, ep.domain});
    rewards.push_back(t.reward);
  }
  points.push_back(Point{terminal_features(ep.domain),
                         SummaryAction{SummaryKind::Terminal, ""}, ep.domain});
  return {std::move(points), std::move(rewards)};
}

Episode run_dialogue(DialogueActor& actor, SimulatedUser& user, const DomainModel& model,
                     const DMConfig& cfg, const ErrorModel& em, std::mt19937_64& rng,
                     bool train) {
  actor.begin_dialogue(user.goal(), model);
  Episode ep;
  ep.domain = model.ontology.domain;
  BeliefState b = init_belief(model);
  DialogueAct last_system{ActType::Hello, "", "", {}};
  std::vector<DialogueAct> system_acts;
  for (int t = 0; t < cfg.max_turns; ++t) {
    DialogueAct user_true = user.respond(last_system, rng);
    if (user_true.type == ActType::Bye) break;
    NBestInput nbest = corrupt_act(user_true, model, em, rng);
    b = update_belief(b, nbest, last_system, model);
    auto features = share_features(feature_vector(b));
    auto candidates = candidate_actions(b, model, cfg);
    TurnRecord rec;
    rec.features = features;
    rec.action = actor.choose(b, features, candidates, train, rng, rec);
    SummaryKind kind = rec.action.kind;
    DialogueAct master = actor.realize(rec.action, b, model);
    rec.reward = cfg.reward.turn_penalty;
    ep.turns.push_back(std::move(rec));
    system_acts.push_back(master);
    if (cfg.record_transcript) ep.transcript.push_back({user_true, nbest, master});
    last_system = std::move(master);
    if (kind == SummaryKind::Bye) break;
  }
  EpisodeScore sc = score_episode(system_acts, user.goal(), model, cfg.reward);
  ep.success = sc.success;
  ep.ret = sc.ret;
  if (!ep.turns.empty() && sc.success) ep.turns.back().reward += cfg.reward.success_bonus;
  return ep;
}

}  // namespace gpdm
