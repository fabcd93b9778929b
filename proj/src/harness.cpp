#include "gpdm/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <stdexcept>

#include "gpdm/domains.hpp"

namespace gpdm {

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

void write_json_file(const std::string& path, const nlohmann::json& j, int indent = -1) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << (indent < 0 ? j.dump() : j.dump(indent)) << '\n';
}

std::string fmt6(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<std::string> str_list(const nlohmann::json& v, const std::string& key) {
  require(v.is_array(), key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& e : v) {
    require(e.is_string(), key + " must contain only strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

void ExperimentConfig::validate() const {
  require(!seeds.empty(), "seeds must not be empty");
  require(eval_dialogues >= 1, "eval_dialogues must be at least 1");
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    require(checkpoints[i] >= 0, "checkpoints must be non-negative");
    if (i) require(checkpoints[i] > checkpoints[i - 1], "checkpoints must be strictly ascending");
  }
  hyper.validate();
  error.validate();
  require(dm.max_turns >= 1, "max_turns must be at least 1");
  require(dm.confirm_threshold >= 0.0 && dm.confirm_threshold <= 1.0,
          "confirm_threshold must lie in [0, 1]");
  require(dm.select_threshold >= 0.0 && dm.select_threshold <= 1.0,
          "select_threshold must lie in [0, 1]");
  require(goal_weight >= 0.0 && history_weight >= 0.0, "kernel weights must be non-negative");
  require(kernel_mode == "auto" || kernel_mode == "shared" || kernel_mode == "entropy",
          "kernel_mode must be auto, shared or entropy");
}

ExperimentConfig config_from_json(const nlohmann::json& j) {
  require(j.is_object(), "config must be a JSON object");
  ExperimentConfig cfg;
  bool have_strategy = false, have_strategies = false;
  bool have_train = false, have_ckpts = false;
  int train_dialogues = 0;
  for (const auto& [key, val] : j.items()) {
    if (key == "domains") {
      cfg.domains = str_list(val, key);
    } else if (key == "strategy") {
      require(val.is_string(), "strategy must be a string");
      cfg.strategies = {val.get<std::string>()};
      have_strategy = true;
    } else if (key == "strategies") {
      cfg.strategies = str_list(val, key);
      have_strategies = true;
    } else if (key == "train_dialogues") {
      train_dialogues = val.get<int>();
      have_train = true;
    } else if (key == "checkpoints") {
      cfg.checkpoints = val.get<std::vector<int>>();
      have_ckpts = true;
    } else if (key == "eval_dialogues") {
      cfg.eval_dialogues = val.get<int>();
    } else if (key == "seeds") {
      cfg.seeds = val.get<std::vector<std::uint64_t>>();
    } else if (key == "hyper") {
      require(val.is_object(), "hyper must be an object");
      for (const auto& [hk, hv] : val.items()) {
        if (hk == "sigma2") cfg.hyper.sigma2 = hv.get<double>();
        else if (hk == "gamma") cfg.hyper.gamma = hv.get<double>();
        else if (hk == "dict_cap") cfg.hyper.dict_cap = hv.get<std::size_t>();
        else if (hk == "novelty_tol") cfg.hyper.novelty_tol = hv.get<double>();
        else throw std::invalid_argument("unknown hyper key: " + hk);
      }
    } else if (key == "error_rate") {
      cfg.error.error_rate = val.get<double>();
    } else if (key == "nbest_len") {
      cfg.error.nbest_len = val.get<int>();
    } else if (key == "beta_a") {
      cfg.error.beta_a = val.get<double>();
    } else if (key == "beta_b") {
      cfg.error.beta_b = val.get<double>();
    } else if (key == "max_turns") {
      cfg.dm.max_turns = val.get<int>();
    } else if (key == "turn_penalty") {
      cfg.dm.reward.turn_penalty = val.get<double>();
    } else if (key == "success_bonus") {
      cfg.dm.reward.success_bonus = val.get<double>();
    } else if (key == "confirm_threshold") {
      cfg.dm.confirm_threshold = val.get<double>();
    } else if (key == "select_threshold") {
      cfg.dm.select_threshold = val.get<double>();
    } else if (key == "goal_weight") {
      cfg.goal_weight = val.get<double>();
    } else if (key == "history_weight") {
      cfg.history_weight = val.get<double>();
    } else if (key == "kernel_mode") {
      cfg.kernel_mode = val.get<std::string>();
    } else if (key == "member_domains") {
      cfg.member_domains = str_list(val, key);
    } else if (key == "snapshot") {
      cfg.snapshot = val.get<std::string>();
    } else if (key == "domain") {
      cfg.domain = val.get<std::string>();
    } else if (key == "domain_files") {
      require(val.is_object(), "domain_files must be an object");
      for (const auto& [name, files] : val.items()) {
        require(files.is_object(), "domain_files entries must be objects");
        std::string ont, db;
        for (const auto& [fk, fv] : files.items()) {
          if (fk == "ontology") ont = fv.get<std::string>();
          else if (fk == "database") db = fv.get<std::string>();
          else throw std::invalid_argument("unknown domain_files key: " + fk);
        }
        require(!ont.empty() && !db.empty(),
                "domain_files entry for " + name + " needs ontology and database paths");
        cfg.domain_files[name] = {ont, db};
      }
    } else if (key == "record_transcripts") {
      cfg.record_transcripts = val.get<bool>();
    } else {
      throw std::invalid_argument("unknown config key: " + key);
    }
  }
  require(!(have_strategy && have_strategies), "give strategy or strategies, not both");
  require(!(have_train && have_ckpts), "give train_dialogues or checkpoints, not both");
  if (have_train) cfg.checkpoints = {train_dialogues};
  cfg.dm.record_transcript = cfg.record_transcripts;
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path));
}

const DomainModel& ModelSet::at(const std::string& name) const {
  auto it = by_name.find(name);
  if (it == by_name.end()) throw std::invalid_argument("domain not loaded: " + name);
  return it->second;
}

std::vector<const DomainModel*> ModelSet::ordered(const std::vector<std::string>& which) const {
  std::vector<const DomainModel*> out;
  out.reserve(which.size());
  for (const auto& n : which) out.push_back(&at(n));
  return out;
}

ModelSet load_models(const ExperimentConfig& cfg, const std::vector<std::string>& names) {
  ModelSet ms;
  for (const auto& n : names) {
    if (ms.by_name.count(n)) continue;
    ms.names.push_back(n);
    auto it = cfg.domain_files.find(n);
    if (it != cfg.domain_files.end()) {
      auto [ont, db] = load_domain(it->second.first, it->second.second);
      require(ont.domain == n, "domain file declares " + ont.domain + " but config names it " + n);
      ms.by_name.emplace(n, make_domain_model(std::move(ont), std::move(db)));
    } else {
      ms.by_name.emplace(n, builtin_domain_model(n));
    }
  }
  return ms;
}

EvalSummary summarize_rows(const std::vector<EvalRow>& rows) {
  std::vector<double> r, s, t;
  r.reserve(rows.size());
  s.reserve(rows.size());
  t.reserve(rows.size());
  for (const auto& row : rows) {
    r.push_back(row.reward);
    s.push_back(row.success);
    t.push_back(row.turns);
  }
  return EvalSummary{summarize(r), summarize(s), summarize(t)};
}

std::uint64_t train_stream_seed(std::uint64_t seed, const std::string& domain, int index) {
  return mix_seed(seed, {tag64("train"), tag64(domain), static_cast<std::uint64_t>(index)});
}

std::uint64_t eval_stream_seed(std::uint64_t seed, const std::string& domain, int index) {
  return mix_seed(seed, {tag64("eval"), tag64(domain), static_cast<std::uint64_t>(index)});
}

std::vector<EvalRow> evaluate_dialogues(const ActorFactory& make_actor, const DomainModel& model,
                                        int n, std::uint64_t seed, const DMConfig& dm,
                                        const ErrorModel& em, bool thompson) {
  std::vector<EvalRow> rows(static_cast<std::size_t>(n));
  DMConfig eval_dm = dm;
  eval_dm.record_transcript = false;
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    std::mt19937_64 rng(eval_stream_seed(seed, model.ontology.domain, static_cast<int>(i)));
    auto actor = make_actor();
    UserGoal goal = sample_goal(model, rng);
    SimulatedUser user(model, std::move(goal));
    Episode ep = run_dialogue(*actor, user, model, eval_dm, em, rng, thompson);
    rows[i] = EvalRow{ep.ret, ep.success ? 1.0 : 0.0, static_cast<double>(ep.turns.size())};
  });
  return rows;
}

EvalSummary evaluate_policy(GPPolicy& policy, const DomainModel& model, int n, std::uint64_t seed,
                            const DMConfig& dm, const ErrorModel& em) {
  auto factory = [&policy] { return std::make_unique<GPActor>(policy); };
  return summarize_rows(evaluate_dialogues(factory, model, n, seed, dm, em));
}

EvalSummary evaluate_committee(PolicyCommittee& committee, const DomainModel& model, int n,
                               std::uint64_t seed, const DMConfig& dm, const ErrorModel& em) {
  auto factory = [&committee] {
    return std::make_unique<CommitteeActor>(committee, RewardStrategy::Naive);
  };
  return summarize_rows(evaluate_dialogues(factory, model, n, seed, dm, em));
}

Episode train_dialogue(DialogueActor& actor, const DomainModel& model, const DMConfig& dm,
                       const ErrorModel& em, std::uint64_t stream_seed) {
  std::mt19937_64 rng(stream_seed);
  UserGoal goal = sample_goal(model, rng);
  SimulatedUser user(model, std::move(goal));
  Episode ep = run_dialogue(actor, user, model, dm, em, rng, true);
  actor.observe_episode(ep);
  return ep;
}

void sort_rows(std::vector<ResultRow>& rows, const std::vector<std::string>& strategy_order,
               const std::vector<std::string>& domain_order,
               const std::vector<std::uint64_t>& seed_order) {
  auto spos = [&](const std::string& s) {
    auto it = std::find(strategy_order.begin(), strategy_order.end(), s);
    return static_cast<std::size_t>(it - strategy_order.begin());
  };
  auto dpos = [&](const std::string& d) {
    auto it = std::find(domain_order.begin(), domain_order.end(), d);
    return static_cast<std::size_t>(it - domain_order.begin());
  };
  auto zpos = [&](std::uint64_t z) {
    auto it = std::find(seed_order.begin(), seed_order.end(), z);
    return static_cast<std::size_t>(it - seed_order.begin());
  };
  std::stable_sort(rows.begin(), rows.end(), [&](const ResultRow& a, const ResultRow& b) {
    return std::make_tuple(spos(a.strategy), dpos(a.domain), a.train_dialogues, zpos(a.seed)) <
           std::make_tuple(spos(b.strategy), dpos(b.domain), b.train_dialogues, zpos(b.seed));
  });
}

void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "strategy,domain,train_dialogues,seed,reward,reward_ci,success,success_ci,turns,"
         "turns_ci\n";
  for (const auto& r : rows) {
    out << r.strategy << ',' << r.domain << ',' << r.train_dialogues << ',' << r.seed << ','
        << fmt6(r.stats.reward.mean) << ',' << fmt6(r.stats.reward.ci95) << ','
        << fmt6(r.stats.success.mean) << ',' << fmt6(r.stats.success.ci95) << ','
        << fmt6(r.stats.turns.mean) << ',' << fmt6(r.stats.turns.ci95) << '\n';
  }
}

void write_train_curves(const std::string& out_dir, const std::vector<CurvePoint>& points,
                        const std::vector<std::string>& strategies, std::size_t window) {
  for (const auto& strategy : strategies) {
    std::string name = strategies.size() == 1 ? std::string("train_curve.csv")
                                              : "train_curve_" + strategy + ".csv";
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/" + name);
    out << "seed,domain,index,reward,moving_avg\n";
    // group per (seed, domain) in first-appearance order
    std::vector<std::pair<std::uint64_t, std::string>> keys;
    std::map<std::pair<std::uint64_t, std::string>, std::vector<double>> rewards;
    for (const auto& p : points) {
      if (p.strategy != strategy) continue;
      auto key = std::make_pair(p.seed, p.domain);
      auto [it, fresh] = rewards.try_emplace(key);
      if (fresh) keys.push_back(key);
      it->second.push_back(p.reward);
    }
    for (const auto& key : keys) {
      const auto& rs = rewards.at(key);
      std::vector<double> ma = moving_average(rs, window);
      for (std::size_t i = 0; i < rs.size(); ++i)
        out << key.first << ',' << key.second << ',' << i + 1 << ',' << fmt6(rs[i]) << ','
            << fmt6(ma[i]) << '\n';
    }
  }
}

std::string snapshot_filename(const std::string& strategy, const std::string& label, int ckpt,
                              std::uint64_t seed) {
  std::string lab = label;
  std::replace(lab.begin(), lab.end(), '+', '-');
  return "policy_" + strategy + "_" + lab + "_ck" + std::to_string(ckpt) + "_seed" +
         std::to_string(seed) + ".json";
}

void save_committee(const PolicyCommittee& committee, const std::string& out_dir,
                    const std::string& base_name) {
  nlohmann::json manifest = committee.manifest();
  for (std::size_t i = 0; i < committee.size(); ++i) {
    const auto& m = committee.member(i);
    std::string file = base_name + "_member_" + m.model->ontology.domain + ".json";
    write_json_file(out_dir + "/" + file, m.policy->snapshot());
    manifest["members"][i]["file"] = file;
  }
  write_json_file(out_dir + "/" + base_name + ".json", manifest);
}

PolicyCommittee load_committee(const std::string& manifest_path, const ModelSet& models) {
  nlohmann::json j = read_json_file(manifest_path);
  if (!j.is_object() || j.value("format", "") != "gpdm-committee-1")
    throw std::runtime_error("not a committee manifest: " + manifest_path);
  KernelSpec spec = kernel_spec_from_json(j.at("spec"));
  std::filesystem::path dir = std::filesystem::path(manifest_path).parent_path();
  std::vector<CommitteeMember> members;
  for (const auto& e : j.at("members")) {
    std::string domain = e.at("domain").get<std::string>();
    std::string file = e.at("file").get<std::string>();
    CommitteeMember m;
    m.model = &models.at(domain);
    m.policy = GPPolicy::restore(read_json_file((dir / file).string()));
    members.push_back(std::move(m));
  }
  return PolicyCommittee(std::move(members), std::move(spec));
}

std::vector<ResultRow> run_train(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  if (c.strategies.empty()) c.strategies = {"INDOM"};
  for (const auto& s : c.strategies)
    require(s == "INDOM" || s == "GEN" || s == "GOLD",
            "train supports INDOM, GEN and GOLD; got " + s);
  require(!c.domains.empty(), "train needs at least one domain");
  require(!c.checkpoints.empty(), "train needs checkpoints or train_dialogues");
  ModelSet models = load_models(c, c.domains);
  auto ptrs = models.ordered(c.domains);
  const int d_count = static_cast<int>(c.domains.size());

  std::vector<ResultRow> rows;
  std::vector<CurvePoint> curves;
  for (const auto& strategy : c.strategies) {
    bool pooled = strategy == "GEN";
    for (std::uint64_t seed : c.seeds) {
      if (pooled) {
        KernelSpec spec = make_kernel_spec(ptrs, c.kernel_mode);
        spec.goal_weight = c.goal_weight;
        spec.history_weight = c.history_weight;
        std::string label = join(c.domains, "+");
        GPPolicy policy(label, std::move(spec), c.hyper);
        GPActor actor(policy);
        auto eval_all = [&](int ck) {
          for (const auto& d : c.domains)
            rows.push_back({strategy, d, ck, seed,
                            evaluate_policy(policy, models.at(d), c.eval_dialogues, seed, c.dm,
                                            c.error)});
          write_json_file(out_dir + "/" + snapshot_filename(strategy, label, ck, seed),
                          policy.snapshot());
        };
        std::size_t ci = 0;
        if (c.checkpoints[0] == 0) {
          eval_all(0);
          ++ci;
        }
        for (int i = 0; i < c.checkpoints.back(); ++i) {
          const std::string& d = c.domains[i % d_count];
          Episode ep = train_dialogue(actor, models.at(d), c.dm, c.error,
                                      train_stream_seed(seed, d, i / d_count));
          curves.push_back({strategy, seed, d, i / d_count + 1, ep.ret});
          if (ci < c.checkpoints.size() && i + 1 == c.checkpoints[ci]) {
            eval_all(i + 1);
            ++ci;
          }
        }
      } else {  // INDOM and GOLD: per-domain policies on their own data
        std::vector<std::unique_ptr<GPPolicy>> policies;
        std::vector<std::unique_ptr<GPActor>> actors;
        for (int k = 0; k < d_count; ++k) {
          KernelSpec spec = make_kernel_spec({ptrs[k]}, c.kernel_mode);
          spec.goal_weight = c.goal_weight;
          spec.history_weight = c.history_weight;
          policies.push_back(std::make_unique<GPPolicy>(c.domains[k], std::move(spec), c.hyper));
          actors.push_back(std::make_unique<GPActor>(*policies[k]));
        }
        auto eval_one = [&](int k, int ck) {
          rows.push_back({strategy, c.domains[k], ck, seed,
                          evaluate_policy(*policies[k], models.at(c.domains[k]),
                                          c.eval_dialogues, seed, c.dm, c.error)});
          write_json_file(out_dir + "/" + snapshot_filename(strategy, c.domains[k], ck, seed),
                          policies[k]->snapshot());
        };
        std::vector<std::size_t> ci(d_count, 0);
        if (c.checkpoints[0] == 0)
          for (int k = 0; k < d_count; ++k) {
            eval_one(k, 0);
            ci[k] = 1;
          }
        int per_domain = c.checkpoints.back();
        for (int i = 0; i < per_domain * d_count; ++i) {
          int k = i % d_count;
          int idx = i / d_count;
          Episode ep = train_dialogue(*actors[k], models.at(c.domains[k]), c.dm, c.error,
                                      train_stream_seed(seed, c.domains[k], idx));
          curves.push_back({strategy, seed, c.domains[k], idx + 1, ep.ret});
          if (ci[k] < c.checkpoints.size() && idx + 1 == c.checkpoints[ci[k]]) {
            eval_one(k, idx + 1);
            ++ci[k];
          }
        }
      }
    }
  }
  sort_rows(rows, c.strategies, c.domains, c.seeds);
  write_results_csv(out_dir + "/results.csv", rows);
  write_train_curves(out_dir, curves, c.strategies);
  return rows;
}

std::vector<ResultRow> run_multiagent(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  if (c.strategies.empty()) c.strategies = {"MBCM", "NAIV", "WINN", "SCALE"};
  for (const auto& s : c.strategies)
    require(s == "MBCM" || s == "NAIV" || s == "WINN" || s == "SCALE",
            "multiagent supports MBCM, NAIV, WINN and SCALE; got " + s);
  require(!c.domains.empty(), "multiagent needs at least one domain");
  require(!c.checkpoints.empty(), "multiagent needs checkpoints or train_dialogues");
  std::vector<std::string> members = c.member_domains.empty() ? c.domains : c.member_domains;
  std::vector<std::string> all = members;
  std::vector<std::string> extra;
  for (const auto& d : c.domains)
    if (std::find(members.begin(), members.end(), d) == members.end()) {
      all.push_back(d);
      extra.push_back(d);
    }
  ModelSet models = load_models(c, all);
  const int d_count = static_cast<int>(c.domains.size());

  std::ofstream att(out_dir + "/attribution.jsonl");
  if (!att) throw std::runtime_error("cannot write " + out_dir + "/attribution.jsonl");

  std::vector<ResultRow> rows;
  std::vector<CurvePoint> curves;
  for (const auto& strategy : c.strategies) {
    RewardStrategy rs = reward_strategy_from_string(strategy);
    for (std::uint64_t seed : c.seeds) {
      PolicyCommittee committee = PolicyCommittee::fresh(
          models.ordered(members), c.hyper, models.ordered(extra), c.goal_weight,
          c.history_weight);
      CommitteeActor actor(committee, rs);
      auto eval_all = [&](int ck) {
        for (const auto& d : c.domains)
          rows.push_back({strategy, d, ck, seed,
                          evaluate_committee(committee, models.at(d), c.eval_dialogues, seed,
                                             c.dm, c.error)});
        save_committee(committee, out_dir,
                       "committee_" + strategy + "_ck" + std::to_string(ck) + "_seed" +
                           std::to_string(seed));
      };
      std::size_t ci = 0;
      if (c.checkpoints[0] == 0) {
        eval_all(0);
        ++ci;
      }
      for (int i = 0; i < c.checkpoints.back(); ++i) {
        const std::string& d = c.domains[i % d_count];
        Episode ep = train_dialogue(actor, models.at(d), c.dm, c.error,
                                    train_stream_seed(seed, d, i / d_count));
        curves.push_back({strategy, seed, d, i / d_count + 1, ep.ret});
        if (!ep.turns.empty()) {
          nlohmann::json line{{"strategy", strategy},
                              {"seed", seed},
                              {"domain", d},
                              {"index", i + 1},
                              {"ratios", actor.last_attribution().avg_ratio},
                              {"weights", actor.last_weights()}};
          att << line.dump() << '\n';
        }
        if (ci < c.checkpoints.size() && i + 1 == c.checkpoints[ci]) {
          eval_all(i + 1);
          ++ci;
        }
      }
    }
  }
  sort_rows(rows, c.strategies, c.domains, c.seeds);
  write_results_csv(out_dir + "/results.csv", rows);
  write_train_curves(out_dir, curves, c.strategies);
  return rows;
}

std::vector<ResultRow> run_adapt(const ExperimentConfig& cfg, const std::string& out_dir) {
  ExperimentConfig c = cfg;
  require(!c.snapshot.empty(), "adapt needs a snapshot path");
  require(!c.domain.empty(), "adapt needs a target domain");
  if (c.strategies.empty()) c.strategies = {"PRIOR-ADAPT", "NO-PRIOR"};
  for (const auto& s : c.strategies)
    require(s == "PRIOR-ADAPT" || s == "NO-PRIOR",
            "adapt supports PRIOR-ADAPT and NO-PRIOR; got " + s);
  std::vector<std::string> all = c.domains;
  if (std::find(all.begin(), all.end(), c.domain) == all.end()) all.push_back(c.domain);
  ModelSet models = load_models(c, all);
  const DomainModel& target = models.at(c.domain);

  std::shared_ptr<GPPolicy> generic = GPPolicy::restore(read_json_file(c.snapshot));
  std::vector<SlotMap> extra;
  for (const auto& src : c.domains) {
    if (src == c.domain) continue;
    KernelSpec pair_spec = make_kernel_spec({&models.at(src), &target}, c.kernel_mode);
    for (auto& m : pair_spec.maps) extra.push_back(std::move(m));
  }
  if (!extra.empty()) generic->extend_maps(extra);
  KernelSpec adapted_spec = generic->spec();

  std::vector<int> cks = c.checkpoints;
  if (cks.empty() || cks.front() != 0) cks.insert(cks.begin(), 0);

  std::vector<ResultRow> rows;
  std::vector<CurvePoint> curves;
  for (const auto& arm : c.strategies) {
    for (std::uint64_t seed : c.seeds) {
      std::shared_ptr<PriorMean> prior =
          arm == "PRIOR-ADAPT" ? policy_prior(generic) : nullptr;
      GPPolicy policy(c.domain, adapted_spec, c.hyper, std::move(prior));
      GPActor actor(policy);
      auto eval_ck = [&](int ck) {
        rows.push_back({arm, c.domain, ck, seed,
                        evaluate_policy(policy, target, c.eval_dialogues, seed, c.dm, c.error)});
        write_json_file(out_dir + "/" + snapshot_filename(arm, c.domain, ck, seed),
                        policy.snapshot());
      };
      eval_ck(0);
      std::size_t ci = 1;
      for (int i = 0; i < cks.back(); ++i) {
        Episode ep = train_dialogue(actor, target, c.dm, c.error,
                                    train_stream_seed(seed, c.domain, i));
        curves.push_back({arm, seed, c.domain, i + 1, ep.ret});
        if (ci < cks.size() && i + 1 == cks[ci]) {
          eval_ck(i + 1);
          ++ci;
        }
      }
    }
  }
  sort_rows(rows, c.strategies, {c.domain}, c.seeds);
  write_results_csv(out_dir + "/results.csv", rows);
  write_train_curves(out_dir, curves, c.strategies);
  return rows;
}

std::vector<ResultRow> run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir) {
  require(!cfg.snapshot.empty(), "evaluate needs a snapshot path");
  nlohmann::json j = read_json_file(cfg.snapshot);
  std::string format = j.is_object() ? j.value("format", "") : "";
  std::vector<ResultRow> rows;
  std::vector<std::string> eval_domains;
  if (format == "gpdm-policy-1") {
    std::shared_ptr<GPPolicy> policy = GPPolicy::restore(j);
    eval_domains = cfg.domains.empty() ? std::vector<std::string>{policy->domain()}
                                       : cfg.domains;
    ModelSet models = load_models(cfg, eval_domains);
    for (const auto& d : eval_domains)
      for (std::uint64_t seed : cfg.seeds)
        rows.push_back({"EVAL", d, static_cast<int>(policy->episode_count()), seed,
                        evaluate_policy(*policy, models.at(d), cfg.eval_dialogues, seed, cfg.dm,
                                        cfg.error)});
  } else if (format == "gpdm-committee-1") {
    std::vector<std::string> member_domains;
    for (const auto& e : j.at("members"))
      member_domains.push_back(e.at("domain").get<std::string>());
    eval_domains = cfg.domains.empty() ? member_domains : cfg.domains;
    std::vector<std::string> all = member_domains;
    for (const auto& d : eval_domains)
      if (std::find(all.begin(), all.end(), d) == all.end()) all.push_back(d);
    ModelSet models = load_models(cfg, all);
    PolicyCommittee committee = load_committee(cfg.snapshot, models);
    for (const auto& d : eval_domains)
      for (std::uint64_t seed : cfg.seeds)
        rows.push_back({"EVAL", d, 0, seed,
                        evaluate_committee(committee, models.at(d), cfg.eval_dialogues, seed,
                                           cfg.dm, cfg.error)});
  } else {
    throw std::runtime_error("unknown snapshot format in " + cfg.snapshot);
  }
  sort_rows(rows, {"EVAL"}, eval_domains, cfg.seeds);
  write_results_csv(out_dir + "/results.csv", rows);
  return rows;
}

void run_entropy(const ExperimentConfig& cfg, const std::string& out_dir) {
  require(!cfg.domains.empty(), "entropy needs at least one domain");
  ModelSet models = load_models(cfg, cfg.domains);
  std::ofstream out(out_dir + "/entropy.csv");
  if (!out) throw std::runtime_error("cannot write " + out_dir + "/entropy.csv");
  out << "domain,slot,class,cardinality,entropy,rank\n";
  const std::pair<SlotClass, const char*> classes[] = {
      {SlotClass::Name, "name"},
      {SlotClass::Requestable, "requestable"},
      {SlotClass::Informable, "informable"},
  };
  for (const auto& name : cfg.domains) {
    const DomainModel& m = models.at(name);
    for (const auto& [cls, cls_name] : classes) {
      for (const auto& rs : m.ordering.of_class(cls)) {
        char ent[64];
        std::snprintf(ent, sizeof ent, "%.12f", rs.entropy);
        out << name << ',' << rs.slot << ',' << cls_name << ','
            << m.ontology.at(rs.slot).values.size() << ',' << ent << ',' << rs.rank << '\n';
      }
    }
  }
  KernelSpec spec = make_kernel_spec(models.ordered(cfg.domains), cfg.kernel_mode);
  nlohmann::json matches;
  matches["mode"] = cfg.kernel_mode;
  matches["maps"] = nlohmann::json::array();
  for (const auto& m : spec.maps) matches["maps"].push_back(slot_map_to_json(m));
  write_json_file(out_dir + "/matches.json", matches, 2);
}

void run_chat(const ExperimentConfig& cfg, const std::string& out_dir, std::istream& in,
              std::ostream& out) {
  std::string domain = !cfg.domain.empty()
                           ? cfg.domain
                           : (cfg.domains.empty() ? std::string() : cfg.domains.front());
  require(!domain.empty(), "chat needs a domain");
  ModelSet models = load_models(cfg, {domain});
  const DomainModel& model = models.at(domain);

  std::shared_ptr<GPPolicy> policy;
  if (!cfg.snapshot.empty()) {
    policy = GPPolicy::restore(read_json_file(cfg.snapshot));
  } else {
    KernelSpec spec = make_kernel_spec({&model}, cfg.kernel_mode);
    spec.goal_weight = cfg.goal_weight;
    spec.history_weight = cfg.history_weight;
    policy = std::make_shared<GPPolicy>(domain, std::move(spec), cfg.hyper);
  }

  auto slot_names = [&](SlotClass cls) {
    std::vector<std::string> names;
    for (const auto& rs : model.ordering.of_class(cls)) names.push_back(rs.slot);
    return join(names, ", ");
  };
  out << "domain: " << domain << "\n";
  out << "requestable: " << slot_names(SlotClass::Requestable) << "\n";
  out << "informable: " << slot_names(SlotClass::Informable) << "\n";
  out << "acts: inform(slot=value), request(slot), affirm, negate, reqalts, bye;"
      << " 'quit' exits\n";

  BeliefState b = init_belief(model);
  DialogueAct last_system{ActType::Hello, "", "", {}};
  std::vector<std::pair<std::string, std::string>> transcript;
  std::string line;
  int turns = 0;
  while (turns < cfg.dm.max_turns && out << "user> " && std::getline(in, line)) {
    std::size_t s = line.find_first_not_of(" \t\r\n");
    if (s == std::string::npos) continue;
    std::size_t e = line.find_last_not_of(" \t\r\n");
    line = line.substr(s, e - s + 1);
    if (line == "quit" || line == "exit") break;
    DialogueAct user;
    try {
      user = parse_act(line);
    } catch (const std::exception& ex) {
      out << "parse error: " << ex.what() << "\n";
      continue;
    }
    if (user.type == ActType::Bye) break;
    NBestInput nbest{{NBestHypothesis{user, 1.0}}};
    std::vector<std::string> rejected;
    b = update_belief(b, nbest, last_system, model, &rejected);
    for (const auto& r : rejected) out << "ignored: " << r << "\n";
    auto features = share_features(feature_vector(b));
    auto candidates = candidate_actions(b, model, cfg.dm);
    TurnContext ctx = policy->prepare(features, domain);
    QEstimate q;
    SummaryAction action = policy->greedy_action(ctx, candidates, &q);
    DialogueAct master = summary_to_master(action, b, model);
    out << "system> " << render_act(master) << "   [" << render_action(action)
        << " q=" << fmt6(q.mean) << "]\n";
    transcript.emplace_back(render_act(user), render_act(master));
    last_system = master;
    ++turns;
    if (master.type == ActType::Bye) break;
  }
  if (cfg.record_transcripts) {
    std::ofstream tf(out_dir + "/chat_transcript.jsonl");
    if (!tf) throw std::runtime_error("cannot write " + out_dir + "/chat_transcript.jsonl");
    for (const auto& [u, sys] : transcript)
      tf << nlohmann::json{{"user", u}, {"system", sys}}.dump() << '\n';
  }
}

void run_experiment(const std::string& command, const ExperimentConfig& cfg,
                    const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  if (command == "train") {
    run_train(cfg, out_dir);
  } else if (command == "multiagent") {
    run_multiagent(cfg, out_dir);
  } else if (command == "committee") {
    ExperimentConfig c = cfg;
    if (c.strategies.empty()) c.strategies = {"MBCM"};
    for (const auto& s : c.strategies)
      require(s == "MBCM", "committee trains home-domain members; use multiagent for " + s);
    run_multiagent(c, out_dir);
  } else if (command == "adapt") {
    run_adapt(cfg, out_dir);
  } else if (command == "evaluate") {
    run_evaluate(cfg, out_dir);
  } else if (command == "entropy") {
    run_entropy(cfg, out_dir);
  } else if (command == "chat") {
    run_chat(cfg, out_dir, std::cin, std::cout);
  } else {
    throw std::invalid_argument("unknown command: " + command);
  }
}

}  // namespace gpdm
