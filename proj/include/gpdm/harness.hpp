#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gpdm/agents.hpp"
#include "gpdm/committee.hpp"
#include "gpdm/dm.hpp"
#include "gpdm/gp.hpp"
#include "gpdm/ontology.hpp"
#include "gpdm/simuser.hpp"
#include "gpdm/util.hpp"

namespace gpdm {

// One experiment description, normally read from a JSON file. Unknown keys
// are rejected so typos fail loudly. Checkpoints count the dialogues the
// evaluated learner itself has consumed: per-policy counts for INDOM/GOLD
// and the adaptation arms, pooled counts for GEN and committees.
struct ExperimentConfig {
  std::vector<std::string> domains;
  std::vector<std::string> strategies;
  std::vector<int> checkpoints;
  int eval_dialogues = 500;
  std::vector<std::uint64_t> seeds{1};
  GPHyper hyper;
  ErrorModel error;
  DMConfig dm;
  double goal_weight = 1.0;
  double history_weight = 1.0;
  std::string kernel_mode = "auto";
  std::vector<std::string> member_domains;  // committee members when distinct from domains
  std::string snapshot;                     // input snapshot for adapt/evaluate/chat
  std::string domain;                       // adaptation target / chat domain
  std::map<std::string, std::pair<std::string, std::string>> domain_files;
  bool record_transcripts = false;

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Domain models by name, loaded from domain_files entries or the builtin
// catalog. Addresses stay stable for the set's lifetime.
struct ModelSet {
  std::vector<std::string> names;
  std::map<std::string, DomainModel> by_name;

  const DomainModel& at(const std::string& name) const;
  std::vector<const DomainModel*> ordered(const std::vector<std::string>& which) const;
};

ModelSet load_models(const ExperimentConfig& cfg, const std::vector<std::string>& names);

struct EvalRow {
  double reward = 0.0;
  double success = 0.0;  // 0/1 per dialogue
  double turns = 0.0;
};

struct EvalSummary {
  SummaryStat reward;
  SummaryStat success;
  SummaryStat turns;
};

EvalSummary summarize_rows(const std::vector<EvalRow>& rows);

// Per-dialogue rng streams depend only on (seed, domain, index), so
// evaluations are comparable across actors and checkpoints and stay
// deterministic under any thread count.
std::uint64_t train_stream_seed(std::uint64_t seed, const std::string& domain, int index);
std::uint64_t eval_stream_seed(std::uint64_t seed, const std::string& domain, int index);

using ActorFactory = std::function<std::unique_ptr<DialogueActor>()>;

// n greedy dialogues, one fresh actor per dialogue, parallelized. thompson
// switches action selection to posterior sampling (still without learning),
// the right baseline for untrained policies whose greedy choice is constant.
std::vector<EvalRow> evaluate_dialogues(const ActorFactory& make_actor, const DomainModel& model,
                                        int n, std::uint64_t seed, const DMConfig& dm,
                                        const ErrorModel& em, bool thompson = false);
EvalSummary evaluate_policy(GPPolicy& policy, const DomainModel& model, int n,
                            std::uint64_t seed, const DMConfig& dm, const ErrorModel& em);
EvalSummary evaluate_committee(PolicyCommittee& committee, const DomainModel& model, int n,
                               std::uint64_t seed, const DMConfig& dm, const ErrorModel& em);

// One training dialogue on its own rng stream: Thompson exploration, then the
// finished episode is fed back through the actor.
Episode train_dialogue(DialogueActor& actor, const DomainModel& model, const DMConfig& dm,
                       const ErrorModel& em, std::uint64_t stream_seed);

struct ResultRow {
  std::string strategy;
  std::string domain;
  int train_dialogues = 0;
  std::uint64_t seed = 0;
  EvalSummary stats;
};

// Rows sorted by strategy order, then domain order, checkpoint, seed order.
void sort_rows(std::vector<ResultRow>& rows, const std::vector<std::string>& strategy_order,
               const std::vector<std::string>& domain_order,
               const std::vector<std::uint64_t>& seed_order);
void write_results_csv(const std::string& path, const std::vector<ResultRow>& rows);

struct CurvePoint {
  std::string strategy;
  std::uint64_t seed = 0;
  std::string domain;
  int index = 0;  // 1-based within (strategy, seed, domain)
  double reward = 0.0;
};

// train_curve.csv for a single strategy, train_curve_<strategy>.csv each
// otherwise; the moving average runs over a 100-dialogue window per
// (seed, domain) group.
void write_train_curves(const std::string& out_dir, const std::vector<CurvePoint>& points,
                        const std::vector<std::string>& strategies, std::size_t window = 100);

std::string snapshot_filename(const std::string& strategy, const std::string& label, int ckpt,
                              std::uint64_t seed);

void save_committee(const PolicyCommittee& committee, const std::string& out_dir,
                    const std::string& base_name);
PolicyCommittee load_committee(const std::string& manifest_path, const ModelSet& models);

// Training runs write results.csv, training curves, and snapshots into
// out_dir and return the result rows.
std::vector<ResultRow> run_train(const ExperimentConfig& cfg, const std::string& out_dir);
std::vector<ResultRow> run_multiagent(const ExperimentConfig& cfg, const std::string& out_dir);
std::vector<ResultRow> run_adapt(const ExperimentConfig& cfg, const std::string& out_dir);
std::vector<ResultRow> run_evaluate(const ExperimentConfig& cfg, const std::string& out_dir);
void run_entropy(const ExperimentConfig& cfg, const std::string& out_dir);
void run_chat(const ExperimentConfig& cfg, const std::string& out_dir, std::istream& in,
              std::ostream& out);

// Dispatch by CLI subcommand name; creates out_dir. "committee" restricts
// multiagent training to the home-domain strategy.
void run_experiment(const std::string& command, const ExperimentConfig& cfg,
                    const std::string& out_dir);

}  // namespace gpdm
