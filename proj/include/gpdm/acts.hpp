#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gpdm {

// Dialogue acts are shared between the user simulator, the belief tracker and
// the dialogue manager. User-side acts carry slot/value; the system-side
// inform act carries an item list (name plus attribute values).
enum class ActType {
  Inform,
  Request,
  Confirm,
  Select,
  Affirm,
  Negate,
  Bye,
  Hello,
  Repeat,
  ReqAlts,
};

const char* to_string(ActType t);
ActType act_type_from_string(const std::string& s);

struct DialogueAct {
  ActType type = ActType::Hello;
  std::string slot;
  std::string value;
  // System inform payload and select alternatives live here.
  std::vector<std::pair<std::string, std::string>> items;

  bool operator==(const DialogueAct& o) const {
    return type == o.type && slot == o.slot && value == o.value && items == o.items;
  }
};

std::string render_act(const DialogueAct& act);

// Inverse of render_act for hand-typed input: "type", "type(slot)",
// "type(slot=value)" or "type(slot=value,key=value,...)". The first pair
// fills slot/value, later pairs land in items.
DialogueAct parse_act(const std::string& text);

struct NBestHypothesis {
  DialogueAct act;
  double confidence = 0.0;
};

// Confidence-scored hypothesis list. Confidences are positive and sum to at
// most 1; residual mass stands for "no observation".
struct NBestInput {
  std::vector<NBestHypothesis> hypotheses;

  void validate() const {
    if (hypotheses.empty()) throw std::invalid_argument("NBestInput: empty hypothesis list");
    double total = 0.0;
    for (const auto& h : hypotheses) {
      if (h.confidence <= 0.0) throw std::invalid_argument("NBestInput: non-positive confidence");
      total += h.confidence;
    }
    if (total > 1.0 + 1e-9) throw std::invalid_argument("NBestInput: confidence mass exceeds 1");
  }
};

// Summary-space actions the policy chooses between. Slot-dependent kinds are
// restricted to requestable slots. Terminal is reserved for episode anchors
// in training traces and never appears in a candidate list.
enum class SummaryKind {
  Request,
  Confirm,
  Select,
  Inform,
  Repeat,
  Bye,
  Terminal,
};

const char* to_string(SummaryKind k);
SummaryKind summary_kind_from_string(const std::string& s);

struct SummaryAction {
  SummaryKind kind = SummaryKind::Inform;
  std::string slot;  // empty for slot-independent kinds

  bool operator==(const SummaryAction& o) const { return kind == o.kind && slot == o.slot; }
  bool operator<(const SummaryAction& o) const {
    if (kind != o.kind) return kind < o.kind;
    return slot < o.slot;
  }
};

std::string render_action(const SummaryAction& a);

}  // namespace gpdm
