#include "gpdm/acts.hpp"

namespace gpdm {

const char* to_string(ActType t) {
  switch (t) {
    case ActType::Inform: return "inform";
    case ActType::Request: return "request";
    case ActType::Confirm: return "confirm";
    case ActType::Select: return "select";
    case ActType::Affirm: return "affirm";
    case ActType::Negate: return "negate";
    case ActType::Bye: return "bye";
    case ActType::Hello: return "hello";
    case ActType::Repeat: return "repeat";
    case ActType::ReqAlts: return "reqalts";
  }
  throw std::logic_error("unreachable act type");
}

ActType act_type_from_string(const std::string& s) {
  if (s == "inform") return ActType::Inform;
  if (s == "request") return ActType::Request;
  if (s == "confirm") return ActType::Confirm;
  if (s == "select") return ActType::Select;
  if (s == "affirm") return ActType::Affirm;
  if (s == "negate") return ActType::Negate;
  if (s == "bye") return ActType::Bye;
  if (s == "hello") return ActType::Hello;
  if (s == "repeat") return ActType::Repeat;
  if (s == "reqalts") return ActType::ReqAlts;
  throw std::invalid_argument("unknown act type: " + s);
}

std::string render_act(const DialogueAct& act) {
  std::string out = to_string(act.type);
  out += '(';
  bool first = true;
  auto sep = [&] {
    if (!first) out += ',';
    first = false;
  };
  if (!act.slot.empty()) {
    sep();
    out += act.slot;
    if (!act.value.empty()) {
      out += '=';
      out += act.value;
    }
  } else if (!act.value.empty()) {
    sep();
    out += act.value;
  }
  for (const auto& [k, v] : act.items) {
    sep();
    out += k;
    if (!v.empty()) {
      out += '=';
      out += v;
    }
  }
  out += ')';
  return out;
}

namespace {

std::string trimmed(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

DialogueAct parse_act(const std::string& text) {
  std::string s = trimmed(text);
  DialogueAct act;
  std::size_t open = s.find('(');
  if (open == std::string::npos) {
    act.type = act_type_from_string(s);
    return act;
  }
  if (s.back() != ')') throw std::invalid_argument("act is missing closing parenthesis: " + text);
  act.type = act_type_from_string(trimmed(s.substr(0, open)));
  std::string args = s.substr(open + 1, s.size() - open - 2);
  bool first = true;
  std::size_t at = 0;
  while (at <= args.size()) {
    std::size_t comma = args.find(',', at);
    std::string tok = trimmed(comma == std::string::npos ? args.substr(at)
                                                         : args.substr(at, comma - at));
    at = comma == std::string::npos ? args.size() + 1 : comma + 1;
    if (tok.empty()) continue;
    std::size_t eq = tok.find('=');
    std::string key = trimmed(eq == std::string::npos ? tok : tok.substr(0, eq));
    std::string val = eq == std::string::npos ? "" : trimmed(tok.substr(eq + 1));
    if (first) {
      act.slot = key;
      act.value = val;
      first = false;
    } else {
      act.items.emplace_back(key, val);
    }
  }
  return act;
}

const char* to_string(SummaryKind k) {
  switch (k) {
    case SummaryKind::Request: return "request";
    case SummaryKind::Confirm: return "confirm";
    case SummaryKind::Select: return "select";
    case SummaryKind::Inform: return "inform";
    case SummaryKind::Repeat: return "repeat";
    case SummaryKind::Bye: return "bye";
    case SummaryKind::Terminal: return "terminal";
  }
  throw std::logic_error("unreachable summary kind");
}

SummaryKind summary_kind_from_string(const std::string& s) {
  if (s == "request") return SummaryKind::Request;
  if (s == "confirm") return SummaryKind::Confirm;
  if (s == "select") return SummaryKind::Select;
  if (s == "inform") return SummaryKind::Inform;
  if (s == "repeat") return SummaryKind::Repeat;
  if (s == "bye") return SummaryKind::Bye;
  if (s == "terminal") return SummaryKind::Terminal;
  throw std::invalid_argument("unknown summary kind: " + s);
}

std::string render_action(const SummaryAction& a) {
  std::string out = to_string(a.kind);
  if (!a.slot.empty()) {
    out += '(';
    out += a.slot;
    out += ')';
  }
  return out;
}

}  // namespace gpdm
