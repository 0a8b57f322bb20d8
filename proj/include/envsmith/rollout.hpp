#pragma once

#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "envsmith/client.hpp"
#include "envsmith/taskgen.hpp"

namespace envsmith {

/// A user turn consisting of exactly this token ends the episode. Inside a
/// longer message it is ordinary text.
inline constexpr std::string_view kStopToken = "###STOP###";

inline bool is_stop_message(const std::string& message) {
  return detail::trim_copy(message) == kStopToken;
}

// ---------------------------------------------------------------------------
// Transcript structure

struct AgentAction {
  enum class Kind { ToolCall, AskUser };
  Kind kind = Kind::AskUser;
  std::string tool;
  ArgMap args;
  std::string message;

  static AgentAction call(std::string tool, ArgMap args) {
    AgentAction a;
    a.kind = Kind::ToolCall;
    a.tool = std::move(tool);
    a.args = std::move(args);
    return a;
  }
  static AgentAction ask(std::string message) {
    AgentAction a;
    a.kind = Kind::AskUser;
    a.message = std::move(message);
    return a;
  }
};

struct Observation {
  enum class Kind { ToolResult, UserMessage, Termination };
  Kind kind = Kind::Termination;
  ToolCallResult result;
  std::string message;
};

struct TrajectoryStep {
  AgentAction action;
  Observation observation;
};

/// One complete episode: the user's question, the alternating actions and
/// observations, and the outcome. Holds state hashes, never state bodies.
struct Trajectory {
  std::string traj_id;
  std::string env_id;
  std::string task_id;
  size_t rollout_index = 0;
  std::string question;
  std::vector<TrajectoryStep> steps;
  double reward = 0.0;
  bool truncated = false;
  bool meu_checked = false;
  bool meu_ok = true;
  std::string initial_hash;
  std::string final_hash;

  size_t tool_calls() const {
    size_t n = 0;
    for (const auto& s : steps)
      if (s.action.kind == AgentAction::Kind::ToolCall) ++n;
    return n;
  }

  json to_json() const;
  static Trajectory from_json(const json& j);
};

namespace detail {

inline json args_to_json(const ArgMap& args) {
  json out = json::array();
  for (const auto& [name, v] : args) {
    json aj = json::object();
    aj["param"] = name;
    aj["kind"] = TaskSample::scalar_kind_tag(v);
    aj["value"] = json::parse(canonical_json(v));
    out.push_back(std::move(aj));
  }
  return out;
}

inline ArgMap args_from_json(const json& j) {
  ArgMap out;
  for (const auto& aj : j)
    out.emplace(aj.value("param", ""),
                TaskSample::scalar_from_tagged(aj.value("kind", "text"), aj.at("value")));
  return out;
}

}  // namespace detail

inline json Trajectory::to_json() const {
  json j = json::object();
  j["traj_id"] = traj_id;
  j["env_id"] = env_id;
  j["task_id"] = task_id;
  j["rollout_index"] = rollout_index;
  j["question"] = question;
  j["reward"] = reward;
  j["truncated"] = truncated;
  j["meu_checked"] = meu_checked;
  j["meu_ok"] = meu_ok;
  j["initial_hash"] = initial_hash;
  j["final_hash"] = final_hash;
  json ss = json::array();
  for (const auto& s : steps) {
    json sj = json::object();
    json act = json::object();
    if (s.action.kind == AgentAction::Kind::ToolCall) {
      act["kind"] = "tool_call";
      act["tool"] = s.action.tool;
      act["args"] = detail::args_to_json(s.action.args);
    } else {
      act["kind"] = "ask_user";
      act["message"] = s.action.message;
    }
    sj["action"] = std::move(act);
    json obs = json::object();
    switch (s.observation.kind) {
      case Observation::Kind::ToolResult:
        obs["kind"] = "tool_result";
        obs["result"] = s.observation.result.to_json();
        break;
      case Observation::Kind::UserMessage:
        obs["kind"] = "user_message";
        obs["message"] = s.observation.message;
        break;
      case Observation::Kind::Termination:
        obs["kind"] = "termination";
        break;
    }
    sj["observation"] = std::move(obs);
    ss.push_back(std::move(sj));
  }
  j["steps"] = std::move(ss);
  return j;
}

inline Trajectory Trajectory::from_json(const json& j) {
  Trajectory t;
  t.traj_id = j.value("traj_id", "");
  t.env_id = j.value("env_id", "");
  t.task_id = j.value("task_id", "");
  t.rollout_index = j.value("rollout_index", size_t(0));
  t.question = j.value("question", "");
  t.reward = j.value("reward", 0.0);
  t.truncated = j.value("truncated", false);
  t.meu_checked = j.value("meu_checked", false);
  t.meu_ok = j.value("meu_ok", true);
  t.initial_hash = j.value("initial_hash", "");
  t.final_hash = j.value("final_hash", "");
  for (const auto& sj : j.value("steps", json::array())) {
    TrajectoryStep s;
    const json& act = sj.at("action");
    if (act.value("kind", "") == "tool_call") {
      s.action.kind = AgentAction::Kind::ToolCall;
      s.action.tool = act.value("tool", "");
      s.action.args = detail::args_from_json(act.value("args", json::array()));
    } else {
      s.action.kind = AgentAction::Kind::AskUser;
      s.action.message = act.value("message", "");
    }
    const json& obs = sj.at("observation");
    std::string ok = obs.value("kind", "termination");
    if (ok == "tool_result") {
      s.observation.kind = Observation::Kind::ToolResult;
      s.observation.result = ToolCallResult::from_json(obs.at("result"));
    } else if (ok == "user_message") {
      s.observation.kind = Observation::Kind::UserMessage;
      s.observation.message = obs.value("message", "");
    } else {
      s.observation.kind = Observation::Kind::Termination;
    }
    t.steps.push_back(std::move(s));
  }
  return t;
}

/// Structural and outcome invariants every finished episode must satisfy.
/// Returns human-readable violations; empty means sound.
inline std::vector<std::string> validate_trajectory(const Trajectory& t) {
  std::vector<std::string> out;
  if (t.question.empty()) out.push_back("episode does not start with a user question");
  if (t.reward != 0.0 && t.reward != 1.0) out.push_back("reward is not binary");
  if (t.reward == 1.0 && t.truncated) out.push_back("truncated episode cannot earn reward");
  for (size_t i = 0; i < t.steps.size(); ++i) {
    const TrajectoryStep& s = t.steps[i];
    bool last = i + 1 == t.steps.size();
    if (s.observation.kind == Observation::Kind::Termination && !last)
      out.push_back("termination before the final step");
    if (s.action.kind == AgentAction::Kind::ToolCall &&
        s.observation.kind != Observation::Kind::ToolResult)
      out.push_back("tool call answered by a non-tool observation");
    if (s.action.kind == AgentAction::Kind::AskUser &&
        s.observation.kind == Observation::Kind::ToolResult)
      out.push_back("user turn answered by a tool result");
  }
  bool terminated = !t.steps.empty() &&
                    t.steps.back().observation.kind == Observation::Kind::Termination;
  if (t.truncated && terminated) out.push_back("truncated episode ends in termination");
  if (!t.truncated && !terminated) out.push_back("untruncated episode lacks termination");
  return out;
}

// ---------------------------------------------------------------------------
// Context rendering

enum class ContextMode {
  Full,          // everything, tool results included
  Conversation,  // user and agent messages only (what the simulated user sees)
};

/// Renders an episode as a line-oriented transcript. Messages are JSON
/// string literals so the transcript is one physical line per turn and
/// parses back exactly.
inline std::string render_context(const Trajectory& t, ContextMode mode = ContextMode::Full) {
  std::string out;
  out += "[user] " + json(t.question).dump() + "\n";
  for (const auto& s : t.steps) {
    if (s.action.kind == AgentAction::Kind::ToolCall) {
      if (mode == ContextMode::Full) {
        json call = json::object();
        call["tool"] = s.action.tool;
        call["args"] = detail::args_to_json(s.action.args);
        out += "[agent] tool " + call.dump() + "\n";
      }
    } else {
      out += "[agent] ask " + json(s.action.message).dump() + "\n";
    }
    switch (s.observation.kind) {
      case Observation::Kind::ToolResult:
        if (mode == ContextMode::Full)
          out += "[tool] " + s.observation.result.to_json().dump() + "\n";
        break;
      case Observation::Kind::UserMessage:
        out += "[user] " + json(s.observation.message).dump() + "\n";
        break;
      case Observation::Kind::Termination:
        out += "[end]\n";
        break;
    }
  }
  return out;
}

/// Parses a full-mode transcript back into an episode skeleton (question
/// and steps; no ids, outcome or hashes). Throws SchemaViolation on
/// malformed lines.
inline Trajectory parse_context(const std::string& text) {
  Trajectory t;
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t nl = text.find('\n', start);
    if (nl == std::string::npos) nl = text.size();
    if (nl > start) lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }
  if (lines.empty() || lines[0].rfind("[user] ", 0) != 0)
    throw SchemaViolation("transcript must start with the user question");
  t.question = json::parse(lines[0].substr(7)).get<std::string>();
  size_t i = 1;
  while (i < lines.size()) {
    const std::string& line = lines[i];
    TrajectoryStep s;
    if (line.rfind("[agent] tool ", 0) == 0) {
      json call = json::parse(line.substr(13));
      s.action.kind = AgentAction::Kind::ToolCall;
      s.action.tool = call.value("tool", "");
      s.action.args = detail::args_from_json(call.value("args", json::array()));
    } else if (line.rfind("[agent] ask ", 0) == 0) {
      s.action.kind = AgentAction::Kind::AskUser;
      s.action.message = json::parse(line.substr(12)).get<std::string>();
    } else {
      throw SchemaViolation("expected an agent turn, got: " + line);
    }
    ++i;
    if (i >= lines.size()) throw SchemaViolation("agent turn without an observation");
    const std::string& obs = lines[i];
    if (obs.rfind("[tool] ", 0) == 0) {
      s.observation.kind = Observation::Kind::ToolResult;
      s.observation.result = ToolCallResult::from_json(json::parse(obs.substr(7)));
    } else if (obs.rfind("[user] ", 0) == 0) {
      s.observation.kind = Observation::Kind::UserMessage;
      s.observation.message = json::parse(obs.substr(7)).get<std::string>();
    } else if (obs == "[end]") {
      s.observation.kind = Observation::Kind::Termination;
    } else {
      throw SchemaViolation("expected an observation, got: " + obs);
    }
    ++i;
    t.steps.push_back(std::move(s));
  }
  return t;
}

// ---------------------------------------------------------------------------
// Actors

class Agent {
 public:
  virtual ~Agent() = default;
  virtual AgentAction act(const Trajectory& so_far, const Environment& env) = 0;
};

class UserSim {
 public:
  virtual ~UserSim() = default;
  /// Answers the agent's pending question given the conversation so far.
  virtual std::string reply(const Trajectory& so_far, const std::string& question) = 0;
};

using AgentFactory =
    std::function<std::unique_ptr<Agent>(const TaskSample&, uint64_t rollout_seed)>;
using UserFactory =
    std::function<std::unique_ptr<UserSim>(const TaskSample&, uint64_t rollout_seed)>;

/// Replays a task's recorded tool calls in order, then asks whether
/// anything is left. Perturbations turn a faithful replay into the two
/// canonical failure shapes: dropping the last state-changing call, or
/// never calling tools at all.
class ScriptedAgent : public Agent {
 public:
  enum class Mode { Faithful, SkipLastWrite, AskLoop };

  ScriptedAgent(const TaskSample& task, Mode mode) : mode_(mode) {
    if (mode_ == Mode::AskLoop) return;
    for (const auto& nb : task.bindings) {
      if (nb.tool.empty()) continue;
      ArgMap args;
      for (const auto& ab : nb.args) args.emplace(ab.param, ab.value);
      calls_.push_back(AgentAction::call(nb.tool, std::move(args)));
    }
  }

  /// Trims the plan for SkipLastWrite once tool specs are visible.
  void drop_last_write(const Environment& env) {
    if (mode_ != Mode::SkipLastWrite || dropped_) return;
    dropped_ = true;
    for (size_t i = calls_.size(); i-- > 0;) {
      const ToolSpec* t = env.find_tool(calls_[i].tool);
      if (t && !t->pure_read()) {
        calls_.erase(calls_.begin() + i);
        return;
      }
    }
  }

  AgentAction act(const Trajectory& so_far, const Environment& env) override {
    drop_last_write(env);
    if (mode_ == Mode::AskLoop) return AgentAction::ask("Could you give me more detail?");
    size_t done = so_far.tool_calls();
    if (done < calls_.size()) return calls_[done];
    return AgentAction::ask("That is done. Anything else?");
  }

 private:
  Mode mode_;
  std::vector<AgentAction> calls_;
  bool dropped_ = false;
};

/// Replies with a canned nudge until its patience runs out, then stops the
/// episode. Patience of zero stops at the first question.
class ScriptedUser : public UserSim {
 public:
  explicit ScriptedUser(size_t patience = 0) : patience_(patience) {}

  std::string reply(const Trajectory&, const std::string&) override {
    if (asked_ >= patience_) return std::string(kStopToken);
    ++asked_;
    return "Please carry on with the request.";
  }

 private:
  size_t patience_;
  size_t asked_ = 0;
};

/// Generation-backed agent. The transcript is rendered in full; the answer
/// must be a JSON action. Unparseable answers become user-directed chatter,
/// which is how a real policy's malformed turn plays out.
class ClientAgent : public Agent {
 public:
  ClientAgent(GenClient& client, std::string system_prompt)
      : client_(client), system_prompt_(std::move(system_prompt)) {}

  AgentAction act(const Trajectory& so_far, const Environment& env) override {
    GenRequest req;
    req.stage = "agent_step";
    req.payload = json::object();
    req.payload["transcript"] = render_context(so_far, ContextMode::Full);
    req.payload["tools"] = json::parse(json(tools_brief(env)).dump());
    req.prompt = system_prompt_ + "\n" + render_context(so_far, ContextMode::Full) +
                 "\nAnswer with one JSON object: {\"action\": \"tool_call\", \"tool\": ..., "
                 "\"args\": {param: value}} or {\"action\": \"ask_user\", \"message\": ...}.";
    std::string text = client_.generate(req).text;
    try {
      json j = json::parse(text);
      if (j.value("action", "") == "tool_call") {
        ArgMap args;
        const ToolSpec* tool = env.find_tool(j.value("tool", ""));
        json raw_args = j.value("args", json::object());
        for (const auto& [k, v] : raw_args.items()) {
          const ParamSpec* p = tool ? tool->find_param(k) : nullptr;
          ValueKind kind = p ? p->kind : ValueKind::Text;
          auto dv = detail::decode_literal(kind, v);
          args.emplace(k, dv ? *dv : value_from_canonical(v));
        }
        return AgentAction::call(j.value("tool", ""), std::move(args));
      }
      if (j.value("action", "") == "ask_user") return AgentAction::ask(j.value("message", ""));
    } catch (const json::parse_error&) {
    }
    return AgentAction::ask(detail::trim_copy(text));
  }

 private:
  static std::vector<std::string> tools_brief(const Environment& env) {
    std::vector<std::string> out;
    for (const auto& t : env.tools) out.push_back(t.name);
    return out;
  }

  GenClient& client_;
  std::string system_prompt_;
};

/// Generation-backed simulated user. The prompt template's
/// {instruction_display} placeholder receives the task question; the model
/// sees only the conversation, never raw tool traffic.
class ClientUser : public UserSim {
 public:
  ClientUser(GenClient& client, std::string prompt_template, std::string instruction)
      : client_(client), template_(std::move(prompt_template)),
        instruction_(std::move(instruction)) {}

  std::string reply(const Trajectory& so_far, const std::string& question) override {
    std::string prompt = template_;
    const std::string key = "{instruction_display}";
    if (auto at = prompt.find(key); at != std::string::npos)
      prompt.replace(at, key.size(), instruction_);
    std::string conversation =
        render_context(so_far, ContextMode::Conversation) + "[agent] ask " + json(question).dump();
    GenRequest req;
    req.stage = "user_step";
    req.payload = json::object();
    req.payload["instruction"] = instruction_;
    req.payload["conversation"] = conversation;
    req.prompt = prompt + "\n\nConversation so far:\n" + conversation;
    return client_.generate(req).text;
  }

 private:
  GenClient& client_;
  std::string template_;
  std::string instruction_;
};

// ---------------------------------------------------------------------------
// The episode loop

struct RolloutOptions {
  size_t max_turns = 40;  // agent actions before truncation
};

/// Runs one episode of a task: restore the initial state, alternate agent
/// actions with observations until the user stops the conversation or the
/// turn budget runs out, then score by exact comparison of the final state
/// with the golden one.
inline Trajectory run_rollout(const Environment& env, const TaskSample& task, Agent& agent,
                              UserSim& user, const RolloutOptions& opts = {}) {
  Trajectory t;
  t.env_id = task.env_id;
  t.task_id = task.task_id;
  t.question = task.question_final.empty() ? task.question : task.question_final;
  t.initial_hash = task.initial.doc_hash;

  StateDoc doc = restore_snapshot(env.schema, task.initial.payload);
  bool terminated = false;
  for (size_t turn = 0; turn < opts.max_turns && !terminated; ++turn) {
    TrajectoryStep step;
    step.action = agent.act(t, env);
    if (step.action.kind == AgentAction::Kind::ToolCall) {
      const ToolSpec* tool = env.find_tool(step.action.tool);
      if (!tool) {
        step.observation.kind = Observation::Kind::ToolResult;
        step.observation.result.ok = false;
        step.observation.result.error_code = "unknown_tool";
        step.observation.result.error_detail = "no tool named '" + step.action.tool + "'";
        step.observation.result.state_after_hash = doc.doc_hash();
      } else {
        ExecOutcome eo = execute_tool(*tool, step.action.args, std::move(doc));
        doc = std::move(eo.doc);
        step.observation.kind = Observation::Kind::ToolResult;
        step.observation.result = std::move(eo.result);
      }
    } else {
      std::string msg = user.reply(t, step.action.message);
      if (is_stop_message(msg)) {
        step.observation.kind = Observation::Kind::Termination;
        terminated = true;
      } else {
        step.observation.kind = Observation::Kind::UserMessage;
        step.observation.message = msg;
      }
    }
    t.steps.push_back(std::move(step));
  }
  t.truncated = !terminated;
  t.final_hash = doc.doc_hash();
  t.reward = (!t.truncated && t.final_hash == task.golden.doc_hash) ? 1.0 : 0.0;
  return t;
}

/// Runs a group of rollouts for one task, seeding each actor pair from the
/// group seed and the rollout index.
inline std::vector<Trajectory> run_group(const Environment& env, const TaskSample& task,
                                         size_t group_size, const AgentFactory& make_agent,
                                         const UserFactory& make_user, uint64_t seed,
                                         const RolloutOptions& opts = {}) {
  std::vector<Trajectory> out;
  out.reserve(group_size);
  for (size_t i = 0; i < group_size; ++i) {
    uint64_t rollout_seed = fnv1a64(task.task_id + ":" + std::to_string(i), seed);
    auto agent = make_agent(task, rollout_seed);
    auto user = make_user(task, rollout_seed);
    Trajectory t = run_rollout(env, task, *agent, *user, opts);
    t.rollout_index = i;
    t.traj_id = task.task_id + "_r" + std::to_string(i);
    out.push_back(std::move(t));
  }
  return out;
}

/// Deterministic mixture of scripted behaviors for offline pipelines: most
/// rollouts replay faithfully, the rest fail in one of the two canonical
/// ways, so groups show reward variance without any generation backend.
inline AgentFactory scripted_mixture(double faithful_prob = 0.625) {
  return [faithful_prob](const TaskSample& task, uint64_t seed) -> std::unique_ptr<Agent> {
    std::mt19937_64 rng(seed);
    double roll = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    ScriptedAgent::Mode mode;
    if (roll < faithful_prob)
      mode = ScriptedAgent::Mode::Faithful;
    else if (roll < faithful_prob + (1.0 - faithful_prob) / 2.0)
      mode = ScriptedAgent::Mode::SkipLastWrite;
    else
      mode = ScriptedAgent::Mode::AskLoop;
    return std::make_unique<ScriptedAgent>(task, mode);
  };
}

inline UserFactory scripted_user_factory(size_t patience = 1) {
  return [patience](const TaskSample&, uint64_t) -> std::unique_ptr<UserSim> {
    return std::make_unique<ScriptedUser>(patience);
  };
}

}  // namespace envsmith
