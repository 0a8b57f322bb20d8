#include "catch2/catch_amalgamated.hpp"
#include "envsmith.hpp"
#include "support.hpp"

using namespace envsmith;
using support::minienv;

namespace {

TaskSample make_sample_task(const Environment& env, const std::vector<std::string>& tools,
                            uint64_t seed = 9) {
  RuleBasedGenerator gen;
  StateDoc doc = seed_environment(env.schema, 3, seed);
  TaskGraph tg = build_task_graph("tg_roll", tools, env, &gen, 0);
  BindOutcome out = bind_and_execute(tg, env, doc, gen);
  REQUIRE(out.ok);
  TaskSample t;
  t.task_id = "task_roll";
  t.env_id = env.schema->id;
  t.taskgraph_id = tg.id;
  t.seed = seed;
  t.question = "Find the user and settle the deposit.";
  t.bindings = out.bindings;
  t.initial = make_snapshot(doc);
  t.golden = make_snapshot(out.final_doc);
  t.env_digest = env.manifest_digest;
  return t;
}

}  // namespace

TEST_CASE("stop token matches whole messages only") {
  CHECK(is_stop_message("###STOP###"));
  CHECK(is_stop_message("  ###STOP###\n"));
  CHECK_FALSE(is_stop_message("well ###STOP### then"));
  CHECK_FALSE(is_stop_message("###STOP"));
  CHECK_FALSE(is_stop_message(""));
}

TEST_CASE("transcripts render one line per turn and parse back") {
  Trajectory t;
  t.question = "Deposit \"5.00\" for ann,\nplease.";
  TrajectoryStep call;
  call.action = AgentAction::call(
      "deposit", ArgMap{{"user_id", Value::text("ann")},
                        {"amount", Value::decimal(Decimal(BigInt(500), 2))}});
  call.observation.kind = Observation::Kind::ToolResult;
  call.observation.result.ok = true;
  call.observation.result.state_after_hash = "deadbeef";
  t.steps.push_back(call);
  TrajectoryStep ask;
  ask.action = AgentAction::ask("Anything else?");
  ask.observation.kind = Observation::Kind::UserMessage;
  ask.observation.message = "No,\nthanks.";
  t.steps.push_back(ask);
  TrajectoryStep stop;
  stop.action = AgentAction::ask("Closing now.");
  stop.observation.kind = Observation::Kind::Termination;
  t.steps.push_back(stop);

  std::string full = render_context(t, ContextMode::Full);
  // Multi-line messages must stay on one physical line each.
  CHECK(std::count(full.begin(), full.end(), '\n') == 7);
  CHECK(full.find("[agent] tool ") != std::string::npos);
  CHECK(full.find("[tool] ") != std::string::npos);
  CHECK(full.find("[end]") != std::string::npos);

  Trajectory back = parse_context(full);
  CHECK(back.question == t.question);
  REQUIRE(back.steps.size() == 3);
  CHECK(back.steps[0].action.kind == AgentAction::Kind::ToolCall);
  CHECK(back.steps[0].action.tool == "deposit");
  CHECK(back.steps[0].action.args.at("amount").as_decimal().str() == "5.00");
  CHECK(back.steps[1].observation.message == "No,\nthanks.");
  CHECK(back.steps[2].observation.kind == Observation::Kind::Termination);
  // Round trip is exact.
  CHECK(render_context(back, ContextMode::Full) == full);

  std::string conv = render_context(t, ContextMode::Conversation);
  CHECK(conv.find("[agent] tool") == std::string::npos);
  CHECK(conv.find("[tool]") == std::string::npos);
  CHECK(conv.find("Anything else?") != std::string::npos);
}

TEST_CASE("malformed transcripts are rejected") {
  CHECK_THROWS_AS(parse_context(""), SchemaViolation);
  CHECK_THROWS_AS(parse_context("[agent] ask \"hi\"\n"), SchemaViolation);
  CHECK_THROWS_AS(parse_context("[user] \"q\"\n[agent] ask \"hi\"\n"), SchemaViolation);
  CHECK_THROWS_AS(parse_context("[user] \"q\"\n[user] \"again\"\n"), SchemaViolation);
  CHECK_THROWS_AS(parse_context("[user] \"q\"\n[agent] ask \"hi\"\nnot a line\n"),
                  SchemaViolation);
}

TEST_CASE("episode validation flags each structural violation") {
  auto sound = [] {
    Trajectory t;
    t.question = "q";
    TrajectoryStep call;
    call.action = AgentAction::call("get_balance", {});
    call.observation.kind = Observation::Kind::ToolResult;
    t.steps.push_back(call);
    TrajectoryStep stop;
    stop.action = AgentAction::ask("done?");
    stop.observation.kind = Observation::Kind::Termination;
    t.steps.push_back(stop);
    t.reward = 1.0;
    t.truncated = false;
    return t;
  };
  CHECK(validate_trajectory(sound()).empty());

  auto has = [](const std::vector<std::string>& v, const std::string& needle) {
    for (const auto& s : v)
      if (s.find(needle) != std::string::npos) return true;
    return false;
  };

  Trajectory t = sound();
  t.question.clear();
  CHECK(has(validate_trajectory(t), "user question"));

  t = sound();
  t.reward = 0.5;
  CHECK(has(validate_trajectory(t), "binary"));

  t = sound();
  t.truncated = true;
  CHECK(has(validate_trajectory(t), "truncated"));

  t = sound();
  std::swap(t.steps[0], t.steps[1]);
  CHECK(has(validate_trajectory(t), "termination before the final step"));

  t = sound();
  t.steps[0].observation.kind = Observation::Kind::UserMessage;
  CHECK(has(validate_trajectory(t), "non-tool observation"));

  t = sound();
  t.steps[1].action = AgentAction::ask("still there?");
  t.steps[1].observation.kind = Observation::Kind::ToolResult;
  CHECK(has(validate_trajectory(t), "answered by a tool result"));

  t = sound();
  t.steps.pop_back();
  t.reward = 0.0;
  CHECK(has(validate_trajectory(t), "lacks termination"));

  t = sound();
  t.truncated = true;
  t.reward = 0.0;
  CHECK(has(validate_trajectory(t), "ends in termination"));
}

TEST_CASE("a faithful replay earns the reward, perturbed replays do not") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance", "deposit"});
  REQUIRE(task.initial.doc_hash != task.golden.doc_hash);

  ScriptedAgent faithful(task, ScriptedAgent::Mode::Faithful);
  ScriptedUser user0(0);
  Trajectory good = run_rollout(env, task, faithful, user0);
  CHECK(good.reward == 1.0);
  CHECK_FALSE(good.truncated);
  CHECK(good.tool_calls() == 3);
  CHECK(good.initial_hash == task.initial.doc_hash);
  CHECK(good.final_hash == task.golden.doc_hash);
  CHECK(validate_trajectory(good).empty());

  ScriptedAgent skipper(task, ScriptedAgent::Mode::SkipLastWrite);
  ScriptedUser user1(0);
  Trajectory skipped = run_rollout(env, task, skipper, user1);
  CHECK(skipped.reward == 0.0);
  CHECK_FALSE(skipped.truncated);
  CHECK(skipped.tool_calls() == 2);
  CHECK(skipped.final_hash != task.golden.doc_hash);

  ScriptedAgent idle(task, ScriptedAgent::Mode::AskLoop);
  ScriptedUser user2(1);
  Trajectory asked = run_rollout(env, task, idle, user2);
  CHECK(asked.reward == 0.0);
  CHECK(asked.tool_calls() == 0);
  CHECK_FALSE(asked.truncated);
  // One nudge, then the stop.
  REQUIRE(asked.steps.size() == 2);
  CHECK(asked.steps[0].observation.kind == Observation::Kind::UserMessage);
  CHECK(asked.steps[1].observation.kind == Observation::Kind::Termination);
}

TEST_CASE("the simulated user nudges until patience runs out") {
  ScriptedUser u(2);
  Trajectory empty;
  CHECK_FALSE(is_stop_message(u.reply(empty, "a?")));
  CHECK_FALSE(is_stop_message(u.reply(empty, "b?")));
  CHECK(is_stop_message(u.reply(empty, "c?")));
  CHECK(is_stop_message(u.reply(empty, "d?")));
}

TEST_CASE("running out of turns truncates and forfeits the reward") {
  Environment env = minienv();
  // A read-only plan: the golden state equals the initial state, so only the
  // truncation rule can deny the reward.
  TaskSample task = make_sample_task(env, {"find_user", "get_balance"});
  REQUIRE(task.initial.doc_hash == task.golden.doc_hash);

  ScriptedAgent agent(task, ScriptedAgent::Mode::Faithful);
  ScriptedUser user(0);
  RolloutOptions opts;
  opts.max_turns = 2;
  Trajectory t = run_rollout(env, task, agent, user, opts);
  CHECK(t.truncated);
  CHECK(t.final_hash == task.golden.doc_hash);
  CHECK(t.reward == 0.0);
  CHECK(validate_trajectory(t).empty());

  // With room to close the conversation the same episode scores.
  ScriptedAgent again(task, ScriptedAgent::Mode::Faithful);
  ScriptedUser user2(0);
  Trajectory full = run_rollout(env, task, again, user2);
  CHECK_FALSE(full.truncated);
  CHECK(full.reward == 1.0);
}

TEST_CASE("calling a tool that does not exist is an in-episode error") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance"});

  struct Rogue : Agent {
    AgentAction act(const Trajectory& so_far, const Environment&) override {
      if (so_far.steps.empty()) return AgentAction::call("warp_reality", {});
      return AgentAction::ask("done?");
    }
  } rogue;
  ScriptedUser user(0);
  Trajectory t = run_rollout(env, task, rogue, user);
  REQUIRE(t.steps.size() == 2);
  const ToolCallResult& r = t.steps[0].observation.result;
  CHECK_FALSE(r.ok);
  CHECK(r.error_code == "unknown_tool");
  CHECK(r.state_after_hash == task.initial.doc_hash);
  CHECK(t.reward == 1.0);  // read-only plan, state untouched
  CHECK(validate_trajectory(t).empty());
}

TEST_CASE("groups are deterministic in the seed and label their members") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance", "deposit"});

  auto run = [&](uint64_t seed) {
    return run_group(env, task, 8, scripted_mixture(0.5), scripted_user_factory(1), seed);
  };
  std::vector<Trajectory> a = run(7);
  std::vector<Trajectory> b = run(7);
  std::vector<Trajectory> c = run(8);
  REQUIRE(a.size() == 8);
  for (size_t i = 0; i < 8; ++i) {
    CHECK(a[i].traj_id == task.task_id + "_r" + std::to_string(i));
    CHECK(a[i].rollout_index == i);
    CHECK(a[i].to_json().dump() == b[i].to_json().dump());
    CHECK(validate_trajectory(a[i]).empty());
  }
  auto rewards = [](const std::vector<Trajectory>& v) {
    std::string s;
    for (const auto& t : v) s += t.reward == 1.0 ? '1' : '0';
    return s;
  };
  CHECK(rewards(a) == rewards(b));
  // A different seed draws a different behavior mixture.
  CHECK(rewards(a) != rewards(c));
}

TEST_CASE("episodes serialize and parse without loss") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance", "deposit"});
  auto group = run_group(env, task, 4, scripted_mixture(0.5), scripted_user_factory(1), 3);

  for (const auto& t : group) {
    json j = t.to_json();
    Trajectory back = Trajectory::from_json(j);
    CHECK(back.to_json().dump() == j.dump());
    CHECK(back.reward == t.reward);
    CHECK(back.steps.size() == t.steps.size());
  }

  // An episode holding a failed tool result keeps the error through the trip.
  Trajectory t;
  t.question = "q";
  TrajectoryStep s;
  s.action = AgentAction::call("nope", {});
  s.observation.kind = Observation::Kind::ToolResult;
  s.observation.result.ok = false;
  s.observation.result.error_code = "unknown_tool";
  s.observation.result.error_detail = "no tool named 'nope'";
  t.steps.push_back(s);
  Trajectory back = Trajectory::from_json(t.to_json());
  CHECK_FALSE(back.steps[0].observation.result.ok);
  CHECK(back.steps[0].observation.result.error_code == "unknown_tool");
}

TEST_CASE("a generation-backed agent speaks JSON actions") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance", "deposit"});

  // Script the model to repeat the recorded plan, then wrap up.
  std::vector<std::string> answers;
  for (const auto& nb : task.bindings) {
    if (nb.tool.empty()) continue;
    json args = json::object();
    for (const auto& ab : nb.args) args[ab.param] = json::parse(canonical_json(ab.value));
    answers.push_back(
        json{{"action", "tool_call"}, {"tool", nb.tool}, {"args", args}}.dump());
  }
  answers.push_back(json{{"action", "ask_user"}, {"message", "All settled."}}.dump());

  size_t cursor = 0;
  CallbackClient model([&](const GenRequest& req) -> std::string {
    REQUIRE(req.stage == "agent_step");
    REQUIRE(req.payload.contains("transcript"));
    REQUIRE(cursor < answers.size());
    return answers[cursor++];
  });
  ClientAgent agent(model, "You operate tools.");
  ScriptedUser user(0);
  Trajectory t = run_rollout(env, task, agent, user);
  CHECK(t.reward == 1.0);
  CHECK(t.tool_calls() == 3);
  CHECK(t.steps.back().observation.kind == Observation::Kind::Termination);
}

TEST_CASE("unparseable model turns become chatter to the user") {
  Environment env = minienv();
  TaskSample task = make_sample_task(env, {"find_user", "get_balance"});

  CallbackClient model([](const GenRequest&) { return std::string("  let me think...  "); });
  ClientAgent agent(model, "sys");
  ScriptedUser user(0);
  Trajectory t = run_rollout(env, task, agent, user);
  REQUIRE_FALSE(t.steps.empty());
  CHECK(t.steps[0].action.kind == AgentAction::Kind::AskUser);
  CHECK(t.steps[0].action.message == "let me think...");
  CHECK(t.steps[0].observation.kind == Observation::Kind::Termination);
}

TEST_CASE("the simulated user prompt carries the instruction, not the placeholder") {
  std::string captured;
  CallbackClient model([&captured](const GenRequest& req) -> std::string {
    captured = req.prompt;
    return "Sure, go ahead.";
  });
  ClientUser user(model, "Play the customer. Goal: {instruction_display}. Stay in character.",
                  "Deposit 5.00 into ann's account.");
  Trajectory t;
  t.question = "Original question";
  std::string reply = user.reply(t, "Which account?");
  CHECK(reply == "Sure, go ahead.");
  CHECK(captured.find("Deposit 5.00 into ann's account.") != std::string::npos);
  CHECK(captured.find("{instruction_display}") == std::string::npos);
  CHECK(captured.find("\"Which account?\"") != std::string::npos);
  CHECK(captured.find("[agent] ask") != std::string::npos);
}
