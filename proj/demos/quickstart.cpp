// Library tour: one environment, one task, one rollout group, advantages.
//
// Everything here runs offline. The built-in rule-based generator stands in
// for a language model wherever one would be consulted, so the output is
// deterministic and the demo needs no network.

#include <envsmith.hpp>

#include <iostream>

using namespace envsmith;

int main() {
  // An environment is an attribute schema plus tools whose effects are
  // declarative programs over the shared state document.
  Environment env = shop_environment();
  std::cout << "environment '" << env.schema->id << "' with " << env.tools.size() << " tools\n";

  RuleBasedGenerator gen;

  // Tools form a graph: an edge means one tool's output can feed another's
  // parameter. Walking it yields plausible tool sequences.
  ToolGraph graph = build_tool_graph_judged(env, gen);
  std::cout << "graph: " << graph.nodes.size() << " nodes, " << graph.edge_count() << " edges\n";

  std::vector<std::vector<std::string>> walks;
  for (uint64_t s = 0; s < 4; ++s) walks.push_back(random_walk(graph, s, 2, 4));
  std::vector<std::string> seq = merge_sequences(walks, env, &gen);
  std::cout << "merged sequence:";
  for (const auto& t : seq) std::cout << " " << t;
  std::cout << "\n";

  // A task graph adds reasoning nodes over the tool skeleton.
  TaskGraph tg = build_task_graph("tg_demo", seq, env, &gen, 2);
  for (const auto& n : tg.nodes)
    if (n.kind == TaskNode::Kind::Reasoning)
      std::cout << "reasoning " << n.id << ": " << n.prompt << "\n";

  // Tasks are made verifiable by executing the blueprint against a fresh
  // state and freezing the result as the golden final state.
  StateDoc s0 = instantiate_environment(env.schema, 10, 12, &gen);
  QuestionDraft draft = generate_question(tg, env, s0, gen);
  BindOutcome bound = bind_and_execute(tg, env, s0, gen);
  if (!bound.ok) {
    std::cout << "binding rejected: " << bound.rejection.reason << "\n";
    return 0;
  }
  RefineOutcome refined = refine_question(draft.text, build_allowlist(env, s0), gen);

  TaskSample task;
  task.task_id = "task_demo";
  task.env_id = env.schema->id;
  task.taskgraph_id = tg.id;
  task.seed = 10;
  task.question = draft.text;
  task.question_final = refined.text;
  task.refined = refined.refined;
  task.bindings = bound.bindings;
  task.initial = make_snapshot(s0);
  task.golden = make_snapshot(bound.final_doc);
  task.env_digest = env.manifest_digest;
  std::cout << "question: " << task.question_final << "\n";
  std::cout << "golden state " << task.golden.doc_hash.substr(0, 12) << "...\n";

  // A rollout group: the scripted mixture produces faithful and flawed
  // episodes; the reward is exact final-state equality.
  auto trajs = run_group(env, task, 8, scripted_mixture(0.5), scripted_user_factory(1), 7);
  std::vector<double> rewards;
  std::cout << "rewards:";
  for (const auto& t : trajs) {
    rewards.push_back(t.reward);
    std::cout << " " << t.reward;
  }
  std::cout << "\n";

  // Group-normalized advantages: reward minus group mean over group std.
  try {
    std::vector<double> adv = group_advantages(rewards);
    std::cout << "advantages:";
    for (double a : adv) std::cout << " " << a;
    std::cout << "\n";
  } catch (const DegenerateGroup&) {
    std::cout << "group is uniform; dynamic sampling would drop it\n";
  }
  return 0;
}
