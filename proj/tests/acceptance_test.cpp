// End-to-end acceptance checks. Each case prints one verdict line
// ("ACCEPT C<n> <label> PASS|FAIL") before asserting, so the summary
// survives a failing run.

#include <chrono>
#include <cstdio>
#include <random>

#include "catch2/catch_amalgamated.hpp"
#include "envsmith.hpp"
#include "support.hpp"

using namespace envsmith;
using support::TempDir;

namespace {

void report(int n, const char* label, bool ok) {
  std::printf("ACCEPT C%d %s %s\n", n, label, ok ? "PASS" : "FAIL");
  std::fflush(stdout);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

PipelineConfig fixture_config() {
  PipelineConfig cfg;
  cfg.seed = 5;
  cfg.population = 12;
  cfg.walk_count = 20;
  cfg.walk_min_len = 2;
  cfg.walk_max_len = 6;
  cfg.task_limit = 10;
  cfg.group_size = 4;
  cfg.faithful_prob = 0.5;
  cfg.user_patience = 1;
  return cfg;
}

/// One shared offline pipeline run over the bundled environment, recorded to
/// a cassette so later criteria can replay it.
struct FixtureRun {
  TempDir dir{"accept_fixture"};
  PipelineConfig cfg = fixture_config();
  Environment env;
  std::vector<TaskSample> tasks;
  std::map<std::string, TaskGraph> graphs;

  FixtureRun() {
    cfg.cassette_mode = CassetteMode::Record;
    cfg.cassette = "tape.json";
    Workdir wd(dir.path);
    {
      ClientHandle client = make_client(cfg, wd);
      synth_env(cfg, wd, client.get());
      build_graph_stage(cfg, wd, client.get());
      sample_seqs(cfg, wd, client.get());
      gen_tasks(cfg, wd, client.get());
      rollout_stage(cfg, wd, client.get());
      advantage_stage(cfg, wd);
    }
    env = load_environment(wd.env_dir(cfg.env_name));
    for (const auto& row : read_jsonl(wd.tasks_file()))
      tasks.push_back(TaskSample::from_json(row, env.schema));
    for (const auto& row : read_jsonl(wd.taskgraphs_file())) {
      TaskGraph g = TaskGraph::from_json(row);
      graphs[g.id] = std::move(g);
    }
  }
};

const FixtureRun& fixture_run() {
  static FixtureRun run;
  return run;
}

}  // namespace

TEST_CASE("C1: exact state comparison agrees with a deep-compare oracle") {
  Environment env = shop_environment();
  std::mt19937_64 rng(11001);
  Clock::time_point t0 = Clock::now();

  size_t pairs = 0;
  size_t disagreements = 0;
  size_t wrong_label = 0;
  for (int i = 0; i < 1000; ++i) {
    StateDoc golden = seed_environment(env.schema, 20000 + i, 6);
    json mutated = golden.to_json();
    support::MutationKind mk = support::mutate_doc_json(mutated, rng);
    StateDoc candidate = StateDoc::decode(env.schema, mutated);

    double reward = state_equal(golden, candidate) ? 1.0 : 0.0;
    double oracle = support::oracle_state_equal(golden, candidate) ? 1.0 : 0.0;
    ++pairs;
    if (reward != oracle) ++disagreements;
    bool should_match = mk != support::MutationKind::Real;
    if ((reward == 1.0) != should_match) ++wrong_label;
  }
  double elapsed = seconds_since(t0);

  bool ok = pairs >= 1000 && disagreements == 0 && wrong_label == 0 && elapsed < 10.0;
  report(1, "reward-oracle-agreement", ok);
  INFO("pairs=" << pairs << " disagreements=" << disagreements << " wrong_label=" << wrong_label
                << " elapsed=" << elapsed);
  REQUIRE(ok);
}

TEST_CASE("C2: group normalization is exact on the worked case and centered everywhere") {
  std::vector<double> adv = group_advantages({1.0, 1.0, 0.0, 0.0});
  std::vector<double> oracle = support::oracle_group_adv({1, 1, 0, 0});
  bool worked = adv == std::vector<double>{1.0, 1.0, -1.0, -1.0};
  for (size_t i = 0; i < adv.size(); ++i) worked = worked && adv[i] == oracle[i];

  std::mt19937_64 rng(11002);
  size_t centered = 0;
  const size_t trials = 10000;
  for (size_t trial = 0; trial < trials; ++trial) {
    size_t n = 2 + rng() % 15;
    std::vector<double> rewards;
    do {
      rewards.clear();
      for (size_t i = 0; i < n; ++i) rewards.push_back(double(rng() % 2));
    } while (std::count(rewards.begin(), rewards.end(), 1.0) == 0 ||
             std::count(rewards.begin(), rewards.end(), 1.0) == double(n));
    std::vector<double> a = group_advantages(rewards);
    double sum = 0.0;
    for (double x : a) sum += x;
    if (std::abs(sum) < 1e-12) ++centered;
  }

  bool ok = worked && centered == trials;
  report(2, "group-advantage-exact", ok);
  INFO("worked=" << worked << " centered=" << centered << "/" << trials);
  REQUIRE(ok);
}

TEST_CASE("C3: environment pooling matches the worked fixture and ignores order") {
  auto make_group = [](const std::string& env, const std::string& q,
                       const std::vector<int>& rewards) {
    RewardGroup g;
    g.env_id = env;
    g.question_id = q;
    for (size_t i = 0; i < rewards.size(); ++i)
      g.members.push_back({q + "_r" + std::to_string(i), double(rewards[i]), true});
    return g;
  };

  // Worked fixture: Q1 = [1, 0], Q2 = [1, 1].
  std::vector<AdvantageRow> rows =
      env_advantages({make_group("e", "q1", {1, 0}), make_group("e", "q2", {1, 1})});
  std::vector<std::vector<double>> oracle = support::oracle_env_adv({{1, 0}, {1, 1}});
  std::map<std::string, double> by_id;
  for (const auto& r : rows) by_id[r.traj_id] = r.advantage;
  bool worked = std::abs(by_id["q1_r0"] - 1.1547005383792517) < 1e-9 &&
                std::abs(by_id["q1_r1"] + 1.1547005383792517) < 1e-9 &&
                by_id["q2_r0"] == 0.0 && by_id["q2_r1"] == 0.0 &&
                std::abs(by_id["q1_r0"] - oracle[0][0]) < 1e-9 &&
                std::abs(by_id["q1_r1"] - oracle[0][1]) < 1e-9;

  // Permuting environments, questions and trajectories changes no bit.
  std::mt19937_64 rng(11003);
  std::vector<RewardGroup> batch = {
      make_group("env_a", "q1", {1, 0, 0, 1}), make_group("env_a", "q2", {1, 1, 0}),
      make_group("env_b", "q3", {0, 1}), make_group("env_b", "q4", {1, 0, 1, 1, 0})};
  std::vector<AdvantageRow> base = env_advantages(batch);
  bool stable = true;
  for (int trial = 0; trial < 200 && stable; ++trial) {
    std::vector<RewardGroup> shuffled = batch;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (auto& g : shuffled) std::shuffle(g.members.begin(), g.members.end(), rng);
    std::vector<AdvantageRow> again = env_advantages(shuffled);
    for (size_t i = 0; i < base.size(); ++i)
      if (again[i].traj_id != base[i].traj_id || again[i].advantage != base[i].advantage)
        stable = false;
  }

  // A one-question environment reduces to the group formula bit for bit.
  bool reduces = true;
  for (int trial = 0; trial < 500 && reduces; ++trial) {
    size_t n = 2 + rng() % 12;
    std::vector<int> r;
    do {
      r.clear();
      for (size_t i = 0; i < n; ++i) r.push_back(int(rng() % 2));
    } while (std::count(r.begin(), r.end(), 1) == 0 ||
             std::count(r.begin(), r.end(), 1) == int(n));
    std::vector<RewardGroup> one = {make_group("e", "q", r)};
    std::vector<AdvantageRow> env_rows = env_advantages(one);
    std::vector<AdvantageRow> grp_rows = grouped_advantages(one);
    for (size_t i = 0; i < env_rows.size(); ++i)
      if (env_rows[i].advantage != grp_rows[i].advantage) reduces = false;
  }

  bool ok = worked && stable && reduces;
  report(3, "env-advantage-worked-fixture", ok);
  INFO("worked=" << worked << " stable=" << stable << " reduces=" << reduces);
  REQUIRE(ok);
}

TEST_CASE("C4: masking an episode is indistinguishable from deleting it") {
  std::mt19937_64 rng(11004);
  size_t batches = 0;
  size_t mismatches = 0;
  size_t gate_errors = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<ObjectiveGroup> groups(1 + rng() % 4);
    for (auto& g : groups) {
      size_t n = 1 + rng() % 6;
      for (size_t i = 0; i < n; ++i) {
        double ratio = 0.25 + (rng() % 1000) / 400.0;
        double advantage = ((rng() % 2000) - 1000.0) / 250.0;
        g.samples.push_back({ratio, advantage, true});
      }
    }
    ++batches;

    // Flipping any single sample invalid must equal deleting that sample.
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      for (size_t si = 0; si < groups[gi].samples.size(); ++si) {
        std::vector<ObjectiveGroup> masked = groups;
        masked[gi].samples[si].valid = false;
        std::vector<ObjectiveGroup> erased = groups;
        erased[gi].samples.erase(erased[gi].samples.begin() + si);
        bool any_left = false;
        for (const auto& g : erased)
          if (!g.samples.empty()) any_left = true;
        if (!any_left) {
          bool both_throw = false;
          try {
            objective_value(masked);
          } catch (const AllMasked&) {
            try {
              objective_value(erased);
            } catch (const AllMasked&) {
              both_throw = true;
            }
          }
          if (!both_throw) ++mismatches;
          continue;
        }
        if (std::abs(objective_value(masked) - objective_value(erased)) >= 1e-12) ++mismatches;
      }
    }

    // The batch objective exists exactly while one valid sample remains.
    std::vector<ObjectiveGroup> all_masked = groups;
    for (auto& g : all_masked)
      for (auto& s : g.samples) s.valid = false;
    bool threw = false;
    try {
      objective_value(all_masked);
    } catch (const AllMasked&) {
      threw = true;
    }
    if (!threw) ++gate_errors;
    size_t gi = rng() % all_masked.size();
    if (all_masked[gi].samples.empty()) continue;
    all_masked[gi].samples[rng() % all_masked[gi].samples.size()].valid = true;
    try {
      objective_value(all_masked);
    } catch (const AllMasked&) {
      ++gate_errors;
    }
  }

  bool ok = batches == 1000 && mismatches == 0 && gate_errors == 0;
  report(4, "masking-equals-deletion", ok);
  INFO("batches=" << batches << " mismatches=" << mismatches << " gate_errors=" << gate_errors);
  REQUIRE(ok);
}

TEST_CASE("C5: the dynamic filter removes exactly the uniform groups") {
  std::mt19937_64 rng(11005);
  size_t batches = 0;
  size_t misfiled = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<RewardGroup> groups(1 + rng() % 5);
    std::vector<bool> uniform;
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      groups[gi].env_id = "e";
      groups[gi].question_id = "q" + std::to_string(gi);
      size_t n = 2 + rng() % 6;
      size_t ones = 0;
      for (size_t i = 0; i < n; ++i) {
        double r = double(rng() % 2);
        if (r == 1.0) ++ones;
        groups[gi].members.push_back({"t" + std::to_string(i), r, true});
      }
      uniform.push_back(ones == 0 || ones == n);
    }
    ++batches;

    size_t dropped = 0;
    std::vector<RewardGroup> kept = dynamic_filter(groups, &dropped);
    std::set<std::string> kept_ids;
    for (const auto& g : kept) kept_ids.insert(g.question_id);
    for (size_t gi = 0; gi < groups.size(); ++gi) {
      bool removed = !kept_ids.count(groups[gi].question_id);
      if (removed != uniform[gi]) ++misfiled;
    }
    if (dropped != groups.size() - kept.size()) ++misfiled;
  }

  bool ok = batches == 10000 && misfiled == 0;
  report(5, "dynamic-filter-uniform-groups", ok);
  INFO("batches=" << batches << " misfiled=" << misfiled);
  REQUIRE(ok);
}

TEST_CASE("C6: merged, reasoned task graphs never acquire a cycle") {
  std::mt19937_64 rng(11006);
  RuleBasedGenerator gen;
  size_t runs = 0;
  size_t cycles = 0;
  size_t unorderable = 0;
  while (runs < 10000) {
    size_t n = 2 + rng() % 11;  // up to 12 tools
    support::WiredEnv wired = support::random_wired_env(rng, n, 0.25);
    ToolGraph g = build_tool_graph(wired.env);

    for (int rep = 0; rep < 5 && runs < 10000; ++rep, ++runs) {
      std::vector<std::vector<std::string>> walks = {
          random_walk(g, rng(), 1, std::min<size_t>(n, 5)),
          random_walk(g, rng(), 1, std::min<size_t>(n, 5))};
      std::vector<std::string> merged = merge_sequences(walks, wired.env, &gen);
      TaskGraph tg = build_task_graph("tg_" + std::to_string(runs), merged, wired.env, &gen, 2);
      if (!support::dfs_acyclic_oracle(tg)) ++cycles;
      if (!support::topo_order_exists(tg)) ++unorderable;
      if (!is_acyclic(tg)) ++cycles;
    }
  }

  bool ok = runs >= 10000 && cycles == 0 && unorderable == 0;
  report(6, "taskgraph-acyclicity", ok);
  INFO("runs=" << runs << " cycles=" << cycles << " unorderable=" << unorderable);
  REQUIRE(ok);
}

TEST_CASE("C7: stored tasks re-execute to their golden states, and replays repeat") {
  const FixtureRun& run = fixture_run();
  bool nonempty = !run.tasks.empty();

  size_t replay_failures = 0;
  for (const TaskSample& task : run.tasks) {
    auto it = run.graphs.find(task.taskgraph_id);
    if (it == run.graphs.end()) {
      ++replay_failures;
      continue;
    }
    StateDoc golden = restore_snapshot(run.env.schema, task.golden.payload);
    StateDoc start = restore_snapshot(run.env.schema, task.initial.payload);
    SequenceResult replay = replay_bindings(it->second, run.env, task.bindings, start);
    if (!replay.ok() || !state_equal(golden, replay.doc) ||
        !support::oracle_state_equal(golden, replay.doc))
      ++replay_failures;
  }

  // Two replay-mode pipeline runs from the recorded cassette, byte for byte.
  PipelineConfig rep = run.cfg;
  rep.cassette_mode = CassetteMode::Replay;
  rep.cassette = (run.dir.path / "tape.json").string();
  rep.backend = ClientBackend::None;
  TempDir b("accept_rep1");
  TempDir c("accept_rep2");
  for (const TempDir* d : {&b, &c}) {
    Workdir wd(d->path);
    ClientHandle client = make_client(rep, wd);
    synth_env(rep, wd, client.get());
    build_graph_stage(rep, wd, client.get());
    sample_seqs(rep, wd, client.get());
    gen_tasks(rep, wd, client.get());
  }
  bool identical = support::read_all(b.path / "tasks.jsonl") ==
                   support::read_all(c.path / "tasks.jsonl");
  bool same_as_recording = support::read_all(b.path / "tasks.jsonl") ==
                           support::read_all(run.dir.path / "tasks.jsonl");

  bool ok = nonempty && replay_failures == 0 && identical && same_as_recording;
  report(7, "offline-replay-fidelity", ok);
  INFO("tasks=" << run.tasks.size() << " replay_failures=" << replay_failures
                << " identical=" << identical << " same_as_recording=" << same_as_recording);
  REQUIRE(ok);
}

TEST_CASE("C8: faithful replays win, dropped writes lose, truncation always loses") {
  const FixtureRun& run = fixture_run();
  REQUIRE_FALSE(run.tasks.empty());

  size_t faithful_wrong = 0;
  size_t skip_wrong = 0;
  size_t truncated_wrong = 0;
  size_t mutating = 0;
  for (const TaskSample& task : run.tasks) {
    ScriptedAgent faithful(task, ScriptedAgent::Mode::Faithful);
    ScriptedUser u1(0);
    Trajectory good = run_rollout(run.env, task, faithful, u1);
    if (good.reward != 1.0) ++faithful_wrong;

    // Dropping the last state-changing call must forfeit the reward; only
    // tasks that change state at all have such a call.
    if (task.initial.doc_hash != task.golden.doc_hash) {
      ++mutating;
      ScriptedAgent skipper(task, ScriptedAgent::Mode::SkipLastWrite);
      ScriptedUser u2(0);
      Trajectory bad = run_rollout(run.env, task, skipper, u2);
      if (bad.reward != 0.0) ++skip_wrong;
    }

    ScriptedAgent again(task, ScriptedAgent::Mode::Faithful);
    ScriptedUser u3(0);
    RolloutOptions tight;
    tight.max_turns = 1;
    Trajectory cut = run_rollout(run.env, task, again, u3, tight);
    if (!cut.truncated || cut.reward != 0.0) ++truncated_wrong;
  }

  bool ok = faithful_wrong == 0 && skip_wrong == 0 && truncated_wrong == 0 && mutating > 0;
  report(8, "scripted-rollout-rewards", ok);
  INFO("tasks=" << run.tasks.size() << " mutating=" << mutating << " faithful_wrong="
                << faithful_wrong << " skip_wrong=" << skip_wrong << " truncated_wrong="
                << truncated_wrong);
  REQUIRE(ok);
}

TEST_CASE("C9: tool calls on a populated store answer in well under a millisecond") {
  Environment env = shop_environment();
  StateDoc doc = seed_environment(env.schema, 424242, 700);

  const ToolSpec* get_balance = env.find_tool("get_balance");
  const ToolSpec* deposit = env.find_tool("deposit");
  REQUIRE(get_balance);
  REQUIRE(deposit);

  ArgMap read_args{{"user_id", Value::text("user_0400")}};
  ArgMap write_args{{"user_id", Value::text("user_0400")},
                    {"amount", Value::decimal(Decimal(BigInt(100), 2))}};

  std::vector<double> millis;
  bool all_ok = true;
  for (int i = 0; i < 1001; ++i) {
    const ToolSpec& tool = i % 2 == 0 ? *get_balance : *deposit;
    const ArgMap& args = i % 2 == 0 ? read_args : write_args;
    Clock::time_point t0 = Clock::now();
    ExecOutcome eo = execute_tool(tool, args, std::move(doc));
    millis.push_back(seconds_since(t0) * 1000.0);
    doc = std::move(eo.doc);
    if (!eo.result.ok) all_ok = false;
  }
  std::nth_element(millis.begin(), millis.begin() + millis.size() / 2, millis.end());
  double median = millis[millis.size() / 2];

  // The store only grows during the loop, so the final count bounds it.
  bool store_in_bounds = doc.entry_count() <= 10000;
  bool ok = store_in_bounds && all_ok && median < 1.0;
  report(9, "tool-latency-median", ok);
  INFO("entries=" << doc.entry_count() << " median_ms=" << median << " all_ok=" << all_ok);
  REQUIRE(ok);
}

TEST_CASE("C10: branch choice on a diamond stays within three sigma of fair") {
  ToolGraph g;
  g.nodes = {"a", "b", "finish", "start"};
  g.edges["start"] = {"a", "b"};
  g.edges["a"] = {"finish"};
  g.edges["b"] = {"finish"};

  size_t a_hits = 0;
  const size_t n = 10000;
  bool shapes_ok = true;
  for (uint64_t seed = 0; seed < n; ++seed) {
    std::vector<std::string> w = random_walk(g, seed, 2, 2, "start");
    if (w.size() != 2 || w[0] != "start" || (w[1] != "a" && w[1] != "b")) shapes_ok = false;
    if (w[1] == "a") ++a_hits;
  }
  // Binomial(10000, 1/2): sigma = 50, so 3 sigma is 150.
  double dev = std::abs(double(a_hits) - 5000.0);
  bool ok = shapes_ok && dev <= 150.0;
  report(10, "walk-branch-uniformity", ok);
  INFO("a_hits=" << a_hits << " deviation=" << dev);
  REQUIRE(ok);
}
