#pragma once

#include <memory>
#include <thread>

#include "envsmith/config.hpp"
#include "envsmith/erpo.hpp"
#include "envsmith/fixtures.hpp"
#include "envsmith/jsonl.hpp"
#include "envsmith/rollout.hpp"
#include "envsmith/rulegen.hpp"
#include "envsmith/taskgen.hpp"
#include "envsmith/taskgraph.hpp"
#include "envsmith/toolgraph.hpp"
#include "envsmith/walk.hpp"

namespace envsmith {

/// Standard layout of a pipeline working directory.
struct Workdir {
  fs::path root;

  explicit Workdir(fs::path r) : root(std::move(r)) {}
  fs::path env_dir(const std::string& name) const { return root / "env" / name; }
  fs::path graph_file() const { return root / "graph.json"; }
  fs::path sequences_file() const { return root / "sequences.jsonl"; }
  fs::path taskgraphs_file() const { return root / "taskgraphs.jsonl"; }
  fs::path tasks_file() const { return root / "tasks.jsonl"; }
  fs::path tasks_rejected_file() const { return root / "tasks.rejected.jsonl"; }
  fs::path trajectories_file() const { return root / "trajectories.jsonl"; }
  fs::path advantages_file() const { return root / "advantages.jsonl"; }
  fs::path manifest_file(const std::string& stage) const {
    return root / "manifests" / (stage + ".json");
  }
  fs::path resolve(const std::string& p) const {
    fs::path cand(p);
    return cand.is_absolute() ? cand : root / cand;
  }
};

/// Owns whichever client chain the config asks for. A null client pointer
/// never escapes: backend "none" is a real client that reports itself
/// unavailable, and stages degrade or fail accordingly.
struct ClientHandle {
  std::shared_ptr<GenClient> base;
  std::shared_ptr<GenClient> wrapper;

  GenClient& get() { return wrapper ? *wrapper : *base; }
};

inline ClientHandle make_client(const PipelineConfig& cfg, const Workdir& wd) {
  ClientHandle h;
  if (cfg.cassette_mode == CassetteMode::Replay) {
    h.base = std::make_shared<CassetteReplayClient>(wd.resolve(cfg.cassette));
    return h;
  }
  switch (cfg.backend) {
    case ClientBackend::None: h.base = std::make_shared<NullClient>(); break;
    case ClientBackend::Builtin: h.base = std::make_shared<RuleBasedGenerator>(); break;
    case ClientBackend::Http:
#ifdef ENVSMITH_ENABLE_HTTP
      h.base = std::make_shared<HttpGeneratorClient>(cfg.http);
      break;
#else
      throw ConfigInvalid("this build has no http client backend");
#endif
  }
  if (cfg.cassette_mode == CassetteMode::Record)
    h.wrapper = std::make_shared<RecordingClient>(h.base, wd.resolve(cfg.cassette));
  return h;
}

// ---------------------------------------------------------------------------
// Stage manifests
//
// Each stage leaves a manifest naming its inputs and outputs by content
// digest plus the config digest and seed. No clocks: rerunning a stage on
// identical inputs writes an identical manifest.

inline std::string file_digest(const fs::path& p) { return sha256_hex(read_file(p)); }

inline void write_stage_manifest(const Workdir& wd, const std::string& stage,
                                 const PipelineConfig& cfg, const std::vector<fs::path>& inputs,
                                 const std::vector<fs::path>& outputs, json counts) {
  json m = json::object();
  m["stage"] = stage;
  m["seed"] = cfg.seed;
  m["config_digest"] = sha256_hex(cfg.to_json().dump());
  json in = json::object();
  for (const auto& p : inputs) in[fs::relative(p, wd.root).string()] = file_digest(p);
  m["inputs"] = std::move(in);
  json out = json::object();
  for (const auto& p : outputs) out[fs::relative(p, wd.root).string()] = file_digest(p);
  m["outputs"] = std::move(out);
  m["counts"] = std::move(counts);
  write_json(wd.manifest_file(stage), m);
}

// ---------------------------------------------------------------------------
// Stages

/// Materializes the environment directory. A generation backend is asked to
/// synthesize schema and tools (with one repair round on validation
/// failure); without one the built-in fixture is used, which only exists
/// for the default environment name.
inline Environment synth_env(const PipelineConfig& cfg, const Workdir& wd, GenClient& client) {
  Environment env;
  GenRequest req;
  req.stage = "synth_env";
  req.payload = json{{"name", cfg.env_name}};
  req.prompt = "Design a tool-use environment named '" + cfg.env_name +
               "'. Answer with JSON: {\"schema\": <attribute schema>, \"tools\": [<tool specs>]}.";
  auto build = [&](const json& spec) {
    Environment e;
    e.schema = load_schema(spec.at("schema"));
    for (const auto& tj : spec.at("tools")) {
      ToolSpec t = tool_from_json(tj);
      auto diags = validate_tool(*e.schema, t);
      if (!diags.empty()) throw SchemaViolation("tool '" + t.name + "': " + diags.front());
      e.tools.push_back(std::move(t));
    }
    if (e.tools.empty()) throw SchemaViolation("environment has no tools");
    e.manifest_digest = environment_digest(*e.schema, e.tools);
    return e;
  };
  try {
    std::string text = client.generate(req).text;
    try {
      env = build(json::parse(text));
    } catch (const std::exception& first) {
      GenRequest fix;
      fix.stage = "synth_env_repair";
      fix.payload = json{{"name", cfg.env_name}, {"previous", text}, {"error", first.what()}};
      fix.prompt = std::string("The previous environment was invalid (") + first.what() +
                   "). Answer with corrected JSON: {\"schema\": ..., \"tools\": [...]}.";
      env = build(json::parse(client.generate(fix).text));
    }
  } catch (const ClientUnavailable&) {
    if (cfg.env_name != "shop")
      throw ConfigInvalid("no generation backend can synthesize '" + cfg.env_name +
                          "'; the built-in fixture is named 'shop'");
    env = shop_environment();
  }
  save_environment(wd.env_dir(cfg.env_name), *env.schema, env.tools);
  json counts = json::object();
  counts["tools"] = env.tools.size();
  counts["attributes"] = env.schema->attributes.size();
  std::vector<fs::path> outputs = {wd.env_dir(cfg.env_name) / "schema.json",
                                   wd.env_dir(cfg.env_name) / "tools" / "manifest.json"};
  for (const auto& t : env.tools)
    outputs.push_back(wd.env_dir(cfg.env_name) / "tools" / (t.name + ".json"));
  write_stage_manifest(wd, "synth-env", cfg, {}, outputs, std::move(counts));
  return env;
}

/// Builds the tool dependency graph, judged pairwise when a backend is
/// available and by the static output-to-parameter rule otherwise.
inline ToolGraph build_graph_stage(const PipelineConfig& cfg, const Workdir& wd,
                                   GenClient& client) {
  Environment env = load_environment(wd.env_dir(cfg.env_name));
  ToolGraph g;
  bool judged = true;
  try {
    g = build_tool_graph_judged(env, client);
  } catch (const ClientUnavailable&) {
    g = build_tool_graph(env);
    judged = false;
  }
  json out = g.to_json();
  out["env"] = cfg.env_name;
  out["env_digest"] = env.manifest_digest;
  out["judged"] = judged;
  write_json(wd.graph_file(), out);
  json counts = json::object();
  counts["nodes"] = g.nodes.size();
  counts["edges"] = g.edge_count();
  write_stage_manifest(wd, "build-graph", cfg, {wd.env_dir(cfg.env_name) / "schema.json"},
                       {wd.graph_file()}, std::move(counts));
  return g;
}

/// Samples seeded random walks over the graph and merges them pairwise into
/// deduplicated tool sequences.
inline size_t sample_seqs(const PipelineConfig& cfg, const Workdir& wd, GenClient& client) {
  Environment env = load_environment(wd.env_dir(cfg.env_name));
  ToolGraph g = ToolGraph::from_json(read_json(wd.graph_file()));
  std::vector<std::vector<std::string>> walks;
  for (size_t i = 0; i < cfg.walk_count; ++i)
    walks.push_back(random_walk(g, fnv1a64("walk:" + std::to_string(i), cfg.seed),
                                cfg.walk_min_len, cfg.walk_max_len));
  std::vector<json> rows;
  for (size_t i = 0; i < walks.size(); i += 2) {
    std::vector<std::vector<std::string>> pair = {walks[i]};
    if (i + 1 < walks.size()) pair.push_back(walks[i + 1]);
    std::vector<std::string> merged = merge_sequences(pair, env, &client);
    json row = json::object();
    char buf[16];
    std::snprintf(buf, sizeof(buf), "seq_%04zu", rows.size());
    row["seq_id"] = buf;
    row["walks"] = pair;
    row["tools"] = merged;
    rows.push_back(std::move(row));
  }
  write_jsonl(wd.sequences_file(), rows);
  json counts = json::object();
  counts["walks"] = walks.size();
  counts["sequences"] = rows.size();
  write_stage_manifest(wd, "sample-seqs", cfg, {wd.graph_file()}, {wd.sequences_file()},
                       std::move(counts));
  return rows.size();
}

struct GenTasksReport {
  size_t accepted = 0;
  size_t rejected = 0;
};

/// Turns tool sequences into verifiable tasks: blueprint, fresh initial
/// state, question, bound golden run, refinement, and a replay check that
/// the recorded bindings reproduce the golden state. Every considered
/// sequence ends up in exactly one of tasks.jsonl and tasks.rejected.jsonl.
inline GenTasksReport gen_tasks(const PipelineConfig& cfg, const Workdir& wd, GenClient& client) {
  Environment env = load_environment(wd.env_dir(cfg.env_name));
  std::vector<json> seqs = read_jsonl(wd.sequences_file());
  if (seqs.size() > cfg.task_limit) seqs.resize(cfg.task_limit);

  std::vector<json> graph_rows, task_rows, reject_rows;
  GenTasksReport report;
  for (size_t i = 0; i < seqs.size(); ++i) {
    std::string tg_id = "tg_" + std::to_string(i);
    std::vector<std::string> tools = seqs[i].value("tools", std::vector<std::string>{});
    std::vector<ProposalRejection> proposal_rejects;
    TaskGraph tg = build_task_graph(tg_id, tools, env, &client, cfg.max_reasoning,
                                    &proposal_rejects);
    json grow = tg.to_json();
    grow["seq_id"] = seqs[i].value("seq_id", "");
    if (!proposal_rejects.empty()) {
      json rj = json::array();
      for (const auto& r : proposal_rejects) rj.push_back(r.to_json());
      grow["rejected_proposals"] = std::move(rj);
    }
    graph_rows.push_back(std::move(grow));

    uint64_t task_seed = fnv1a64(tg_id, cfg.seed);
    std::string task_id = "task_" + std::to_string(i);
    auto reject = [&](TaskRejection r) {
      r.taskgraph_id = tg_id;
      json row = r.to_json();
      row["task_id"] = task_id;
      reject_rows.push_back(std::move(row));
      ++report.rejected;
    };

    StateDoc s0 = instantiate_environment(env.schema, task_seed, cfg.population, &client);
    QuestionDraft draft;
    try {
      draft = generate_question(tg, env, s0, client);
    } catch (const EmptyGraph&) {
      reject({tg_id, "question", "sequence produced no tool nodes", "", ""});
      continue;
    }

    BindOutcome bound = bind_and_execute(tg, env, s0, client);
    if (!bound.ok) {
      reject(bound.rejection);
      continue;
    }

    RefineOutcome refined;
    try {
      refined = refine_question(draft.text, build_allowlist(env, s0), client);
    } catch (const RefinementRejected& e) {
      reject({tg_id, "refinement", e.what(), "", ""});
      continue;
    }

    TaskSample task;
    task.task_id = task_id;
    task.env_id = env.schema->id;
    task.taskgraph_id = tg_id;
    task.seed = task_seed;
    task.question = draft.text;
    task.question_final = refined.text;
    task.refined = refined.refined;
    task.bindings = bound.bindings;
    task.initial = make_snapshot(s0);
    task.golden = make_snapshot(bound.final_doc);
    task.env_digest = env.manifest_digest;

    StateDoc replay_start = restore_snapshot(env.schema, task.initial.payload);
    SequenceResult replstatic = replay_bindings(tg, env, task.bindings, replay_start);
    if (!replstatic.ok() || replstatic.doc.doc_hash() != task.golden.doc_hash) {
      reject({tg_id, "replay", "recorded bindings do not reproduce the golden state", "", ""});
      continue;
    }

    task_rows.push_back(task.to_json());
    ++report.accepted;
  }

  write_jsonl(wd.taskgraphs_file(), graph_rows);
  write_jsonl(wd.tasks_file(), task_rows);
  write_jsonl(wd.tasks_rejected_file(), reject_rows);
  json counts = json::object();
  counts["sequences"] = seqs.size();
  counts["taskgraphs"] = graph_rows.size();
  counts["accepted"] = report.accepted;
  counts["rejected"] = report.rejected;
  write_stage_manifest(wd, "gen-tasks", cfg, {wd.sequences_file()},
                       {wd.taskgraphs_file(), wd.tasks_file(), wd.tasks_rejected_file()},
                       std::move(counts));
  return report;
}

/// Rolls out a group of episodes per task. Without an http backend the
/// agent is the scripted mixture and the user is scripted; episodes are
/// judged for user error when the backend can judge. Tasks are independent,
/// so they fan out across jobs and land back in task order.
inline size_t rollout_stage(const PipelineConfig& cfg, const Workdir& wd, GenClient& client,
                            size_t jobs = 1) {
  Environment env = load_environment(wd.env_dir(cfg.env_name));
  std::vector<json> rows = read_jsonl(wd.tasks_file());
  std::vector<TaskSample> tasks;
  for (const auto& r : rows) {
    TaskSample t = TaskSample::from_json(r, env.schema);
    if (t.env_digest != env.manifest_digest)
      throw SchemaMismatch("task '" + t.task_id + "' was generated against a different build of '" +
                           cfg.env_name + "'");
    tasks.push_back(std::move(t));
  }

  std::string judge_template;
  fs::path judge_path = fs::path(cfg.prompts_dir) / "meu_judge.txt";
  if (fs::exists(judge_path)) judge_template = read_file(judge_path);

  AgentFactory make_agent;
  UserFactory make_user;
  if (cfg.backend == ClientBackend::Http) {
    make_agent = [&client](const TaskSample&, uint64_t) -> std::unique_ptr<Agent> {
      return std::make_unique<ClientAgent>(
          client, "You are an assistant operating tools to fulfil the user's request.");
    };
    std::string user_template;
    fs::path user_path = fs::path(cfg.prompts_dir) / "user_optimized.txt";
    if (fs::exists(user_path)) user_template = read_file(user_path);
    make_user = [&client, user_template](const TaskSample& task,
                                         uint64_t) -> std::unique_ptr<UserSim> {
      return std::make_unique<ClientUser>(client, user_template,
                                          task.question_final.empty() ? task.question
                                                                      : task.question_final);
    };
  } else {
    make_agent = scripted_mixture(cfg.faithful_prob);
    make_user = scripted_user_factory(cfg.user_patience);
  }

  RolloutOptions opts;
  opts.max_turns = cfg.max_turns;
  std::vector<std::vector<Trajectory>> per_task(tasks.size());
  auto worker = [&](size_t begin, size_t step) {
    for (size_t i = begin; i < tasks.size(); i += step) {
      per_task[i] = run_group(env, tasks[i], cfg.group_size, make_agent, make_user, cfg.seed, opts);
      for (auto& t : per_task[i]) {
        MeuVerdict v = judge_meu(t, client, judge_template);
        t.meu_checked = v.checked;
        t.meu_ok = v.meu_ok;
        auto bad = validate_trajectory(t);
        if (!bad.empty()) throw Error("episode '" + t.traj_id + "': " + bad.front());
      }
    }
  };
  if (jobs <= 1) {
    worker(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (size_t w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          worker(w, jobs);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<json> out;
  for (const auto& group : per_task)
    for (const auto& t : group) out.push_back(t.to_json());
  write_jsonl(wd.trajectories_file(), out);
  json counts = json::object();
  counts["tasks"] = tasks.size();
  counts["trajectories"] = out.size();
  size_t rewarded = 0;
  for (const auto& group : per_task)
    for (const auto& t : group)
      if (t.reward == 1.0) ++rewarded;
  counts["rewarded"] = rewarded;
  write_stage_manifest(wd, "rollout", cfg, {wd.tasks_file()}, {wd.trajectories_file()},
                       std::move(counts));
  return out.size();
}

struct AdvantageReport {
  size_t groups_total = 0;
  size_t groups_dropped = 0;
  size_t rows = 0;
};

/// Filters uniform groups and normalizes the remaining rewards into
/// advantages under the configured mode.
inline AdvantageReport advantage_stage(const PipelineConfig& cfg, const Workdir& wd) {
  std::vector<json> rows = read_jsonl(wd.trajectories_file());
  std::vector<Trajectory> trajs;
  for (const auto& r : rows) trajs.push_back(Trajectory::from_json(r));
  std::vector<RewardGroup> groups = collect_groups(trajs);
  AdvantageReport report;
  report.groups_total = groups.size();
  std::vector<RewardGroup> kept = dynamic_filter(groups, &report.groups_dropped);
  std::vector<AdvantageRow> adv = cfg.advantage_mode == AdvantageMode::Env
                                      ? env_advantages(kept, cfg.std_floor)
                                      : grouped_advantages(kept, cfg.std_floor);
  std::vector<json> out;
  for (const auto& a : adv) out.push_back(a.to_json());
  report.rows = out.size();
  write_jsonl(wd.advantages_file(), out);
  json counts = json::object();
  counts["groups_total"] = report.groups_total;
  counts["groups_dropped"] = report.groups_dropped;
  counts["rows"] = report.rows;
  write_stage_manifest(wd, "advantage", cfg, {wd.trajectories_file()}, {wd.advantages_file()},
                       std::move(counts));
  return report;
}

}  // namespace envsmith
