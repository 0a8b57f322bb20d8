// Command-line front end for the environment synthesis pipeline.
//
// Each subcommand runs one stage against a working directory and leaves a
// manifest behind. Stages read only what earlier stages wrote, so a
// pipeline is a sequence of invocations:
//
//   envsmith synth-env   --workdir wd
//   envsmith build-graph --workdir wd
//   envsmith sample-seqs --workdir wd
//   envsmith gen-tasks   --workdir wd
//   envsmith rollout     --workdir wd --jobs 4
//   envsmith advantage   --workdir wd

#define ENVSMITH_ENABLE_HTTP 1

#include <envsmith.hpp>

#include <CLI11.hpp>
#include <iostream>

using namespace envsmith;

namespace {

struct CliOptions {
  std::string config;
  std::string workdir = ".";
  size_t jobs = 1;
};

PipelineConfig load_config(const CliOptions& opt) {
  if (opt.config.empty()) return PipelineConfig{};
  return PipelineConfig::load(opt.config);
}

void add_common(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config, "pipeline configuration file (JSON)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--workdir", opt.workdir, "working directory for stage artifacts");
  cmd->add_option("--jobs", opt.jobs, "worker threads for parallel stages")
      ->check(CLI::Range(size_t{1}, size_t{256}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthesize tool-use environments, tasks, rollouts and advantages"};
  app.require_subcommand(1);

  CliOptions opt;
  CLI::App* c_synth = app.add_subcommand("synth-env", "materialize the environment directory");
  CLI::App* c_graph = app.add_subcommand("build-graph", "build the tool dependency graph");
  CLI::App* c_seqs = app.add_subcommand("sample-seqs", "sample and merge random tool walks");
  CLI::App* c_tasks = app.add_subcommand("gen-tasks", "generate verifiable tasks");
  CLI::App* c_roll = app.add_subcommand("rollout", "roll out episode groups per task");
  CLI::App* c_adv = app.add_subcommand("advantage", "filter groups and compute advantages");
  for (CLI::App* c : {c_synth, c_graph, c_seqs, c_tasks, c_roll, c_adv}) add_common(c, opt);

  CLI11_PARSE(app, argc, argv);

  try {
    PipelineConfig cfg = load_config(opt);
    Workdir wd{fs::path(opt.workdir)};
    fs::create_directories(wd.root);

    if (app.got_subcommand(c_adv)) {
      AdvantageReport r = advantage_stage(cfg, wd);
      std::cout << "advantage: groups=" << r.groups_total << " dropped=" << r.groups_dropped
                << " rows=" << r.rows << "\n";
      return 0;
    }

    ClientHandle client = make_client(cfg, wd);
    if (app.got_subcommand(c_synth)) {
      Environment env = synth_env(cfg, wd, client.get());
      std::cout << "synth-env: " << cfg.env_name << " tools=" << env.tools.size()
                << " digest=" << env.manifest_digest << "\n";
    } else if (app.got_subcommand(c_graph)) {
      ToolGraph g = build_graph_stage(cfg, wd, client.get());
      std::cout << "build-graph: nodes=" << g.nodes.size() << " edges=" << g.edge_count() << "\n";
    } else if (app.got_subcommand(c_seqs)) {
      size_t n = sample_seqs(cfg, wd, client.get());
      std::cout << "sample-seqs: sequences=" << n << "\n";
    } else if (app.got_subcommand(c_tasks)) {
      GenTasksReport r = gen_tasks(cfg, wd, client.get());
      std::cout << "gen-tasks: accepted=" << r.accepted << " rejected=" << r.rejected << "\n";
    } else if (app.got_subcommand(c_roll)) {
      size_t n = rollout_stage(cfg, wd, client.get(), opt.jobs);
      std::cout << "rollout: trajectories=" << n << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
