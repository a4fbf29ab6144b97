#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <omp.h>

#include "efgeo/csv.hpp"
#include "efgeo/pipeline.hpp"

using namespace efgeo;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path, builtin, model_path, out, chart, chart_target, convention, profile, save_config;
  std::vector<std::string> stages;
  bool all = false;
  std::uint64_t seed = 0;
  int fd_order = 4, threads = 0, nodes = 0, states = 0, state = 0, steps = 0, samples = 0;
  double dt = 0.0, eps_node = 0.0, cond_cap = 0.0;
};

json chart_argument(const std::string &s) {
  if (s == "identity" || s == "cubic") return s;
  std::ifstream in(s);
  if (!in) throw SchemaError("chart: \"" + s + "\" is neither a chart name nor a readable file");
  return json::parse(in);
}

RunConfig build_config(const CLI::App &app, const CLI::App &sub, const Options &o,
                       const std::vector<std::string> &fixed_stages) {
  RunConfig c;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw SchemaError("cannot open " + o.config_path);
    c = RunConfig::from_json(json::parse(in));
  }
  if (!o.builtin.empty()) c.model = {{"builtin", o.builtin}};
  if (!o.model_path.empty()) c.model = {{"path", o.model_path}};
  if (!fixed_stages.empty()) c.stages = fixed_stages;
  if (o.all) c.stages = stage_names();
  else if (!o.stages.empty()) c.stages = o.stages;
  if (app.count("--out")) c.out = o.out;
  if (app.count("--seed")) c.seed = o.seed;
  if (app.count("--fd-order")) c.fd_order = o.fd_order;
  if (app.count("--tolerance-profile")) c.tolerance_profile = o.profile;
  if (app.count("--threads")) c.threads = o.threads;
  if (sub.count("--nodes")) c.nodes = o.nodes;
  if (sub.count("--states")) c.states = o.states;
  if (sub.count("--state")) c.state = o.state;
  if (sub.count("--dt")) c.dt = o.dt;
  if (sub.count("--steps")) c.steps = o.steps;
  if (sub.count("--samples")) c.gauge_samples = o.samples;
  if (sub.count("--eps-node")) c.eps_node = o.eps_node;
  if (sub.count("--cond-cap")) c.cond_cap = o.cond_cap;
  if (sub.count("--convention")) c.convention = o.convention;
  if (sub.count("--chart")) c.chart = chart_argument(o.chart);
  if (sub.count("--chart-target")) c.chart_target = {{"builtin", o.chart_target}};
  // round trip through JSON so every field is validated in one place
  return RunConfig::from_json(c.to_json());
}

void set_threads(int threads) {
  if (threads <= 0) {
    if (const char *env = std::getenv("EFGEO_THREADS")) threads = std::atoi(env);
  }
  if (threads > 0) {
    omp_set_num_threads(threads);
    Eigen::setNbThreads(threads);
  }
}

int execute(const RunConfig &config, const std::string &save_config) {
  set_threads(config.threads);
  if (!save_config.empty()) std::ofstream(save_config) << config.to_json().dump(2) << "\n";
  const RunResult r = run(config);
  for (const Assertion &a : r.assertions)
    std::printf("%s %s %s %s %s\n", a.pass ? "PASS" : "FAIL", a.name.c_str(), format_double(a.value).c_str(),
                a.at_least ? ">=" : "<=", format_double(a.tolerance).c_str());
  std::printf("manifest: %s/manifest.json\n", config.out.c_str());
  return r.passed() ? 0 : 1;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"efgeo: exact-factorization geometry toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  o.out = "efgeo-out";
  o.profile = "default";
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Seed for random gauge functions");
  app.add_option("--fd-order", o.fd_order, "Finite-difference order")->check(CLI::IsMember({2, 4, 6}));
  app.add_option("--threads", o.threads, "Worker threads (default: EFGEO_THREADS or library default)");
  app.add_option("--tolerance-profile", o.profile, "default, loose or absurd")
      ->check(CLI::IsMember({"default", "loose", "absurd"}));

  std::vector<std::string> stages = stage_names();
  struct Command {
    CLI::App *app;
    std::vector<std::string> stages;
  };
  std::vector<Command> commands;
  auto add_run = [&](const std::string &name, const std::string &help, std::vector<std::string> fixed) {
    CLI::App *s = app.add_subcommand(name, help);
    auto *model = s->add_option_group("model");
    model->add_option("--builtin", o.builtin, "Builtin model name");
    model->add_option("--model", o.model_path, "Model JSON file");
    model->add_option("--config", o.config_path, "Run configuration JSON file");
    if (name == "run") {
      s->add_option("--stages", o.stages, "Stages to run")->delimiter(',')->check(CLI::IsMember(stages));
      s->add_flag("--all", o.all, "Run every stage");
    }
    s->add_option("--nodes", o.nodes, "Nodes per axis")->check(CLI::PositiveNumber);
    s->add_option("--states", o.states, "Eigenstates to solve for")->check(CLI::PositiveNumber);
    s->add_option("--state", o.state, "Eigenstate to analyse")->check(CLI::NonNegativeNumber);
    s->add_option("--dt", o.dt, "Time step")->check(CLI::PositiveNumber);
    s->add_option("--steps", o.steps, "Propagation steps")->check(CLI::PositiveNumber);
    s->add_option("--samples", o.samples, "Random gauge functions")->check(CLI::NonNegativeNumber);
    s->add_option("--eps-node", o.eps_node, "Relative density below which nodes are masked");
    s->add_option("--cond-cap", o.cond_cap, "Condition cap of the geometric tensor");
    s->add_option("--convention", o.convention, "chi-real-positive or reference-overlap")
        ->check(CLI::IsMember({"chi-real-positive", "reference-overlap"}));
    s->add_option("--chart", o.chart, "identity, cubic or a chart JSON file");
    s->add_option("--chart-target", o.chart_target, "Builtin model to compare the barred coordinates against");
    s->add_option("--save-config", o.save_config, "Write the effective configuration to a file");
    commands.push_back({s, std::move(fixed)});
  };
  add_run("run", "Run the configured pipeline stages", {});
  add_run("solve", "Eigenstates of the full Hamiltonian", {"solve"});
  add_run("factorize", "Factorize an eigenstate", {"factorize"});
  add_run("geometry", "Geometric quantities and identities", {"geometry"});
  add_run("residuals", "Exact-factorization residuals", {"residuals"});
  add_run("gauge-sweep", "Invariance under random gauge transformations", {"gauge-sweep"});
  add_run("chart-sweep", "Invariance under a change of coordinates", {"chart-sweep"});

  CLI::App *models = app.add_subcommand("models", "Builtin models");
  models->require_subcommand(1);
  CLI::App *list = models->add_subcommand("list", "List builtin models");
  CLI::App *show = models->add_subcommand("show", "Show one builtin model");
  std::string show_name;
  bool show_json = false;
  show->add_option("name", show_name, "Model name")->required();
  show->add_flag("--json", show_json, "Print the full JSON description");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return 2;
  }

  try {
    if (list->parsed()) {
      for (const auto &n : builtin_names()) std::printf("%s\n", n.c_str());
      return 0;
    }
    if (show->parsed()) {
      const json spec = builtin_spec(show_name);
      if (show_json) std::printf("%s\n", spec.dump(2).c_str());
      else std::printf("%s: %s\n", show_name.c_str(), spec.value("description", "").c_str());
      return 0;
    }
    for (const Command &c : commands)
      if (c.app->parsed()) return execute(build_config(app, *c.app, o, c.stages), o.save_config);
  } catch (const SchemaError &e) {
    std::fprintf(stderr, "efgeo: %s\n", e.what());
    return 2;
  } catch (const json::exception &e) {
    std::fprintf(stderr, "efgeo: %s\n", e.what());
    return 2;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "efgeo: %s\n", e.what());
    return 1;
  }
  return 2;
}
