// Command-line front end: bootstrap a policy, train it over curriculum
// phases, evaluate checkpoints, run ablation suites, and print run reports.
//
//   webrl_lab sft    --out runs/a --seed 7
//   webrl_lab train  --config lab.cfg --set actor_epochs=40
//   webrl_lab eval   --out runs/a
//   webrl_lab ablate components --seeds 5 --out runs/abl
//   webrl_lab report --out runs/a
//
// The output directory defaults to $WEBRL_LAB_OUT, then ./out.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "webrl/webrl.hpp"

namespace {

std::string default_out() {
  const char* env = std::getenv("WEBRL_LAB_OUT");
  return env && *env ? std::string(env) : std::string("out");
}

struct CommonArgs {
  std::string config;
  std::string out = default_out();
  std::string method;
  std::int64_t seed = -1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "key = value config file");
  cmd->add_option("--out", a.out, "output directory (default $WEBRL_LAB_OUT or ./out)");
  cmd->add_option("--seed", a.seed, "run seed (overrides the config file)");
  cmd->add_option("--method", a.method,
                  "training method: webrl, sft, filtered_bc, awr, "
                  "reinforce_baseline, kl_direction");
  cmd->add_option("--set", a.overrides, "extra key=value override (repeatable)")
      ->expected(-1);
}

webrl::RunConfig resolve_config(const CommonArgs& a) {
  webrl::RunConfig cfg;
  if (!a.config.empty()) cfg = webrl::parse_config_file(a.config, cfg);
  if (a.seed >= 0)
    webrl::set_config_value(cfg, "seed", std::to_string(a.seed));
  if (!a.method.empty()) webrl::set_config_value(cfg, "method", a.method);
  for (const std::string& kv : a.overrides) {
    auto eq = kv.find('=');
    webrl::check(eq != std::string::npos && eq > 0,
                 "--set expects key=value, got '" + kv + "'");
    webrl::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  webrl::validate_config(cfg);
  return cfg;
}

// Print a CSV file as an aligned table.
void print_csv(const std::string& path, const std::string& heading) {
  std::ifstream in(path);
  if (!in.good()) return;
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      cells.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  if (rows.empty()) return;
  std::vector<std::size_t> widths;
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (widths.size() <= i) widths.resize(i + 1, 0);
      widths[i] = std::max(widths[i], r[i].size());
    }
  std::cout << heading << " (" << path << ")\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      std::cout << r[i];
      if (i + 1 < r.size())
        std::cout << std::string(widths[i] - r[i].size() + 2, ' ');
    }
    std::cout << "\n";
  }
  std::cout << "\n";
}

int run_eval(const CommonArgs& args) {
  using namespace webrl;
  RunConfig cfg = parse_config_file(args.out + "/config.txt");
  if (args.seed >= 0) set_config_value(cfg, "seed", std::to_string(args.seed));
  SiteGraph g = load_site(args.out + "/site.json");
  TemplateRegistry reg(g);
  std::vector<TaskInstance> tasks =
      load_task_set(args.out + "/phases/eval_tasks.json").tasks;

  // Newest policy checkpoint available.
  std::string policy_path;
  int at_phase = -1;
  for (int n = cfg.phases; n >= 0; --n) {
    std::string p = args.out + "/checkpoints/policy_phase_" + std::to_string(n) + ".json";
    if (std::ifstream(p).good()) {
      policy_path = p;
      at_phase = n;
      break;
    }
  }
  check(!policy_path.empty(), "eval: no policy checkpoint under " + args.out);
  PolicyParams policy = load_policy(policy_path).params;
  OrmParams orm = load_orm(args.out + "/checkpoints/orm.json");

  RngStream root(cfg.seed);
  EvalResult ev = evaluate(g, reg, policy, orm, tasks, cfg,
                           root.derive("eval-final", 0, 0, 0), true);
  write_text_file(args.out + "/eval.csv", eval_csv(ev));
  std::cout << "phase " << at_phase << " policy on " << ev.n << " held-out tasks: "
            << fmt_g6(ev.success_rate_gt) << " simulator / "
            << fmt_g6(ev.success_rate_orm) << " reward model\n";
  print_csv(args.out + "/eval.csv", "evaluation buckets");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic web-shop agent lab: bootstrap, curriculum training, "
               "evaluation, ablations"};
  app.require_subcommand(1);

  CommonArgs args;
  int ablate_seeds = 5;
  std::string ablate_suite;

  CLI::App* cmd_sft = app.add_subcommand("sft", "run the bootstrap stage only");
  add_common(cmd_sft, args);
  CLI::App* cmd_train = app.add_subcommand("train", "bootstrap + curriculum phases");
  add_common(cmd_train, args);
  CLI::App* cmd_eval =
      app.add_subcommand("eval", "evaluate the newest checkpoint in an output tree");
  add_common(cmd_eval, args);
  CLI::App* cmd_ablate = app.add_subcommand("ablate", "run an ablation suite");
  cmd_ablate
      ->add_option("suite", ablate_suite,
                   "components | perplexity_bands | beta_sweep | critic_data | "
                   "failed_replay | objective_compare")
      ->required();
  cmd_ablate->add_option("--seeds", ablate_seeds, "seeds per variant (default 5)");
  add_common(cmd_ablate, args);
  CLI::App* cmd_report =
      app.add_subcommand("report", "print the tables in an output tree");
  add_common(cmd_report, args);

  CLI11_PARSE(app, argc, argv);

  try {
    if (cmd_sft->parsed()) {
      webrl::run_training(resolve_config(args), args.out, &std::cerr, true);
      std::cout << "bootstrap artifacts written to " << args.out << "\n";
    } else if (cmd_train->parsed()) {
      webrl::RunState st = webrl::run_training(resolve_config(args), args.out, &std::cerr);
      std::cout << "final success rate "
                << webrl::fmt_g6(st.results.back().success_rate_gt) << " (simulator), "
                << "artifacts in " << args.out << "\n";
    } else if (cmd_eval->parsed()) {
      return run_eval(args);
    } else if (cmd_ablate->parsed()) {
      auto rows = webrl::run_ablation(ablate_suite, resolve_config(args), ablate_seeds,
                                      args.out, &std::cerr);
      print_csv(args.out + "/report.csv", "ablation report");
      std::cout << rows.size() << " report rows written to " << args.out
                << "/report.csv\n";
    } else if (cmd_report->parsed()) {
      print_csv(args.out + "/metrics.csv", "training metrics");
      print_csv(args.out + "/orm_eval.csv", "reward model agreement");
      print_csv(args.out + "/eval.csv", "evaluation buckets");
      print_csv(args.out + "/report.csv", "ablation report");
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
