// Minimal end-to-end run at reduced scale: bootstrap a policy on a small
// seed pool, train two curriculum phases, and print the per-phase scores.
// Finishes in well under a minute and leaves its artifacts in ./quickstart_out.

#include <iostream>

#include "webrl/webrl.hpp"

int main() {
  webrl::RunConfig cfg;
  cfg.seed = 7;
  cfg.phases = 2;
  cfg.tasks_per_phase = 24;
  cfg.seed_tasks = 60;
  cfg.eval_tasks = 40;
  cfg.orm_random_rollouts = 2;
  cfg.orm_policy_rollouts = 2;

  webrl::RunState st = webrl::run_training(cfg, "quickstart_out", &std::cerr);

  std::cout << "\nphase  eval(simulator)  eval(reward model)  buffer\n";
  for (const auto& r : st.results)
    std::cout << r.phase << "      " << webrl::fmt_g6(r.success_rate_gt)
              << "             " << webrl::fmt_g6(r.success_rate_orm)
              << "                " << r.buffer_size << "\n";
  std::cout << "\nartifacts: quickstart_out/metrics.csv, eval.csv, checkpoints/\n";
  return 0;
}
