#pragma once

#include <memory>
#include <vector>

#include "stt/boundary.hpp"
#include "stt/config.hpp"
#include "stt/diffeo.hpp"
#include "stt/report.hpp"

namespace stt {

// The canonical constructed pair: a special-form analytic family g1 (the
// orthogonal assumption holds by construction) and its pullback g2 = Psi^* g1
// by a boundary-fixing test diffeomorphism. The two share all boundary data
// while differing in the interior.
struct TestPair {
  std::shared_ptr<BumpMetric> g1;
  std::shared_ptr<BumpDiffeo> psi;
  std::shared_ptr<PullbackMetric> g2;
};

TestPair make_test_pair(const ExperimentConfig& cfg, double eps_override = -1.0,
                        bool h_only = false);

// An independent special-form metric (different boundary data): the negative
// control for every equal-data claim.
std::shared_ptr<BumpMetric> make_control_metric(const ExperimentConfig& cfg,
                                                bool h_only = false);

// Runs the acceptance criteria (all of them, or the listed subset) at their
// pinned tolerances. Criterion ids are 1..13.
std::vector<CriterionResult> run_acceptance(const ExperimentConfig& cfg,
                                            const std::vector<int>& only = {});

// The experiment harness: dispatches cfg.experiment, writes report.json, CSV
// artifacts and the MANIFEST into cfg.out_dir, and returns the report.
RunReport run_experiment(const ExperimentConfig& cfg);

// Long-format plot data (parameter, value) per experiment section.
void emit_plot_data(const RunReport& report, const std::string& dir);

}  // namespace stt
