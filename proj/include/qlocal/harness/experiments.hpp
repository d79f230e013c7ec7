#pragma once

#include "qlocal/harness/config.hpp"
#include "qlocal/harness/records.hpp"

namespace qlocal::harness {

ExperimentResult run_lr_cone(const ExperimentConfig& cfg);
ExperimentResult run_weak_step(const ExperimentConfig& cfg);
ExperimentResult run_transport(const ExperimentConfig& cfg);
ExperimentResult run_impurity_lppl(const ExperimentConfig& cfg);
ExperimentResult run_clustering(const ExperimentConfig& cfg);
ExperimentResult run_tqo(const ExperimentConfig& cfg);
ExperimentResult run_kato_flow(const ExperimentConfig& cfg);
ExperimentResult run_ct_profile(const ExperimentConfig& cfg);
ExperimentResult run_sequential_coupling(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment and fills in the wall time.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace qlocal::harness
