#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "cslot/eval.hpp"
#include "cslot/models.hpp"
#include "cslot/synthetic.hpp"

namespace cslot {

// Refinement sweep on synthetic data: a coarse source corpus labeled with the
// dimension-1 collapse of the target ontology, and nested target subsets.
struct CurveConfig {
  std::size_t source_sentences = 2000;
  std::size_t target_pool = 1000;  // subsets are prefixes of one shuffled pool
  std::size_t valid_sentences = 200;
  std::size_t test_sentences = 500;
  std::vector<std::size_t> subset_sizes = {50, 100, 500};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<Preset> presets = all_presets();
  // Subset size at which the perturbed (unmatched) test set is scored; 0
  // disables it.
  std::size_t perturbed_subset = 100;
  TrainingConfig source_config;
  TrainingConfig target_config;
};

// Compact defaults that keep a full 5-seed sweep within desk budgets.
CurveConfig desk_curve_config();

struct CurveCell {
  Preset preset = Preset::JS_T;
  std::size_t subset = 0;
  std::uint64_t seed = 0;
  double f1 = 0.0;
  double perturbed_f1 = -1.0;  // negative when not scored
};

struct CurveResult {
  std::vector<CurveCell> cells;

  // Mean/stddev of F1 per preset at one subset size.
  std::vector<RunSummary> summary(std::size_t subset, bool perturbed = false) const;
  // Mean F1 of one preset at one subset size.
  double mean(Preset preset, std::size_t subset, bool perturbed = false) const;
};

using CurveProgress = std::function<void(const CurveCell&)>;

CurveResult run_curve(const GrammarConfig& grammar, const Ontology& target, const CurveConfig& config,
                      const CurveProgress& progress = {});

// One row per preset, one column per subset size: "system<TAB>50<TAB>100...".
std::string format_curve_table(const CurveResult& result, const std::vector<std::size_t>& subsets,
                               bool perturbed = false);

}  // namespace cslot
