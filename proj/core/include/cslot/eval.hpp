#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cslot/corpus.hpp"

namespace cslot {

struct ChunkCounts {
  std::size_t reference = 0;
  std::size_t predicted = 0;
  std::size_t correct = 0;

  // Percentages. Precision is 0 when nothing was predicted, recall 0 when
  // there is no reference chunk, F1 0 when P + R = 0.
  double precision() const;
  double recall() const;
  double f1() const;
};

// Chunk-level scores computed the way conlleval does. Percentages are kept
// unrounded; use round_percent for display.
struct EvalReport {
  ChunkCounts overall;
  std::map<std::string, ChunkCounts> per_slot;
  std::size_t tokens = 0;
  std::size_t correct_tokens = 0;

  double precision() const { return overall.precision(); }
  double recall() const { return overall.recall(); }
  double f1() const { return overall.f1(); }
  double token_accuracy() const;
};

// Throws LengthMismatch when utterance or token counts differ.
EvalReport evaluate(const Corpus& reference, std::span<const std::vector<std::string>> predicted);
EvalReport evaluate(const Corpus& reference, const Corpus& predicted);

// Half-up rounding to two decimals.
double round_percent(double value);

// conlleval-style aligned text block.
std::string format_report(const EvalReport& report);
// One "slot<TAB>P<TAB>R<TAB>F1" line per slot, then an "overall" line.
std::string format_report_tsv(const EvalReport& report);

struct RunSummary {
  std::string system;
  std::size_t runs = 0;
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation; 0 for a single run
};

// Per-system mean and sample standard deviation of F1.
std::vector<RunSummary> compare_runs(const std::map<std::string, std::vector<double>>& f1_by_system);
std::vector<RunSummary> compare_runs(const std::map<std::string, std::vector<EvalReport>>& reports);

}  // namespace cslot
