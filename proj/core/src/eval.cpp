#include "cslot/eval.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "cslot/error.hpp"

namespace cslot {

double ChunkCounts::precision() const {
  return predicted == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(predicted);
}

double ChunkCounts::recall() const {
  return reference == 0 ? 0.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(reference);
}

double ChunkCounts::f1() const {
  const double p = precision();
  const double r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

double EvalReport::token_accuracy() const {
  return tokens == 0 ? 0.0 : 100.0 * static_cast<double>(correct_tokens) / static_cast<double>(tokens);
}

EvalReport evaluate(const Corpus& reference, std::span<const std::vector<std::string>> predicted) {
  if (reference.size() != predicted.size())
    throw LengthMismatch("reference has " + std::to_string(reference.size()) + " utterances, prediction has " +
                         std::to_string(predicted.size()));
  EvalReport report;
  for (std::size_t u = 0; u < reference.size(); ++u) {
    const auto& ref = reference.utterances[u];
    const auto& pred = predicted[u];
    if (ref.tags.size() != pred.size())
      throw LengthMismatch("utterance " + std::to_string(u) + ": " + std::to_string(ref.tags.size()) +
                           " reference tags vs " + std::to_string(pred.size()) + " predicted");
    for (std::size_t i = 0; i < pred.size(); ++i) {
      ++report.tokens;
      if (ref.tags[i] == pred[i]) ++report.correct_tokens;
    }
    const auto ref_spans = iob_to_spans(ref.tags);
    const auto pred_spans = iob_to_spans(pred);
    std::set<std::tuple<std::size_t, std::size_t, std::string>> gold;
    for (const auto& s : ref_spans) {
      gold.emplace(s.start, s.end, s.slot);
      ++report.per_slot[s.slot].reference;
      ++report.overall.reference;
    }
    for (const auto& s : pred_spans) {
      auto& slot = report.per_slot[s.slot];
      ++slot.predicted;
      ++report.overall.predicted;
      if (gold.contains({s.start, s.end, s.slot})) {
        ++slot.correct;
        ++report.overall.correct;
      }
    }
  }
  return report;
}

EvalReport evaluate(const Corpus& reference, const Corpus& predicted) {
  std::vector<std::vector<std::string>> tags;
  tags.reserve(predicted.size());
  for (const auto& u : predicted.utterances) tags.push_back(u.tags);
  return evaluate(reference, tags);
}

double round_percent(double value) { return std::floor(value * 100.0 + 0.5) / 100.0; }

namespace {

std::string fixed2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%6.2f", round_percent(v));
  return buf;
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream out;
  out << "processed " << r.tokens << " tokens with " << r.overall.reference << " phrases; found: "
      << r.overall.predicted << " phrases; correct: " << r.overall.correct << ".\n";
  out << "accuracy: " << fixed2(r.token_accuracy()) << "%; precision: " << fixed2(r.precision())
      << "%; recall: " << fixed2(r.recall()) << "%; FB1: " << fixed2(r.f1()) << '\n';
  for (const auto& [slot, c] : r.per_slot) {
    char name[256];
    std::snprintf(name, sizeof name, "%17s", slot.c_str());
    out << name << ": precision: " << fixed2(c.precision()) << "%; recall: " << fixed2(c.recall())
        << "%; FB1: " << fixed2(c.f1()) << "  " << c.predicted << '\n';
  }
  return out.str();
}

std::string format_report_tsv(const EvalReport& r) {
  std::ostringstream out;
  auto line = [&out](const std::string& name, const ChunkCounts& c) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "\t%.2f\t%.2f\t%.2f\n", round_percent(c.precision()), round_percent(c.recall()),
                  round_percent(c.f1()));
    out << name << buf;
  };
  for (const auto& [slot, c] : r.per_slot) line(slot, c);
  line("overall", r.overall);
  return out.str();
}

std::vector<RunSummary> compare_runs(const std::map<std::string, std::vector<double>>& f1_by_system) {
  std::vector<RunSummary> out;
  for (const auto& [system, values] : f1_by_system) {
    RunSummary s{system, values.size(), 0.0, 0.0};
    if (!values.empty()) {
      for (double v : values) s.mean += v;
      s.mean /= static_cast<double>(values.size());
      if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<RunSummary> compare_runs(const std::map<std::string, std::vector<EvalReport>>& reports) {
  std::map<std::string, std::vector<double>> f1;
  for (const auto& [system, rs] : reports)
    for (const auto& r : rs) f1[system].push_back(r.f1());
  return compare_runs(f1);
}

}  // namespace cslot
