#include "cslot/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>
#include <sstream>

#include "cslot/error.hpp"

namespace cslot {

CurveConfig desk_curve_config() {
  CurveConfig c;
  TrainingConfig t;
  t.embedding_dim = 32;
  t.hidden_dim = 32;
  t.concept_embedding_dim = 8;
  t.dropout = 0.2;
  t.lr_grid = {0.016, 0.032};
  t.epochs = 50;
  c.source_config = t;
  c.source_config.lr_grid = {0.024};
  c.source_config.epochs = 10;
  c.target_config = t;
  return c;
}

std::vector<RunSummary> CurveResult::summary(std::size_t subset, bool perturbed) const {
  std::map<std::string, std::vector<double>> f1;
  for (const auto& c : cells) {
    if (c.subset != subset) continue;
    const double v = perturbed ? c.perturbed_f1 : c.f1;
    if (v >= 0.0) f1[std::string(to_string(c.preset))].push_back(v);
  }
  return compare_runs(f1);
}

double CurveResult::mean(Preset preset, std::size_t subset, bool perturbed) const {
  for (const auto& s : summary(subset, perturbed))
    if (s.system == to_string(preset)) return s.mean;
  return -1.0;
}

namespace {

Corpus apply_vocab(const Corpus& c, const TokenVocabulary& v) { return preprocess(c, v).first; }

double score(const TaggerModel& m, const Corpus& test) { return evaluate(test, decode_corpus(m, test)).f1(); }

}  // namespace

CurveResult run_curve(const GrammarConfig& grammar, const Ontology& target, const CurveConfig& config,
                      const CurveProgress& progress) {
  for (auto n : config.subset_sizes)
    if (n == 0 || n > config.target_pool) throw ConfigError("subset size " + std::to_string(n) + " exceeds the target pool");
  const auto collapsed = collapse_ontology(target, 1);
  CurveResult result;

  for (std::uint64_t seed : config.seeds) {
    TrainingConfig scfg = config.source_config;
    TrainingConfig tcfg = config.target_config;
    scfg.seed = derive_seed(seed, 1);
    tcfg.seed = derive_seed(seed, 2);

    const Corpus pool = generate_synthetic(grammar, target, config.target_pool, derive_seed(seed, 10));
    const Corpus valid = generate_synthetic(grammar, target, config.valid_sentences, derive_seed(seed, 11));
    const Corpus test = generate_synthetic(grammar, target, config.test_sentences, derive_seed(seed, 12));
    const Corpus source = relabel_collapse(
        generate_synthetic(grammar, target, config.source_sentences, derive_seed(seed, 13)), collapsed.mapping);

    // Source-side vocabulary, shared by every transfer preset of this seed.
    auto [source_pp, source_vocab] = preprocess(source);
    const Corpus source_valid = apply_vocab(relabel_collapse(valid, collapsed.mapping), source_vocab);
    std::optional<TrainResult> js_source;
    std::optional<TrainResult> ac_source;

    for (std::size_t n : config.subset_sizes) {
      const Corpus train_raw = sample_subset(pool, n, derive_seed(seed, 14));
      const bool with_perturbed = n == config.perturbed_subset;
      const Corpus perturbed =
          with_perturbed ? perturb_test_set(train_raw, test, target, derive_seed(seed, 15)) : Corpus{};

      auto [target_only_pp, target_vocab] = preprocess(train_raw);
      for (Preset preset : config.presets) {
        const bool transfer = uses_source(preset);
        const TokenVocabulary& vocab = transfer ? source_vocab : target_vocab;
        const Corpus train_pp = transfer ? apply_vocab(train_raw, vocab) : target_only_pp;
        const Corpus valid_pp = apply_vocab(valid, vocab);
        AdaptData data{&collapsed.ontology, &target, &vocab, &source_pp, &source_valid, &train_pp, &valid_pp};

        TaggerModel model;
        if (transfer) {
          auto& cached = preset_kind(preset) == ModelKind::JS ? js_source : ac_source;
          if (!cached) cached = pretrain_source(preset, data, scfg);
          model = finish_adaptation(preset, *cached, data, tcfg).model;
        } else {
          model = adapt(preset, data, scfg, tcfg).model;
        }
        CurveCell cell{preset, n, seed, score(model, apply_vocab(test, vocab)), -1.0};
        if (with_perturbed) cell.perturbed_f1 = score(model, apply_vocab(perturbed, vocab));
        if (progress) progress(cell);
        result.cells.push_back(cell);
      }
    }
  }
  return result;
}

std::string format_curve_table(const CurveResult& result, const std::vector<std::size_t>& subsets, bool perturbed) {
  std::vector<Preset> presets;
  for (const auto& c : result.cells)
    if (std::find(presets.begin(), presets.end(), c.preset) == presets.end()) presets.push_back(c.preset);
  std::ostringstream out;
  out << "system";
  for (auto n : subsets) out << '\t' << n;
  out << '\n';
  for (Preset p : presets) {
    out << to_string(p);
    for (auto n : subsets) {
      const double m = result.mean(p, n, perturbed);
      char buf[32];
      if (m < 0.0)
        std::snprintf(buf, sizeof buf, "\t-");
      else
        std::snprintf(buf, sizeof buf, "\t%.2f", round_percent(m));
      out << buf;
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace cslot
