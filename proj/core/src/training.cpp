#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "cslot/error.hpp"
#include "cslot/eval.hpp"
#include "cslot/models.hpp"

namespace cslot {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// RNG stream ids, mixed with the master seed.
constexpr std::uint64_t kInitStream = 11;
constexpr std::uint64_t kStage1Stream = 21;
constexpr std::uint64_t kStage2Stream = 22;
constexpr std::uint64_t kAdjustStream = 31;

using Validator = std::function<double(const ModelParams&)>;

struct FitResult {
  ModelParams params;
  TrainingLog log;
};

// Grid search over learning rates; every candidate starts from `init`.
FitResult fit(const ModelParams& init, const std::vector<TrainingExample>& examples, const Validator& validate,
              const TrainingConfig& config, std::uint64_t stream) {
  FitResult out{init, {}};
  TrainingLog& log = out.log;
  log.initial_clean_loss = config.track_clean_loss ? total_loss(init, examples) : kNaN;
  log.best_f1 = kNaN;
  const auto grid = config.grid();
  log.best_learning_rate = grid.front();
  if (config.epochs == 0) return out;

  double best_f1 = -1.0;
  double best_loss = std::numeric_limits<double>::infinity();
  ModelParams grad = init.zeros_like();
  std::vector<std::size_t> order(examples.size());

  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double lr = grid[c];
    ModelParams p = init;
    Rng dropout_rng(derive_seed(config.seed, stream, 1000 + c));
    double last_loss = 0.0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(derive_seed(config.seed, stream, epoch));
      shuffle_rng.shuffle(order.begin(), order.end());
      double loss = 0.0;
      for (std::size_t i : order) {
        const auto& ex = examples[i];
        if (ex.input.length() == 0) continue;
        grad.set_zero();
        DropoutMask mask;
        const DropoutMask* mp = nullptr;
        if (config.dropout > 0.0) {
          mask = sample_dropout(p, ex.input.length(), config.dropout, dropout_rng);
          mp = &mask;
        }
        loss += accumulate_gradients(p, ex, mp, grad);
        sgd_step(p, grad, lr);
      }
      last_loss = loss;
      EpochRecord rec{lr, epoch, loss, config.track_clean_loss ? total_loss(p, examples) : kNaN, kNaN};
      if (validate) {
        rec.valid_f1 = validate(p);
        if (rec.valid_f1 > best_f1) {
          best_f1 = rec.valid_f1;
          out.params = p;
          log.best_learning_rate = lr;
          log.best_epoch = epoch;
          log.best_f1 = best_f1;
        }
      }
      log.epochs.push_back(rec);
    }
    if (!validate && last_loss < best_loss) {
      best_loss = last_loss;
      out.params = std::move(p);
      log.best_learning_rate = lr;
      log.best_epoch = config.epochs;
    }
  }
  return out;
}

ModelDims dims_of(const TrainingConfig& c) {
  return {c.embedding_dim, c.hidden_dim, c.concept_embedding_dim, c.init_range};
}

// Reference tags reduced to what a stage-1 ACD network can express: the
// dimension-1 atom, higher dimensions null.
Corpus dimension1_reference(const Corpus& corpus, const Ontology& o) {
  Corpus out = corpus;
  for (auto& u : out.utterances)
    for (auto& tag : u.tags) {
      auto parts = split_tag(tag);
      if (!parts || parts->first == 'O') continue;
      std::vector<std::string> atoms(o.depth(), std::string(kNullAtom));
      atoms[0] = o.slot_to_branch(parts->second)[0];
      tag = compose_tag(parts->first, ConceptBranch(std::move(atoms)), o);
    }
  return out;
}

std::vector<std::vector<std::string>> decode_all(const TaggerModel& m, const Corpus& c) {
  std::vector<std::vector<std::string>> tags;
  tags.reserve(c.size());
  for (const auto& u : c.utterances) tags.push_back(decode(m, u.tokens));
  return tags;
}

// Concatenates a stage log after another, keeping the later selection.
void append_log(TrainingLog& into, const TrainingLog& later) {
  into.epochs.insert(into.epochs.end(), later.epochs.begin(), later.epochs.end());
  into.best_learning_rate = later.best_learning_rate;
  into.best_epoch = later.best_epoch;
  into.best_f1 = later.best_f1;
}

// Stage-1 inputs assuming gold IOB and dimension-1 labels.
Stage1Output gold_stage1(const TaggerModel& m, const TaggedUtterance& u) {
  const auto gold = stage1_gold(m, u);
  Stage1Output s;
  for (std::size_t t = 0; t < u.size(); ++t) {
    s.iob.push_back(m.stage1.heads[0].labels[gold[0][t]][0]);
    s.concept_ids.push_back(gold[1][t]);
  }
  return s;
}

void check_trainable(const Corpus& train_set, const TrainingConfig& config) {
  config.validate();
  if (train_set.empty()) throw EmptyCorpus("training corpus is empty");
}

// The frozen word columns of stage 2 mirror the stage-1 embedding.
void share_word_embeddings(TaggerModel& m) {
  const auto& words = m.stage1.embeddings.at(0).table;
  auto& table = m.stage2->embeddings.at(0);
  table.table.leftCols(words.cols()) = words;
  table.frozen = static_cast<std::size_t>(words.cols());
}

}  // namespace

TrainResult fine_tune(const TaggerModel& model, const Corpus& train_set, const Corpus& valid_set,
                      const TrainingConfig& config) {
  check_trainable(train_set, config);
  std::vector<TrainingExample> examples;
  examples.reserve(train_set.size());
  for (const auto& u : train_set.utterances)
    examples.push_back({encode_words(model.vocab, u.tokens), stage1_gold(model, u)});

  Validator validate;
  if (!valid_set.empty()) {
    TaggerModel scratch = model;
    scratch.stage2.reset();
    const Corpus reference = is_acd(model.kind) ? dimension1_reference(valid_set, model.ontology) : valid_set;
    validate = [scratch, reference](const ModelParams& p) mutable {
      scratch.stage1 = p;
      return evaluate(reference, decode_all(scratch, reference)).f1();
    };
  }
  auto fitted = fit(model.stage1, examples, validate, config, kStage1Stream);
  TrainResult result{model, std::move(fitted.log)};
  result.model.stage1 = std::move(fitted.params);
  return result;
}

TrainResult train_acd(const TaggerModel& model, const Corpus& train_set, const Corpus& valid_set,
                      const TrainingConfig& config, bool teacher_forcing) {
  if (!is_acd(model.kind)) throw ConfigError("train_acd needs an ACD model");
  if (model.ontology.depth() < 2) throw DepthMismatch("stage 2 needs an ontology of depth >= 2");
  check_trainable(train_set, config);
  TaggerModel m = model;
  if (!m.stage2) {
    // adjust_nn_arch attaches stage 2; reuse it on an identical ontology.
    m = adjust_nn_arch(m, m.ontology, m.ontology, derive_seed(config.seed, kAdjustStream));
  }
  share_word_embeddings(m);

  const auto& heads = m.stage2->heads;
  std::vector<TrainingExample> examples;
  examples.reserve(train_set.size());
  for (const auto& u : train_set.utterances) {
    const auto words = encode_words(m.vocab, u.tokens);
    const auto s1 = teacher_forcing ? gold_stage1(m, u) : run_stage1(m, words);
    auto s2 = build_stage2_input(m, words.ids[0], s1);
    TrainingExample ex{std::move(s2.input), std::vector<std::vector<std::size_t>>(heads.size())};
    for (const auto& [start, end] : s2.groups) {
      std::vector<std::string> atoms(m.ontology.depth(), std::string(kNullAtom));
      auto parts = split_tag(u.tags[start]);
      if (!parts) throw LabelNotInOntology("malformed tag '" + u.tags[start] + "'");
      if (parts->first != 'O') {
        if (!m.ontology.has_slot(parts->second))
          throw LabelNotInOntology("slot '" + std::string(parts->second) + "' is not in the ontology");
        atoms = m.ontology.slot_to_branch(parts->second).atoms();
      }
      for (std::size_t h = 0; h < heads.size(); ++h) {
        const auto idx = heads[h].find(atoms[h + 1]);
        if (idx == heads[h].classes()) throw LabelNotInOntology("atom '" + atoms[h + 1] + "' has no stage-2 class");
        ex.gold[h].push_back(idx);
      }
    }
    examples.push_back(std::move(ex));
  }

  Validator validate;
  if (!valid_set.empty()) {
    validate = [scratch = m, &valid_set](const ModelParams& p) mutable {
      scratch.stage2 = p;
      return evaluate(valid_set, decode_all(scratch, valid_set)).f1();
    };
  }
  auto fitted = fit(*m.stage2, examples, validate, config, kStage2Stream);
  TrainResult result{std::move(m), std::move(fitted.log)};
  result.model.stage2 = std::move(fitted.params);
  return result;
}

TrainResult train(ModelKind kind, const Ontology& ontology, const TokenVocabulary& vocab, const Corpus& train_set,
                  const Corpus& valid_set, const TrainingConfig& config) {
  check_trainable(train_set, config);
  TaggerModel model = make_model(kind, ontology, vocab, dims_of(config), derive_seed(config.seed, kInitStream));
  if (config.epochs == 0) return {std::move(model), {}};
  auto stage1 = fine_tune(model, train_set, valid_set, config);
  if (!is_acd(kind) || ontology.depth() < 2) return stage1;
  auto stage2 = train_acd(stage1.model, train_set, valid_set, config);
  append_log(stage1.log, stage2.log);
  stage1.model = std::move(stage2.model);
  return stage1;
}

TrainResult pretrain_source(Preset preset, const AdaptData& data, const TrainingConfig& config) {
  if (!uses_source(preset)) throw ConfigError(std::string(to_string(preset)) + " does not use source data");
  if (!data.source_ontology || !data.vocab || !data.source_train) throw ConfigError("source data missing");
  const ModelKind kind = preset_kind(preset) == ModelKind::JS ? ModelKind::JS : ModelKind::AC;
  static const Corpus kNone;
  return train(kind, *data.source_ontology, *data.vocab, *data.source_train,
               data.source_valid ? *data.source_valid : kNone, config);
}

AdaptResult finish_adaptation(Preset preset, const TrainResult& source, const AdaptData& data,
                              const TrainingConfig& target_config) {
  if (!data.source_ontology || !data.target_ontology) throw ConfigError("ontologies missing");
  static const Corpus kNone;
  const Corpus& train_set = data.target_train ? *data.target_train : kNone;
  const Corpus& valid_set = data.target_valid ? *data.target_valid : kNone;

  TaggerModel m = source.model;
  m.kind = preset_kind(preset);
  m = adjust_nn_arch(m, *data.source_ontology, *data.target_ontology,
                     derive_seed(target_config.seed, kAdjustStream));
  AdaptResult out{std::move(m), source.log, {}};
  if (train_set.empty() || target_config.epochs == 0) return out;

  // ACD keeps the source-trained stage 1 fixed and only trains stage 2.
  auto tuned = is_acd(out.model.kind) && out.model.ontology.depth() >= 2
                   ? train_acd(out.model, train_set, valid_set, target_config)
                   : fine_tune(out.model, train_set, valid_set, target_config);
  out.target_log = std::move(tuned.log);
  out.model = std::move(tuned.model);
  return out;
}

AdaptResult adapt(Preset preset, const AdaptData& data, const TrainingConfig& source_config,
                  const TrainingConfig& target_config) {
  if (!data.target_ontology || !data.vocab) throw ConfigError("target ontology and vocabulary are required");
  if (!uses_source(preset)) {
    if (!data.target_train) throw EmptyCorpus("target training corpus is missing");
    static const Corpus kNone;
    auto r = train(preset_kind(preset), *data.target_ontology, *data.vocab, *data.target_train,
                   data.target_valid ? *data.target_valid : kNone, target_config);
    return {std::move(r.model), {}, std::move(r.log)};
  }
  const auto source = pretrain_source(preset, data, source_config);
  return finish_adaptation(preset, source, data, target_config);
}

}  // namespace cslot
