#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cslot/corpus.hpp"
#include "cslot/neural.hpp"
#include "cslot/ontology.hpp"

namespace cslot {

// JS: one head over joint IOB slot tags.
// AC: an IOB head plus one head per dimension.
// ACD1 / ACD1U / ACD2: a stage-1 network (IOB + dimension 1) and a stage-2
// network predicting dimensions 2..k from stage-1 output. ACD1 gathers each
// predicted concept span into a "[concept]" token, ACD1U into the single
// token <CCC>, ACD2 feeds the predicted concept as an extra input stream.
enum class ModelKind { JS, AC, ACD1, ACD1U, ACD2 };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);  // throws ConfigError
bool is_acd(ModelKind kind);

inline constexpr std::string_view kUnifiedConceptToken = "<CCC>";
inline const std::vector<std::string> kIobLabels = {"O", "B", "I"};

struct TrainingConfig {
  double learning_rate = 0.016;  // used only when lr_grid is empty
  std::vector<double> lr_grid = {0.008, 0.016, 0.024, 0.032, 0.04};
  std::size_t epochs = 100;
  double dropout = 0.5;
  double init_range = 0.2;
  std::uint64_t seed = 1;
  std::size_t embedding_dim = 100;
  std::size_t hidden_dim = 100;
  std::size_t concept_embedding_dim = 20;
  // Also record the dropout-free training loss after every epoch.
  bool track_clean_loss = false;

  std::vector<double> grid() const;
  void validate() const;  // throws ConfigError
};

struct ModelDims {
  std::size_t embedding = 100;
  std::size_t hidden = 100;
  std::size_t concept_embedding = 20;
  double init_range = 0.2;
};

struct TaggerModel {
  ModelKind kind = ModelKind::JS;
  Ontology ontology;
  TokenVocabulary vocab;
  ModelDims dims;
  ModelParams stage1;
  // ACD only.
  std::optional<ModelParams> stage2;
  // ACD1 / ACD1U: word vocabulary followed by gathered concept tokens.
  TokenVocabulary stage2_vocab;
};

// Fresh model with heads derived from the ontology.
TaggerModel make_model(ModelKind kind, const Ontology& ontology, const TokenVocabulary& vocab,
                       const ModelDims& dims, std::uint64_t seed);

// Per head, per position probability vectors.
struct PredictionLattice {
  std::vector<Matrix> heads;  // classes x n

  std::size_t length() const { return heads.empty() ? 0 : static_cast<std::size_t>(heads.front().cols()); }
};

// Per-dimension argmax; maximizes the product of the dimension probabilities.
std::vector<std::size_t> best_branch(std::span<const Vector> dimension_probs);

// "O" for IOB 'O' or the all-null branch, else "<IOB>-<slot name>".
std::string compose_tag(char iob, const ConceptBranch& branch, const Ontology& ontology);

InputSequence encode_words(const TokenVocabulary& vocab, std::span<const std::string> tokens);

struct AcDecoding {
  std::vector<std::string> tags;
  std::vector<char> iob;
  std::vector<ConceptBranch> branches;
};

std::vector<std::string> decode_js(const TaggerModel& model, std::span<const std::string> tokens);
AcDecoding decode_ac(const TaggerModel& model, std::span<const std::string> tokens);
std::vector<std::string> decode_acd(const TaggerModel& model, std::span<const std::string> tokens);
std::vector<std::string> decode(const TaggerModel& model, std::span<const std::string> tokens);

// Predicted tags for each utterance of an already preprocessed corpus.
Corpus decode_corpus(const TaggerModel& model, const Corpus& corpus);

// ---- ACD stage-2 inputs ----

struct Stage1Output {
  std::vector<char> iob;
  std::vector<std::size_t> concept_ids;  // index into the stage-1 dimension-1 head
};

struct Stage2Input {
  InputSequence input;
  // Original [start, end) positions covered by each stage-2 position.
  std::vector<std::pair<std::size_t, std::size_t>> groups;
};

Stage1Output run_stage1(const TaggerModel& model, const InputSequence& words);
// Gathers (ACD1/ACD1U) or augments (ACD2) the word sequence.
Stage2Input build_stage2_input(const TaggerModel& model, std::span<const std::size_t> word_ids,
                               const Stage1Output& stage1);
// Human-readable gathered sequence, e.g. "from [city_name] to [city_name]".
std::vector<std::string> gathered_tokens(const TaggerModel& model, std::span<const std::string> tokens,
                                         const Stage1Output& stage1);

// ---- training ----

struct EpochRecord {
  double learning_rate = 0.0;
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double clean_loss = 0.0;  // NaN unless track_clean_loss
  double valid_f1 = 0.0;    // NaN without a validation set
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  double initial_clean_loss = 0.0;  // NaN unless track_clean_loss
  double best_learning_rate = 0.0;
  std::size_t best_epoch = 0;
  double best_f1 = 0.0;
};

struct TrainResult {
  TaggerModel model;
  TrainingLog log;
};

// Grid search: every learning rate trains from the same initialization for
// `epochs` epochs of seeded-shuffle, per-utterance SGD; the snapshot with the
// best validation F1 over all epochs and rates is returned. Corpora must be
// preprocessed with `vocab`. ACD kinds train stage 1 and then stage 2.
TrainResult train(ModelKind kind, const Ontology& ontology, const TokenVocabulary& vocab, const Corpus& train_set,
                  const Corpus& valid_set, const TrainingConfig& config);

// Continues training all parameters of an existing JS/AC model (or stage 1
// of an ACD model) with the same grid-search/selection rule.
TrainResult fine_tune(const TaggerModel& model, const Corpus& train_set, const Corpus& valid_set,
                      const TrainingConfig& config);

// Trains stage 2 of an ACD model with stage 1 frozen. Stage-2 inputs come
// from stage-1 predictions, or from gold labels when teacher_forcing is set.
// Creates stage 2 when the model has none.
TrainResult train_acd(const TaggerModel& model, const Corpus& train_set, const Corpus& valid_set,
                      const TrainingConfig& config, bool teacher_forcing = false);

// Gold label indices per head for one utterance (stage 1). Throws
// LabelNotInOntology.
std::vector<std::vector<std::size_t>> stage1_gold(const TaggerModel& model, const TaggedUtterance& u);

// ---- transfer ----

// Extends output heads for target atoms/slots absent from the model (new
// rows uniform(-r, r)), adds heads for new dimensions and, for ACD kinds, a
// freshly initialized stage-2 network. Existing parameters are preserved
// bit-exactly. Throws DepthMismatch.
TaggerModel adjust_nn_arch(const TaggerModel& model, const Ontology& source, const Ontology& target,
                           std::uint64_t seed);

enum class Preset { JS_T, AC_T, JS_TS, AC_TS, ACD_TS_1, ACD_TS_1U, ACD_TS_2 };

std::string_view to_string(Preset p);
Preset parse_preset(std::string_view name);  // throws ConfigError
const std::vector<Preset>& all_presets();
ModelKind preset_kind(Preset p);
bool uses_source(Preset p);

struct AdaptData {
  const Ontology* source_ontology = nullptr;
  const Ontology* target_ontology = nullptr;
  const TokenVocabulary* vocab = nullptr;
  const Corpus* source_train = nullptr;
  const Corpus* source_valid = nullptr;
  const Corpus* target_train = nullptr;
  const Corpus* target_valid = nullptr;
};

struct AdaptResult {
  TaggerModel model;
  TrainingLog source_log;
  TrainingLog target_log;
};

// Step 2 only: the network trained on the source data. JS presets give a JS
// model, all atomic-concept presets share one AC model.
TrainResult pretrain_source(Preset preset, const AdaptData& data, const TrainingConfig& config);

// Steps 3-4 from a pretrained source model.
AdaptResult finish_adaptation(Preset preset, const TrainResult& source, const AdaptData& data,
                              const TrainingConfig& target_config);

// Random init, train on source, adjust_nn_arch, fine-tune on target. *_T
// presets train on the target only.
AdaptResult adapt(Preset preset, const AdaptData& data, const TrainingConfig& source_config,
                  const TrainingConfig& target_config);

// ---- persistence ----

// Directory with manifest.txt, ontology.txt, vocab.txt, stage1.ckpt and,
// for ACD models, stage2.ckpt and stage2_vocab.txt.
void save_model(const TaggerModel& model, const std::filesystem::path& dir,
                const std::map<std::string, std::string>& extra_manifest = {});
TaggerModel load_model(const std::filesystem::path& dir);

}  // namespace cslot
