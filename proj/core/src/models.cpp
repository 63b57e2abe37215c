#include "cslot/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cslot/error.hpp"

namespace cslot {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::JS: return "JS";
    case ModelKind::AC: return "AC";
    case ModelKind::ACD1: return "ACD1";
    case ModelKind::ACD1U: return "ACD1U";
    case ModelKind::ACD2: return "ACD2";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::JS, ModelKind::AC, ModelKind::ACD1, ModelKind::ACD1U, ModelKind::ACD2})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

bool is_acd(ModelKind kind) {
  return kind == ModelKind::ACD1 || kind == ModelKind::ACD1U || kind == ModelKind::ACD2;
}

std::vector<double> TrainingConfig::grid() const {
  return lr_grid.empty() ? std::vector<double>{learning_rate} : lr_grid;
}

void TrainingConfig::validate() const {
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (!(init_range > 0.0)) throw ConfigError("init range must be positive");
  if (embedding_dim == 0 || hidden_dim == 0 || concept_embedding_dim == 0)
    throw ConfigError("layer sizes must be positive");
  for (double lr : grid())
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("learning rates must be finite and non-negative");
}

namespace {

std::vector<std::string> joint_labels(const Ontology& o) {
  std::vector<std::string> labels{"O"};
  for (const auto& s : o.slots()) {
    labels.push_back("B-" + s);
    labels.push_back("I-" + s);
  }
  return labels;
}

std::size_t null_index(const SoftmaxHead& head) { return head.find(std::string(kNullAtom)); }

std::string bracket(const std::string& atom) { return "[" + atom + "]"; }

// Stage-2 network reading stage-1 output. Word embeddings are copied from
// stage 1 and frozen.
void attach_stage2(TaggerModel& m, std::uint64_t seed) {
  const auto& dim1 = m.stage1.heads.at(1);
  const auto& words = m.stage1.embeddings.at(0);
  std::vector<std::vector<std::string>> heads;
  for (std::size_t d = 1; d < m.ontology.depth(); ++d) heads.push_back(m.ontology.dimension(d).ordered());

  ModelShape shape;
  shape.hidden = m.dims.hidden;
  shape.head_labels = heads;
  if (m.kind == ModelKind::ACD2) {
    shape.vocab_sizes = {words.entries(), dim1.classes()};
    shape.embedding_dims = {words.dim(), m.dims.concept_embedding};
  } else {
    m.stage2_vocab = m.vocab;
    if (m.kind == ModelKind::ACD1) {
      for (const auto& label : dim1.labels)
        if (label != kNullAtom) m.stage2_vocab.add(bracket(label));
    } else {
      m.stage2_vocab.add(std::string(kUnifiedConceptToken));
    }
    shape.vocab_sizes = {m.stage2_vocab.size()};
    shape.embedding_dims = {words.dim()};
  }
  ModelParams p = init_params(shape, seed, m.dims.init_range);
  auto& table = p.embeddings[0];
  table.table.leftCols(words.table.cols()) = words.table;
  table.frozen = words.entries();
  m.stage2 = std::move(p);
}

}  // namespace

TaggerModel make_model(ModelKind kind, const Ontology& ontology, const TokenVocabulary& vocab,
                       const ModelDims& dims, std::uint64_t seed) {
  TaggerModel m;
  m.kind = kind;
  m.ontology = ontology;
  m.vocab = vocab;
  m.dims = dims;
  ModelShape shape;
  shape.vocab_sizes = {vocab.size()};
  shape.embedding_dims = {dims.embedding};
  shape.hidden = dims.hidden;
  if (kind == ModelKind::JS) {
    shape.head_labels = {joint_labels(ontology)};
  } else {
    shape.head_labels = {kIobLabels};
    const std::size_t n_dims = kind == ModelKind::AC ? ontology.depth() : 1;
    for (std::size_t d = 0; d < n_dims; ++d) shape.head_labels.push_back(ontology.dimension(d).ordered());
  }
  m.stage1 = init_params(shape, seed, dims.init_range);
  if (is_acd(kind) && ontology.depth() >= 2) attach_stage2(m, derive_seed(seed, 2));
  return m;
}

std::vector<std::size_t> best_branch(std::span<const Vector> dimension_probs) {
  std::vector<std::size_t> out;
  out.reserve(dimension_probs.size());
  for (const auto& p : dimension_probs) out.push_back(argmax(p));
  return out;
}

std::string compose_tag(char iob, const ConceptBranch& branch, const Ontology& ontology) {
  if (iob == 'O' || branch.all_null()) return "O";
  return std::string(1, iob) + "-" + ontology.branch_to_slot(branch);
}

InputSequence encode_words(const TokenVocabulary& vocab, std::span<const std::string> tokens) {
  InputSequence in;
  in.ids.emplace_back();
  in.ids[0].reserve(tokens.size());
  for (const auto& t : tokens) in.ids[0].push_back(vocab.id(t));
  return in;
}

std::vector<std::string> decode_js(const TaggerModel& model, std::span<const std::string> tokens) {
  std::vector<std::string> tags;
  if (tokens.empty()) return tags;
  const auto probs = predict(model.stage1, encode_words(model.vocab, tokens));
  const auto& head = model.stage1.heads[0];
  for (Eigen::Index t = 0; t < probs[0].cols(); ++t) tags.push_back(head.labels[argmax(probs[0].col(t))]);
  return tags;
}

AcDecoding decode_ac(const TaggerModel& model, std::span<const std::string> tokens) {
  AcDecoding out;
  if (tokens.empty()) return out;
  const auto probs = predict(model.stage1, encode_words(model.vocab, tokens));
  const auto& heads = model.stage1.heads;
  for (Eigen::Index t = 0; t < probs[0].cols(); ++t) {
    const char iob = heads[0].labels[argmax(probs[0].col(t))][0];
    std::vector<Vector> dims;
    for (std::size_t h = 1; h < heads.size(); ++h) dims.emplace_back(probs[h].col(t));
    const auto best = best_branch(dims);
    std::vector<std::string> atoms;
    for (std::size_t d = 0; d < best.size(); ++d) atoms.push_back(heads[d + 1].labels[best[d]]);
    ConceptBranch branch(std::move(atoms));
    out.tags.push_back(compose_tag(iob, branch, model.ontology));
    out.iob.push_back(iob);
    out.branches.push_back(std::move(branch));
  }
  return out;
}

Stage1Output run_stage1(const TaggerModel& model, const InputSequence& words) {
  Stage1Output s;
  if (words.length() == 0) return s;
  const auto probs = predict(model.stage1, words);
  for (Eigen::Index t = 0; t < probs[0].cols(); ++t) {
    s.iob.push_back(model.stage1.heads[0].labels[argmax(probs[0].col(t))][0]);
    s.concept_ids.push_back(argmax(probs[1].col(t)));
  }
  return s;
}

Stage2Input build_stage2_input(const TaggerModel& model, std::span<const std::size_t> word_ids,
                               const Stage1Output& stage1) {
  Stage2Input out;
  const std::size_t n = word_ids.size();
  if (model.kind == ModelKind::ACD2) {
    out.input.ids = {std::vector<std::size_t>(word_ids.begin(), word_ids.end()), stage1.concept_ids};
    for (std::size_t t = 0; t < n; ++t) out.groups.emplace_back(t, t + 1);
    return out;
  }
  const auto& dim1 = model.stage1.heads.at(1);
  const std::size_t null_id = null_index(dim1);
  auto in_span = [&](std::size_t t) { return stage1.iob[t] != 'O' && stage1.concept_ids[t] != null_id; };
  out.input.ids.emplace_back();
  auto& ids = out.input.ids[0];
  std::size_t t = 0;
  while (t < n) {
    if (!in_span(t)) {
      ids.push_back(word_ids[t]);
      out.groups.emplace_back(t, t + 1);
      ++t;
      continue;
    }
    const std::size_t start = t;
    const std::size_t atom = stage1.concept_ids[t];
    ++t;
    while (t < n && in_span(t) && stage1.iob[t] != 'B' && stage1.concept_ids[t] == atom) ++t;
    const std::string token =
        model.kind == ModelKind::ACD1U ? std::string(kUnifiedConceptToken) : bracket(dim1.labels[atom]);
    ids.push_back(model.stage2_vocab.id(token));
    out.groups.emplace_back(start, t);
  }
  return out;
}

std::vector<std::string> gathered_tokens(const TaggerModel& model, std::span<const std::string> tokens,
                                         const Stage1Output& stage1) {
  const auto words = encode_words(model.vocab, tokens);
  const auto s2 = build_stage2_input(model, words.ids[0], stage1);
  std::vector<std::string> out;
  for (std::size_t g = 0; g < s2.groups.size(); ++g) {
    const auto [start, end] = s2.groups[g];
    if (model.kind == ModelKind::ACD2 || (end - start == 1 && s2.input.ids[0][g] == words.ids[0][start] &&
                                          s2.input.ids[0][g] < model.vocab.size()))
      out.push_back(tokens[start]);
    else
      out.push_back(model.stage2_vocab.token(s2.input.ids[0][g]));
  }
  return out;
}

namespace {

// Tags from stage-1 output plus per-position stage-2 atoms (dims 2..k).
std::vector<std::string> compose_acd(const TaggerModel& model, const Stage1Output& s1,
                                     const std::vector<std::vector<std::string>>& upper) {
  const auto& dim1 = model.stage1.heads[1];
  std::vector<std::string> tags;
  for (std::size_t t = 0; t < s1.iob.size(); ++t) {
    std::vector<std::string> atoms{dim1.labels[s1.concept_ids[t]]};
    for (const auto& level : upper) atoms.push_back(level[t]);
    atoms.resize(model.ontology.depth(), std::string(kNullAtom));
    tags.push_back(compose_tag(s1.iob[t], ConceptBranch(std::move(atoms)), model.ontology));
  }
  return tags;
}

std::vector<std::vector<std::string>> project_stage2(const ModelParams& stage2, const Stage2Input& in,
                                                     std::size_t n) {
  std::vector<std::vector<std::string>> upper(stage2.heads.size(), std::vector<std::string>(n));
  if (n == 0) return upper;
  const auto probs = predict(stage2, in.input);
  for (std::size_t h = 0; h < stage2.heads.size(); ++h) {
    for (std::size_t g = 0; g < in.groups.size(); ++g) {
      const auto& label = stage2.heads[h].labels[argmax(probs[h].col(static_cast<Eigen::Index>(g)))];
      for (std::size_t t = in.groups[g].first; t < in.groups[g].second; ++t) upper[h][t] = label;
    }
  }
  return upper;
}

}  // namespace

std::vector<std::string> decode_acd(const TaggerModel& model, std::span<const std::string> tokens) {
  if (tokens.empty()) return {};
  const auto words = encode_words(model.vocab, tokens);
  const auto s1 = run_stage1(model, words);
  std::vector<std::vector<std::string>> upper;
  if (model.stage2) upper = project_stage2(*model.stage2, build_stage2_input(model, words.ids[0], s1), tokens.size());
  return compose_acd(model, s1, upper);
}

std::vector<std::string> decode(const TaggerModel& model, std::span<const std::string> tokens) {
  switch (model.kind) {
    case ModelKind::JS: return decode_js(model, tokens);
    case ModelKind::AC: return decode_ac(model, tokens).tags;
    default: return decode_acd(model, tokens);
  }
}

Corpus decode_corpus(const TaggerModel& model, const Corpus& corpus) {
  Corpus out = corpus;
  for (auto& u : out.utterances) u.tags = decode(model, u.tokens);
  return out;
}

std::vector<std::vector<std::size_t>> stage1_gold(const TaggerModel& model, const TaggedUtterance& u) {
  const auto& heads = model.stage1.heads;
  std::vector<std::vector<std::size_t>> gold(heads.size(), std::vector<std::size_t>(u.size()));
  for (std::size_t t = 0; t < u.size(); ++t) {
    const std::string& tag = u.tags[t];
    if (model.kind == ModelKind::JS) {
      const auto idx = heads[0].find(tag);
      if (idx == heads[0].classes()) throw LabelNotInOntology("tag '" + tag + "' is not a model class");
      gold[0][t] = idx;
      continue;
    }
    auto parts = split_tag(tag);
    if (!parts) throw LabelNotInOntology("malformed tag '" + tag + "'");
    gold[0][t] = heads[0].find(std::string(1, parts->first));
    std::vector<std::string> atoms(model.ontology.depth(), std::string(kNullAtom));
    if (parts->first != 'O') {
      const std::string slot(parts->second);
      if (!model.ontology.has_slot(slot)) throw LabelNotInOntology("slot '" + slot + "' is not in the ontology");
      atoms = model.ontology.slot_to_branch(slot).atoms();
    }
    for (std::size_t h = 1; h < heads.size(); ++h) {
      const auto idx = heads[h].find(atoms[h - 1]);
      if (idx == heads[h].classes())
        throw LabelNotInOntology("atom '" + atoms[h - 1] + "' is not a class of head " + std::to_string(h));
      gold[h][t] = idx;
    }
  }
  return gold;
}

TaggerModel adjust_nn_arch(const TaggerModel& model, const Ontology& source, const Ontology& target,
                           std::uint64_t seed) {
  (void)ontology_diff(source, target);  // validates depths
  TaggerModel m = model;
  Rng rng(seed);
  const double r = m.dims.init_range;
  auto missing = [](const SoftmaxHead& head, const std::vector<std::string>& wanted) {
    std::vector<std::string> out;
    for (const auto& l : wanted)
      if (head.find(l) == head.classes()) out.push_back(l);
    return out;
  };

  if (m.kind == ModelKind::JS) {
    extend_head(m.stage1.heads[0], missing(m.stage1.heads[0], joint_labels(target)), rng, r);
  } else {
    const std::size_t stage1_dims = m.kind == ModelKind::AC ? target.depth() : 1;
    for (std::size_t d = 0; d < stage1_dims; ++d) {
      const auto wanted = target.dimension(d).ordered();
      if (d + 1 < m.stage1.heads.size())
        extend_head(m.stage1.heads[d + 1], missing(m.stage1.heads[d + 1], wanted), rng, r);
      else
        m.stage1.heads.push_back(init_head(wanted, m.stage1.feature_dim(), rng, r));
    }
  }
  m.ontology = target;
  if (is_acd(m.kind) && target.depth() >= 2) {
    if (!m.stage2) {
      attach_stage2(m, rng.next());
    } else {
      for (std::size_t d = 1; d < target.depth(); ++d) {
        const auto wanted = target.dimension(d).ordered();
        if (d - 1 < m.stage2->heads.size())
          extend_head(m.stage2->heads[d - 1], missing(m.stage2->heads[d - 1], wanted), rng, r);
        else
          m.stage2->heads.push_back(init_head(wanted, m.stage2->feature_dim(), rng, r));
      }
    }
  }
  return m;
}

std::string_view to_string(Preset p) {
  switch (p) {
    case Preset::JS_T: return "JS_T";
    case Preset::AC_T: return "AC_T";
    case Preset::JS_TS: return "JS_TS";
    case Preset::AC_TS: return "AC_TS";
    case Preset::ACD_TS_1: return "ACD_TS_1";
    case Preset::ACD_TS_1U: return "ACD_TS_1U";
    case Preset::ACD_TS_2: return "ACD_TS_2";
  }
  return "?";
}

const std::vector<Preset>& all_presets() {
  static const std::vector<Preset> presets = {Preset::JS_T,     Preset::AC_T,      Preset::JS_TS,   Preset::AC_TS,
                                              Preset::ACD_TS_1, Preset::ACD_TS_1U, Preset::ACD_TS_2};
  return presets;
}

Preset parse_preset(std::string_view name) {
  for (auto p : all_presets())
    if (to_string(p) == name) return p;
  throw ConfigError("unknown preset '" + std::string(name) + "'");
}

ModelKind preset_kind(Preset p) {
  switch (p) {
    case Preset::JS_T:
    case Preset::JS_TS: return ModelKind::JS;
    case Preset::AC_T:
    case Preset::AC_TS: return ModelKind::AC;
    case Preset::ACD_TS_1: return ModelKind::ACD1;
    case Preset::ACD_TS_1U: return ModelKind::ACD1U;
    case Preset::ACD_TS_2: return ModelKind::ACD2;
  }
  return ModelKind::JS;
}

bool uses_source(Preset p) { return p != Preset::JS_T && p != Preset::AC_T; }

// ---- persistence ----

namespace {

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string real17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void save_model(const TaggerModel& model, const std::filesystem::path& dir,
                const std::map<std::string, std::string>& extra_manifest) {
  std::filesystem::create_directories(dir);
  write_ontology(model.ontology, dir / "ontology.txt");
  write_vocabulary(model.vocab, dir / "vocab.txt");
  write_checkpoint(model.stage1, dir / "stage1.ckpt");
  if (model.stage2) {
    write_checkpoint(*model.stage2, dir / "stage2.ckpt");
    write_vocabulary(model.stage2_vocab, dir / "stage2_vocab.txt");
  }
  std::map<std::string, std::string> manifest = extra_manifest;
  manifest["model.format"] = "1";
  manifest["model.kind"] = std::string(to_string(model.kind));
  manifest["model.ontology_hash"] = hex64(model.ontology.fingerprint());
  manifest["model.vocab_hash"] = hex64(model.vocab.fingerprint());
  manifest["model.embedding_dim"] = std::to_string(model.dims.embedding);
  manifest["model.hidden_dim"] = std::to_string(model.dims.hidden);
  manifest["model.concept_embedding_dim"] = std::to_string(model.dims.concept_embedding);
  manifest["model.init_range"] = real17(model.dims.init_range);
  manifest["model.stages"] = model.stage2 ? "2" : "1";
  std::ofstream out(dir / "manifest.txt");
  if (!out) throw IoError("cannot write manifest in '" + dir.string() + "'");
  for (const auto& [k, v] : manifest) out << k << '=' << v << '\n';
}

TaggerModel load_model(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("no model manifest in '" + dir.string() + "'");
  std::map<std::string, std::string> manifest;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) manifest[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const std::string& key) {
    auto it = manifest.find(key);
    if (it == manifest.end()) throw CheckpointError("manifest lacks '" + key + "'");
    return it->second;
  };
  TaggerModel m;
  m.kind = parse_model_kind(get("model.kind"));
  m.dims.embedding = std::stoul(get("model.embedding_dim"));
  m.dims.hidden = std::stoul(get("model.hidden_dim"));
  m.dims.concept_embedding = std::stoul(get("model.concept_embedding_dim"));
  m.dims.init_range = std::stod(get("model.init_range"));
  m.ontology = read_ontology(dir / "ontology.txt");
  m.vocab = read_vocabulary(dir / "vocab.txt");
  if (hex64(m.ontology.fingerprint()) != get("model.ontology_hash"))
    throw CheckpointError("ontology does not match manifest hash");
  if (hex64(m.vocab.fingerprint()) != get("model.vocab_hash"))
    throw CheckpointError("vocabulary does not match manifest hash");
  m.stage1 = read_checkpoint(dir / "stage1.ckpt");
  if (get("model.stages") == "2") {
    m.stage2 = read_checkpoint(dir / "stage2.ckpt");
    m.stage2_vocab = read_vocabulary(dir / "stage2_vocab.txt");
  }
  return m;
}

}  // namespace cslot
