#include "cli.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "cslot/error.hpp"
#include "cslot/eval.hpp"
#include "cslot/experiment.hpp"
#include "cslot/models.hpp"
#include "cslot/synthetic.hpp"

namespace cslot::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string ontology;
  std::string source_ontology;
  std::string grammar;
  std::string train;
  std::string valid;
  std::string test;
  std::string source_train;
  std::string source_valid;
  std::string pred;
  std::string model;
  std::string out = ".";
  std::string preset = "AC_T";
  std::string kind = "AC";
  std::string manifest;
  std::string sizes = "50,100,500";
  std::string presets;
  std::string lr_grid;
  std::uint64_t seed = 1;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> source_epochs;
  std::size_t subset = 0;
  std::size_t count = 1000;
  std::size_t dims = 1;
  std::size_t seeds = 5;
  std::optional<std::size_t> embedding_dim;
  std::optional<std::size_t> hidden_dim;
  std::optional<std::size_t> concept_dim;
  std::optional<double> dropout;
  bool teacher_forcing = false;
  bool desk = false;
};

std::string real(double v, const char* fmt = "%.17g") {
  char buf[40];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad learning rate '" + item + "'");
    }
  }
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

std::string require(const std::string& value, const char* flag) {
  if (value.empty()) throw ConfigError(std::string("missing required option ") + flag);
  return value;
}

Ontology load_ontology(const std::string& path) {
  return path.empty() ? default_flight_ontology() : read_ontology(path);
}

GrammarConfig load_grammar(const std::string& path) {
  return path.empty() ? default_flight_grammar() : read_grammar(path);
}

TrainingConfig training_config(const Options& o, bool source_side = false) {
  TrainingConfig c;
  if (o.desk) {
    const auto desk = desk_curve_config();
    c = source_side ? desk.source_config : desk.target_config;
  }
  if (!o.lr_grid.empty()) c.lr_grid = parse_grid(o.lr_grid);
  if (source_side && o.source_epochs) c.epochs = *o.source_epochs;
  else if (o.epochs) c.epochs = *o.epochs;
  if (o.embedding_dim) c.embedding_dim = *o.embedding_dim;
  if (o.hidden_dim) c.hidden_dim = *o.hidden_dim;
  if (o.concept_dim) c.concept_embedding_dim = *o.concept_dim;
  if (o.dropout) c.dropout = *o.dropout;
  c.seed = derive_seed(o.seed, source_side ? 1 : 2);
  c.validate();
  return c;
}

void describe_config(std::map<std::string, std::string>& m, const std::string& prefix, const TrainingConfig& c) {
  std::string grid;
  for (double lr : c.grid()) grid += (grid.empty() ? "" : ",") + real(lr, "%g");
  m[prefix + "lr_grid"] = grid;
  m[prefix + "epochs"] = std::to_string(c.epochs);
  m[prefix + "dropout"] = real(c.dropout, "%g");
  m[prefix + "init_range"] = real(c.init_range, "%g");
  m[prefix + "embedding_dim"] = std::to_string(c.embedding_dim);
  m[prefix + "hidden_dim"] = std::to_string(c.hidden_dim);
  m[prefix + "concept_embedding_dim"] = std::to_string(c.concept_embedding_dim);
  m[prefix + "seed"] = std::to_string(c.seed);
}

// Everything needed to rerun the command: its arguments (minus --out), the
// master seed and the resolved configuration. No timestamps.
void write_manifest(const fs::path& dir, const std::vector<std::string>& args,
                    const std::map<std::string, std::string>& resolved) {
  std::ostringstream m;
  m << "cslot-manifest 1\n";
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--out" && i + 1 < args.size()) {
      ++i;
      continue;
    }
    if (args[i].rfind("--out=", 0) == 0) continue;
    m << "arg=" << args[i] << '\n';
  }
  for (const auto& [k, v] : resolved) m << k << '=' << v << '\n';
  write_text(dir / "manifest.txt", m.str());
}

std::vector<std::string> read_manifest_args(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != "cslot-manifest 1") throw ParseError("not a cslot manifest", 1);
  std::vector<std::string> args;
  while (std::getline(in, line))
    if (line.rfind("arg=", 0) == 0) args.push_back(line.substr(4));
  if (args.empty()) throw ParseError("manifest records no command", 0);
  return args;
}

std::string log_tsv(const TrainingLog& log) {
  std::ostringstream out;
  out << "learning_rate\tepoch\ttrain_loss\tclean_loss\tvalid_f1\n";
  for (const auto& e : log.epochs)
    out << real(e.learning_rate, "%g") << '\t' << e.epoch << '\t' << real(e.train_loss, "%.6f") << '\t'
        << real(e.clean_loss, "%.6f") << '\t' << real(e.valid_f1, "%.2f") << '\n';
  return out.str();
}

Corpus maybe_subset(const Corpus& c, const Options& o) {
  return o.subset == 0 ? c : sample_subset(c, o.subset, derive_seed(o.seed, 14));
}

Corpus read_optional(const std::string& path, CorpusRole role = CorpusRole::target) {
  return path.empty() ? Corpus{} : read_corpus(path, role);
}

// Decodes `raw` (original tokens) and writes predictions plus a report.
void score_and_write(const TaggerModel& model, const Corpus& raw, const fs::path& dir, std::ostream& out) {
  const Corpus pp = preprocess(raw, model.vocab).first;
  Corpus pred = raw;
  for (std::size_t i = 0; i < raw.size(); ++i) pred.utterances[i].tags = decode(model, pp.utterances[i].tokens);
  write_corpus(pred, dir / "predictions.txt");
  const auto report = evaluate(raw, pred);
  write_text(dir / "report.txt", format_report(report));
  write_text(dir / "report.tsv", format_report_tsv(report));
  out << format_report(report);
}

// ---- subcommands ----

void cmd_synth(const Options& o, const std::vector<std::string>& args) {
  const auto ontology = load_ontology(o.ontology);
  const auto grammar = load_grammar(o.grammar);
  fs::create_directories(o.out);
  write_corpus(generate_synthetic(grammar, ontology, o.count, o.seed), fs::path(o.out) / "corpus.txt");
  write_ontology(ontology, fs::path(o.out) / "ontology.txt");
  std::ofstream g(fs::path(o.out) / "grammar.txt");
  write_grammar(grammar, g);
  write_manifest(o.out, args, {{"seed", std::to_string(o.seed)}, {"count", std::to_string(o.count)}});
}

void cmd_collapse(const Options& o, const std::vector<std::string>& args) {
  const auto ontology = load_ontology(o.ontology);
  const auto collapsed = collapse_ontology(ontology, o.dims);
  fs::create_directories(o.out);
  write_ontology(collapsed.ontology, fs::path(o.out) / "source_ontology.txt");
  if (!o.train.empty())
    write_corpus(relabel_collapse(read_corpus(o.train), collapsed.mapping), fs::path(o.out) / "source_train.txt");
  if (!o.valid.empty())
    write_corpus(relabel_collapse(read_corpus(o.valid), collapsed.mapping), fs::path(o.out) / "source_valid.txt");
  write_manifest(o.out, args, {{"dims", std::to_string(o.dims)}});
}

void cmd_perturb(const Options& o, const std::vector<std::string>& args) {
  const auto ontology = load_ontology(o.ontology);
  const auto train = maybe_subset(read_corpus(require(o.train, "--train")), o);
  const auto test = read_corpus(require(o.test, "--test"));
  fs::create_directories(o.out);
  write_corpus(perturb_test_set(train, test, ontology, derive_seed(o.seed, 15)),
               fs::path(o.out) / "perturbed_test.txt");
  write_manifest(o.out, args, {{"seed", std::to_string(o.seed)}});
}

void cmd_train(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto ontology = load_ontology(o.ontology);
  const auto kind = parse_model_kind(o.kind);
  const auto config = training_config(o);
  const auto train_raw = maybe_subset(read_corpus(require(o.train, "--train")), o);
  auto [train_pp, vocab] = preprocess(train_raw);
  const Corpus valid_pp = o.valid.empty() ? Corpus{} : preprocess(read_corpus(o.valid), vocab).first;
  const auto result = train(kind, ontology, vocab, train_pp, valid_pp, config);

  fs::create_directories(o.out);
  std::map<std::string, std::string> resolved{{"seed", std::to_string(o.seed)}, {"kind", o.kind}};
  describe_config(resolved, "train.", config);
  save_model(result.model, fs::path(o.out) / "model", resolved);
  write_text(fs::path(o.out) / "train_log.tsv", log_tsv(result.log));
  if (!o.test.empty()) score_and_write(result.model, read_corpus(o.test), o.out, out);
  write_manifest(o.out, args, resolved);
}

void cmd_adapt(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto preset = parse_preset(o.preset);
  const auto target = load_ontology(o.ontology);
  const Ontology source =
      o.source_ontology.empty() ? collapse_ontology(target, 1).ontology : read_ontology(o.source_ontology);
  const auto scfg = training_config(o, true);
  const auto tcfg = training_config(o);

  const auto train_raw = maybe_subset(read_corpus(require(o.train, "--train")), o);
  const Corpus source_raw = uses_source(preset)
                                ? read_corpus(require(o.source_train, "--source-train"), CorpusRole::source)
                                : Corpus{};
  // Transfer presets share the source vocabulary; *_T presets use the target's.
  auto [vocab_corpus, vocab] = preprocess(uses_source(preset) ? source_raw : train_raw);
  const Corpus source_pp = uses_source(preset) ? vocab_corpus : Corpus{};
  const Corpus source_valid = preprocess(read_optional(o.source_valid, CorpusRole::source), vocab).first;
  const Corpus train_pp = preprocess(train_raw, vocab).first;
  const Corpus valid_pp = preprocess(read_optional(o.valid), vocab).first;

  AdaptData data{&source, &target, &vocab, &source_pp, &source_valid, &train_pp, &valid_pp};
  const auto result = adapt(preset, data, scfg, tcfg);

  fs::create_directories(o.out);
  std::map<std::string, std::string> resolved{{"seed", std::to_string(o.seed)}, {"preset", o.preset}};
  describe_config(resolved, "source.", scfg);
  describe_config(resolved, "target.", tcfg);
  save_model(result.model, fs::path(o.out) / "model", resolved);
  write_text(fs::path(o.out) / "source_log.tsv", log_tsv(result.source_log));
  write_text(fs::path(o.out) / "target_log.tsv", log_tsv(result.target_log));
  if (!o.test.empty()) score_and_write(result.model, read_corpus(o.test), o.out, out);
  write_manifest(o.out, args, resolved);
}

void cmd_decode(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto model = load_model(require(o.model, "--model"));
  fs::create_directories(o.out);
  score_and_write(model, read_corpus(require(o.test, "--test")), o.out, out);
  write_manifest(o.out, args, {});
}

void cmd_eval(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto reference = read_corpus(require(o.test, "--test"));
  const auto predicted = read_corpus(require(o.pred, "--pred"));
  for (std::size_t i = 0; i < std::min(reference.size(), predicted.size()); ++i)
    if (reference.utterances[i].tokens != predicted.utterances[i].tokens)
      throw LengthMismatch("utterance " + std::to_string(i) + " has different tokens in the prediction file");
  const auto report = evaluate(reference, predicted);
  fs::create_directories(o.out);
  write_text(fs::path(o.out) / "report.txt", format_report(report));
  write_text(fs::path(o.out) / "report.tsv", format_report_tsv(report));
  write_manifest(o.out, args, {});
  out << format_report(report);
}

bool cmd_gradcheck(const Options& o, std::ostream& out) {
  ModelShape shape{{20}, {8}, 8, {{"a", "b", "c", "d", "e"}, {"x", "y", "z"}}};
  const auto params = init_params(shape, o.seed);
  Rng rng(derive_seed(o.seed, 1));
  TrainingExample ex;
  ex.input.ids.resize(1);
  ex.gold.resize(2);
  for (std::size_t t = 0; t < 5; ++t) {
    ex.input.ids[0].push_back(rng.index(20));
    ex.gold[0].push_back(rng.index(5));
    ex.gold[1].push_back(rng.index(3));
  }
  const std::vector<TrainingExample> batch{ex};
  const auto report = gradient_check(params, batch, 1e-4, 1e-4);
  for (const auto& b : report.blocks)
    out << b.name << '\t' << b.size << '\t' << real(b.max_relative_error, "%.3e") << '\n';
  out << "max relative error: " << real(report.max_relative_error, "%.3e") << " (tolerance "
      << real(report.tolerance, "%.0e") << ")\n"
      << (report.passed ? "PASS" : "FAIL") << '\n';
  return report.passed;
}

void cmd_curve(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  const auto ontology = load_ontology(o.ontology);
  const auto grammar = load_grammar(o.grammar);
  CurveConfig cfg = desk_curve_config();
  Options desk = o;
  desk.desk = true;
  cfg.source_config = training_config(desk, true);
  cfg.target_config = training_config(desk);
  cfg.target_pool = o.count;
  cfg.subset_sizes.clear();
  for (const auto& s : split_list(o.sizes)) {
    if (s == "all") {
      cfg.subset_sizes.push_back(o.count);
      continue;
    }
    try {
      cfg.subset_sizes.push_back(std::stoul(s));
    } catch (const std::exception&) {
      throw ConfigError("bad subset size '" + s + "'");
    }
  }
  if (std::find(cfg.subset_sizes.begin(), cfg.subset_sizes.end(), cfg.perturbed_subset) == cfg.subset_sizes.end())
    cfg.perturbed_subset = cfg.subset_sizes.empty() ? 0 : cfg.subset_sizes.front();
  if (!o.presets.empty()) {
    cfg.presets.clear();
    for (const auto& p : split_list(o.presets)) cfg.presets.push_back(parse_preset(p));
  }
  cfg.seeds.clear();
  for (std::size_t i = 0; i < o.seeds; ++i) cfg.seeds.push_back(o.seed + i);

  const auto result = run_curve(grammar, ontology, cfg);
  fs::create_directories(o.out);
  std::ostringstream cells;
  cells << "system\tsubset\tseed\tf1\tperturbed_f1\n";
  for (const auto& c : result.cells)
    cells << to_string(c.preset) << '\t' << c.subset << '\t' << c.seed << '\t' << real(c.f1, "%.4f") << '\t'
          << (c.perturbed_f1 < 0 ? std::string("-") : real(c.perturbed_f1, "%.4f")) << '\n';
  const auto table = format_curve_table(result, cfg.subset_sizes);
  const auto perturbed = format_curve_table(result, {cfg.perturbed_subset}, true);
  write_text(fs::path(o.out) / "cells.tsv", cells.str());
  write_text(fs::path(o.out) / "curve.tsv", table);
  write_text(fs::path(o.out) / "curve_perturbed.tsv", perturbed);
  std::map<std::string, std::string> resolved{{"seed", std::to_string(o.seed)}, {"seeds", std::to_string(o.seeds)}};
  describe_config(resolved, "source.", cfg.source_config);
  describe_config(resolved, "target.", cfg.target_config);
  write_manifest(o.out, args, resolved);
  out << table << "\nperturbed test (subset " << cfg.perturbed_subset << ")\n" << perturbed;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Slot filling with atomic-concept trees", "cslot"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Master seed");
  };
  auto add_training = [&o](CLI::App* sub) {
    sub->add_option("--lr-grid", o.lr_grid, "Comma-separated learning rates");
    sub->add_option("--epochs", o.epochs, "Epochs per learning rate");
    sub->add_option("--source-epochs", o.source_epochs, "Epochs on the source set");
    sub->add_option("--embedding-dim", o.embedding_dim);
    sub->add_option("--hidden-dim", o.hidden_dim);
    sub->add_option("--concept-dim", o.concept_dim, "ACD2 concept embedding size");
    sub->add_option("--dropout", o.dropout);
    sub->add_flag("--desk", o.desk, "Start from the compact desk-scale configuration");
  };

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  add_common(synth);
  synth->add_option("--ontology", o.ontology);
  synth->add_option("--grammar", o.grammar);
  synth->add_option("--count", o.count, "Number of sentences");

  auto* collapse = app.add_subcommand("collapse", "Derive a coarse source ontology and corpus");
  add_common(collapse);
  collapse->add_option("--ontology", o.ontology);
  collapse->add_option("--dims", o.dims, "Dimensions to keep");
  collapse->add_option("--train", o.train);
  collapse->add_option("--valid", o.valid);

  auto* perturb = app.add_subcommand("perturb", "Build an unmatched test set");
  add_common(perturb);
  perturb->add_option("--ontology", o.ontology);
  perturb->add_option("--train", o.train);
  perturb->add_option("--test", o.test);
  perturb->add_option("--subset", o.subset);

  auto* train_cmd = app.add_subcommand("train", "Train one model");
  add_common(train_cmd);
  add_training(train_cmd);
  train_cmd->add_option("--kind", o.kind, "JS, AC, ACD1, ACD1U or ACD2");
  train_cmd->add_option("--ontology", o.ontology);
  train_cmd->add_option("--train", o.train);
  train_cmd->add_option("--valid", o.valid);
  train_cmd->add_option("--test", o.test);
  train_cmd->add_option("--subset", o.subset);

  auto* adapt_cmd = app.add_subcommand("adapt", "Pretrain on a source set and refine on a target set");
  add_common(adapt_cmd);
  add_training(adapt_cmd);
  adapt_cmd->add_option("--preset", o.preset);
  adapt_cmd->add_option("--ontology", o.ontology);
  adapt_cmd->add_option("--source-ontology", o.source_ontology);
  adapt_cmd->add_option("--source-train", o.source_train);
  adapt_cmd->add_option("--source-valid", o.source_valid);
  adapt_cmd->add_option("--train", o.train);
  adapt_cmd->add_option("--valid", o.valid);
  adapt_cmd->add_option("--test", o.test);
  adapt_cmd->add_option("--subset", o.subset);

  auto* decode_cmd = app.add_subcommand("decode", "Tag a corpus with a saved model");
  add_common(decode_cmd);
  decode_cmd->add_option("--model", o.model);
  decode_cmd->add_option("--test", o.test);

  auto* eval_cmd = app.add_subcommand("eval", "Score predictions against a reference");
  add_common(eval_cmd);
  eval_cmd->add_option("--test", o.test, "Reference corpus");
  eval_cmd->add_option("--pred", o.pred, "Predicted corpus");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gradcheck->add_option("--seed", o.seed);

  auto* curve = app.add_subcommand("curve", "Sweep target subset sizes on synthetic data");
  add_common(curve);
  add_training(curve);
  curve->add_option("--ontology", o.ontology);
  curve->add_option("--grammar", o.grammar);
  curve->add_option("--sizes", o.sizes, "Comma-separated sizes; 'all' is the whole pool");
  curve->add_option("--count", o.count, "Target pool size");
  curve->add_option("--seeds", o.seeds, "Number of seeds starting at --seed");
  curve->add_option("--presets", o.presets, "Comma-separated presets (default all)");

  auto* replay = app.add_subcommand("replay", "Rerun the command recorded in a manifest");
  replay->add_option("--manifest", o.manifest)->required();
  replay->add_option("--out", o.out);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "cslot: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (replay->parsed()) {
      auto recorded = read_manifest_args(o.manifest);
      if (replay->count("--out")) {
        recorded.push_back("--out");
        recorded.push_back(o.out);
      }
      return run_command(recorded, out, err);
    }
    if (synth->parsed()) cmd_synth(o, args);
    else if (collapse->parsed()) cmd_collapse(o, args);
    else if (perturb->parsed()) cmd_perturb(o, args);
    else if (train_cmd->parsed()) cmd_train(o, args, out);
    else if (adapt_cmd->parsed()) cmd_adapt(o, args, out);
    else if (decode_cmd->parsed()) cmd_decode(o, args, out);
    else if (eval_cmd->parsed()) cmd_eval(o, args, out);
    else if (gradcheck->parsed()) return cmd_gradcheck(o, out) ? kExitOk : kExitData;
    else if (curve->parsed()) cmd_curve(o, args, out);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "cslot: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "cslot: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace cslot::cli
