// insmt: alignment, chunk preparation, training, translation and scoring.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "insmt/align.hpp"
#include "insmt/bleu.hpp"
#include "insmt/checkpoint.hpp"
#include "insmt/config.hpp"
#include "insmt/corpus.hpp"
#include "insmt/errors.hpp"
#include "insmt/model.hpp"
#include "insmt/synthetic.hpp"
#include "insmt/trainer.hpp"
#include "insmt/utf8.hpp"
#include "insmt/verification.hpp"

namespace fs = std::filesystem;
using namespace insmt;

namespace {

constexpr const char* kVersion = "insmt 1.0";

struct ConfigOptions {
  std::string file;
  std::map<std::string, std::string> overrides;

  void attach(CLI::App* app) {
    app->add_option("--config", file, "key=value run configuration file")->check(CLI::ExistingFile);
    for (const std::string& key : config_keys()) {
      app->add_option("--" + key, overrides[key], "override '" + key + "'");
    }
  }

  RunConfig resolve() const {
    RunConfig config = file.empty() ? RunConfig{} : load_run_config(file);
    for (const auto& [key, value] : overrides) {
      if (!value.empty()) set_config_value(config, key, value);
    }
    validate(config);
    return config;
  }
};

std::string command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

std::string g_command_line;

// Written beside every artifact: enough to rerun the command.
void write_manifest(const fs::path& path, const std::string& command,
                    const std::vector<std::pair<std::string, std::string>>& entries,
                    const RunConfig* config) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# " << kVersion << '\n';
  out << "command=" << command << '\n';
  out << "argv=" << g_command_line << '\n';
  for (const auto& [key, value] : entries) out << key << '=' << value << '\n';
  if (config) out << to_text(*config);
  if (!out) throw IoError("write failed for " + path.string());
}

fs::path manifest_beside(const fs::path& artifact) {
  fs::path p = artifact;
  p += ".manifest";
  return p;
}

void ensure_directory(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// ---------------------------------------------------------------------------

struct AlignArgs {
  std::string source, target, out_dir;
  ConfigOptions config;
};

int run_align(const AlignArgs& a) {
  const RunConfig config = a.config.resolve();
  const Corpus corpus = ingest_corpus(a.source, a.target, config.lowercase);
  const align::PosteriorEstimate estimate = align::estimate_posteriors(corpus.pairs, config.aligner_options());
  ensure_directory(a.out_dir);
  const fs::path fwd = fs::path(a.out_dir) / "forward.post";
  const fs::path bwd = fs::path(a.out_dir) / "backward.post";
  align::export_posteriors(fwd, bwd, estimate.sentences);
  write_manifest(fs::path(a.out_dir) / "align.manifest", "align",
                 {{"source", a.source},
                  {"target", a.target},
                  {"pairs", std::to_string(corpus.pairs.size())},
                  {"dropped_empty", std::to_string(corpus.dropped_empty)},
                  {"skipped", std::to_string(estimate.skipped)}},
                 &config);
  std::cout << "pairs=" << corpus.pairs.size() << " dropped_empty=" << corpus.dropped_empty
            << " skipped=" << estimate.skipped << '\n'
            << "forward=" << fwd.string() << '\n'
            << "backward=" << bwd.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct PrepareArgs {
  std::string source, target, forward, backward, output;
  ConfigOptions config;
};

int run_prepare(const PrepareArgs& a) {
  const RunConfig config = a.config.resolve();
  const Corpus corpus = ingest_corpus(a.source, a.target, config.lowercase);
  const auto posteriors = align::import_posteriors(a.forward, a.backward);
  if (posteriors.size() != corpus.pairs.size()) {
    throw ValidationError("posterior files hold " + std::to_string(posteriors.size()) +
                          " sentences but the corpus has " + std::to_string(corpus.pairs.size()));
  }
  const auto built = align::build_training_sequences(corpus.pairs, posteriors, config.tau);
  align::write_chunked_file(a.output, built.pairs);
  write_manifest(manifest_beside(a.output), "prepare",
                 {{"source", a.source},
                  {"target", a.target},
                  {"forward", a.forward},
                  {"backward", a.backward},
                  {"sentences", std::to_string(built.pairs.size())},
                  {"dropped_no_links", std::to_string(built.dropped_no_links)},
                  {"dropped_skipped", std::to_string(built.dropped_skipped)}},
                 &config);
  std::cout << "sentences=" << built.pairs.size() << " dropped_no_links=" << built.dropped_no_links
            << " dropped_skipped=" << built.dropped_skipped << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string train, heldout, out_dir;
  std::size_t heldout_n = 0;
  bool quiet = false;
  ConfigOptions config;
};

int run_train(const TrainArgs& a) {
  const RunConfig config = a.config.resolve();
  std::vector<align::AlignedSentencePair> train_pairs = align::read_chunked_file(a.train);
  std::vector<align::AlignedSentencePair> heldout_pairs;
  if (!a.heldout.empty()) {
    heldout_pairs = align::read_chunked_file(a.heldout);
  } else if (a.heldout_n > 0) {
    auto [tr, ho] = split_corpus<align::AlignedSentencePair>(train_pairs, a.heldout_n, config.seed);
    train_pairs = std::move(tr);
    heldout_pairs = std::move(ho);
  }
  if (train_pairs.empty()) throw ValidationError("no training sentences in " + a.train);

  ensure_directory(a.out_dir);
  const fs::path dir(a.out_dir);
  const fs::path best_path = dir / "best.ckpt";
  const ConfigEntries extras = parse_config_entries(to_text(config));
  std::ofstream history(dir / "history.tsv");
  if (!history) throw IoError("cannot write " + (dir / "history.tsv").string());
  history << "epoch\ttrain_xent\theldout_xent\timproved\n";

  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    history << r.epoch << '\t' << format_double(r.train_xent) << '\t'
            << (r.heldout_xent ? format_double(*r.heldout_xent) : "-") << '\t' << (r.improved ? 1 : 0)
            << '\n';
    history.flush();
    if (!a.quiet) {
      std::cerr << "epoch " << r.epoch << " train_xent=" << format_double(r.train_xent);
      if (r.heldout_xent) std::cerr << " heldout_xent=" << format_double(*r.heldout_xent);
      if (r.improved) std::cerr << " *";
      std::cerr << '\n';
    }
  };
  hooks.on_improvement = [&](const ModelParams<float>& best, const EpochRecord&) {
    save_checkpoint(best_path, best, extras);
  };

  const auto start = std::chrono::steady_clock::now();
  const TrainResult result = train(config, train_pairs, heldout_pairs, hooks);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  save_checkpoint(best_path, result.best, extras);
  save_checkpoint(dir / "final.ckpt", result.final_state.params, extras);

  std::ostringstream trajectory;
  for (std::size_t k = 0; k < result.heldout_trajectory.size(); ++k) {
    if (k) trajectory << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", result.heldout_trajectory[k]);
    trajectory << buf;
  }
  write_manifest(dir / "manifest.txt", "train",
                 {{"train", a.train},
                  {"heldout", a.heldout},
                  {"heldout_n", std::to_string(a.heldout_n)},
                  {"train_sentences", std::to_string(train_pairs.size())},
                  {"heldout_sentences", std::to_string(heldout_pairs.size())},
                  {"epochs_run", std::to_string(result.history.size())},
                  {"best_epoch", std::to_string(result.best_epoch)},
                  {"stopped_early", result.stopped_early ? "true" : "false"},
                  {"heldout_trajectory", trajectory.str()},
                  {"seconds", format_double(seconds)}},
                 &config);
  std::cout << "epochs=" << result.history.size() << " best_epoch=" << result.best_epoch
            << " stopped_early=" << (result.stopped_early ? "true" : "false") << '\n'
            << "checkpoint=" << best_path.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------

struct TranslateArgs {
  std::string checkpoint, input, output, oracle;
  int max_chunk_chars = 0;
};

int run_translate(const TranslateArgs& a) {
  const Checkpoint ckpt = load_checkpoint(a.checkpoint);
  bool lowercase = false;
  if (auto it = ckpt.config.find("lowercase"); it != ckpt.config.end()) {
    lowercase = it->second == "true" || it->second == "1";
  }
  const int cap = a.max_chunk_chars > 0 ? a.max_chunk_chars : ckpt.model.config.max_chunk_chars;
  const std::vector<std::string> lines = read_lines(a.input);
  std::vector<align::AlignedSentencePair> oracle;
  if (!a.oracle.empty()) {
    oracle = align::read_chunked_file(a.oracle);
    if (oracle.size() != lines.size()) {
      throw ValidationError("oracle file has " + std::to_string(oracle.size()) + " sentences, input has " +
                            std::to_string(lines.size()) + " lines");
    }
  }
  std::vector<std::string> outputs;
  outputs.reserve(lines.size());
  for (std::size_t s = 0; s < lines.size(); ++s) {
    const TokenList tokens = tokenize(lowercase ? utf8::lowercase(lines[s]) : lines[s]);
    if (tokens.empty()) {
      outputs.emplace_back();
      continue;
    }
    if (!oracle.empty()) {
      if (oracle[s].source_tokens.size() != tokens.size()) {
        throw ValidationError("line " + std::to_string(s + 1) + ": oracle has " +
                              std::to_string(oracle[s].source_tokens.size()) + " tokens, input has " +
                              std::to_string(tokens.size()));
      }
      GoldOracle forced(oracle[s]);
      outputs.push_back(translate_greedy(ckpt.model, tokens, cap, &forced).text);
    } else {
      outputs.push_back(translate_greedy(ckpt.model, tokens, cap).text);
    }
  }
  if (a.output.empty() || a.output == "-") {
    for (const auto& line : outputs) std::cout << line << '\n';
  } else {
    write_lines(a.output, outputs);
    write_manifest(manifest_beside(a.output), "translate",
                   {{"checkpoint", a.checkpoint},
                    {"input", a.input},
                    {"oracle", a.oracle},
                    {"max_chunk_chars", std::to_string(cap)},
                    {"lines", std::to_string(outputs.size())}},
                   nullptr);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct BleuArgs {
  std::string hypotheses, references;
  int max_n = 4;
  bool json = false;
};

int run_bleu(const BleuArgs& a) {
  const auto hyp_lines = read_lines(a.hypotheses);
  const auto ref_lines = read_lines(a.references);
  std::vector<TokenList> hyps, refs;
  for (const auto& line : hyp_lines) hyps.push_back(tokenize(line));
  for (const auto& line : ref_lines) refs.push_back(tokenize(line));
  const BleuReport report = bleu(hyps, refs, a.max_n);
  if (a.json) {
    std::cout << to_json(report) << '\n';
  } else {
    print_key_values(std::cout, report);
  }
  return 0;
}

// ---------------------------------------------------------------------------

struct GradCheckArgs {
  int configurations = 20;
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  bool verbose = false;
  ConfigOptions config;
};

int run_grad_check(const GradCheckArgs& a) {
  const RunConfig config = a.config.resolve();
  const VerificationReport report = run_verification(a.configurations, config.seed, a.epsilon);
  if (a.verbose) {
    for (const auto& c : report.cases) {
      std::cout << c.name << " configuration=" << c.configuration << " coordinates=" << c.coordinates
                << " max_relative_error=" << c.max_relative_error << '\n';
    }
  }
  std::cout << "configurations=" << report.configurations << '\n'
            << "checks=" << report.cases.size() << '\n'
            << "max_relative_error=" << report.max_relative_error << '\n'
            << "worst=" << report.worst_case << '\n'
            << "seconds=" << format_double(report.seconds) << '\n';
  const bool ok = report.max_relative_error < a.tolerance;
  std::cout << (ok ? "OK" : "FAILED") << '\n';
  return ok ? 0 : 1;
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string out_prefix;
  std::string rule = "reverse";
  int cipher_shift = 3;
  SyntheticSpec spec;
};

int run_gen_synthetic(GenArgs a) {
  a.spec.rule = parse_reorder_rule(a.rule);
  a.spec.cipher = shift_cipher(a.spec.n_chars, a.cipher_shift);
  const SyntheticCorpus corpus = gen_synthetic(a.spec);
  std::vector<std::string> src, trg;
  for (const auto& pair : corpus.pairs) {
    src.push_back(join(pair.source));
    trg.push_back(join(pair.target));
  }
  const fs::path parent = fs::path(a.out_prefix).parent_path();
  if (!parent.empty()) ensure_directory(parent);
  const std::string src_path = a.out_prefix + ".src";
  const std::string trg_path = a.out_prefix + ".trg";
  write_lines(src_path, src);
  write_lines(trg_path, trg);
  write_manifest(a.out_prefix + ".manifest", "gen-synthetic",
                 {{"count", std::to_string(a.spec.count)},
                  {"vocab_size", std::to_string(a.spec.vocab_size)},
                  {"n_chars", std::to_string(a.spec.n_chars)},
                  {"min_length", std::to_string(a.spec.min_length)},
                  {"max_length", std::to_string(a.spec.max_length)},
                  {"min_token_chars", std::to_string(a.spec.min_token_chars)},
                  {"max_token_chars", std::to_string(a.spec.max_token_chars)},
                  {"rule", a.rule},
                  {"cipher_shift", std::to_string(a.cipher_shift)},
                  {"seed", std::to_string(a.spec.seed)}},
                 nullptr);
  std::cout << "source=" << src_path << "\ntarget=" << trg_path << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  g_command_line = command_line(argc, argv);
  CLI::App app{"Chunk-by-chunk character-level translation with learned insertion positions"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  AlignArgs align_args;
  auto* align_cmd = app.add_subcommand("align", "estimate word-alignment posteriors in both directions");
  align_cmd->add_option("--source", align_args.source, "source text, one sentence per line")->required();
  align_cmd->add_option("--target", align_args.target, "target text, one sentence per line")->required();
  align_cmd->add_option("--out-dir", align_args.out_dir, "directory for forward.post and backward.post")->required();
  align_args.config.attach(align_cmd);

  PrepareArgs prepare_args;
  auto* prepare_cmd = app.add_subcommand("prepare", "build chunked training sequences from posteriors");
  prepare_cmd->add_option("--source", prepare_args.source)->required();
  prepare_cmd->add_option("--target", prepare_args.target)->required();
  prepare_cmd->add_option("--forward", prepare_args.forward, "forward posterior file")->required();
  prepare_cmd->add_option("--backward", prepare_args.backward, "backward posterior file")->required();
  prepare_cmd->add_option("--output", prepare_args.output, "chunked sequence file")->required();
  prepare_args.config.attach(prepare_cmd);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "train a model on chunked sequences");
  train_cmd->add_option("--train", train_args.train, "chunked training file")->required();
  auto* heldout_opt = train_cmd->add_option("--heldout", train_args.heldout, "chunked held-out file");
  train_cmd->add_option("--heldout-n", train_args.heldout_n, "hold out N random training sentences")
      ->excludes(heldout_opt);
  train_cmd->add_option("--out-dir", train_args.out_dir, "directory for checkpoints and manifest")->required();
  train_cmd->add_flag("--quiet", train_args.quiet, "no per-epoch log");
  train_args.config.attach(train_cmd);

  TranslateArgs translate_args;
  auto* translate_cmd = app.add_subcommand("translate", "translate a source file with a checkpoint");
  translate_cmd->add_option("--checkpoint", translate_args.checkpoint)->required();
  translate_cmd->add_option("--input", translate_args.input, "source text, one sentence per line")->required();
  translate_cmd->add_option("--output", translate_args.output, "output file (default: stdout)");
  translate_cmd->add_option("--oracle", translate_args.oracle, "chunked file forcing chunks and slots");
  translate_cmd->add_option("--max-chunk-chars", translate_args.max_chunk_chars, "override the checkpoint's cap");

  BleuArgs bleu_args;
  auto* bleu_cmd = app.add_subcommand("bleu", "corpus BLEU of hypotheses against references");
  bleu_cmd->add_option("--hyp", bleu_args.hypotheses)->required();
  bleu_cmd->add_option("--ref", bleu_args.references)->required();
  bleu_cmd->add_option("--max-n", bleu_args.max_n)->check(CLI::PositiveNumber);
  bleu_cmd->add_flag("--json", bleu_args.json, "print a single JSON object");

  GradCheckArgs grad_args;
  auto* grad_cmd = app.add_subcommand("grad-check", "64-bit finite-difference verification suite");
  grad_cmd->add_option("--configurations", grad_args.configurations)->check(CLI::PositiveNumber);
  grad_cmd->add_option("--epsilon", grad_args.epsilon);
  grad_cmd->add_option("--tolerance", grad_args.tolerance);
  grad_cmd->add_flag("--verbose", grad_args.verbose);
  grad_args.config.attach(grad_cmd);

  GenArgs gen_args;
  auto* gen_cmd = app.add_subcommand("gen-synthetic", "write a synthetic parallel corpus");
  gen_cmd->add_option("--out-prefix", gen_args.out_prefix, "writes PREFIX.src and PREFIX.trg")->required();
  gen_cmd->add_option("--count", gen_args.spec.count);
  gen_cmd->add_option("--vocab-size", gen_args.spec.vocab_size);
  gen_cmd->add_option("--n-chars", gen_args.spec.n_chars);
  gen_cmd->add_option("--min-length", gen_args.spec.min_length);
  gen_cmd->add_option("--max-length", gen_args.spec.max_length);
  gen_cmd->add_option("--min-token-chars", gen_args.spec.min_token_chars);
  gen_cmd->add_option("--max-token-chars", gen_args.spec.max_token_chars);
  gen_cmd->add_option("--rule", gen_args.rule, "identity, reverse or swap-halves");
  gen_cmd->add_option("--cipher-shift", gen_args.cipher_shift, "character rotation within the alphabet");
  gen_cmd->add_option("--seed", gen_args.spec.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return 2;
  }

  try {
    if (*align_cmd) return run_align(align_args);
    if (*prepare_cmd) return run_prepare(prepare_args);
    if (*train_cmd) return run_train(train_args);
    if (*translate_cmd) return run_translate(translate_args);
    if (*bleu_cmd) return run_bleu(bleu_args);
    if (*grad_cmd) return run_grad_check(grad_args);
    if (*gen_cmd) return run_gen_synthetic(gen_args);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
