#include "lcsynth/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "lcsynth/config.hpp"
#include "lcsynth/corpus.hpp"
#include "lcsynth/embedding.hpp"
#include "lcsynth/evalbench.hpp"
#include "lcsynth/llm.hpp"
#include "lcsynth/mixpack.hpp"
#include "lcsynth/mock_backends.hpp"
#include "lcsynth/parallel.hpp"
#include "lcsynth/prompts.hpp"
#include "lcsynth/retrieval.hpp"
#include "lcsynth/synthesis.hpp"
#include "lcsynth/text.hpp"
#include "lcsynth/trainplan.hpp"

namespace lcsynth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GlobalFlags {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  bool mock = false;
  std::string out_dir;
  std::string exchange_log;
  std::string replay;
};

struct Flags {
  std::vector<std::string> inputs;
  std::string corpus;
  std::string index;
  std::string mixture;
  std::string essays;
  std::string context;
  std::string query;
  std::string mock_reply;
  std::size_t n = 0;
  std::size_t limit = 0;
  std::size_t max_len = 0;
  std::size_t step = 0;
  std::size_t depths = 0;
  bool dry_run = false;
  bool downsample = false;
};

/// Process-wide state for one subcommand: resolved config, backends, the
/// root call ledger and the outputs written so far.
class Session {
 public:
  Session(std::string subcommand, const GlobalFlags& g, std::ostream& out)
      : subcommand_(std::move(subcommand)), globals_(g), out_(out) {
    if (!g.config_path.empty()) {
      config_ = load_run_config(g.config_path);
      config_dir_ = fs::path(g.config_path).parent_path();
    }
    if (g.seed_given) config_.seed = g.seed;
    if (!g.out_dir.empty()) config_.output_dir = g.out_dir;
    mock_ = g.mock;
    tok_ = make_tokenizer(config_.tokenizer);
  }

  const RunConfig& config() const { return config_; }
  std::uint64_t seed() const { return config_.seed; }
  bool mock() const { return mock_; }
  void force_mock() { mock_ = true; }
  const std::shared_ptr<const Tokenizer>& tokenizer() const { return tok_; }
  CallLedger& ledger() { return ledger_; }
  std::ostream& out() { return out_; }
  json& summary() { return summary_; }

  fs::path from_config(const std::string& p) const {
    const fs::path path(p);
    return path.is_relative() && !config_dir_.empty() ? config_dir_ / path : path;
  }

  fs::path output_path(const std::string& name) {
    const fs::path dir(config_.output_dir);
    fs::create_directories(dir);
    outputs_.push_back(name);
    return dir / name;
  }

  std::ofstream open_output(const std::string& name) {
    const auto path = output_path(name);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    return f;
  }

  Corpus load_corpus(const std::string& flag_path) const {
    std::vector<fs::path> paths;
    if (!flag_path.empty()) {
      paths.emplace_back(flag_path);
    } else {
      for (const auto& p : config_.corpus.paths) paths.push_back(from_config(p));
    }
    return load_corpora(paths);
  }

  Corpus load_corpora(const std::vector<fs::path>& paths) const {
    if (paths.empty()) throw UsageError("no corpus given (pass --corpus or set corpus.paths)");
    if (paths.size() == 1) return ingest_corpus(paths[0].string(), tok_);
    std::vector<Document> docs;
    for (const auto& p : paths) {
      auto c = ingest_corpus(p.string(), tok_);
      docs.insert(docs.end(), c.documents().begin(), c.documents().end());
    }
    return Corpus(std::move(docs), tok_, Corpus::Counted{});
  }

  LlmGateway& gateway(LlmBackend* override_backend = nullptr) {
    if (gateway_) return *gateway_;
    if (override_backend != nullptr) {
      backend_ref_ = override_backend;
    } else if (!globals_.replay.empty()) {
      std::ifstream in(globals_.replay);
      if (!in) throw UsageError("cannot read replay log " + globals_.replay);
      backend_ = std::make_unique<ReplayBackend>(read_exchange_log(in));
    } else if (mock_) {
      ScriptedMockOptions o;
      o.seed = config_.seed;
      o.summary_words = config_.mock.summary_words;
      o.queries_per_instruction = config_.mock.queries_per_instruction;
      backend_ = std::make_unique<ScriptedMockBackend>(o);
    } else {
      if (config_.llm.base_url.empty()) {
        throw ConfigError("llm.base_url is not configured (use --mock for offline runs)");
      }
      HttpChatConfig h;
      h.base_url = config_.llm.base_url;
      h.model = config_.llm.model;
      h.api_key_env = config_.llm.api_key_env;
      h.timeout = std::chrono::milliseconds(config_.llm.timeout_ms);
      backend_ = std::make_unique<HttpChatBackend>(h);
    }
    if (backend_) backend_ref_ = backend_.get();
    if (!globals_.exchange_log.empty()) {
      exchange_stream_.open(globals_.exchange_log, std::ios::binary);
      if (!exchange_stream_) throw UsageError("cannot write " + globals_.exchange_log);
      exchange_log_ = std::make_unique<ExchangeLog>(exchange_stream_);
    }
    RetryPolicy retry;
    retry.max_attempts = config_.llm.max_attempts;
    retry.initial_backoff = std::chrono::milliseconds(config_.llm.initial_backoff_ms);
    gateway_ = std::make_unique<LlmGateway>(*backend_ref_, retry, config_.llm.max_in_flight,
                                            exchange_log_.get());
    return *gateway_;
  }

  EmbeddingBackend& embedder() {
    if (embedder_) return *embedder_;
    if (mock_) {
      embedder_ = std::make_unique<HashingEmbedder>(config_.embedding.mock_dim, config_.seed);
    } else {
      if (config_.embedding.url.empty()) {
        throw ConfigError("embedding.url is not configured (use --mock for offline runs)");
      }
      HttpEmbeddingConfig h;
      h.url = config_.embedding.url;
      h.model = config_.embedding.model;
      h.api_key_env = config_.embedding.api_key_env;
      h.timeout = std::chrono::milliseconds(config_.embedding.timeout_ms);
      embedder_ = std::make_unique<HttpEmbeddingBackend>(h);
    }
    return *embedder_;
  }

  EmbedOptions embed_options() const {
    EmbedOptions o;
    o.batch_size = config_.embedding.batch_size;
    o.max_attempts = config_.embedding.max_attempts;
    o.max_in_flight = config_.embedding.max_in_flight;
    return o;
  }

  void write_manifest() {
    json m{{"subcommand", subcommand_},
           {"config_hash", config_.hash()},
           {"seed", config_.seed},
           {"mock", mock_},
           {"prompt_template_version", kPromptTemplateVersion},
           {"ledger", ledger_.snapshot().to_json()},
           {"outputs", outputs_},
           {"summary", summary_}};
    if (backend_ref_ != nullptr) m["llm_backend"] = backend_ref_->id();
    if (embedder_) m["embedding_backend"] = embedder_->id();
    const fs::path dir(config_.output_dir);
    fs::create_directories(dir);
    std::ofstream f(dir / (subcommand_ + ".manifest.json"), std::ios::binary);
    f << m.dump(2) << '\n';
    if (!f) throw std::runtime_error("cannot write manifest");
  }

 private:
  std::string subcommand_;
  GlobalFlags globals_;
  std::ostream& out_;
  RunConfig config_;
  fs::path config_dir_;
  bool mock_ = false;
  std::shared_ptr<const Tokenizer> tok_;
  CallLedger ledger_;
  std::unique_ptr<LlmBackend> backend_;
  LlmBackend* backend_ref_ = nullptr;
  std::ofstream exchange_stream_;
  std::unique_ptr<ExchangeLog> exchange_log_;
  std::unique_ptr<LlmGateway> gateway_;
  std::unique_ptr<EmbeddingBackend> embedder_;
  std::vector<std::string> outputs_;
  json summary_ = json::object();
};

void run_ingest(Session& s, const Flags& f) {
  std::vector<fs::path> paths;
  for (const auto& p : f.inputs) paths.emplace_back(p);
  if (paths.empty()) {
    for (const auto& p : s.config().corpus.paths) paths.push_back(s.from_config(p));
  }
  auto corpus = s.load_corpora(paths);
  s.summary()["documents_read"] = corpus.size();
  s.summary()["tokens_read"] = corpus.total_tokens();
  if (f.downsample) {
    corpus = downsample_short(corpus, s.config().corpus.short_threshold_tokens,
                              s.config().corpus.keep_p, s.seed());
  }
  auto out = s.open_output("corpus.jsonl");
  write_corpus_jsonl(corpus, out);
  s.summary()["documents_written"] = corpus.size();
  s.summary()["tokens_written"] = corpus.total_tokens();
  s.out() << "wrote " << corpus.size() << " documents\n";
}

VectorIndex index_corpus(Session& s, const Corpus& corpus) {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  for (const auto& d : corpus.documents()) {
    ids.push_back(d.id);
    texts.push_back(d.text);
  }
  return build_index(ids, texts, s.embedder(), s.embed_options());
}

void run_index(Session& s, const Flags& f) {
  const auto corpus = s.load_corpus(f.corpus);
  const auto index = index_corpus(s, corpus);
  auto out = s.open_output("index.jsonl");
  index.save_jsonl(out);
  s.summary()["vectors"] = index.size();
  s.summary()["dim"] = index.dim();
  s.out() << "indexed " << index.size() << " documents\n";
}

void run_dedup(Session& s, const Flags& f) {
  const auto corpus = s.load_corpus(f.inputs.empty() ? f.corpus : f.inputs.front());
  std::vector<TextItem> items;
  for (const auto& d : corpus.documents()) items.push_back({d.id, d.text});
  const auto kept = dedup_by_embedding(items, s.embedder(), s.config().retrieval.dedup_threshold,
                                       s.embed_options());
  std::vector<Document> docs;
  for (const auto& id : kept) docs.push_back(*corpus.find(id));
  auto out = s.open_output("dedup.jsonl");
  write_documents_jsonl(docs, out);
  s.summary()["input"] = corpus.size();
  s.summary()["kept"] = docs.size();
  s.out() << "kept " << docs.size() << " of " << corpus.size() << " items\n";
}

SynthesisConfig synthesis_config(const Session& s) {
  const auto& c = s.config();
  SynthesisConfig sc;
  sc.instruction.chunk_tokens = c.synthesis.instruction_chunk_tokens;
  sc.instruction.max_regenerations = c.synthesis.max_regenerations;
  sc.qfs.chunk_tokens = c.synthesis.qfs_chunk_tokens;
  sc.qfs.budget_tokens = c.synthesis.qfs_budget_tokens;
  sc.qfs.allow_truncation = c.synthesis.allow_truncation;
  sc.per_query_k = c.retrieval.per_query_k;
  sc.out_k = c.retrieval.out_k;
  sc.k_rrf = c.retrieval.k_rrf;
  sc.min_docs = c.synthesis.min_docs;
  sc.max_docs = c.synthesis.max_docs;
  sc.embed = s.embed_options();
  return sc;
}

void run_synth(Session& s, const Flags& f) {
  if (f.dry_run) s.force_mock();
  const auto corpus = s.load_corpus(f.corpus);
  VectorIndex index(1);
  if (!f.index.empty()) {
    std::ifstream in(f.index);
    if (!in) throw UsageError("cannot read index " + f.index);
    index = VectorIndex::load_jsonl(in);
  } else {
    index = index_corpus(s, corpus);
  }
  const std::size_t n = f.n > 0 ? f.n : s.config().synthesis.n_samples;
  const SynthesisInputs inputs{corpus, index, s.embedder(), s.gateway()};
  const auto run = run_synthesis(inputs, s.ledger(), synthesis_config(s), s.seed(), n,
                                 s.config().retrieval.dedup_threshold);
  {
    auto out = s.open_output("long_input.jsonl");
    for (const auto& sample : run.samples) out << to_json(sample).dump() << '\n';
  }
  {
    auto out = s.open_output("skipped.jsonl");
    for (const auto& skip : run.skipped) {
      out << json{{"sample_index", skip.sample_index}, {"stage", skip.stage}, {"reason", skip.reason}}
                 .dump()
          << '\n';
    }
  }
  s.summary()["requested"] = n;
  s.summary()["instructions_generated"] = run.instructions_generated;
  s.summary()["instructions_after_dedup"] = run.instructions_after_dedup;
  s.summary()["samples"] = run.samples.size();
  s.summary()["skipped"] = run.skipped.size();
  s.out() << "synthesized " << run.samples.size() << " samples (" << run.skipped.size()
          << " skipped)\n";
}

void run_backtranslate(Session& s, const Flags& f) {
  const auto corpus = s.load_corpus(f.corpus);
  const auto& c = s.config();
  auto docs = select_by_length(corpus, c.corpus.min_doc_tokens, c.corpus.max_doc_tokens);
  if (f.limit > 0 && docs.size() > f.limit) docs.resize(f.limit);
  BacktranslationOptions opts;
  opts.min_tokens = c.corpus.min_doc_tokens;
  opts.max_tokens = c.corpus.max_doc_tokens;
  opts.prompt_doc_tokens = c.synthesis.backtranslation_prompt_tokens;
  auto& gateway = s.gateway();
  std::vector<std::optional<LongOutputSample>> samples(docs.size());
  std::vector<std::string> errors(docs.size());
  parallel_for(docs.size(), gateway.max_in_flight(), [&](std::size_t i) {
    try {
      samples[i] = backtranslate_document(docs[i], corpus.tokenizer(), gateway, s.ledger(),
                                          derive_seed(s.seed(), i), opts);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  std::size_t written = 0;
  auto out = s.open_output("long_output.jsonl");
  auto skipped = s.open_output("skipped.jsonl");
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (samples[i]) {
      out << to_json(*samples[i]).dump() << '\n';
      ++written;
    } else {
      skipped << json{{"doc_id", docs[i].id}, {"reason", errors[i]}}.dump() << '\n';
    }
  }
  s.summary()["eligible_documents"] = docs.size();
  s.summary()["samples"] = written;
  s.summary()["skipped"] = docs.size() - written;
  s.out() << "back-translated " << written << " of " << docs.size() << " documents\n";
}

void run_mix(Session& s, const Flags& f) {
  const auto spec = !f.mixture.empty() ? read_mixture_spec(f.mixture) : [&] {
    auto m = s.config().mixture;
    for (auto& src : m.sources) src.path = s.from_config(src.path.string());
    return m;
  }();
  const auto samples = build_mixture(spec, s.seed());
  auto out = s.open_output("mixture.jsonl");
  write_mixture_jsonl(out, samples);
  s.summary()["samples"] = samples.size();
  s.out() << "mixed " << samples.size() << " samples\n";
}

void run_pack(Session& s, const Flags& f) {
  if (f.inputs.empty()) throw UsageError("pack needs --input (a mixture JSONL)");
  std::ifstream in(f.inputs.front());
  if (!in) throw UsageError("cannot read " + f.inputs.front());
  const auto stream = read_mixture_jsonl(in);
  const auto max_len = f.max_len > 0 ? f.max_len : s.config().packing.max_len;
  const auto seqs = pack_sequences(stream, *s.tokenizer(), max_len);
  auto out = s.open_output("packed.jsonl");
  std::size_t truncated = 0;
  std::size_t tokens = 0;
  for (const auto& seq : seqs) {
    out << seq.to_json().dump() << '\n';
    truncated += seq.truncations.size();
    tokens += seq.total_tokens;
  }
  s.summary()["samples"] = stream.size();
  s.summary()["sequences"] = seqs.size();
  s.summary()["tokens"] = tokens;
  s.summary()["truncated_samples"] = truncated;
  s.out() << "packed " << stream.size() << " samples into " << seqs.size() << " sequences\n";
}

void run_plan(Session& s, const Flags&) {
  const auto stages = progressive_schedule(s.config().schedule);
  print_schedule_table(s.out(), stages);
  auto out = s.open_output("schedule.jsonl");
  write_schedule_jsonl(out, stages);
  s.summary()["stages"] = stages.size();
}

void run_eval_needle(Session& s, const Flags& f) {
  const auto& nc = s.config().needle;
  const auto essays = s.load_corpus(f.essays);
  const auto lengths = default_needle_lengths(f.max_len > 0 ? f.max_len : nc.max_len,
                                              f.step > 0 ? f.step : nc.step);
  const auto depths = default_needle_depths(f.depths > 0 ? f.depths : nc.n_depths);
  if (lengths.empty()) throw UsageError("needle grid has no lengths");
  std::unique_ptr<LlmBackend> mock;
  if (!f.mock_reply.empty()) {
    mock = std::make_unique<FixedReplyBackend>(f.mock_reply);
  } else if (s.mock()) {
    mock = std::make_unique<EchoBackend>();
  }
  auto& gateway = s.gateway(mock.get());
  const HaystackSource source(essays, lengths.back(), s.seed());
  NeedleGridOptions opts;
  opts.needle = nc.needle;
  opts.question = nc.question;
  const auto grid = run_needle_grid(source, gateway, s.ledger(), lengths, depths, opts);
  auto out = s.open_output("needle.csv");
  grid.write_csv(out);
  double sum = 0.0;
  std::size_t scored = 0;
  for (const auto& row : grid.scores) {
    for (const auto v : row) {
      if (v >= 0.0) {
        sum += v;
        ++scored;
      }
    }
  }
  const double mean = scored > 0 ? sum / static_cast<double>(scored) : 0.0;
  s.summary()["cells"] = lengths.size() * depths.size();
  s.summary()["failed_cells"] = grid.failed_cells();
  s.summary()["mean_recall"] = mean;
  s.out() << "needle grid: " << lengths.size() << " x " << depths.size()
          << " cells, mean recall " << mean << '\n';
}

void run_eval_length(Session& s, const Flags& f) {
  if (f.inputs.empty()) throw UsageError("eval-length needs --input (CSV of x,y)");
  std::ifstream in(f.inputs.front());
  if (!in) throw UsageError("cannot read " + f.inputs.front());
  const auto points = read_length_csv(in);
  const auto report = length_report(points);
  json j{{"n", report.n},
         {"mean_required", report.mean_required},
         {"mean_output", report.mean_output}};
  if (report.fit) {
    j["fit"] = {{"a", report.fit->a}, {"b", report.fit->b}, {"c", report.fit->c},
                {"residual", report.fit->residual}};
  } else {
    j["fit_error"] = report.fit_error;
  }
  {
    auto out = s.open_output("length_report.json");
    out << j.dump(2) << '\n';
  }
  auto csv = s.open_output("length_points.csv");
  report.write_csv(csv, points);
  s.summary() = j;
  s.out() << "n=" << report.n << " mean_required=" << report.mean_required
          << " mean_output=" << report.mean_output;
  if (report.fit) {
    s.out() << " a=" << report.fit->a << " b=" << report.fit->b << " c=" << report.fit->c;
  } else {
    s.out() << " fit: " << report.fit_error;
  }
  s.out() << '\n';
}

void run_solve(Session& s, const Flags& f) {
  if (f.context.empty() || f.query.empty()) throw UsageError("solve needs --context and --query");
  std::ifstream in(f.context, std::ios::binary);
  if (!in) throw UsageError("cannot read " + f.context);
  std::stringstream buf;
  buf << in.rdbuf();
  QfsOptions qfs;
  qfs.chunk_tokens = s.config().synthesis.qfs_chunk_tokens;
  qfs.budget_tokens = s.config().synthesis.qfs_budget_tokens;
  qfs.allow_truncation = s.config().synthesis.allow_truncation;
  const auto result = solve_with_workflow(buf.str(), f.query, *s.tokenizer(), s.gateway(),
                                          &s.ledger(), qfs, s.config().synthesis.solve_word_limit);
  json j{{"query", f.query},
         {"answer", result.answer},
         {"chunks", result.n_chunks},
         {"rounds", result.rounds.size()},
         {"calls", result.calls.to_json()},
         {"warnings", result.warnings}};
  auto out = s.open_output("solve.json");
  out << j.dump(2) << '\n';
  s.summary()["chunks"] = result.n_chunks;
  s.summary()["calls"] = result.calls.total;
  s.out() << result.answer << '\n';
}

std::string one_line(std::string msg) {
  for (auto& c : msg) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  while (!msg.empty() && msg.back() == ' ') msg.pop_back();
  return msg;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Long-context instruction data synthesis and evaluation toolkit", "lcsynth"};
  app.require_subcommand(1);
  GlobalFlags g;
  Flags f;
  app.add_option("--config", g.config_path, "JSON run config");
  auto* seed_opt = app.add_option("--seed", g.seed, "Master seed (overrides the config)");
  app.add_flag("--mock", g.mock, "Use deterministic offline backends");
  app.add_option("--out", g.out_dir, "Output directory (overrides the config)");
  app.add_option("--exchange-log", g.exchange_log, "Append every LLM exchange to this JSONL");
  app.add_option("--replay", g.replay, "Answer LLM calls from a recorded exchange log");

  using Handler = void (*)(Session&, const Flags&);
  std::vector<std::pair<CLI::App*, Handler>> subs;
  auto add = [&](const char* name, const char* help, Handler h) {
    auto* sub = app.add_subcommand(name, help);
    sub->fallthrough();
    subs.emplace_back(sub, h);
    return sub;
  };
  auto* ingest = add("ingest", "Validate corpus JSONL and write a normalized copy", run_ingest);
  ingest->add_option("--input", f.inputs, "Corpus JSONL files");
  ingest->add_flag("--downsample", f.downsample, "Down-sample short documents");
  add("index", "Embed a corpus into a vector index", run_index)
      ->add_option("--corpus", f.corpus, "Corpus JSONL");
  auto* dedup = add("dedup", "Drop near-duplicate documents by embedding cosine", run_dedup);
  dedup->add_option("--input", f.inputs, "Corpus JSONL");
  auto* synth = add("synth", "Synthesize long-input instruction samples", run_synth);
  synth->add_option("--corpus", f.corpus, "Corpus JSONL");
  synth->add_option("--index", f.index, "Prebuilt vector index JSONL");
  synth->add_option("-n,--samples", f.n, "Number of samples");
  synth->add_flag("--dry-run", f.dry_run, "Offline run with mock backends");
  auto* bt = add("backtranslate", "Synthesize long-output samples from documents", run_backtranslate);
  bt->add_option("--corpus", f.corpus, "Corpus JSONL");
  bt->add_option("--limit", f.limit, "Maximum documents");
  add("mix", "Build the weighted training mixture", run_mix)
      ->add_option("--mixture", f.mixture, "Mixture spec JSON");
  auto* pack = add("pack", "Pack a mixture into fixed-length sequences", run_pack);
  pack->add_option("--input", f.inputs, "Mixture JSONL");
  pack->add_option("--max-len", f.max_len, "Maximum tokens per sequence");
  add("plan", "Print the progressive context-extension schedule", run_plan);
  auto* needle = add("eval-needle", "Needle-in-a-haystack recall grid", run_eval_needle);
  needle->add_option("--essays", f.essays, "Essay corpus JSONL");
  needle->add_option("--max-len", f.max_len, "Longest context");
  needle->add_option("--step", f.step, "Length step");
  needle->add_option("--depths", f.depths, "Number of depths");
  needle->add_option("--mock-reply", f.mock_reply, "Fixed model reply");
  auto* length = add("eval-length", "Output-length report and curve fit", run_eval_length);
  length->add_option("--input", f.inputs, "CSV of required,produced lengths");
  auto* solve = add("solve", "Answer a query over a long context with the workflow", run_solve);
  solve->add_option("--context", f.context, "Context text file");
  solve->add_option("--query", f.query, "Query");

  std::vector<std::string> argv_store{"lcsynth"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 2;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    for (const auto& [sub, handler] : subs) {
      if (!sub->parsed()) continue;
      Session session(sub->get_name(), g, out);
      handler(session, f);
      session.write_manifest();
      return 0;
    }
    err << "error: no subcommand given\n";
    return 2;
  } catch (const UsageError& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace lcsynth
