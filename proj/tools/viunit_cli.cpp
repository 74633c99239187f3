#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "viunit/harness.hpp"
#include "viunit/hash.hpp"
#include "viunit/text.hpp"
#include "viunit/imagegen.hpp"
#include "viunit/policies.hpp"
#include "viunit/progclient.hpp"
#include "viunit/sampler.hpp"
#include "viunit/scoring.hpp"
#include "viunit/services.hpp"

namespace fs = std::filesystem;
using namespace viunit;

#ifndef VIUNIT_DEFAULT_ASSETS
#define VIUNIT_DEFAULT_ASSETS "assets/prompts"
#endif

namespace {

struct CliOptions {
  std::string config_path;
  std::string dataset_path;
  std::string input_path;
  std::string out_path;
  std::string assets_dir = VIUNIT_DEFAULT_ASSETS;
  std::string reward_kind = "viunit";
  int programs = 5;
  std::size_t tests = 5;
  std::string strategy = "answer_then_input";
  double theta = 0.7;
  long seed = 0;
  int iterations = 3;
  bool mock = false;
  bool record = false;
  bool replay = false;
  bool lenient = false;
};

void add_shared_flags(CLI::App* cmd, CliOptions& opt) {
  cmd->add_option("--config", opt.config_path, "JSON config file");
  cmd->add_option("--dataset", opt.dataset_path, "dataset JSONL");
  cmd->add_option("--programs", opt.programs, "programs per query");
  cmd->add_option("--tests", opt.tests, "unit tests per query (K)");
  cmd->add_option("--strategy", opt.strategy,
                  "by_answer | by_input | answer_then_input");
  cmd->add_option("--theta", opt.theta, "score threshold");
  cmd->add_option("--seed", opt.seed, "run seed");
  cmd->add_flag("--mock", opt.mock, "offline mock services");
  cmd->add_flag("--record", opt.record, "record service responses");
  cmd->add_flag("--replay", opt.replay, "replay from cache only");
  cmd->add_option("--out", opt.out_path, "output path");
  cmd->add_option("--assets", opt.assets_dir, "prompt asset directory");
  cmd->add_option("--lenient", opt.lenient, "skip malformed dataset lines");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

struct Session {
  RunConfig cfg;
  std::unique_ptr<ResponseCache> cache;
  std::unique_ptr<ChatClient> base_chat;
  std::unique_ptr<ChatClient> chat;
  std::unique_ptr<PerceptionBackend> backend;
  fs::path assets;
  fs::path out_base;

  std::string asset(const std::string& name) const {
    return read_text(assets / name);
  }
};

Session open_session(const CliOptions& opt) {
  Session s;
  s.cfg = RunConfig::load(opt.config_path);
  s.cfg.seed = opt.seed;
  s.cfg.programs = opt.programs;
  s.cfg.tests = opt.tests;
  s.cfg.strategy = opt.strategy;
  s.cfg.theta = opt.theta;
  s.cfg.mock = opt.mock;
  if (opt.record && opt.replay)
    throw std::invalid_argument("--record and --replay are exclusive");
  s.cfg.cache_mode = opt.record ? CacheMode::record
                     : opt.replay ? CacheMode::replay
                                  : CacheMode::off;
  s.assets = opt.assets_dir;
  s.out_base = opt.out_path.empty() ? fs::path(".")
                                    : fs::path(opt.out_path).parent_path();

  if (s.cfg.cache_mode != CacheMode::off)
    s.cache = std::make_unique<ResponseCache>(s.cfg.cache_dir,
                                              s.cfg.cache_mode);

  if (s.cfg.mock) {
    s.base_chat = std::make_unique<MockChatClient>();
    s.backend = std::make_unique<ScriptedBackend>();
  } else {
    if (s.cfg.chat_url.empty() && s.cfg.cache_mode != CacheMode::replay)
      throw std::invalid_argument("chat_url required without --mock");
    if (!s.cfg.chat_url.empty())
      s.base_chat = std::make_unique<HttpChatClient>(
          HttpClientConfig{s.cfg.chat_url});
    if (s.cfg.perception_url.empty())
      s.backend = std::make_unique<ScriptedBackend>();
    else
      s.backend = std::make_unique<RemoteBackend>(BackendConfig{},
                                                  s.cfg.perception_url);
  }
  if (s.cache)
    s.chat = std::make_unique<CachingChatClient>(s.base_chat.get(), *s.cache,
                                                 s.cfg.seed);
  return s;
}

ChatClient& chat_of(Session& s) { return s.chat ? *s.chat : *s.base_chat; }

SampleStrategy strategy_of(const std::string& name) {
  if (name == "by_answer") return SampleStrategy::by_answer;
  if (name == "by_input") return SampleStrategy::by_input;
  if (name == "answer_then_input") return SampleStrategy::answer_then_input;
  throw std::invalid_argument("unknown strategy: " + name);
}

std::ostream& open_out(const CliOptions& opt, std::ofstream& file) {
  if (opt.out_path.empty()) return std::cout;
  file.open(opt.out_path, std::ios::binary);
  if (!file) throw FormatError("cannot open for writing: " + opt.out_path);
  return file;
}

std::vector<DatasetRecord> load_dataset(const CliOptions& opt) {
  if (opt.dataset_path.empty())
    throw std::invalid_argument("--dataset is required");
  std::vector<std::string> warnings;
  auto records = ingest(opt.dataset_path, opt.lenient, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (records.empty()) throw FormatError("dataset is empty");
  return records;
}

GenSpec gen_spec_for(const Session& s, const DatasetRecord& rec) {
  GenSpec spec;
  spec.task = rec.task;
  spec.num_sequences = 3;
  spec.template_text = s.asset(rec.task == TaskKind::itm
                                   ? "unit_tests_itm.txt"
                                   : "unit_tests_vqa.txt");
  return spec;
}

ProgramPrompt program_prompt_for(const Session& s, const DatasetRecord& rec) {
  std::string api = s.asset("image_patch_api.txt");
  std::string examples = s.asset(rec.task == TaskKind::itm
                                     ? "programs_itm.txt"
                                     : "programs_vqa.txt");
  const std::string slot = "INSERT_CONTEXT_HERE";
  std::size_t pos = api.find(slot);
  if (pos == std::string::npos)
    throw FormatError("API template lacks INSERT_CONTEXT_HERE");
  api.replace(pos, slot.size(), examples);
  ProgramPrompt prompt;
  prompt.template_text = std::move(api);
  return prompt;
}

std::string reprompt_template_for(const Session& s,
                                  const DatasetRecord& rec) {
  std::string tpl = s.asset(rec.task == TaskKind::itm ? "reprompt_itm.txt"
                                                      : "reprompt_vqa.txt");
  const std::string slot = "INSERT_IMAGE_PATCH_API";
  std::size_t pos = tpl.find(slot);
  if (pos != std::string::npos) {
    std::string api = s.asset("image_patch_api.txt");
    // Drop the program-synthesis tail; the correction prompt has its own.
    std::size_t cut = api.find("INSERT_CONTEXT_HERE");
    if (cut != std::string::npos) api = api.substr(0, cut);
    tpl.replace(pos, slot.size(), api);
  }
  return tpl;
}

struct PipelineRow {
  DatasetRecord record;
  ImageHandle target;
  std::vector<dsl::ProgramSource> programs;
  std::vector<UnitTest> suite;
};

// Shared front half: programs, candidate tests, sampling, mock synthesis.
PipelineRow build_row(Session& s, const CliOptions& opt,
                      const DatasetRecord& rec) {
  PipelineRow row;
  row.record = rec;
  row.target = resolve_image(rec.image_ref,
                             fs::path(opt.dataset_path).parent_path().string());
  row.programs =
      generate_programs(rec.query, opt.programs, chat_of(s),
                        program_prompt_for(s, rec));

  auto candidates =
      generate_candidates(rec.query, std::nullopt, gen_spec_for(s, rec),
                          chat_of(s));
  SampleSpec sample_spec{opt.tests, strategy_of(opt.strategy)};
  auto embedder = hash_embedder(64);
  auto sampled = sample(candidates, sample_spec, *embedder);

  SynthSpec synth_spec;
  synth_spec.strategy = SynthStrategy::mock_scene;  // offline pipeline
  synth_spec.seed = opt.seed;
  for (const auto& cand : sampled) {
    SynthResult synth_result =
        synthesize(cand.caption, synth_spec, nullptr, nullptr);
    row.suite.push_back(
        UnitTest{cand.caption, cand.expected, synth_result.image});
  }
  return row;
}

nlohmann::json outcome_json(const dsl::ExecutionOutcome& outcome) {
  nlohmann::json j = {{"kind", dsl::to_string(outcome.kind)}};
  if (outcome.kind == dsl::OutcomeKind::answer)
    j["answer"] = outcome.answer;
  else
    j["diagnostic"] = outcome.diagnostic;
  return j;
}

nlohmann::json row_json(const PipelineRow& row) {
  nlohmann::json programs = nlohmann::json::array();
  for (const auto& p : row.programs) programs.push_back(p.text);
  nlohmann::json tests = nlohmann::json::array();
  for (const auto& t : row.suite)
    tests.push_back({{"caption", t.caption},
                     {"expected", t.expected},
                     {"image", t.image.id}});
  return {{"id", row.record.id},
          {"query", row.record.query},
          {"gold", row.record.gold},
          {"task", row.record.task == TaskKind::itm ? "itm" : "vqa"},
          {"programs", programs},
          {"tests", tests}};
}

int cmd_gen_tests(const CliOptions& opt) {
  Session s = open_session(opt);
  auto records = load_dataset(opt);
  std::ofstream file;
  std::ostream& out = open_out(opt, file);
  for (const auto& rec : records) {
    auto candidates = generate_candidates(rec.query, std::nullopt,
                                          gen_spec_for(s, rec), chat_of(s));
    for (const auto& c : candidates) {
      nlohmann::json j = {{"id", rec.id},
                          {"caption", c.caption},
                          {"expected", c.expected},
                          {"source_sequence", c.source_sequence}};
      out << canonical_json(j) << "\n";
    }
  }
  return 0;
}

std::map<std::string, std::vector<CandidateTest>> load_candidates(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open candidates: " + path);
  std::map<std::string, std::vector<CandidateTest>> by_id;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      by_id[j.at("id").get<std::string>()].push_back(
          CandidateTest{j.at("caption").get<std::string>(),
                        j.at("expected").get<std::string>(),
                        j.value("source_sequence", 0)});
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  if (by_id.empty()) throw FormatError("no candidates in " + path);
  return by_id;
}

int cmd_sample(const CliOptions& opt) {
  auto by_id = load_candidates(opt.input_path);
  SampleSpec spec{opt.tests, strategy_of(opt.strategy)};
  auto embedder = hash_embedder(64);
  std::ofstream file;
  std::ostream& out = open_out(opt, file);
  for (const auto& [id, candidates] : by_id) {
    for (const auto& c : sample(candidates, spec, *embedder)) {
      nlohmann::json j = {{"id", id},
                          {"caption", c.caption},
                          {"expected", c.expected},
                          {"source_sequence", c.source_sequence}};
      out << canonical_json(j) << "\n";
    }
  }
  return 0;
}

int cmd_synth(const CliOptions& opt) {
  if (!opt.mock)
    throw std::invalid_argument(
        "synth currently requires --mock (no image service configured)");
  auto by_id = load_candidates(opt.input_path);
  if (opt.out_path.empty())
    throw std::invalid_argument("synth requires --out directory");
  fs::create_directories(opt.out_path);
  SynthSpec spec;
  spec.strategy = SynthStrategy::mock_scene;
  spec.seed = opt.seed;
  std::ofstream index(fs::path(opt.out_path) / "tests.jsonl",
                      std::ios::binary);
  for (const auto& [id, candidates] : by_id) {
    int i = 0;
    for (const auto& c : candidates) {
      SynthResult result = synthesize(c.caption, spec, nullptr, nullptr);
      std::string name = id + "_" + std::to_string(i++) + ".json";
      result.image.scene->save((fs::path(opt.out_path) / name).string());
      nlohmann::json j = {{"id", id},
                          {"caption", c.caption},
                          {"expected", c.expected},
                          {"image", name}};
      index << canonical_json(j) << "\n";
    }
  }
  return 0;
}

int run_pipeline(const CliOptions& opt, const std::string& command) {
  Session s = open_session(opt);
  auto records = load_dataset(opt);
  ScoreConfig score_cfg;

  nlohmann::json manifest = {{"command", command},
                             {"config", s.cfg.to_json()},
                             {"records", nlohmann::json::array()}};
  std::vector<RecordResult> results;
  for (const auto& rec : records) {
    PipelineRow row = build_row(s, opt, rec);
    nlohmann::json entry = row_json(row);
    dsl::ExecutionOutcome final_outcome;

    if (command == "run-select") {
      SelectionResult sel = run_selection(row.programs, row.suite, row.target,
                                          *s.backend, score_cfg);
      final_outcome = sel.final_outcome;
      entry["scores"] = sel.pool_scores;
      entry["chosen_index"] = sel.winner.program.index;
      entry["aggregate"] = sel.winner.aggregate;
    } else if (command == "run-refuse") {
      RefusalConfig refusal;
      refusal.theta = opt.theta;
      if (rec.task == TaskKind::itm) {
        refusal.fallback = FallbackKind::itm_threshold;
        if (auto stmt = itm_statement(rec.query))
          refusal.itm_statement = *stmt;
      }
      RefusalDecision decision =
          run_refusal(rec.query, row.programs, row.suite, row.target,
                      *s.backend, score_cfg, refusal);
      entry["refused"] = decision.refused;
      entry["aggregate"] = decision.winner_score;
      entry["chosen_index"] = decision.winner.program.index;
      final_outcome.kind = dsl::OutcomeKind::answer;
      final_outcome.answer = decision.answer;
      if (!decision.refused)
        final_outcome = dsl::run_source(decision.winner.program, row.target,
                                        *s.backend, score_cfg.limits);
    } else if (command == "run-reprompt") {
      RepromptConfig rc;
      rc.theta = opt.theta;
      rc.max_iterations = opt.iterations;
      RepromptResult rr = run_reprompt(
          rec.query, row.programs, row.suite, row.target, *s.backend,
          chat_of(s), score_cfg, rc, reprompt_template_for(s, rec));
      final_outcome = rr.final_outcome;
      entry["aggregate"] = rr.best.aggregate;
      entry["llm_calls"] = rr.llm_calls;
      nlohmann::json trace = nlohmann::json::array();
      for (const auto& it : rr.trace)
        trace.push_back({{"iteration", it.index}, {"best", it.best_score}});
      entry["trace"] = trace;
    } else {
      throw std::logic_error("unknown pipeline command");
    }

    entry["outcome"] = outcome_json(final_outcome);
    bool correct =
        final_outcome.kind == dsl::OutcomeKind::answer &&
        normalize_answer(final_outcome.answer) == normalize_answer(rec.gold);
    entry["correct"] = correct;
    manifest["records"].push_back(std::move(entry));
    results.push_back(RecordResult{rec.id, final_outcome, rec.gold});
  }
  manifest["metrics"] = {{"accuracy", accuracy(results)},
                         {"error_rate", error_rate(results)},
                         {"records", results.size()}};
  if (opt.out_path.empty())
    std::cout << manifest_bytes(manifest);
  else
    write_manifest(manifest, opt.out_path);
  return 0;
}

int cmd_emit_rewards(const CliOptions& opt) {
  Session s = open_session(opt);
  auto records = load_dataset(opt);
  RewardKind kind;
  if (opt.reward_kind == "viunit") kind = RewardKind::viunit;
  else if (opt.reward_kind == "correctness") kind = RewardKind::correctness;
  else throw std::invalid_argument("unknown reward kind: " + opt.reward_kind);

  std::vector<RewardExample> examples;
  for (const auto& rec : records) {
    PipelineRow row = build_row(s, opt, rec);
    for (const auto& program : row.programs) {
      RewardExample ex;
      ex.id = rec.id + "#" + std::to_string(program.index);
      ex.query = rec.query;
      ex.image = row.target;
      ex.gold = rec.gold;
      ex.program = program;
      ex.suite = row.suite;
      examples.push_back(std::move(ex));
    }
  }
  auto rewards =
      emit_reward_dataset(examples, *s.backend, kind, opt.theta);
  std::ofstream file;
  std::ostream& out = open_out(opt, file);
  for (const auto& r : rewards) out << r.to_jsonl() << "\n";
  return 0;
}

int cmd_report(const CliOptions& opt) {
  if (opt.input_path.empty())
    throw std::invalid_argument("report requires --in manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text(opt.input_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("invalid manifest: " + std::string(e.what()));
  }
  // Metrics recompute from the per-record entries alone.
  std::vector<RecordResult> results;
  std::size_t refused = 0;
  for (const auto& entry : manifest.at("records")) {
    RecordResult r;
    r.id = entry.at("id").get<std::string>();
    r.gold = entry.at("gold").get<std::string>();
    const auto& outcome = entry.at("outcome");
    std::string kind = outcome.at("kind").get<std::string>();
    if (kind == "answer") {
      r.final_outcome.kind = dsl::OutcomeKind::answer;
      r.final_outcome.answer = outcome.at("answer").get<std::string>();
    } else {
      r.final_outcome.kind = kind == "compile_error"
                                 ? dsl::OutcomeKind::compile_error
                                 : kind == "timeout"
                                       ? dsl::OutcomeKind::timeout
                                       : dsl::OutcomeKind::runtime_error;
      r.final_outcome.diagnostic =
          outcome.value("diagnostic", std::string());
    }
    if (entry.value("refused", false)) ++refused;
    results.push_back(std::move(r));
  }
  nlohmann::json report = {{"accuracy", accuracy(results)},
                           {"error_rate", error_rate(results)},
                           {"records", results.size()},
                           {"refused", refused}};
  std::ofstream file;
  std::ostream& out = open_out(opt, file);
  out << canonical_json(report) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"visual-program unit-testing pipeline"};
  app.require_subcommand(1);
  CliOptions opt;

  auto* gen_tests = app.add_subcommand("gen-tests", "generate candidate tests");
  auto* sample_cmd = app.add_subcommand("sample", "coverage-sample tests");
  auto* synth = app.add_subcommand("synth", "synthesize test images");
  auto* run_select = app.add_subcommand("run-select", "best-program selection");
  auto* run_refuse = app.add_subcommand("run-refuse", "selection with refusal");
  auto* run_reprompt =
      app.add_subcommand("run-reprompt", "selection with correction loop");
  auto* emit_rewards =
      app.add_subcommand("emit-rewards", "emit reward-weighted records");
  auto* report = app.add_subcommand("report", "metrics from a manifest");

  for (CLI::App* cmd : {gen_tests, sample_cmd, synth, run_select, run_refuse,
                        run_reprompt, emit_rewards, report})
    add_shared_flags(cmd, opt);
  sample_cmd->add_option("--in", opt.input_path, "candidate JSONL");
  synth->add_option("--in", opt.input_path, "sampled candidate JSONL");
  report->add_option("--in", opt.input_path, "manifest path");
  run_reprompt->add_option("--iterations", opt.iterations,
                           "max correction rounds");
  emit_rewards->add_option("--reward", opt.reward_kind,
                           "correctness | viunit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen_tests->parsed()) return cmd_gen_tests(opt);
    if (sample_cmd->parsed()) return cmd_sample(opt);
    if (synth->parsed()) return cmd_synth(opt);
    if (run_select->parsed()) return run_pipeline(opt, "run-select");
    if (run_refuse->parsed()) return run_pipeline(opt, "run-refuse");
    if (run_reprompt->parsed()) return run_pipeline(opt, "run-reprompt");
    if (emit_rewards->parsed()) return cmd_emit_rewards(opt);
    if (report->parsed()) return cmd_report(opt);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const ServiceError& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 3;
  } catch (const BackendUnavailable& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 3;
  } catch (const CacheMiss& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 3;
  } catch (const EmptyGeneration& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 3;
  } catch (const LayoutUnparsable& e) {
    std::cerr << "service error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }
}
