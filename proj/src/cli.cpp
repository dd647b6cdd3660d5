#include "semsr/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "semsr/checkpoint.hpp"
#include "semsr/dataset.hpp"
#include "semsr/embeddings.hpp"
#include "semsr/llm.hpp"
#include "semsr/metrics.hpp"
#include "semsr/model.hpp"
#include "semsr/retrieval.hpp"
#include "semsr/train.hpp"

namespace semsr {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void require_path(const std::string& path, const char* what) {
  if (path.empty()) throw UsageError(std::string("missing --") + what);
  if (!fs::exists(path)) throw IoError(std::string(what) + " path '" + path + "' does not exist");
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_json(const std::string& path, const ojson& j) { write_file(path, j.dump(2) + "\n"); }

struct Dataset {
  Catalog catalog;
  std::vector<Example> train;
  std::vector<Example> val;
  std::vector<Example> test;
};

Dataset load_dataset(const RunConfig& cfg) {
  require_path(cfg.data, "data");
  Dataset ds;
  ds.catalog = Catalog(ingest_metadata(join(cfg.data, "catalog.jsonl")));
  auto load = [&](const char* name, Split split) {
    const auto path = join(cfg.data, name);
    if (!fs::exists(path)) return std::vector<Example>{};
    auto sessions = load_split(path, ds.catalog, split);
    return expand_incremental(sessions);
  };
  ds.train = load("train.jsonl", Split::train);
  ds.val = load("val.jsonl", Split::val);
  ds.test = load("test.jsonl", Split::test);
  return ds;
}

std::optional<SemanticTable> load_semantic(const RunConfig& cfg, const Catalog& catalog) {
  if (cfg.semantic.empty()) return std::nullopt;
  if (cfg.semantic == "pseudo") return pseudo_encode_catalog(catalog, cfg.d2);
  require_path(cfg.semantic, "semantic");
  return load_semantic_table(cfg.semantic, catalog);
}

std::vector<std::size_t> cutoffs(const RunConfig& cfg) {
  std::vector<std::size_t> ks = cfg.ks;
  if (ks.empty()) throw UsageError("--k needs at least one cutoff");
  for (auto k : ks) {
    if (k == 0) throw UsageError("cutoffs must be positive");
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  return ks;
}

ojson result_json(const EvalResult& r) { return ojson::parse(to_json(r)); }

int cmd_ingest(const RunConfig& cfg) {
  require_path(cfg.sessions, "sessions");
  require_path(cfg.metadata, "metadata");
  auto log = ingest_sessions(cfg.sessions);
  for (const auto& w : log.warnings) std::cerr << "warning: " << w << "\n";
  const auto metadata = ingest_metadata(cfg.metadata);
  auto pre = preprocess(log.sessions, metadata, {cfg.min_item_freq, cfg.min_session_len});
  if (!pre.unknown_items.empty()) {
    std::cerr << "warning: dropped " << pre.unknown_items.size() << " item id(s) without metadata\n";
  }
  const auto splits =
      split_by_user(std::move(pre.sessions), {cfg.train_ratio, cfg.val_ratio, cfg.test_ratio}, cfg.seed);

  ensure_dir(cfg.out);
  std::string catalog_text;
  for (const auto& item : pre.catalog.items()) catalog_text += item_to_json_line(item) + "\n";
  write_file(join(cfg.out, "catalog.jsonl"), catalog_text);
  auto write_split = [&](const char* name, const std::vector<Session>& sessions) {
    std::string text;
    for (const auto& s : sessions) text += session_to_json_line(s, pre.catalog) + "\n";
    write_file(join(cfg.out, name), text);
  };
  write_split("train.jsonl", splits.train);
  write_split("val.jsonl", splits.val);
  write_split("test.jsonl", splits.test);

  const auto stats = compute_stats(splits, pre.catalog);
  ojson manifest;
  manifest["n_train"] = stats.train_examples;
  manifest["n_val"] = stats.val_examples;
  manifest["n_test"] = stats.test_examples;
  manifest["n_items"] = stats.items;
  manifest["avg_session_length"] = stats.avg_session_length;
  manifest["sessions"] = {{"train", stats.train_sessions}, {"val", stats.val_sessions}, {"test", stats.test_sessions}};
  manifest["min_item_freq"] = cfg.min_item_freq;
  manifest["min_session_len"] = cfg.min_session_len;
  manifest["filter_rounds"] = pre.rounds;
  manifest["unknown_items"] = pre.unknown_items.size();
  manifest["seed"] = cfg.seed;
  write_json(join(cfg.out, "manifest.json"), manifest);
  std::cout << manifest.dump(2) << "\n";
  return 0;
}

int cmd_train(const RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  if (ds.train.empty()) throw DataError("training split is empty");
  ModelConfig mc;
  mc.variant = parse_variant(cfg.variant);
  mc.backbone = cfg.backbone;
  mc.n = ds.catalog.size();
  mc.d1 = cfg.d1;
  mc.d = cfg.d;
  mc.scale = cfg.scale;
  std::optional<InitMode> init;
  if (cfg.init == "random") {
    init = InitMode::random;
  } else if (cfg.init == "semantic") {
    init = InitMode::semantic_projected;
  } else if (!cfg.init.empty()) {
    throw UsageError("--init must be 'random' or 'semantic'");
  }
  const bool needs_semantic = mc.fused() || init.value_or(mc.variant == Variant::sem_i
                                                              ? InitMode::semantic_projected
                                                              : InitMode::random) == InitMode::semantic_projected;
  auto semantic = load_semantic(cfg, ds.catalog);
  if (needs_semantic && !semantic) throw UsageError("variant " + cfg.variant + " needs --semantic");
  mc.d2 = semantic ? semantic->width() : 0;
  const std::string fingerprint = semantic ? semantic->fingerprint() : "";

  Model model = Model::create(mc, initial_item_table(mc, semantic ? &*semantic : nullptr, init, cfg.seed), cfg.seed);
  FitOptions options;
  options.epochs = cfg.epochs;
  options.batch_size = cfg.batch_size;
  options.patience = cfg.patience;
  options.seed = cfg.seed;
  options.threads = cfg.threads;
  options.adam = {cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon};
  const SemanticTable* sem = mc.fused() ? &*semantic : nullptr;
  auto result = fit(ds.train, ds.val, std::move(model), sem, options, [](const EpochRecord& r) {
    std::cerr << "epoch " << r.epoch << " loss " << r.train_loss;
    if (r.val_recall) std::cerr << " val_recall " << *r.val_recall;
    std::cerr << "\n";
  });
  if (semantic && semantic->fingerprint() != fingerprint) throw Error("semantic table changed during training");

  ensure_dir(cfg.out);
  save_checkpoint(cfg.out, result.best,
                  {cfg.seed, result.steps, result.best_epoch, mc.fused() ? fingerprint : std::string()});
  ojson history;
  history["seed"] = cfg.seed;
  history["variant"] = cfg.variant;
  history["best_epoch"] = result.best_epoch;
  history["diverged"] = result.diverged;
  ojson epochs = ojson::array();
  for (const auto& r : result.history) {
    ojson e{{"epoch", r.epoch}, {"train_loss", r.train_loss}};
    e["val_recall"] = r.val_recall ? ojson(*r.val_recall) : ojson(nullptr);
    epochs.push_back(std::move(e));
  }
  history["epochs"] = std::move(epochs);
  write_json(join(cfg.out, "history.json"), history);
  if (result.diverged) {
    std::cerr << "error: training diverged (" << result.divergence_message << "); kept the last good checkpoint\n";
    return 1;
  }
  std::cerr << "saved checkpoint to " << cfg.out << " (best epoch " << result.best_epoch << ")\n";
  return 0;
}

struct LoadedModel {
  LoadedCheckpoint checkpoint;
  std::optional<SemanticTable> semantic;
};

LoadedModel load_model(const RunConfig& cfg, const std::string& dir, const Catalog& catalog, const char* what) {
  require_path(dir, what);
  LoadedModel m{load_checkpoint(dir), std::nullopt};
  if (m.checkpoint.model.config.n != catalog.size()) {
    throw DataError(std::string(what) + " was trained on " + std::to_string(m.checkpoint.model.config.n) +
                    " items but the dataset has " + std::to_string(catalog.size()));
  }
  if (m.checkpoint.model.config.fused()) {
    RunConfig sem_cfg = cfg;
    sem_cfg.d2 = m.checkpoint.model.config.d2;
    m.semantic = load_semantic(sem_cfg, catalog);
    if (!m.semantic) throw UsageError(std::string(what) + " is a sem-f model and needs --semantic");
    if (m.semantic->fingerprint() != m.checkpoint.info.semantic_fingerprint) {
      throw DataError("semantic table fingerprint does not match the one recorded in " + dir);
    }
  }
  return m;
}

int cmd_eval(const RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  if (ds.test.empty()) throw DataError("test split is empty");
  const auto ks = cutoffs(cfg);
  auto loaded = load_model(cfg, cfg.checkpoint, ds.catalog, "checkpoint");
  const Scorer scorer(loaded.checkpoint.model, loaded.semantic ? &*loaded.semantic : nullptr);
  std::vector<RankedList> lists;
  const auto result = evaluate(scorer, ds.test, ks, cfg.threads, &lists);

  ensure_dir(cfg.out);
  ojson report = result_json(result);
  report["variant"] = std::string(to_string(loaded.checkpoint.model.config.variant));
  report["seed"] = cfg.seed;
  write_json(join(cfg.out, "report.json"), report);
  const auto text = render_text(result, "variant " + std::string(to_string(loaded.checkpoint.model.config.variant)));
  write_file(join(cfg.out, "report.txt"), text);
  std::cout << text;
  if (!cfg.dump_candidates.empty()) {
    std::vector<CandidateRecord> records;
    for (std::size_t e = 0; e < lists.size(); ++e) records.push_back({e, lists[e], ds.test[e].target});
    write_candidates(cfg.dump_candidates, records);
  }
  return 0;
}

int cmd_rerank(const RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  require_path(cfg.candidates, "candidates");
  const auto ks = cutoffs(cfg);
  const auto records = read_candidates(cfg.candidates);
  auto ranker = load_model(cfg, cfg.ranker, ds.catalog, "ranker");
  const Scorer scorer(ranker.checkpoint.model, ranker.semantic ? &*ranker.semantic : nullptr);

  std::vector<ItemIndex> targets;
  std::vector<RankedList> before;
  for (const auto& r : records) {
    if (r.example >= ds.test.size()) throw DataError("candidate example " + std::to_string(r.example) + " out of range");
    const auto target = ds.test[r.example].target;
    if (r.target && *r.target != target) {
      throw DataError("candidate example " + std::to_string(r.example) + " target disagrees with the test split");
    }
    targets.push_back(target);
    before.push_back(r.ranked);
  }
  const auto input_result = evaluate(before, targets, ks);

  // Each cutoff re-ranks its own head, so the item set at every K is unchanged.
  std::vector<std::vector<RankedList>> after(ks.size(), std::vector<RankedList>(records.size()));
  parallel_chunks(records.size(), 32, cfg.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Vector scores = scorer.logits(ds.test[records[i].example].prefix);
      for (std::size_t c = 0; c < ks.size(); ++c) {
        const auto k = std::min(ks[c], records[i].ranked.size());
        after[c][i] = rerank(records[i].ranked, {scores.data(), static_cast<std::size_t>(scores.size())}, k);
      }
    }
  });
  EvalResult reranked;
  reranked.example_count = records.size();
  for (std::size_t c = 0; c < ks.size(); ++c) {
    reranked.per_k[ks[c]] = evaluate(after[c], targets, {ks[c]}).per_k.at(ks[c]);
  }
  for (auto k : ks) {
    if (reranked.per_k.at(k).recall != input_result.per_k.at(k).recall) {
      throw Error("re-ranking changed Recall@" + std::to_string(k) + " from " +
                  std::to_string(input_result.per_k.at(k).recall) + " to " +
                  std::to_string(reranked.per_k.at(k).recall));
    }
  }

  ensure_dir(cfg.out);
  ojson report = result_json(reranked);
  report["input"] = result_json(input_result);
  report["seed"] = cfg.seed;
  write_json(join(cfg.out, "rerank_report.json"), report);
  const auto text = render_text(input_result, "input candidates") + render_text(reranked, "re-ranked");
  write_file(join(cfg.out, "rerank_report.txt"), text);
  std::cout << text;
  return 0;
}

int cmd_prompt(const RunConfig& cfg) {
  const auto ds = load_dataset(cfg);
  if (ds.test.empty()) throw DataError("test split is empty");
  const auto ks = cutoffs(cfg);
  const auto depth = std::min(ks.back(), ds.catalog.size());

  std::unique_ptr<GenerationClient> client;
  if (!cfg.mock.empty()) {
    require_path(cfg.mock, "mock");
    client = std::make_unique<MockClient>(MockClient::from_file(cfg.mock));
  } else if (!cfg.endpoint.empty()) {
    EndpointConfig ep;
    ep.base_url = cfg.endpoint;
    ep.model = cfg.endpoint_model;
    ep.timeout_seconds = cfg.timeout;
    ep.max_retries = cfg.retries;
    client = std::make_unique<HttpChatClient>(ep);
  } else {
    throw UsageError("prompt needs --mock or --endpoint");
  }
  const PromptTemplates templates = cfg.templates.empty() ? PromptTemplates::defaults()
                                                          : PromptTemplates::load(cfg.templates);
  RetryPolicy retry;
  retry.max_retries = cfg.retries;
  const auto encoder = pseudo_text_encoder(cfg.title_width);
  const auto index = build_title_index(ds.catalog, encoder);
  const std::size_t count = cfg.limit ? std::min(cfg.limit, ds.test.size()) : ds.test.size();
  const std::span<const Example> test(ds.test.data(), count);

  ojson report;
  report["seed"] = cfg.seed;
  report["n_examples"] = count;
  ojson per_strategy;
  std::string text;
  for (const auto& name : cfg.strategies) {
    PromptStrategy strategy;
    strategy.kind = parse_prompt_kind(name);
    if (strategy.kind != PromptKind::zcot) strategy.shots = sample_shots(ds.train, ds.catalog, cfg.shots, cfg.seed);
    std::vector<RankedList> lists(count);
    std::vector<std::string> failures(count);
    parallel_chunks(count, 1, cfg.threads, [&](std::size_t, std::size_t begin, std::size_t end) {
      for (std::size_t e = begin; e < end; ++e) {
        try {
          lists[e] = recommend_via_llm(test[e].prefix, ds.catalog, *client, strategy, index, encoder, depth, retry,
                                       templates);
        } catch (const GenerationError& err) {
          failures[e] = err.what();
        }
      }
    });
    std::size_t failed = 0;
    for (std::size_t e = 0; e < count; ++e) {
      if (failures[e].empty()) continue;
      ++failed;
      std::cerr << "warning: " << name << " example " << e << ": " << failures[e] << "\n";
    }
    std::vector<ItemIndex> targets;
    for (const auto& ex : test) targets.push_back(ex.target);
    // Failed generations score as misses (their lists are empty).
    const auto result = evaluate(lists, targets, ks);
    ojson entry = result_json(result);
    entry["failed"] = failed;
    per_strategy[name] = std::move(entry);
    text += render_text(result, name + "-llm");
  }
  report["strategies"] = std::move(per_strategy);
  ensure_dir(cfg.out);
  write_json(join(cfg.out, "prompt_report.json"), report);
  write_file(join(cfg.out, "prompt_report.txt"), text);
  std::cout << text;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  RunConfig cfg;
  CLI::App app{"Session-based recommendation with frozen semantic item embeddings"};
  app.set_config("--config", "", "key = value configuration file; flags override it");
  app.require_subcommand(1);

  app.add_option("--sessions", cfg.sessions, "session log (JSON lines)");
  app.add_option("--metadata", cfg.metadata, "item metadata (JSON lines)");
  app.add_option("--min-item-freq", cfg.min_item_freq)->capture_default_str();
  app.add_option("--min-session-len", cfg.min_session_len)->capture_default_str();
  app.add_option("--train-ratio", cfg.train_ratio)->capture_default_str();
  app.add_option("--val-ratio", cfg.val_ratio)->capture_default_str();
  app.add_option("--test-ratio", cfg.test_ratio)->capture_default_str();
  app.add_option("--data", cfg.data, "dataset directory written by ingest");
  app.add_option("--out", cfg.out, "output directory")->capture_default_str();
  app.add_option("--seed", cfg.seed)->capture_default_str();
  app.add_option("--threads", cfg.threads)->capture_default_str()->check(CLI::PositiveNumber);
  app.add_option("--k", cfg.ks, "cutoffs, comma separated")->delimiter(',')->capture_default_str();
  app.add_option("--variant", cfg.variant)->check(CLI::IsMember({"base", "sem-i", "sem-f"}))->capture_default_str();
  app.add_option("--backbone", cfg.backbone)->capture_default_str();
  app.add_option("--init", cfg.init, "item table init: random or semantic");
  app.add_option("--semantic", cfg.semantic, "semantic embedding file (TSV or SEMB1), or 'pseudo'");
  app.add_option("--d1", cfg.d1)->capture_default_str();
  app.add_option("--d2", cfg.d2, "pseudo embedding width")->capture_default_str();
  app.add_option("--d", cfg.d)->capture_default_str();
  app.add_option("--scale", cfg.scale)->capture_default_str();
  app.add_option("--lr", cfg.lr)->capture_default_str();
  app.add_option("--beta1", cfg.beta1)->capture_default_str();
  app.add_option("--beta2", cfg.beta2)->capture_default_str();
  app.add_option("--epsilon", cfg.epsilon)->capture_default_str();
  app.add_option("--batch-size", cfg.batch_size)->capture_default_str();
  app.add_option("--epochs", cfg.epochs)->capture_default_str();
  app.add_option("--patience", cfg.patience)->capture_default_str();
  app.add_option("--checkpoint", cfg.checkpoint, "checkpoint directory");
  app.add_option("--candidates", cfg.candidates, "candidate list file (JSON lines)");
  app.add_option("--dump-candidates", cfg.dump_candidates, "write ranked candidates here");
  app.add_option("--ranker", cfg.ranker, "checkpoint of the re-ranking model");
  app.add_option("--strategies", cfg.strategies)->delimiter(',')->capture_default_str();
  app.add_option("--shots", cfg.shots)->capture_default_str();
  app.add_option("--mock", cfg.mock, "prompt-hash -> response JSON map");
  app.add_option("--endpoint", cfg.endpoint, "chat completion base URL");
  app.add_option("--endpoint-model", cfg.endpoint_model)->capture_default_str();
  app.add_option("--timeout", cfg.timeout)->capture_default_str();
  app.add_option("--retries", cfg.retries)->capture_default_str();
  app.add_option("--templates", cfg.templates, "directory of prompt template overrides");
  app.add_option("--title-width", cfg.title_width)->capture_default_str();
  app.add_option("--limit", cfg.limit, "evaluate at most N test examples")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "preprocess and split a session log");
  auto* train = app.add_subcommand("train", "train a model and keep the best checkpoint");
  auto* eval = app.add_subcommand("eval", "Recall/MRR of a checkpoint on the test split");
  auto* rerank_cmd = app.add_subcommand("rerank", "re-rank candidate lists with a ranker checkpoint");
  auto* prompt = app.add_subcommand("prompt", "LLM-as-recommender prompt baselines");
  for (auto* sub : {ingest, train, eval, rerank_cmd, prompt}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(cfg);
    if (*train) return cmd_train(cfg);
    if (*eval) return cmd_eval(cfg);
    if (*rerank_cmd) return cmd_rerank(cfg);
    if (*prompt) return cmd_prompt(cfg);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace semsr
