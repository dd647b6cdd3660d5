#pragma once

#include <optional>
#include <string>
#include <vector>

namespace semsr {

/// Settings shared by every subcommand. Values come from `--config`
/// (`key = value` lines) and are overridden by flags.
struct RunConfig {
  // ingest
  std::string sessions;
  std::string metadata;
  std::size_t min_item_freq = 5;
  std::size_t min_session_len = 2;
  double train_ratio = 0.8;
  double val_ratio = 0.1;
  double test_ratio = 0.1;

  std::string data;  // directory written by `ingest`
  std::string out = "out";
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::vector<std::size_t> ks{20, 100};

  // model
  std::string variant = "base";
  std::string backbone = "attn-niser";
  std::string init;         // "", "random" or "semantic"
  std::string semantic;     // embedding file, or "pseudo"
  std::size_t d1 = 100;
  std::size_t d2 = 1024;    // width of pseudo embeddings
  std::size_t d = 100;
  double scale = 16.0;

  // optimizer
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 100;
  std::size_t epochs = 30;
  std::size_t patience = 5;

  // eval / rerank
  std::string checkpoint;
  std::string candidates;
  std::string dump_candidates;
  std::string ranker;

  // prompt baseline
  std::vector<std::string> strategies{"fs", "zcot", "fscot"};
  std::size_t shots = 3;
  std::string mock;
  std::string endpoint;
  std::string endpoint_model = "Llama-3.1-8B-Instruct";
  double timeout = 60.0;
  std::size_t retries = 3;
  std::string templates;
  std::size_t title_width = 256;
  std::size_t limit = 0;  // evaluate at most this many test examples (0 = all)
};

/// Exit codes: 0 success, 1 computation failure, 2 usage or IO error.
int run_cli(int argc, const char* const* argv);

}  // namespace semsr
