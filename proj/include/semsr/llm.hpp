#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semsr/dataset.hpp"
#include "semsr/retrieval.hpp"

namespace semsr {

enum class PromptKind { fs, zcot, fscot };

std::string_view to_string(PromptKind kind);
PromptKind parse_prompt_kind(std::string_view text);

struct Shot {
  std::vector<std::string> session_titles;
  std::string target_title;
};

struct PromptStrategy {
  PromptKind kind = PromptKind::fs;
  std::vector<Shot> shots;

  bool two_step() const { return kind != PromptKind::fs; }
  void validate() const;
};

/// Template texts keyed by name: system, fs, zcot_step1, zcot_step2,
/// fscot_step1, fscot_step2, shot. Placeholders use `{{name}}`.
class PromptTemplates {
 public:
  static const PromptTemplates& defaults();
  /// Defaults overridden by any `<name>.txt` present in `dir`.
  static PromptTemplates load(const std::string& dir);

  const std::string& get(const std::string& name) const;
  void set(const std::string& name, std::string text) { texts_[name] = std::move(text); }
  static const std::vector<std::string>& names();

 private:
  std::map<std::string, std::string> texts_;
};

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values);

struct Prompt {
  std::string system;
  std::string user;
};

/// Step 1 is the only step for fs. For zcot/fscot, step 1 asks for a
/// rationale and step 2 asks for the next title given that rationale.
Prompt build_prompt(const PromptStrategy& strategy, std::span<const std::string> session_titles, int step,
                    const std::optional<std::string>& rationale = std::nullopt,
                    const PromptTemplates& templates = PromptTemplates::defaults());

/// Stable key for replayable mock responses.
std::string prompt_hash(const Prompt& prompt);

class GenerationClient {
 public:
  virtual ~GenerationClient() = default;
  /// Throws GenerationError on transport failure or timeout.
  virtual std::string generate(const Prompt& prompt) = 0;
};

/// Replays responses from a prompt-hash -> text map. An optional
/// "__default__" entry answers unknown prompts; otherwise they fail.
class MockClient final : public GenerationClient {
 public:
  using Responses = std::map<std::string, std::string>;
  explicit MockClient(Responses responses) : responses_(std::move(responses)) {}
  static MockClient from_file(const std::string& path);

  std::string generate(const Prompt& prompt) override;
  void save(const std::string& path) const;

 private:
  std::map<std::string, std::string> responses_;
};

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string path = "/v1/chat/completions";
  std::string model = "Llama-3.1-8B-Instruct";
  std::string token_env = "SEMSR_LLM_TOKEN";
  double timeout_seconds = 60.0;
  std::size_t max_retries = 3;
};

/// OpenAI-style chat completion over HTTP. Sends the system and user texts
/// as two messages and returns `choices[0].message.content` verbatim.
class HttpChatClient final : public GenerationClient {
 public:
  explicit HttpChatClient(EndpointConfig config) : config_(std::move(config)) {}
  std::string generate(const Prompt& prompt) override;

 private:
  EndpointConfig config_;
};

struct RetryPolicy {
  std::size_t max_retries = 3;
  std::chrono::milliseconds initial_backoff{250};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to std::this_thread::sleep_for
};

/// Calls the client up to 1 + max_retries times with doubling backoff.
/// An empty (all-whitespace) generation counts as a failed attempt.
std::string generate_with_retry(GenerationClient& client, const Prompt& prompt, const RetryPolicy& policy);

struct GenerationTrace {
  std::vector<Prompt> prompts;
  std::optional<std::string> rationale;
  std::string title;
};

/// Runs one strategy end to end and returns the generated next-item title.
GenerationTrace generate_next_title(const PromptStrategy& strategy, std::span<const std::string> session_titles,
                                    GenerationClient& client, const RetryPolicy& policy,
                                    const PromptTemplates& templates = PromptTemplates::defaults());

using TextEncoder = std::function<Vector(std::string_view)>;

/// Pseudo encoder at `width`, matching encode_text.
TextEncoder pseudo_text_encoder(std::size_t width);

/// Index over catalog titles embedded with `encoder`.
VectorIndex build_title_index(const Catalog& catalog, const TextEncoder& encoder);

std::vector<std::string> session_titles(Prefix prefix, const Catalog& catalog);

RankedList recommend_via_llm(Prefix prefix, const Catalog& catalog, GenerationClient& client,
                             const PromptStrategy& strategy, const VectorIndex& index, const TextEncoder& encoder,
                             std::size_t k, const RetryPolicy& policy = {},
                             const PromptTemplates& templates = PromptTemplates::defaults());

/// Distinct training examples drawn with a seeded shuffle.
std::vector<Shot> sample_shots(std::span<const Example> train, const Catalog& catalog, std::size_t count,
                               std::uint64_t seed);

}  // namespace semsr
