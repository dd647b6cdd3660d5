#include "semsr/llm.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <numeric>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "semsr/embeddings.hpp"

namespace semsr {

namespace detail {
const std::map<std::string, std::string>& default_template_texts();
}

std::string_view to_string(PromptKind kind) {
  switch (kind) {
    case PromptKind::fs: return "fs";
    case PromptKind::zcot: return "zcot";
    case PromptKind::fscot: return "fscot";
  }
  return "?";
}

PromptKind parse_prompt_kind(std::string_view text) {
  if (text == "fs") return PromptKind::fs;
  if (text == "zcot") return PromptKind::zcot;
  if (text == "fscot") return PromptKind::fscot;
  throw UsageError("unknown prompt strategy '" + std::string(text) + "' (expected fs, zcot or fscot)");
}

void PromptStrategy::validate() const {
  if (kind == PromptKind::zcot && !shots.empty()) throw UsageError("zcot prompts take no shots");
  if (kind != PromptKind::zcot && shots.empty()) {
    throw UsageError(std::string(to_string(kind)) + " prompts need at least one shot");
  }
}

const std::vector<std::string>& PromptTemplates::names() {
  static const std::vector<std::string> n{"system", "shot", "fs", "zcot_step1", "zcot_step2", "fscot_step1",
                                          "fscot_step2"};
  return n;
}

const PromptTemplates& PromptTemplates::defaults() {
  static const PromptTemplates t = [] {
    PromptTemplates init;
    init.texts_ = detail::default_template_texts();
    return init;
  }();
  return t;
}

PromptTemplates PromptTemplates::load(const std::string& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("template directory '" + dir + "' does not exist");
  PromptTemplates t = defaults();
  for (const auto& name : names()) {
    const auto path = std::filesystem::path(dir) / (name + ".txt");
    if (std::filesystem::exists(path)) t.texts_[name] = read_file(path.string());
  }
  return t;
}

const std::string& PromptTemplates::get(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) throw UsageError("no prompt template named '" + name + "'");
  return it->second;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string key(text.substr(open + 2, close - open - 2));
    auto it = values.find(key);
    if (it == values.end()) {
      out.append(text.substr(open, close + 2 - open));  // unknown placeholders are left verbatim
    } else {
      out.append(it->second);
    }
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

namespace {

std::string numbered(std::span<const std::string> titles) {
  std::string out;
  for (std::size_t i = 0; i < titles.size(); ++i) {
    out += std::to_string(i + 1) + ". " + titles[i];
    if (i + 1 < titles.size()) out += '\n';
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

}  // namespace

Prompt build_prompt(const PromptStrategy& strategy, std::span<const std::string> session_titles, int step,
                    const std::optional<std::string>& rationale, const PromptTemplates& templates) {
  strategy.validate();
  if (session_titles.empty()) throw UsageError("prompt needs at least one session title");
  if (step != 1 && step != 2) throw UsageError("prompt step must be 1 or 2");
  if (step == 2 && !strategy.two_step()) throw UsageError("fs prompts have a single step");
  if (step == 2 && !rationale) throw UsageError("step 2 needs the rationale from step 1");

  std::string shots;
  for (std::size_t i = 0; i < strategy.shots.size(); ++i) {
    shots += render_template(templates.get("shot"), {{"index", std::to_string(i + 1)},
                                                     {"session", numbered(strategy.shots[i].session_titles)},
                                                     {"target", strategy.shots[i].target_title}});
  }
  std::string name;
  switch (strategy.kind) {
    case PromptKind::fs: name = "fs"; break;
    case PromptKind::zcot: name = step == 1 ? "zcot_step1" : "zcot_step2"; break;
    case PromptKind::fscot: name = step == 1 ? "fscot_step1" : "fscot_step2"; break;
  }
  std::map<std::string, std::string> values{{"shots", shots}, {"session", numbered(session_titles)}};
  if (rationale) values["rationale"] = trim(*rationale);
  return {trim(templates.get("system")), render_template(templates.get(name), values)};
}

std::string prompt_hash(const Prompt& prompt) {
  std::uint64_t h = fnv1a64(prompt.system);
  h = fnv1a64(std::string_view("\x1f"), h);
  return hex64(fnv1a64(prompt.user, h));
}

MockClient MockClient::from_file(const std::string& path) {
  try {
    return MockClient(nlohmann::json::parse(read_file(path)).get<std::map<std::string, std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw IoError("'" + path + "': " + e.what());
  }
}

std::string MockClient::generate(const Prompt& prompt) {
  auto it = responses_.find(prompt_hash(prompt));
  if (it == responses_.end()) it = responses_.find("__default__");
  if (it == responses_.end()) throw GenerationError("mock client has no response for prompt " + prompt_hash(prompt));
  return it->second;
}

void MockClient::save(const std::string& path) const {
  write_file(path, nlohmann::json(responses_).dump(2) + "\n");
}

std::string HttpChatClient::generate(const Prompt& prompt) {
  if (config_.base_url.rfind("https://", 0) == 0) {
    throw GenerationError("https endpoints need a build with OpenSSL support; use an http gateway");
  }
  httplib::Client client(config_.base_url);
  const auto seconds = static_cast<time_t>(config_.timeout_seconds);
  const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  httplib::Headers headers;
  if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) {
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const nlohmann::json body{{"model", config_.model},
                            {"messages",
                             {{{"role", "system"}, {"content", prompt.system}},
                              {{"role", "user"}, {"content", prompt.user}}}}};
  auto res = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!res) throw GenerationError("request to " + config_.base_url + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw GenerationError("endpoint returned HTTP " + std::to_string(res->status));
  try {
    return nlohmann::json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw GenerationError(std::string("unexpected endpoint response: ") + e.what());
  }
}

std::string generate_with_retry(GenerationClient& client, const Prompt& prompt, const RetryPolicy& policy) {
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (std::size_t attempt = 0; attempt <= policy.max_retries; ++attempt) {
    if (attempt > 0) {
      if (policy.sleep) {
        policy.sleep(backoff);
      } else {
        std::this_thread::sleep_for(backoff);
      }
      backoff *= 2;
    }
    try {
      std::string text = client.generate(prompt);
      if (!trim(text).empty()) return text;
      last_error = "empty generation";
    } catch (const GenerationError& e) {
      last_error = e.what();
    }
  }
  throw GenerationError("generation failed after " + std::to_string(policy.max_retries + 1) +
                        " attempt(s): " + last_error);
}

GenerationTrace generate_next_title(const PromptStrategy& strategy, std::span<const std::string> session_titles,
                                    GenerationClient& client, const RetryPolicy& policy,
                                    const PromptTemplates& templates) {
  GenerationTrace trace;
  trace.prompts.push_back(build_prompt(strategy, session_titles, 1, std::nullopt, templates));
  std::string text = generate_with_retry(client, trace.prompts.back(), policy);
  if (strategy.two_step()) {
    trace.rationale = trim(text);
    trace.prompts.push_back(build_prompt(strategy, session_titles, 2, trace.rationale, templates));
    text = generate_with_retry(client, trace.prompts.back(), policy);
  }
  // Keep the first non-empty line; models often add commentary after the title.
  std::string title;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    title = trim(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (!title.empty() || end == std::string::npos) break;
    start = end + 1;
  }
  if (title.empty()) throw GenerationError("empty generation");
  trace.title = title;
  return trace;
}

TextEncoder pseudo_text_encoder(std::size_t width) {
  return [width](std::string_view text) { return encode_text(text, width); };
}

VectorIndex build_title_index(const Catalog& catalog, const TextEncoder& encoder) {
  Matrix rows;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    const Vector v = encoder(catalog.item(static_cast<ItemIndex>(i)).title);
    if (i == 0) rows.resize(static_cast<Eigen::Index>(catalog.size()), v.size());
    rows.row(static_cast<Eigen::Index>(i)) = v.transpose();
  }
  return build_index(rows);
}

std::vector<std::string> session_titles(Prefix prefix, const Catalog& catalog) {
  std::vector<std::string> titles;
  titles.reserve(prefix.size());
  for (auto i : prefix) titles.push_back(catalog.item(i).title);
  return titles;
}

RankedList recommend_via_llm(Prefix prefix, const Catalog& catalog, GenerationClient& client,
                             const PromptStrategy& strategy, const VectorIndex& index, const TextEncoder& encoder,
                             std::size_t k, const RetryPolicy& policy, const PromptTemplates& templates) {
  if (index.size() != catalog.size()) throw UsageError("title index does not cover the catalog");
  const auto titles = session_titles(prefix, catalog);
  const auto trace = generate_next_title(strategy, titles, client, policy, templates);
  return index.query(encoder(trace.title), k);
}

std::vector<Shot> sample_shots(std::span<const Example> train, const Catalog& catalog, std::size_t count,
                               std::uint64_t seed) {
  if (count > train.size()) throw DataError("not enough training examples for " + std::to_string(count) + " shots");
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(seed, "shots"));
  seeded_shuffle(order, rng);
  std::vector<Shot> shots;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& ex = train[order[i]];
    shots.push_back({session_titles(ex.prefix, catalog), catalog.item(ex.target).title});
  }
  return shots;
}

}  // namespace semsr
