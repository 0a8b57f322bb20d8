#pragma once

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "envsmith/digest.hpp"
#include "envsmith/envdir.hpp"
#include "envsmith/errors.hpp"

namespace envsmith {

/// One text-generation request. The stage names what kind of answer is
/// wanted; the payload is the structured context the answer must be a
/// function of. Stage, prompt and payload together key cassette lookups.
struct GenRequest {
  std::string stage;
  std::string prompt;
  json payload = json::object();

  std::string cache_key() const {
    return sha256_hex(stage + "\n" + prompt + "\n" + payload.dump());
  }
};

struct GenResponse {
  std::string text;
};

class GenClient {
 public:
  virtual ~GenClient() = default;
  virtual GenResponse generate(const GenRequest& req) = 0;
};

/// Refuses every request; the backend for fully offline stages.
class NullClient : public GenClient {
 public:
  GenResponse generate(const GenRequest& req) override {
    throw ClientUnavailable("no generation backend for stage '" + req.stage + "'");
  }
};

/// Answers from a recorded cassette only; a miss means the recording does
/// not cover this run.
class CassetteReplayClient : public GenClient {
 public:
  explicit CassetteReplayClient(const fs::path& file) : file_(file.string()) {
    json j = read_json(file);
    json ents = j.value("entries", json::object());
    for (auto it = ents.begin(); it != ents.end(); ++it)
      entries_[it.key()] = it.value().value("text", "");
  }

  GenResponse generate(const GenRequest& req) override {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(req.cache_key());
    if (it == entries_.end())
      throw ClientUnavailable("cassette '" + file_ + "' has no entry for stage '" + req.stage +
                              "' key " + req.cache_key());
    return {it->second};
  }

 private:
  std::string file_;
  std::map<std::string, std::string> entries_;
  std::mutex mu_;
};

/// Wraps another client and records every exchange; flush() writes the
/// cassette. Replaying an already-recorded key does not re-ask the inner
/// client, so record mode is also an incremental cache.
class RecordingClient : public GenClient {
 public:
  RecordingClient(std::shared_ptr<GenClient> inner, fs::path file)
      : inner_(std::move(inner)), file_(std::move(file)) {
    if (fs::exists(file_)) {
      json j = read_json(file_);
      json ents = j.value("entries", json::object());
      for (auto it = ents.begin(); it != ents.end(); ++it)
        entries_[it.key()] = it.value();
    }
  }

  GenResponse generate(const GenRequest& req) override {
    std::string key = req.cache_key();
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = entries_.find(key);
      if (it != entries_.end()) return {it->second.value("text", "")};
    }
    GenResponse resp = inner_->generate(req);
    std::lock_guard<std::mutex> lock(mu_);
    json entry = json::object();
    entry["stage"] = req.stage;
    entry["text"] = resp.text;
    entries_[key] = std::move(entry);
    return resp;
  }

  void flush() {
    std::lock_guard<std::mutex> lock(mu_);
    json j = json::object();
    j["entries"] = json::object();
    for (const auto& [k, v] : entries_) j["entries"][k] = v;
    write_json(file_, j);
  }

  ~RecordingClient() override {
    try {
      flush();
    } catch (...) {
    }
  }

 private:
  std::shared_ptr<GenClient> inner_;
  fs::path file_;
  std::map<std::string, json> entries_;
  std::mutex mu_;
};

/// Test seam: a client backed by a plain function.
class CallbackClient : public GenClient {
 public:
  using Fn = std::function<std::string(const GenRequest&)>;
  explicit CallbackClient(Fn fn) : fn_(std::move(fn)) {}
  GenResponse generate(const GenRequest& req) override { return {fn_(req)}; }

 private:
  Fn fn_;
};

/// Chat-completions HTTP backend. The API key is read from an environment
/// variable, never from configuration files.
struct HttpClientConfig {
  std::string host = "localhost";
  int port = 80;
  std::string path = "/v1/chat/completions";
  std::string model = "default";
  std::string api_key_env = "ENVSMITH_API_KEY";
  int timeout_seconds = 60;
};

class HttpGeneratorClient : public GenClient {
 public:
  explicit HttpGeneratorClient(HttpClientConfig cfg) : cfg_(std::move(cfg)) {}

  GenResponse generate(const GenRequest& req) override;

 private:
  HttpClientConfig cfg_;
};

}  // namespace envsmith

// The HTTP transport lives out of line so only translation units that use
// it pay for the header.
#ifdef ENVSMITH_ENABLE_HTTP
#include <httplib.h>

namespace envsmith {

inline GenResponse HttpGeneratorClient::generate(const GenRequest& req) {
  httplib::Client cli(cfg_.host, cfg_.port);
  cli.set_read_timeout(cfg_.timeout_seconds, 0);
  cli.set_connection_timeout(cfg_.timeout_seconds, 0);
  httplib::Headers headers;
  if (const char* key = std::getenv(cfg_.api_key_env.c_str()))
    headers.emplace("Authorization", std::string("Bearer ") + key);
  json body = json::object();
  body["model"] = cfg_.model;
  body["temperature"] = 0;
  body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
  auto res = cli.Post(cfg_.path, headers, body.dump(), "application/json");
  if (!res)
    throw ClientUnavailable("no response from " + cfg_.host + ":" + std::to_string(cfg_.port));
  if (res->status != 200)
    throw ClientUnavailable("generation backend returned status " + std::to_string(res->status));
  try {
    json j = json::parse(res->body);
    return {j.at("choices").at(0).at("message").at("content").get<std::string>()};
  } catch (const json::exception& e) {
    throw ClientUnavailable(std::string("malformed completion response: ") + e.what());
  }
}

}  // namespace envsmith
#endif
