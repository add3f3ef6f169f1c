#pragma once

#include <atomic>
#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "protattn/aminoacid.hpp"
#include "protattn/corpus.hpp"
#include "protattn/metrics.hpp"
#include "protattn/probes.hpp"
#include "protattn/report.hpp"
#include "protattn/structure.hpp"

namespace protattn {

inline constexpr double kViewerThreshold = 0.1;

// Caches a value per key; concurrent requests for a missing key run the
// producer once and share its result (or its exception).
template <typename T>
class SingleFlightCache {
 public:
  template <typename Producer>
  std::shared_ptr<const T> get(const std::string& key, Producer&& produce) {
    std::promise<std::shared_ptr<const T>> promise;
    std::shared_future<std::shared_ptr<const T>> future;
    bool owner = false;
    {
      std::lock_guard lock(mutex_);
      auto it = entries_.find(key);
      if (it == entries_.end()) {
        future = promise.get_future().share();
        entries_.emplace(key, future);
        owner = true;
      } else {
        future = it->second;
      }
    }
    if (owner) {
      ++computations_;
      try {
        promise.set_value(std::make_shared<const T>(produce()));
      } catch (...) {
        promise.set_exception(std::current_exception());
        std::lock_guard lock(mutex_);
        entries_.erase(key);
      }
    }
    return future.get();
  }

  std::size_t computations() const noexcept { return computations_; }
  void clear() {
    std::lock_guard lock(mutex_);
    entries_.clear();
  }

 private:
  std::mutex mutex_;
  std::map<std::string, std::shared_future<std::shared_ptr<const T>>> entries_;
  std::atomic<std::size_t> computations_{0};
};

struct SessionOptions {
  AnalysisConfig config;
  std::optional<std::uint64_t> null_seed;
  std::size_t threads = 1;
};

// Immutable corpus + tensor handles plus pure-function caches.
class Session {
 public:
  Session(std::vector<ProteinRecord> corpus, std::shared_ptr<const AttentionSource> attention,
          SessionOptions options = {});

  const std::vector<ProteinRecord>& corpus() const noexcept { return corpus_; }
  const SessionOptions& options() const noexcept { return options_; }
  const AttentionSource& attention() const noexcept { return *attention_; }
  const ProteinRecord* find(const std::string& id) const;

  std::shared_ptr<const HeadScoreTable> table(const std::string& property);
  std::shared_ptr<const HeadScoreTable> table(const std::string& property, const AnalysisConfig& config);
  std::shared_ptr<const ContactMap> contacts(const ProteinRecord& record);
  std::shared_ptr<const AAProfileMatrix> aa_profiles();
  std::shared_ptr<const AttentionTensor> tensor(const ProteinRecord& record) const;

  std::size_t table_computations() const noexcept { return tables_.computations(); }

 private:
  std::vector<ProteinRecord> corpus_;
  std::map<std::string, std::size_t> index_;
  std::shared_ptr<const AttentionSource> attention_;
  SessionOptions options_;
  SingleFlightCache<HeadScoreTable> tables_;
  SingleFlightCache<ContactMap> contacts_;
  SingleFlightCache<AAProfileMatrix> profiles_;
};

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON, UTF-8
};

// Routes GET requests for the HTTP API. Pure with respect to the session's
// inputs, so it can be exercised without sockets.
class ApiHandler {
 public:
  explicit ApiHandler(Session& session) : session_(session) {}

  ApiResponse get(const std::string& path, const std::map<std::string, std::string>& query);

 private:
  ApiResponse proteins();
  ApiResponse protein(const std::string& id);
  ApiResponse attention(const std::string& id, const std::map<std::string, std::string>& query);
  ApiResponse rankings(const std::map<std::string, std::string>& query);
  ApiResponse aa_correlation();
  ApiResponse layer_profile(const std::map<std::string, std::string>& query);

  Session& session_;
};

// Serves the API until stop is set. Throws PortInUse when the port cannot be
// bound. `bound_port` receives the actual port (useful with port 0).
void serve(Session& session, const std::string& host, int port, const std::atomic<bool>& stop,
           std::atomic<int>* bound_port = nullptr);

// Command-line entry point: analyze | probe | serve | synth. Returns 0 on
// success, 2 for input errors, 3 for internal failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace protattn
