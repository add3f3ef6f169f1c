#include "protattn/service.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "protattn/error.hpp"
#include "protattn/stats.hpp"

namespace protattn {

namespace {

using ojson = nlohmann::ordered_json;

ApiResponse json_response(int status, const ojson& body) { return {status, body.dump()}; }

ApiResponse error_response(int status, const std::string& message) {
  ojson j;
  j["error"] = message;
  return json_response(status, j);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownProperty:
      return 400;
    case ErrorCode::MissingTensor:
      return 404;
    case ErrorCode::AllAbsent:
      return 422;
    default:
      return 500;
  }
}

std::optional<std::string> param(const std::map<std::string, std::string>& query,
                                 const std::string& key) {
  auto it = query.find(key);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

// Whole-string parse of a non-negative integer.
std::size_t parse_index(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') {
    throw Error(ErrorCode::InvalidArgument, key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || !std::isfinite(v)) {
    throw Error(ErrorCode::InvalidArgument, key + " must be a finite number");
  }
  return v;
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t end = path.find('/', start);
    if (end == std::string::npos) end = path.size();
    if (end > start) parts.push_back(path.substr(start, end - start));
    start = end + 1;
  }
  return parts;
}

}  // namespace

// ---------------------------------------------------------------------------

Session::Session(std::vector<ProteinRecord> corpus, std::shared_ptr<const AttentionSource> attention,
                 SessionOptions options)
    : corpus_(std::move(corpus)), attention_(std::move(attention)), options_(std::move(options)) {
  if (!attention_) throw Error(ErrorCode::InvalidArgument, "session needs an attention source");
  options_.config.validate();
  std::sort(corpus_.begin(), corpus_.end(),
            [](const ProteinRecord& a, const ProteinRecord& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < corpus_.size(); ++i) index_.emplace(corpus_[i].id, i);
  if (options_.null_seed) {
    attention_ = std::make_shared<ShuffledAttention>(attention_, *options_.null_seed);
  }
}

const ProteinRecord* Session::find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &corpus_[it->second];
}

std::shared_ptr<const HeadScoreTable> Session::table(const std::string& property) {
  return table(property, options_.config);
}

std::shared_ptr<const HeadScoreTable> Session::table(const std::string& property,
                                                     const AnalysisConfig& config) {
  Property prop = property_by_name(property);
  return tables_.get(property + "|" + config.cache_key(), [&] {
    ScoreOptions so;
    so.threads = options_.threads;
    return score_heads(corpus_, *attention_, prop, config, so);
  });
}

std::shared_ptr<const ContactMap> Session::contacts(const ProteinRecord& record) {
  return contacts_.get(record.id, [&] { return derive_contacts(record); });
}

std::shared_ptr<const AAProfileMatrix> Session::aa_profiles() {
  return profiles_.get(options_.config.cache_key(), [&] {
    ScoreOptions so;
    so.threads = options_.threads;
    return protattn::aa_profiles(corpus_, *attention_, options_.config, so);
  });
}

std::shared_ptr<const AttentionTensor> Session::tensor(const ProteinRecord& record) const {
  auto t = attention_->load(record);
  if (t->residue_count() != record.length()) {
    throw Error(ErrorCode::ShapeMismatch, "tensor for " + record.id + " has " +
                                              std::to_string(t->residue_count()) +
                                              " residues, sequence has " +
                                              std::to_string(record.length()));
  }
  return t;
}

// ---------------------------------------------------------------------------

ApiResponse ApiHandler::get(const std::string& path,
                            const std::map<std::string, std::string>& query) {
  try {
    auto parts = split_path(path);
    if (parts.empty() || parts[0] != "api") return error_response(404, "not found");
    if (parts.size() == 2 && parts[1] == "proteins") return proteins();
    if (parts.size() == 3 && parts[1] == "proteins") return protein(parts[2]);
    if (parts.size() == 4 && parts[1] == "proteins" && parts[3] == "attention") {
      return attention(parts[2], query);
    }
    if (parts.size() == 3 && parts[1] == "heads" && parts[2] == "rankings") return rankings(query);
    if (parts.size() == 3 && parts[1] == "aa" && parts[2] == "correlation") return aa_correlation();
    if (parts.size() == 3 && parts[1] == "layers" && parts[2] == "profile") {
      return layer_profile(query);
    }
    return error_response(404, "not found");
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

ApiResponse ApiHandler::proteins() {
  ojson list = ojson::array();
  for (const auto& r : session_.corpus()) {
    ojson e;
    e["id"] = r.id;
    e["length"] = r.length();
    e["has_coords"] = r.coords.has_value();
    list.push_back(std::move(e));
  }
  return json_response(200, list);
}

ApiResponse ApiHandler::protein(const std::string& id) {
  const ProteinRecord* rec = session_.find(id);
  if (!rec) return error_response(404, "unknown protein '" + id + "'");
  ojson j;
  j["id"] = rec->id;
  j["sequence"] = sequence_to_string(rec->sequence);
  j["length"] = rec->length();
  if (rec->coords) {
    ojson coords = ojson::array();
    for (const auto& c : *rec->coords) {
      if (c) {
        coords.push_back(ojson::array({c->x, c->y, c->z}));
      } else {
        coords.push_back(nullptr);
      }
    }
    j["coords"] = std::move(coords);
  } else {
    j["coords"] = nullptr;
  }
  if (rec->ss_labels) {
    std::string ss;
    for (auto s : *rec->ss_labels) ss.push_back(ss_code(s));
    j["ss"] = ss;
  } else {
    j["ss"] = nullptr;
  }
  j["binding_sites"] = rec->binding_sites;
  j["ptm_sites"] = rec->ptm_sites;
  if (rec->coords) {
    ojson pairs = ojson::array();
    for (const auto& [a, b] : session_.contacts(*rec)->pairs()) pairs.push_back(ojson::array({a, b}));
    j["contacts"] = std::move(pairs);
  } else {
    j["contacts"] = nullptr;
  }
  return json_response(200, j);
}

// layer and head are 1-based, matching the "<layer>-<head>" labels of the
// rankings; residue indices in the arcs are 0-based positions in the sequence.
ApiResponse ApiHandler::attention(const std::string& id,
                                  const std::map<std::string, std::string>& query) {
  const ProteinRecord* rec = session_.find(id);
  if (!rec) return error_response(404, "unknown protein '" + id + "'");
  auto layer_text = param(query, "layer");
  auto head_text = param(query, "head");
  if (!layer_text || !head_text) return error_response(400, "layer and head are required");
  std::size_t layer = parse_index("layer", *layer_text);
  std::size_t head = parse_index("head", *head_text);
  double threshold = kViewerThreshold;
  if (auto t = param(query, "threshold")) threshold = parse_number("threshold", *t);
  if (threshold < 0.0 || threshold > 1.0) {
    return error_response(400, "threshold must lie in [0, 1]");
  }
  auto tensor = session_.tensor(*rec);
  if (layer < 1 || layer > tensor->n_layers() || head < 1 || head > tensor->n_heads()) {
    return error_response(400, "layer/head out of range (1.." + std::to_string(tensor->n_layers()) +
                                   ", 1.." + std::to_string(tensor->n_heads()) + ")");
  }
  ojson j;
  j["protein"] = rec->id;
  j["layer"] = layer;
  j["head"] = head;
  j["threshold"] = threshold;
  ojson arcs = ojson::array();
  for (const Arc& a : admitted_arcs(*tensor, layer - 1, head - 1, threshold,
                                    session_.options().config.exclude_flags)) {
    ojson e;
    e["from"] = a.from;
    e["to"] = a.to;
    e["weight"] = static_cast<double>(a.weight);
    arcs.push_back(std::move(e));
  }
  j["arcs"] = std::move(arcs);
  return json_response(200, j);
}

ApiResponse ApiHandler::rankings(const std::map<std::string, std::string>& query) {
  auto property = param(query, "property");
  if (!property) return error_response(400, "property is required");
  auto table = session_.table(*property);
  return {200, table_json_text(*table)};
}

ApiResponse ApiHandler::aa_correlation() {
  auto profiles = session_.aa_profiles();
  AACorrelationMatrix corr = aa_attention_correlation(*profiles);
  ojson j;
  j["heads_kept"] = profiles->kept_heads.size();
  j["correlation"] = ojson::parse(correlation_json(corr));
  try {
    j["blosum_agreement"] = blosum_agreement(corr, load_blosum62());
  } catch (const Error&) {
    j["blosum_agreement"] = nullptr;
  }
  return json_response(200, j);
}

ApiResponse ApiHandler::layer_profile(const std::map<std::string, std::string>& query) {
  auto property = param(query, "property");
  if (!property) return error_response(400, "property is required");
  auto table = session_.table(*property);
  return {200, layer_profile_json(protattn::layer_profile(*table))};
}

// ---------------------------------------------------------------------------

void serve(Session& session, const std::string& host, int port, const std::atomic<bool>& stop,
           std::atomic<int>* bound_port) {
  ApiHandler handler(session);
  httplib::Server server;
  // httplib defaults to SO_REUSEPORT, which would let a second server share
  // the port silently.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  server.Get(R"(/api/.*)", [&](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    ApiResponse r = handler.get(req.path, query);
    res.status = r.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(r.body, "application/json; charset=utf-8");
  });

  int actual = port;
  if (port == 0) {
    actual = server.bind_to_any_port(host);
    if (actual < 0) throw Error(ErrorCode::PortInUse, "cannot bind " + host);
  } else if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
  }
  if (bound_port) bound_port->store(actual);

  std::thread worker([&] { server.listen_after_bind(); });
  while (!stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  // stop() lets in-flight requests finish before listen_after_bind returns.
  server.stop();
  worker.join();
}

}  // namespace protattn
