#include <algorithm>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <thread>

#include <CLI11.hpp>

#include "protattn/error.hpp"
#include "protattn/service.hpp"
#include "protattn/stats.hpp"
#include "protattn/synthetic.hpp"

namespace protattn {

namespace {

namespace fs = std::filesystem;

constexpr int kExitInput = 2;
constexpr int kExitInternal = 3;

std::atomic<bool> g_stop{false};

extern "C" void on_stop_signal(int) { g_stop.store(true); }

struct AnalysisFlags {
  std::string metric = "high";
  double theta = kDefaultTheta;
  std::size_t min_arcs = kDefaultMinArcs;
  std::optional<std::uint64_t> null_seed;

  void add_to(CLI::App* app) {
    app->add_option("--theta", theta, "High-confidence attention threshold")->capture_default_str();
    app->add_option("--min-arcs", min_arcs, "Heads with fewer arcs are ABSENT")
        ->capture_default_str();
    app->add_option("--metric", metric, "high | weighted")->capture_default_str();
    app->add_option("--null-seed", null_seed, "Analyze shuffled (null-model) attention instead");
  }

  AnalysisConfig config() const {
    AnalysisConfig c;
    c.theta = theta;
    c.min_arcs = min_arcs;
    auto mode = metric_mode_from_string(metric);
    if (!mode) throw Error(ErrorCode::InvalidArgument, "--metric must be 'high' or 'weighted'");
    c.metric = *mode;
    c.validate();
    return c;
  }
};

std::vector<ProteinRecord> load_records(const std::string& path, std::size_t max_len,
                                        std::ostream& err) {
  CorpusLoadResult loaded = load_corpus(path, max_len);
  for (const auto& e : loaded.errors) {
    err << "warning: " << path << ":" << e.line << ": " << e.reason << "\n";
  }
  return std::move(loaded.records);
}

void require_directory(const std::string& flag, const std::string& dir) {
  if (dir.empty()) throw Error(ErrorCode::InvalidArgument, flag + " is required");
  if (!fs::is_directory(dir)) {
    throw Error(ErrorCode::FileUnreadable, flag + " " + dir + " is not a directory");
  }
}

std::shared_ptr<const AttentionSource> attention_source(const std::string& dir,
                                                        std::optional<std::uint64_t> null_seed) {
  std::shared_ptr<const AttentionSource> src = std::make_shared<DirectoryAttention>(dir);
  if (null_seed) src = std::make_shared<ShuffledAttention>(src, *null_seed);
  return src;
}

std::vector<std::string> expand_properties(const std::vector<std::string>& raw) {
  std::vector<std::string> out;
  for (const auto& item : raw) {
    std::size_t start = 0;
    while (start <= item.size()) {
      std::size_t end = item.find(',', start);
      if (end == std::string::npos) end = item.size();
      if (end > start) out.push_back(item.substr(start, end - start));
      start = end + 1;
    }
  }
  return out;
}

// "L-H" with 1-based indices.
HeadIndex parse_head(const std::string& text) {
  auto dash = text.find('-');
  try {
    if (dash != std::string::npos) {
      std::size_t pos = 0;
      long layer = std::stol(text.substr(0, dash), &pos);
      if (pos == dash) {
        std::size_t pos2 = 0;
        long head = std::stol(text.substr(dash + 1), &pos2);
        if (pos2 == text.size() - dash - 1 && layer >= 1 && head >= 1) {
          return {static_cast<std::size_t>(layer - 1), static_cast<std::size_t>(head - 1)};
        }
      }
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, "head must look like <layer>-<head> (1-based): " + text);
}

int cmd_analyze(const std::string& corpus_path, const std::string& attn_dir,
                const std::vector<std::string>& property_args, const AnalysisFlags& flags,
                bool with_aa, const std::string& out_dir, std::size_t threads, std::size_t max_len,
                std::ostream& out, std::ostream& err) {
  AnalysisConfig config = flags.config();
  auto names = expand_properties(property_args);
  if (names.empty() && !with_aa) {
    throw Error(ErrorCode::InvalidArgument, "at least one --property (or --aa-correlation) is needed");
  }
  std::vector<Property> properties;
  for (const auto& n : names) properties.push_back(property_by_name(n));
  require_directory("--attn", attn_dir);
  auto records = load_records(corpus_path, max_len, err);
  auto source = attention_source(attn_dir, flags.null_seed);

  ScoreOptions so;
  so.threads = threads;
  ReportInput input;
  input.config = config;
  input.null_seed = flags.null_seed;
  if (!properties.empty()) input.tables = score_heads(records, *source, properties, config, so);
  if (with_aa) {
    AAProfileMatrix profiles = aa_profiles(records, *source, config, so);
    AACorrelationMatrix corr = aa_attention_correlation(profiles);
    input.aa_correlation = corr;
    try {
      input.blosum_agreement = blosum_agreement(corr, load_blosum62());
    } catch (const Error& e) {
      err << "warning: no BLOSUM agreement: " << e.what() << "\n";
    }
  }
  emit_report(out_dir, input);

  for (const auto& t : input.tables) {
    out << t.property << ": " << t.present_count() << "/" << t.n_layers * t.n_heads
        << " heads scored, background " << t.background_frequency();
    if (t.present_count() > 0) {
      const RankedHead best = top_heads(t, 1).front();
      out << ", best " << head_label(best.layer, best.head) << " = " << best.score;
    }
    out << "\n";
  }
  if (input.blosum_agreement) out << "blosum agreement: " << *input.blosum_agreement << "\n";
  out << "report written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretability analysis of protein language-model attention", "protattn"};
  app.require_subcommand(1);

  std::size_t threads = 1;
  std::size_t max_len = kDefaultMaxLength;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads")->capture_default_str();
    sub->add_option("--max-len", max_len, "Truncate sequences to this many residues")
        ->capture_default_str();
  };

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Score every head against residue properties");
  std::string a_corpus, a_attn, a_out;
  std::vector<std::string> a_props;
  bool a_aa = false;
  AnalysisFlags a_flags;
  analyze->add_option("--corpus", a_corpus, "Corpus (JSON Lines)")->required();
  analyze->add_option("--attn", a_attn, "Directory of <id>.atns tensors")->required();
  analyze->add_option("--property", a_props, "Property name; repeatable or comma-separated");
  analyze->add_flag("--aa-correlation", a_aa, "Also compute amino-acid profiles and BLOSUM agreement");
  analyze->add_option("--out", a_out, "Output directory")->required();
  a_flags.add_to(analyze);
  add_common(analyze);

  // probe
  auto* probe = app.add_subcommand("probe", "Layer-wise linear probes");
  std::string p_corpus, p_attn, p_emb, p_out, p_task = "binding_site", p_rep = "embedding";
  ProbeSpec p_spec;
  probe->add_option("--corpus", p_corpus, "Corpus (JSON Lines)")->required();
  probe->add_option("--attn", p_attn, "Directory of <id>.atns tensors");
  probe->add_option("--emb", p_emb, "Directory of <id>.embs tensors");
  probe->add_option("--task", p_task, "ss | binding_site | contact")->capture_default_str();
  probe->add_option("--representation", p_rep, "embedding | attention")->capture_default_str();
  probe->add_option("--seed", p_spec.params.seed)->capture_default_str();
  probe->add_option("--lr", p_spec.params.learning_rate)->capture_default_str();
  probe->add_option("--epochs", p_spec.params.epochs)->capture_default_str();
  probe->add_option("--l2", p_spec.params.l2)->capture_default_str();
  probe->add_option("--batch-size", p_spec.params.batch_size)->capture_default_str();
  probe->add_option("--validation-fraction", p_spec.validation_fraction)->capture_default_str();
  probe->add_option("--negatives-per-positive", p_spec.negatives_per_positive)
      ->capture_default_str();
  probe->add_option("--out", p_out, "Output directory")->required();
  add_common(probe);

  // serve
  auto* serve_cmd = app.add_subcommand("serve", "HTTP API for the viewer");
  std::string s_corpus, s_attn, s_host = "127.0.0.1";
  int s_port = 8080;
  AnalysisFlags s_flags;
  serve_cmd->add_option("--corpus", s_corpus, "Corpus (JSON Lines)")->required();
  serve_cmd->add_option("--attn", s_attn, "Directory of <id>.atns tensors")->required();
  serve_cmd->add_option("--host", s_host)->capture_default_str();
  serve_cmd->add_option("--port", s_port)->capture_default_str()->check(CLI::Range(0, 65535));
  s_flags.add_to(serve_cmd);
  add_common(serve_cmd);

  // synth
  auto* synth = app.add_subcommand("synth", "Write a deterministic synthetic dataset");
  SyntheticSpec y_spec;
  std::string y_out, y_contact, y_binding;
  std::optional<std::size_t> y_signal;
  synth->add_option("--out", y_out, "Output directory")->required();
  synth->add_option("--proteins", y_spec.n_proteins)->capture_default_str();
  synth->add_option("--min-len", y_spec.min_length)->capture_default_str();
  synth->add_option("--max-len", y_spec.max_length)->capture_default_str();
  synth->add_option("--layers", y_spec.n_layers)->capture_default_str();
  synth->add_option("--heads", y_spec.n_heads)->capture_default_str();
  synth->add_option("--pad", y_spec.pad_tokens)->capture_default_str();
  synth->add_option("--seed", y_spec.seed)->capture_default_str();
  synth->add_option("--sigma", y_spec.attention_sigma)->capture_default_str();
  synth->add_option("--binding-rate", y_spec.binding_rate)->capture_default_str();
  synth->add_option("--contact-head", y_contact, "Planted contact head, <layer>-<head>");
  synth->add_option("--binding-head", y_binding, "Planted binding-site head, <layer>-<head>");
  synth->add_option("--emb-dim", y_spec.embedding_dim)->capture_default_str();
  synth->add_option("--emb-signal-layer", y_signal, "1-based layer carrying label signal");
  synth->add_option("--id-prefix", y_spec.id_prefix)->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : kExitInput;
  }

  try {
    if (*analyze) {
      return cmd_analyze(a_corpus, a_attn, a_props, a_flags, a_aa, a_out, threads, max_len, out,
                         err);
    }
    if (*probe) {
      auto task = probe_task_from_string(p_task);
      if (!task) throw Error(ErrorCode::InvalidArgument, "--task must be ss, binding_site or contact");
      auto rep = representation_from_string(p_rep);
      if (!rep) throw Error(ErrorCode::InvalidArgument, "--representation must be embedding or attention");
      p_spec.task = *task;
      p_spec.representation = *rep;
      p_spec.validate();
      std::unique_ptr<DirectoryAttention> attn;
      std::unique_ptr<DirectoryEmbeddings> emb;
      if (*rep == Representation::Embedding) {
        require_directory("--emb", p_emb);
        emb = std::make_unique<DirectoryEmbeddings>(p_emb);
      } else {
        require_directory("--attn", p_attn);
      }
      // Contact probes need coordinates only; attention is needed for its features.
      if (!p_attn.empty()) {
        require_directory("--attn", p_attn);
        attn = std::make_unique<DirectoryAttention>(p_attn);
      }
      auto records = load_records(p_corpus, max_len, err);
      auto results = layer_sweep(p_spec, records, attn.get(), emb.get(), threads);
      fs::create_directories(p_out);
      fs::path file = fs::path(p_out) / ("probes_" + to_string(*task) + "_" + to_string(*rep) + ".json");
      std::ofstream f(file, std::ios::binary | std::ios::trunc);
      f << probe_results_json(results);
      if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + file.string());
      for (const auto& r : results) out << "layer " << r.layer + 1 << ": " << r.metric << "\n";
      out << "probe results written to " << file.string() << "\n";
      return 0;
    }
    if (*serve_cmd) {
      SessionOptions opts;
      opts.config = s_flags.config();
      opts.null_seed = s_flags.null_seed;
      opts.threads = threads;
      require_directory("--attn", s_attn);
      auto records = load_records(s_corpus, max_len, err);
      auto source = std::make_shared<DirectoryAttention>(s_attn);
      for (const auto& r : records) {
        if (!fs::exists(attention_path(s_attn, r.id))) {
          throw Error(ErrorCode::MissingTensor, "no tensor for " + r.id + " in " + s_attn);
        }
      }
      Session session(std::move(records), source, opts);
      session.tensor(session.corpus().front());
      g_stop.store(false);
      std::signal(SIGINT, on_stop_signal);
      std::signal(SIGTERM, on_stop_signal);
      std::atomic<int> bound{0};
      std::thread announcer([&] {
        while (bound.load() == 0 && !g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(10));
        if (bound.load() != 0) out << "listening on http://" << s_host << ":" << bound.load() << std::endl;
      });
      try {
        serve(session, s_host, s_port, g_stop, &bound);
      } catch (...) {
        g_stop.store(true);
        announcer.join();
        throw;
      }
      announcer.join();
      return 0;
    }
    if (*synth) {
      if (!y_contact.empty()) y_spec.contact_head = parse_head(y_contact);
      if (!y_binding.empty()) y_spec.binding_head = parse_head(y_binding);
      if (y_signal) {
        if (*y_signal < 1) throw Error(ErrorCode::InvalidArgument, "--emb-signal-layer is 1-based");
        y_spec.embedding_signal_layer = *y_signal - 1;
      }
      SyntheticDataset data = make_synthetic(y_spec);
      write_dataset(y_out, data);
      out << "wrote " << data.records.size() << " proteins to " << y_out << "\n";
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::IoFailure ? kExitInternal : kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace protattn
