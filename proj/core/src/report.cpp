#include "protattn/report.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "protattn/error.hpp"

namespace protattn {

namespace {

using ojson = nlohmann::ordered_json;

std::string format17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

LayerProfile layer_profile(const HeadScoreTable& table) {
  if (table.present_count() == 0) {
    throw Error(ErrorCode::AllAbsent, "every head is ABSENT for '" + table.property + "'");
  }
  LayerProfile out;
  out.property = table.property;
  out.layer_means.resize(table.n_layers);
  double mass = 0.0;
  double moment = 0.0;
  for (std::size_t l = 0; l < table.n_layers; ++l) {
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t h = 0; h < table.n_heads; ++h) {
      if (const auto& s = table.at(l, h).score) {
        sum += *s;
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / static_cast<double>(count);
    out.layer_means[l] = mean;
    mass += mean;
    moment += static_cast<double>(l + 1) * mean;
  }
  if (mass > 0.0) out.center_of_gravity = moment / mass;
  return out;
}

std::vector<RankedHead> top_heads(const HeadScoreTable& table, std::size_t n) {
  if (table.present_count() == 0) {
    throw Error(ErrorCode::AllAbsent, "every head is ABSENT for '" + table.property + "'");
  }
  const auto sig = significance_table(table);
  std::vector<RankedHead> ranked;
  for (std::size_t l = 0; l < table.n_layers; ++l) {
    for (std::size_t h = 0; h < table.n_heads; ++h) {
      const HeadScore& hs = table.at(l, h);
      if (!hs.score) continue;
      ranked.push_back({l, h, *hs.score, hs.arc_count, sig[l * table.n_heads + h]});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedHead& a, const RankedHead& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.layer != b.layer) return a.layer < b.layer;
    return a.head < b.head;
  });
  if (ranked.size() > n) ranked.resize(n);
  return ranked;
}

std::string head_label(std::size_t layer, std::size_t head) {
  return std::to_string(layer + 1) + "-" + std::to_string(head + 1);
}

// ---------------------------------------------------------------------------

namespace {

ojson significance_json(const std::optional<SignificanceResult>& s) {
  if (!s) return nullptr;
  ojson j;
  j["z"] = s->z;
  j["p"] = s->p;
  j["degenerate"] = s->degenerate;
  j["significant_bonferroni"] = s->significant;
  j["ci_lo"] = s->ci_lo;
  j["ci_hi"] = s->ci_hi;
  return j;
}

ojson table_json(const HeadScoreTable& table) {
  ojson j;
  j["property"] = table.property;
  j["mode"] = to_string(table.mode);
  j["n_layers"] = table.n_layers;
  j["n_heads"] = table.n_heads;
  j["background"] = table.background_frequency();
  j["background_positives"] = table.background.positives;
  j["background_total"] = table.background.total;
  ojson scores = ojson::array();
  ojson arcs = ojson::array();
  for (std::size_t l = 0; l < table.n_layers; ++l) {
    ojson srow = ojson::array();
    ojson arow = ojson::array();
    for (std::size_t h = 0; h < table.n_heads; ++h) {
      const HeadScore& hs = table.at(l, h);
      if (hs.score) {
        srow.push_back(*hs.score);
      } else {
        srow.push_back(nullptr);
      }
      arow.push_back(hs.arc_count);
    }
    scores.push_back(std::move(srow));
    arcs.push_back(std::move(arow));
  }
  j["scores"] = std::move(scores);
  j["arc_counts"] = std::move(arcs);
  ojson top = ojson::array();
  if (table.present_count() > 0) {
    for (const auto& r : top_heads(table)) {
      ojson e;
      e["head"] = head_label(r.layer, r.head);
      e["layer"] = r.layer + 1;
      e["index"] = r.head + 1;
      e["score"] = r.score;
      e["arc_count"] = r.arc_count;
      e["significance"] = significance_json(r.significance);
      top.push_back(std::move(e));
    }
  }
  j["top_heads"] = std::move(top);
  return j;
}

ojson profile_json(const LayerProfile& p) {
  ojson j;
  j["property"] = p.property;
  ojson means = ojson::array();
  for (const auto& m : p.layer_means) {
    if (m) {
      means.push_back(*m);
    } else {
      means.push_back(nullptr);
    }
  }
  j["layer_means"] = std::move(means);
  if (p.center_of_gravity) {
    j["center_of_gravity"] = *p.center_of_gravity;
  } else {
    j["center_of_gravity"] = nullptr;
  }
  return j;
}

std::string sanitize(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-')) c = '_';
  }
  return out;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  out << content;
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path.string());
}

}  // namespace

std::string report_json(const ReportInput& input) {
  ojson j;
  j["schema_version"] = kReportSchemaVersion;
  ojson config;
  config["theta"] = input.config.theta;
  config["min_arcs"] = input.config.min_arcs;
  config["metric"] = to_string(input.config.metric);
  ojson excluded = ojson::array();
  for (auto f : input.config.exclude_flags) {
    static constexpr const char* kNames[] = {"RESIDUE", "CLS", "SEP", "PAD"};
    excluded.push_back(kNames[static_cast<int>(f)]);
  }
  config["exclude_flags"] = std::move(excluded);
  if (input.null_seed) {
    config["null_seed"] = *input.null_seed;
  } else {
    config["null_seed"] = nullptr;
  }
  j["config"] = std::move(config);

  ojson tables = ojson::array();
  ojson profiles = ojson::array();
  for (const auto& t : input.tables) {
    tables.push_back(table_json(t));
    if (t.present_count() > 0) profiles.push_back(profile_json(layer_profile(t)));
  }
  j["tables"] = std::move(tables);
  j["profiles"] = std::move(profiles);
  j["probes"] = ojson::parse(probe_results_json(input.probes));
  if (input.aa_correlation) {
    j["aa_correlation"] = ojson::parse(correlation_json(*input.aa_correlation));
  } else {
    j["aa_correlation"] = nullptr;
  }
  if (input.blosum_agreement) {
    j["blosum_agreement"] = *input.blosum_agreement;
  } else {
    j["blosum_agreement"] = nullptr;
  }
  return j.dump(2) + "\n";
}

std::string heatmap_csv(const HeadScoreTable& table) {
  std::string out = "layer";
  for (std::size_t h = 0; h < table.n_heads; ++h) out += ",head_" + std::to_string(h + 1);
  out += '\n';
  for (std::size_t l = 0; l < table.n_layers; ++l) {
    out += std::to_string(l + 1);
    for (std::size_t h = 0; h < table.n_heads; ++h) {
      out += ',';
      if (const auto& s = table.at(l, h).score) out += format17(*s);
    }
    out += '\n';
  }
  return out;
}

std::string heads_csv(const HeadScoreTable& table) {
  const auto sig = significance_table(table);
  std::string out =
      "layer,head,property,mode,score,arc_count,background,z,p,significant_bonferroni,ci_lo,ci_hi\n";
  const std::string bg = format17(table.background_frequency());
  for (std::size_t l = 0; l < table.n_layers; ++l) {
    for (std::size_t h = 0; h < table.n_heads; ++h) {
      const HeadScore& hs = table.at(l, h);
      out += std::to_string(l + 1) + ',' + std::to_string(h + 1) + ',' + table.property + ',' +
             to_string(table.mode) + ',' + (hs.score ? format17(*hs.score) : "ABSENT") + ',' +
             std::to_string(hs.arc_count) + ',' + bg;
      if (const auto& s = sig[l * table.n_heads + h]) {
        out += ',' + format17(s->z) + ',' + format17(s->p) + ',' + (s->significant ? "true" : "false") +
               ',' + format17(s->ci_lo) + ',' + format17(s->ci_hi);
      } else {
        out += ",,,,,";
      }
      out += '\n';
    }
  }
  return out;
}

std::string topheads_csv(const HeadScoreTable& table, std::size_t n) {
  std::string out = "rank,head,layer,index,score,arc_count,background,z,p,significant_bonferroni,ci_lo,ci_hi\n";
  if (table.present_count() == 0) return out;
  const std::string bg = format17(table.background_frequency());
  std::size_t rank = 1;
  for (const auto& r : top_heads(table, n)) {
    out += std::to_string(rank++) + ',' + head_label(r.layer, r.head) + ',' +
           std::to_string(r.layer + 1) + ',' + std::to_string(r.head + 1) + ',' + format17(r.score) +
           ',' + std::to_string(r.arc_count) + ',' + bg;
    if (r.significance) {
      const auto& s = *r.significance;
      out += ',' + format17(s.z) + ',' + format17(s.p) + ',' + (s.significant ? "true" : "false") +
             ',' + format17(s.ci_lo) + ',' + format17(s.ci_hi);
    } else {
      out += ",,,,,";
    }
    out += '\n';
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const std::filesystem::path& out_dir,
                                               const ReportInput& input) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  const auto emit = [&](const std::string& name, const std::string& content) {
    const auto path = out_dir / name;
    write_file(path, content);
    written.push_back(path);
  };
  emit("report.json", report_json(input));
  for (const auto& t : input.tables) {
    const std::string stem = sanitize(t.property);
    emit("heatmap_" + stem + ".csv", heatmap_csv(t));
    emit("heads_" + stem + ".csv", heads_csv(t));
    emit("topheads_" + stem + ".csv", topheads_csv(t));
  }
  if (input.aa_correlation) {
    emit("aa_correlation.csv", correlation_csv(*input.aa_correlation));
    emit("aa_correlation.json", correlation_json(*input.aa_correlation) + "\n");
  }
  if (!input.probes.empty()) emit("probes.json", probe_results_json(input.probes) + "\n");
  return written;
}

}  // namespace protattn

namespace protattn {

std::string table_json_text(const HeadScoreTable& table) { return table_json(table).dump(); }

std::string layer_profile_json(const LayerProfile& profile) { return profile_json(profile).dump(); }

}  // namespace protattn
