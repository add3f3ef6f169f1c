#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "protattn/corpus.hpp"
#include "protattn/synthetic.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "protattn") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(stamp) + "-" +
             std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline protattn::ProteinRecord record(std::string id, std::string_view letters) {
  protattn::ProteinRecord r;
  r.id = std::move(id);
  r.sequence = protattn::sequence_from_string(letters);
  return r;
}

// The committed golden fixture is exactly this dataset; regenerate with
//   protattn synth --out tests/fixtures/golden --proteins 20 --min-len 30 --max-len 40
//     --layers 3 --heads 4 --seed 2020 --contact-head 3-2 --binding-head 2-4
inline protattn::SyntheticSpec golden_spec() {
  protattn::SyntheticSpec s;
  s.n_proteins = 20;
  s.min_length = 30;
  s.max_length = 40;
  s.n_layers = 3;
  s.n_heads = 4;
  s.seed = 2020;
  s.contact_head = protattn::HeadIndex{2, 1};
  s.binding_head = protattn::HeadIndex{1, 3};
  return s;
}

inline std::filesystem::path fixture_dir() { return PROTATTN_FIXTURE_DIR; }

}  // namespace testing
