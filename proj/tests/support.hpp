#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "copolicy/panel.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("copolicy_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::shared_ptr<const copolicy::Panel> default_panel() {
  static const auto panel = std::make_shared<const copolicy::Panel>(copolicy::synth_panel({}));
  return panel;
}

/// Small panel with arbitrary values for shape tests.
inline copolicy::Panel small_panel(std::size_t n_units, std::size_t n_years, std::uint64_t seed = 1) {
  copolicy::SynthConfig c;
  c.n_units = n_units;
  c.n_years = n_years;
  c.seed = seed;
  return copolicy::synth_panel(c);
}

}  // namespace testing
