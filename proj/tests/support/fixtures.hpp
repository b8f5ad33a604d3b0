#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "oclb/scene_data.hpp"

namespace fixtures {

/// Scene whose masks come from a per-pixel label map.
inline oclb::Scene scene_from_labels(std::size_t h, std::size_t w, const std::vector<int>& labels,
                                     std::size_t num_objects, const oclb::PropertySchema& schema,
                                     float gray = 0.5f) {
  oclb::Scene s;
  s.height = h;
  s.width = w;
  s.channels = 3;
  s.image.assign(h * w * 3, gray);
  s.masks = oclb::Tensor<std::uint8_t>({num_objects, h, w});
  for (std::size_t p = 0; p < h * w; ++p) s.masks.data[static_cast<std::size_t>(labels[p]) * h * w + p] = 1;
  for (const auto& e : schema.entries()) s.properties.emplace_back(oclb::Shape{num_objects, e.width()});
  s.ood_flags.assign(num_objects, 0);
  return s;
}

/// Hard K x HW soft masks from a label map.
inline std::vector<float> hard_masks(const std::vector<int>& labels, std::size_t k) {
  std::vector<float> out(k * labels.size(), 0.0f);
  for (std::size_t p = 0; p < labels.size(); ++p) out[static_cast<std::size_t>(labels[p]) * labels.size() + p] = 1.0f;
  return out;
}

inline std::vector<std::uint8_t> hard_gt(const std::vector<int>& labels, std::size_t m) {
  std::vector<std::uint8_t> out(m * labels.size(), 0);
  for (std::size_t p = 0; p < labels.size(); ++p) out[static_cast<std::size_t>(labels[p]) * labels.size() + p] = 1;
  return out;
}

/// Fresh directory removed on destruction.
class TempDir {
public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("oclb_test_" + std::to_string(std::random_device{}()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Byte comparison of two directory trees.
inline bool same_tree(const std::filesystem::path& a, const std::filesystem::path& b) {
  std::vector<std::filesystem::path> fa, fb;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) fa.push_back(std::filesystem::relative(e.path(), a));
  }
  for (const auto& e : std::filesystem::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) fb.push_back(std::filesystem::relative(e.path(), b));
  }
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return false;
  for (const auto& f : fa) {
    if (read_bytes(a / f) != read_bytes(b / f)) return false;
  }
  return true;
}

}  // namespace fixtures
