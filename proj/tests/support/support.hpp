#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <unistd.h>

#include <gtest/gtest.h>

#include "drgrade/error.hpp"
#include "drgrade/image.hpp"
#include "drgrade/rng.hpp"

namespace drgrade::test {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("drgrade_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

inline RgbImage random_rgb(Rng& rng, std::uint32_t w, std::uint32_t h) {
  RgbImage img(w, h);
  for (auto& v : img.data()) v = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline Plane random_plane(Rng& rng, std::uint32_t w, std::uint32_t h, double lo = -1.0, double hi = 1.0) {
  Plane p(w, h);
  for (auto& v : p.data()) v = rng.uniform(lo, hi);
  return p;
}

inline BinaryMask random_mask(Rng& rng, std::uint32_t w, std::uint32_t h, double density) {
  BinaryMask m(w, h);
  for (auto& v : m.data()) v = rng.uniform() < density ? 1 : 0;
  return m;
}

// Expects `fn` to throw drgrade::Error of the given kind.
inline void expect_error(ErrorKind kind, const std::function<void()>& fn) {
  try {
    fn();
    ADD_FAILURE() << "expected " << to_string(kind) << ", nothing was thrown";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
  }
}

inline std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace drgrade::test
