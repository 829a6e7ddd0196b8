#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace buddy {

/// Append-only record file.
///
/// Layout: 4 magic bytes, 1 version byte, then records of
/// `u32 little-endian payload length` + payload. A torn final record (crash
/// mid-write) is dropped and truncated away on open.
class AppendLog {
 public:
  using Magic = std::array<char, 4>;

  AppendLog(std::filesystem::path path, Magic magic, std::uint8_t version);

  /// Payloads present when the file was opened, oldest first.
  const std::vector<std::string>& replayed() const { return replayed_; }

  void append(std::string_view payload);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::vector<std::string> replayed_;
  std::ofstream out_;
  std::mutex mu_;
};

}  // namespace buddy
