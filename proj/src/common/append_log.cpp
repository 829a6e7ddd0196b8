#include "buddy/common/append_log.hpp"

#include "buddy/common/error.hpp"
#include "buddy/common/text.hpp"

namespace buddy {
namespace {

constexpr std::size_t kHeaderSize = 5;

std::uint32_t read_u32(std::string_view b) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[0])) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[1])) << 8 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[2])) << 16 |
         static_cast<std::uint32_t>(static_cast<unsigned char>(b[3])) << 24;
}

}  // namespace

AppendLog::AppendLog(std::filesystem::path path, Magic magic, std::uint8_t version) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());

  const bool exists = std::filesystem::exists(path_) && std::filesystem::file_size(path_) > 0;
  if (exists) {
    const auto data = text::read_file(path_.string());
    if (data.size() < kHeaderSize || std::string_view(data).substr(0, 4) != std::string_view(magic.data(), 4)) {
      throw ConfigError(path_.string() + ": not a log of the expected kind");
    }
    if (static_cast<std::uint8_t>(data[4]) != version) {
      throw ConfigError(path_.string() + ": unsupported log version " +
                        std::to_string(static_cast<unsigned char>(data[4])));
    }
    std::size_t pos = kHeaderSize;
    while (pos + 4 <= data.size()) {
      const auto len = read_u32(std::string_view(data).substr(pos, 4));
      if (pos + 4 + len > data.size()) break;
      replayed_.emplace_back(data.substr(pos + 4, len));
      pos += 4 + len;
    }
    if (pos != data.size()) std::filesystem::resize_file(path_, pos);
    out_.open(path_, std::ios::binary | std::ios::app);
  } else {
    out_.open(path_, std::ios::binary | std::ios::trunc);
    out_.write(magic.data(), 4);
    out_.put(static_cast<char>(version));
    out_.flush();
  }
  if (!out_) throw ConfigError("cannot open " + path_.string() + " for appending");
}

void AppendLog::append(std::string_view payload) {
  const auto len = static_cast<std::uint32_t>(payload.size());
  const char header[4] = {static_cast<char>(len & 0xFF), static_cast<char>((len >> 8) & 0xFF),
                          static_cast<char>((len >> 16) & 0xFF), static_cast<char>((len >> 24) & 0xFF)};
  std::lock_guard lock(mu_);
  out_.write(header, 4);
  out_.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  out_.flush();
  if (!out_) throw Error("write failed on " + path_.string());
}

}  // namespace buddy
