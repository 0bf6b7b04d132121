#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace unlearn {

inline constexpr std::string_view kToolVersion = "0.1.0";

enum class OutputFormat { text, markdown, structured };
OutputFormat parse_output_format(std::string_view name);

// 64-bit FNV-1a, rendered as 16 lowercase hex digits.
std::uint64_t fnv1a64(std::string_view bytes);
std::string digest_hex(std::string_view bytes);

struct InputDigest {
  std::string path;  // as given on the command line
  std::string fnv1a64;
};

InputDigest digest_file(const std::filesystem::path& path);

struct ReportHeader {
  std::string command;
  std::optional<std::uint64_t> seed;
  std::vector<InputDigest> inputs;
  std::vector<std::pair<std::string, std::string>> params;  // in the order given
};

// Comment-style header lines for text and markdown output.
std::string render_header(const ReportHeader& h, OutputFormat format);

}  // namespace unlearn
