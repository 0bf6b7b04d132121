#include "unlearn/report.hpp"

#include <sstream>

#include <fmt/format.h>

#include "unlearn/errors.hpp"
#include "unlearn/records.hpp"

namespace unlearn {

OutputFormat parse_output_format(std::string_view name) {
  if (name == "text") return OutputFormat::text;
  if (name == "markdown") return OutputFormat::markdown;
  if (name == "structured" || name == "json") return OutputFormat::structured;
  throw ValidationError(fmt::format("unknown output format '{}' (text|markdown|structured)", name));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string digest_hex(std::string_view bytes) { return fmt::format("{:016x}", fnv1a64(bytes)); }

InputDigest digest_file(const std::filesystem::path& path) {
  return {path.string(), digest_hex(read_text_file(path))};
}

std::string render_header(const ReportHeader& h, OutputFormat format) {
  const std::string_view lead = format == OutputFormat::markdown ? "> " : "# ";
  std::ostringstream os;
  os << lead << "unleval " << kToolVersion << " | command: " << h.command;
  if (h.seed) os << " | seed: " << *h.seed;
  os << '\n';
  for (const auto& in : h.inputs) os << lead << "input: " << in.path << " fnv1a64:" << in.fnv1a64 << '\n';
  if (!h.params.empty()) {
    os << lead << "params:";
    for (const auto& [k, v] : h.params) os << ' ' << k << '=' << v;
    os << '\n';
  }
  if (format == OutputFormat::markdown) os << '\n';
  return os.str();
}

}  // namespace unlearn
