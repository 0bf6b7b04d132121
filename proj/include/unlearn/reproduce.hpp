#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace unlearn {

struct Check {
  std::string name;
  bool pass = false;
  bool gating = true;  // informational checks never change the exit code
  std::string detail;
};

// Recomputes every published quantity the bundled fixtures support and diffs
// it against fixtures/published.json. Gating tolerances equal the acceptance
// tolerances.
std::vector<Check> reproduce_paper(const std::filesystem::path& fixtures_dir, std::uint64_t seed = 42);

bool all_gating_pass(const std::vector<Check>& checks);
std::string to_text(const std::vector<Check>& checks);

}  // namespace unlearn
