#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "unlearn/records.hpp"

namespace unlearn {

enum class KrEstimator {
  max_binary,  // 1 if any probe revealed the answer
  fraction,    // revealing probes / probes
};

KrEstimator parse_kr_estimator(std::string_view name);

// Throws ValidationError for unsuppressed samples or empty probe lists.
double kr_per_sample(const ProbeRecord& r, KrEstimator estimator);

struct KrRow {
  std::string method;  // canonical label, or "Combined"
  std::size_t seeds = 0;
  std::size_t suppressed = 0;
  std::size_t leaks = 0;
  double leak_rate = 0.0;
  double mean_kr = 0.0;  // fraction estimator unless requested otherwise
};

struct ProbeRecovery {
  ProbeType probe_type = ProbeType::rephrased;
  std::size_t revealed = 0;
  std::size_t total = 0;
  double rate() const { return total ? static_cast<double>(revealed) / static_cast<double>(total) : 0.0; }
};

struct KrReport {
  std::vector<KrRow> methods;  // canonical method order
  KrRow combined;
  KrEstimator mean_estimator = KrEstimator::fraction;
  std::array<ProbeRecovery, 3> by_probe{};  // rephrased, indirect, negation
};

// Records with direct_suppressed = false are validated and then ignored.
KrReport kr_report(std::span<const ProbeRecord> records, KrEstimator mean_estimator = KrEstimator::fraction);

std::string to_markdown(const KrReport& r);

}  // namespace unlearn
