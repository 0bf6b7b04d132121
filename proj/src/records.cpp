#include "unlearn/records.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "json.hpp"

namespace unlearn {

namespace {

using json = nlohmann::json;

std::string lower(std::string_view s) {
  std::string out(s);
  std::ranges::transform(out, out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

[[noreturn]] void field_error(std::size_t line, std::string_view field, std::string_view msg) {
  throw ValidationError(fmt::format("line {}: field '{}': {}", line, field, msg));
}

const json& require(const json& obj, std::size_t line, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) field_error(line, key, "missing");
  return *it;
}

double get_number(const json& obj, std::size_t line, const char* key) {
  const json& v = require(obj, line, key);
  if (!v.is_number()) field_error(line, key, "expected a number");
  double d = v.get<double>();
  if (!std::isfinite(d)) field_error(line, key, "not finite");
  return d;
}

std::optional<double> get_optional_number(const json& obj, std::size_t line, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return get_number(obj, line, key);
}

std::string get_string(const json& obj, std::size_t line, const char* key) {
  const json& v = require(obj, line, key);
  if (!v.is_string()) field_error(line, key, "expected a string");
  return v.get<std::string>();
}

std::int64_t get_integer(const json& obj, std::size_t line, const char* key) {
  const json& v = require(obj, line, key);
  if (!v.is_number_integer()) field_error(line, key, "expected an integer");
  return v.get<std::int64_t>();
}

bool get_bool(const json& obj, std::size_t line, const char* key) {
  const json& v = require(obj, line, key);
  if (!v.is_boolean()) field_error(line, key, "expected a boolean");
  return v.get<bool>();
}

std::optional<std::vector<double>> get_optional_vector(const json& obj, std::size_t line,
                                                       const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_array()) field_error(line, key, "expected an array of numbers or null");
  std::vector<double> out;
  out.reserve(it->size());
  for (const auto& e : *it) {
    if (!e.is_number()) field_error(line, key, "expected an array of numbers or null");
    double d = e.get<double>();
    if (!std::isfinite(d)) field_error(line, key, "non-finite entry");
    out.push_back(d);
  }
  return out;
}

template <typename Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (std::ranges::all_of(text, [](unsigned char c) { return std::isspace(c); })) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ValidationError(fmt::format("line {}: malformed JSON: {}", line, e.what()));
    }
    if (!obj.is_object()) throw ValidationError(fmt::format("line {}: expected a JSON object", line));
    try {
      fn(obj, line);
    } catch (const ValidationError& e) {
      std::string_view what = e.what();
      if (what.starts_with("line ")) throw;
      throw ValidationError(fmt::format("line {}: {}", line, what));
    }
  }
}

std::ifstream open_input(const std::filesystem::path& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw ValidationError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

void check_unit(double v, std::string_view name) {
  if (!std::isfinite(v) || v < 0.0 || v > 1.0)
    throw ValidationError(fmt::format("field '{}': value {} outside [0, 1]", name, v));
}

json vector_or_null(const std::optional<std::vector<double>>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::fa: return "FA";
    case Metric::ra: return "RA";
    case Metric::mia: return "MIA";
    case Metric::ad: return "AD";
    case Metric::js: return "JS";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  std::string n = lower(name);
  for (Metric m : kMetrics)
    if (lower(metric_name(m)) == n) return m;
  throw ValidationError(fmt::format("unknown metric '{}'", name));
}

double MetricVector::get(Metric m) const { return as_array()[index(m)]; }

void validate(const MetricVector& m) {
  auto unit = [](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw ValidationError(fmt::format("metric '{}' value {} outside [0, 1]", name, v));
  };
  unit(m.fa, "fa");
  unit(m.ra, "ra");
  unit(m.mia, "mia");
  unit(m.js, "js");
  if (!std::isfinite(m.ad) || m.ad < 0.0)
    throw ValidationError(fmt::format("metric 'ad' value {} must be finite and >= 0", m.ad));
}

Method Method::of(MethodKind kind) {
  switch (kind) {
    case MethodKind::ga: return {kind, "GA"};
    case MethodKind::rl: return {kind, "RL"};
    case MethodKind::ft: return {kind, "FT"};
    case MethodKind::salun: return {kind, "SalUn"};
    case MethodKind::other: break;
  }
  throw ValidationError("Method::of needs a canonical kind");
}

Method Method::parse(std::string_view text) {
  std::string key;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c)) && c != '-' && c != '_')
      key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (key.empty()) throw ValidationError("empty method name");
  if (key == "ga" || key == "gradientascent") return of(MethodKind::ga);
  if (key == "rl" || key == "randomlabels" || key == "randomlabel") return of(MethodKind::rl);
  if (key == "ft" || key == "ftretain" || key == "finetune" || key == "finetuneretain")
    return of(MethodKind::ft);
  if (key == "salun") return of(MethodKind::salun);
  auto first = text.find_first_not_of(" \t");
  auto last = text.find_last_not_of(" \t");
  return {MethodKind::other, std::string(text.substr(first, last - first + 1))};
}

std::string_view Method::display_name() const {
  switch (kind) {
    case MethodKind::ga: return "Gradient Ascent";
    case MethodKind::rl: return "Random Labels";
    case MethodKind::ft: return "FT-Retain";
    case MethodKind::salun: return "SalUn";
    case MethodKind::other: break;
  }
  return name;
}

std::strong_ordering Method::operator<=>(const Method& o) const {
  if (auto c = kind <=> o.kind; c != 0) return c;
  return name <=> o.name;
}

std::string_view to_string(Modality m) { return m == Modality::multimodal ? "multimodal" : "unimodal"; }
std::string_view to_string(Split s) { return s == Split::forget ? "forget" : "retain"; }

std::string_view to_string(ProbeType t) {
  switch (t) {
    case ProbeType::rephrased: return "rephrased";
    case ProbeType::indirect: return "indirect";
    case ProbeType::negation: return "negation";
  }
  return "?";
}

void validate(const WeightVector& w) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kMetricCount; ++i) {
    double v = w.w[i];
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(fmt::format("weight for {} is {}, must be finite and >= 0",
                                        metric_name(kMetrics[i]), v));
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ValidationError(fmt::format("weights sum to {:.12g}, not 1 (off the simplex)", sum));
}

WeightVector make_weights(const std::array<double, kMetricCount>& w) {
  WeightVector out{w};
  validate(out);
  return out;
}

void validate_distribution(std::span<const double> p, std::string_view field) {
  if (p.empty()) throw ValidationError(fmt::format("field '{}': empty distribution", field));
  double sum = 0.0;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0)
      throw ValidationError(fmt::format("field '{}': entry {} is not a probability", field, v));
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-6)
    throw ValidationError(
        fmt::format("field '{}': distribution sums to {:.9g}, not 1 (normalization error)", field, sum));
}

void validate(const SampleOutcome& s) {
  check_unit(s.max_confidence, "max_confidence");
  check_unit(s.top2_margin, "top2_margin");
  if (!std::isfinite(s.entropy) || s.entropy < 0.0)
    throw ValidationError(fmt::format("field 'entropy': value {} must be finite and >= 0", s.entropy));

  if (s.activation.has_value() != s.oracle_activation.has_value())
    throw ValidationError("pairing error: activation and oracle_activation must be present together");
  if (s.activation && s.activation->size() != s.oracle_activation->size())
    throw ValidationError(fmt::format("pairing error: activation has length {}, oracle_activation {}",
                                      s.activation->size(), s.oracle_activation->size()));

  if (s.output_dist.has_value() != s.oracle_output_dist.has_value())
    throw ValidationError("pairing error: output_dist and oracle_output_dist must be present together");
  if (s.output_dist) {
    if (s.output_dist->size() != s.oracle_output_dist->size())
      throw ValidationError(fmt::format("pairing error: output_dist has length {}, oracle_output_dist {}",
                                        s.output_dist->size(), s.oracle_output_dist->size()));
    validate_distribution(*s.output_dist, "output_dist");
    validate_distribution(*s.oracle_output_dist, "oracle_output_dist");
  }
}

void validate(const ParameterSnapshot& s) {
  std::size_t expected_offset = 0;
  for (const auto& t : s.layout) {
    if (t.offset != expected_offset)
      throw ValidationError(fmt::format("layout error: tensor '{}' starts at {}, expected {}",
                                        t.tensor_name, t.offset, expected_offset));
    expected_offset += t.length;
  }
  if (expected_offset != s.values.size())
    throw ValidationError(fmt::format("layout error: layout lengths sum to {} but snapshot has {} values",
                                      expected_offset, s.values.size()));
}

bool comparable(const ParameterSnapshot& a, const ParameterSnapshot& b) { return a.layout == b.layout; }

void validate(const ProbeRecord& r) {
  if (r.direct_suppressed && r.probes.empty())
    throw ValidationError(
        fmt::format("probe record '{}': probes must be non-empty when direct_suppressed", r.sample_id));
  std::set<ProbeType> seen;
  for (const auto& p : r.probes)
    if (!seen.insert(p.probe_type).second)
      throw ValidationError(fmt::format("probe record '{}': duplicate probe_type '{}'", r.sample_id,
                                        to_string(p.probe_type)));
}

std::vector<ModelRun> parse_runs(std::istream& in) {
  std::vector<ModelRun> runs;
  std::map<std::string, std::size_t> by_id;
  std::map<std::tuple<Method, std::string, std::int64_t>, std::string> by_triple;

  for_each_record(in, [&](const json& obj, std::size_t line) {
    ModelRun r;
    r.run_id = get_string(obj, line, "run_id");
    if (r.run_id.empty()) field_error(line, "run_id", "must be non-empty");
    try {
      r.method = Method::parse(get_string(obj, line, "method"));
    } catch (const ValidationError& e) {
      field_error(line, "method", e.what());
    }
    r.dataset = get_string(obj, line, "dataset");
    r.seed = get_integer(obj, line, "seed");
    std::string modality = get_string(obj, line, "modality");
    if (modality == "multimodal")
      r.modality = Modality::multimodal;
    else if (modality == "unimodal")
      r.modality = Modality::unimodal;
    else
      field_error(line, "modality", fmt::format("'{}' is not multimodal|unimodal", modality));
    r.metrics.fa = get_number(obj, line, "fa");
    r.metrics.ra = get_number(obj, line, "ra");
    r.metrics.mia = get_number(obj, line, "mia");
    r.metrics.ad = get_number(obj, line, "ad");
    r.metrics.js = get_number(obj, line, "js");
    validate(r.metrics);
    r.oracle_distance = get_optional_number(obj, line, "oracle_distance");
    if (r.oracle_distance && *r.oracle_distance < 0.0)
      field_error(line, "oracle_distance", fmt::format("value {} must be >= 0", *r.oracle_distance));

    if (!by_id.emplace(r.run_id, line).second)
      throw ValidationError(fmt::format("line {}: duplicate run_id '{}' (first seen on line {})", line,
                                        r.run_id, by_id[r.run_id]));
    auto key = std::make_tuple(r.method, r.dataset, r.seed);
    if (auto [it, inserted] = by_triple.emplace(key, r.run_id); !inserted)
      throw ValidationError(fmt::format(
          "line {}: duplicate (method, dataset, seed) = ({}, {}, {}) in runs '{}' and '{}'", line,
          r.method.name, r.dataset, r.seed, it->second, r.run_id));
    runs.push_back(std::move(r));
  });
  return runs;
}

std::vector<SampleOutcome> parse_sample_outcomes(std::istream& in) {
  std::vector<SampleOutcome> out;
  for_each_record(in, [&](const json& obj, std::size_t line) {
    SampleOutcome s;
    s.sample_id = get_string(obj, line, "sample_id");
    std::string split = get_string(obj, line, "split");
    if (split == "forget")
      s.split = Split::forget;
    else if (split == "retain")
      s.split = Split::retain;
    else
      field_error(line, "split", fmt::format("'{}' is not forget|retain", split));
    s.gold_answer = get_string(obj, line, "gold_answer");
    s.prediction = get_string(obj, line, "prediction");
    s.max_confidence = get_number(obj, line, "max_confidence");
    s.entropy = get_number(obj, line, "entropy");
    s.top2_margin = get_number(obj, line, "top2_margin");
    s.activation = get_optional_vector(obj, line, "activation");
    s.oracle_activation = get_optional_vector(obj, line, "oracle_activation");
    s.output_dist = get_optional_vector(obj, line, "output_dist");
    s.oracle_output_dist = get_optional_vector(obj, line, "oracle_output_dist");
    validate(s);
    out.push_back(std::move(s));
  });
  return out;
}

std::vector<ProbeRecord> parse_probe_records(std::istream& in) {
  std::vector<ProbeRecord> out;
  for_each_record(in, [&](const json& obj, std::size_t line) {
    ProbeRecord r;
    r.sample_id = get_string(obj, line, "sample_id");
    r.method = get_string(obj, line, "method");
    r.seed = get_integer(obj, line, "seed");
    r.direct_suppressed = get_bool(obj, line, "direct_suppressed");
    const json& probes = require(obj, line, "probes");
    if (!probes.is_array()) field_error(line, "probes", "expected an array");
    for (const auto& p : probes) {
      if (!p.is_object()) field_error(line, "probes", "entries must be objects");
      ProbeOutcome o;
      std::string type = get_string(p, line, "probe_type");
      if (type == "rephrased")
        o.probe_type = ProbeType::rephrased;
      else if (type == "indirect")
        o.probe_type = ProbeType::indirect;
      else if (type == "negation")
        o.probe_type = ProbeType::negation;
      else
        field_error(line, "probe_type", fmt::format("'{}' is not rephrased|indirect|negation", type));
      o.revealed = get_bool(p, line, "revealed");
      r.probes.push_back(o);
    }
    validate(r);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ModelRun> load_runs(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_runs(in);
}

std::vector<SampleOutcome> load_sample_outcomes(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_sample_outcomes(in);
}

std::vector<ProbeRecord> load_probe_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_probe_records(in);
}

ParameterSnapshot load_snapshot(const std::filesystem::path& bin, const std::filesystem::path& layout) {
  json doc;
  try {
    doc = json::parse(read_text_file(layout));
  } catch (const json::parse_error& e) {
    throw ValidationError(fmt::format("{}: malformed layout JSON: {}", layout.string(), e.what()));
  }
  ParameterSnapshot s;
  try {
    if (!doc.is_object()) throw ValidationError("layout must be a JSON object");
    s.model_id = doc.value("model_id", std::string{});
    const auto& tensors = doc.at("tensors");
    for (const auto& t : tensors) {
      s.layout.push_back(TensorSlice{t.at("tensor_name").get<std::string>(),
                                     t.at("offset").get<std::size_t>(), t.at("length").get<std::size_t>()});
    }
  } catch (const json::exception& e) {
    throw ValidationError(fmt::format("{}: bad layout: {}", layout.string(), e.what()));
  }

  auto in = open_input(bin, std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 4 != 0)
    throw ValidationError(fmt::format("{}: size {} is not a multiple of 4", bin.string(), bytes.size()));
  s.values.resize(bytes.size() / 4);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const unsigned char* b = &bytes[4 * i];
    std::uint32_t u = std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
                      (std::uint32_t{b[3]} << 24);
    s.values[i] = std::bit_cast<float>(u);
  }
  validate(s);
  return s;
}

ParameterSnapshot load_snapshot(const std::filesystem::path& stem) {
  std::filesystem::path bin = stem, layout = stem;
  bin += ".bin";
  layout += ".layout.json";
  return load_snapshot(bin, layout);
}

void save_snapshot(const ParameterSnapshot& s, const std::filesystem::path& bin,
                   const std::filesystem::path& layout) {
  validate(s);
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error(fmt::format("cannot write '{}'", bin.string()));
  for (float v : s.values) {
    auto u = std::bit_cast<std::uint32_t>(v);
    char b[4] = {static_cast<char>(u & 0xff), static_cast<char>((u >> 8) & 0xff),
                 static_cast<char>((u >> 16) & 0xff), static_cast<char>((u >> 24) & 0xff)};
    out.write(b, 4);
  }
  json doc;
  doc["model_id"] = s.model_id;
  doc["tensors"] = json::array();
  for (const auto& t : s.layout)
    doc["tensors"].push_back({{"tensor_name", t.tensor_name}, {"offset", t.offset}, {"length", t.length}});
  std::ofstream lo(layout);
  if (!lo) throw Error(fmt::format("cannot write '{}'", layout.string()));
  lo << doc.dump(2) << '\n';
}

std::string to_json_line(const ModelRun& r) {
  json o;
  o["run_id"] = r.run_id;
  o["method"] = r.method.name;
  o["dataset"] = r.dataset;
  o["seed"] = r.seed;
  o["modality"] = to_string(r.modality);
  o["fa"] = r.metrics.fa;
  o["ra"] = r.metrics.ra;
  o["mia"] = r.metrics.mia;
  o["ad"] = r.metrics.ad;
  o["js"] = r.metrics.js;
  o["oracle_distance"] = r.oracle_distance ? json(*r.oracle_distance) : json(nullptr);
  return o.dump();
}

std::string to_json_line(const SampleOutcome& s) {
  json o;
  o["sample_id"] = s.sample_id;
  o["split"] = to_string(s.split);
  o["gold_answer"] = s.gold_answer;
  o["prediction"] = s.prediction;
  o["max_confidence"] = s.max_confidence;
  o["entropy"] = s.entropy;
  o["top2_margin"] = s.top2_margin;
  o["activation"] = vector_or_null(s.activation);
  o["oracle_activation"] = vector_or_null(s.oracle_activation);
  o["output_dist"] = vector_or_null(s.output_dist);
  o["oracle_output_dist"] = vector_or_null(s.oracle_output_dist);
  return o.dump();
}

std::string to_json_line(const ProbeRecord& r) {
  json o;
  o["sample_id"] = r.sample_id;
  o["method"] = r.method;
  o["seed"] = r.seed;
  o["direct_suppressed"] = r.direct_suppressed;
  o["probes"] = json::array();
  for (const auto& p : r.probes)
    o["probes"].push_back({{"probe_type", to_string(p.probe_type)}, {"revealed", p.revealed}});
  return o.dump();
}

void write_runs(std::ostream& out, std::span<const ModelRun> runs) {
  for (const auto& r : runs) out << to_json_line(r) << '\n';
}

std::string read_text_file(const std::filesystem::path& path) {
  auto in = open_input(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace unlearn
