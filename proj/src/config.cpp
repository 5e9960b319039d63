#include "narrative/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "narrative/error.hpp"

namespace narrative {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) throw UsageError("config " + key + ": cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw UsageError("config " + key + ": expected true or false, got '" + value + "'");
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::optional<Date> parse_optional_date(const std::string& key, const std::string& value) {
  if (value.empty()) return std::nullopt;
  try {
    return Date::parse(value);
  } catch (const DataError&) {
    throw UsageError("config " + key + ": expected YYYY-MM-DD, got '" + value + "'");
  }
}

struct Field {
  bool hashed;
  std::function<std::string(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const std::string&, const std::string&)> set;
};

#define NUM_FIELD(name, type)                                                                  \
  {                                                                                            \
    #name, Field {                                                                             \
      true, [](const PipelineConfig& c) { return std::to_string(c.name); },                    \
          [](PipelineConfig& c, const std::string& k, const std::string& v) {                 \
            c.name = parse_number<type>(k, v);                                                 \
          }                                                                                    \
    }                                                                                          \
  }
#define REAL_FIELD(name)                                                                       \
  {                                                                                            \
    #name, Field {                                                                             \
      true, [](const PipelineConfig& c) { return format_double(c.name); },                     \
          [](PipelineConfig& c, const std::string& k, const std::string& v) {                 \
            c.name = parse_number<double>(k, v);                                               \
          }                                                                                    \
    }                                                                                          \
  }
#define BOOL_FIELD(name)                                                                       \
  {                                                                                            \
    #name, Field {                                                                             \
      true, [](const PipelineConfig& c) { return std::string(c.name ? "true" : "false"); },    \
          [](PipelineConfig& c, const std::string& k, const std::string& v) {                 \
            c.name = parse_bool(k, v);                                                         \
          }                                                                                    \
    }                                                                                          \
  }
#define STR_FIELD(name, hashed)                                                                \
  {                                                                                            \
    #name, Field {                                                                             \
      hashed, [](const PipelineConfig& c) { return std::string(c.name); },                     \
          [](PipelineConfig& c, const std::string&, const std::string& v) { c.name = v; }     \
    }                                                                                          \
  }
#define DATE_FIELD(name)                                                                       \
  {                                                                                            \
    #name, Field {                                                                             \
      true, [](const PipelineConfig& c) { return c.name ? c.name->to_string() : std::string(); }, \
          [](PipelineConfig& c, const std::string& k, const std::string& v) {                 \
            c.name = parse_optional_date(k, v);                                                \
          }                                                                                    \
    }                                                                                          \
  }

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = {
      {"data_root", Field{false, [](const PipelineConfig& c) { return c.data_root.string(); },
                          [](PipelineConfig& c, const std::string&, const std::string& v) { c.data_root = v; }}},
      NUM_FIELD(dimension, std::size_t),
      REAL_FIELD(lambda),
      NUM_FIELD(max_iterations, std::size_t),
      REAL_FIELD(centroid_shift_tol),
      NUM_FIELD(max_new_clusters_per_day, std::size_t),
      DATE_FIELD(study_start),
      DATE_FIELD(study_end),
      NUM_FIELD(max_tokens, std::size_t),
      BOOL_FIELD(include_title),
      NUM_FIELD(min_articles, std::size_t),
      REAL_FIELD(max_single_site_share),
      REAL_FIELD(pmi_alpha),
      NUM_FIELD(top_k_keywords, std::size_t),
      NUM_FIELD(representatives, std::size_t),
      BOOL_FIELD(light_stemming),
      REAL_FIELD(epsilon),
      REAL_FIELD(edge_prune_below),
      REAL_FIELD(louvain_resolution),
      STR_FIELD(ranks_path, true),
      NUM_FIELD(bootstrap_iterations, std::size_t),
      NUM_FIELD(subset_size, std::size_t),
      NUM_FIELD(window_days, int),
      REAL_FIELD(amplify_cutoff),
      NUM_FIELD(min_instances, std::size_t),
      REAL_FIELD(alpha),
      NUM_FIELD(num_comparisons, std::size_t),
      REAL_FIELD(match_threshold),
      REAL_FIELD(prefilter_margin),
      {"sweep_thresholds",
       Field{true,
             [](const PipelineConfig& c) {
               std::string out;
               for (std::size_t i = 0; i < c.sweep_thresholds.size(); ++i) {
                 if (i) out += ',';
                 out += format_double(c.sweep_thresholds[i]);
               }
               return out;
             },
             [](PipelineConfig& c, const std::string& k, const std::string& v) {
               c.sweep_thresholds.clear();
               std::stringstream ss(v);
               std::string item;
               while (std::getline(ss, item, ',')) c.sweep_thresholds.push_back(parse_number<double>(k, trim(item)));
             }}},
      NUM_FIELD(trending_min_volume, std::size_t),
      NUM_FIELD(max_in_flight, std::size_t),
      STR_FIELD(embedding_url, false),
      STR_FIELD(summarizer_url, false),
      STR_FIELD(classifier_url, false),
      NUM_FIELD(provider_timeout_ms, std::int64_t),
      NUM_FIELD(provider_retries, int),
      NUM_FIELD(rng_seed, std::uint64_t),
      {"threads", Field{false, [](const PipelineConfig& c) { return std::to_string(c.threads); },
                        [](PipelineConfig& c, const std::string& k, const std::string& v) {
                          c.threads = parse_number<std::size_t>(k, v);
                        }}},
  };
  return table;
}

#undef NUM_FIELD
#undef REAL_FIELD
#undef BOOL_FIELD
#undef STR_FIELD
#undef DATE_FIELD

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw UsageError("unknown config key '" + key + "'");
  it->second.set(*this, key, trim(value));
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return out;
}

void PipelineConfig::validate() const {
  if (dimension == 0) throw UsageError("dimension must be positive");
  if (max_tokens == 0) throw UsageError("max_tokens must be positive");
  if (study_start && study_end && *study_end < *study_start) throw UsageError("study_end precedes study_start");
  if (!(epsilon >= 0.0)) throw UsageError("epsilon must be non-negative");
  if (!(edge_prune_below >= 0.0 && edge_prune_below <= 1.0)) throw UsageError("edge_prune_below must lie in [0, 1]");
  if (!(louvain_resolution > 0.0)) throw UsageError("louvain_resolution must be positive");
  if (!(match_threshold > -1.0 && match_threshold <= 1.0)) throw UsageError("match_threshold must lie in (-1, 1]");
  if (!(prefilter_margin >= 0.0)) throw UsageError("prefilter_margin must be non-negative");
  for (const double t : sweep_thresholds) {
    if (!(t > -1.0 && t <= 1.0)) throw UsageError("sweep_thresholds must lie in (-1, 1]");
  }
  if (max_in_flight == 0) throw UsageError("max_in_flight must be positive");
  if (provider_timeout_ms <= 0) throw UsageError("provider_timeout_ms must be positive");
  if (provider_retries < 0) throw UsageError("provider_retries must be non-negative");
  fit_config().validate();
  curation_config().validate();
  influence_config().validate();
}

std::string PipelineConfig::serialize() const {
  std::string out;
  for (const auto& [name, f] : fields()) {
    if (!f.hashed) continue;
    out += name;
    out += '=';
    out += f.get(*this);
    out += '\n';
  }
  return out;
}

std::string PipelineConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize())));
  return buf;
}

FitConfig PipelineConfig::fit_config() const {
  FitConfig c;
  c.lambda = lambda;
  c.max_iterations = max_iterations;
  c.centroid_shift_tol = centroid_shift_tol;
  c.max_new_clusters_per_day = max_new_clusters_per_day;
  c.threads = threads;
  return c;
}

CurationConfig PipelineConfig::curation_config() const {
  CurationConfig c;
  c.min_articles = min_articles;
  c.max_single_site_share = max_single_site_share;
  c.pmi_alpha = pmi_alpha;
  c.top_k_keywords = top_k_keywords;
  c.representatives = representatives;
  c.light_stemming = light_stemming;
  c.threads = threads;
  return c;
}

InfluenceConfig PipelineConfig::influence_config() const {
  InfluenceConfig c;
  c.bootstrap_iterations = bootstrap_iterations;
  c.subset_size = subset_size;
  c.window_days = window_days;
  c.amplify_cutoff = amplify_cutoff;
  c.min_instances = min_instances;
  c.alpha = alpha;
  c.num_comparisons = num_comparisons;
  c.rng_seed = rng_seed;
  c.threads = threads;
  return c;
}

StudyWindow PipelineConfig::study_window() const {
  return {study_start.value_or(Date::from_ymd(1970, 1, 1)), study_end.value_or(Date::from_ymd(9999, 12, 31))};
}

std::optional<Endpoint> PipelineConfig::endpoint(const std::string& url) const {
  if (url.empty()) return std::nullopt;
  Endpoint e;
  e.url = url;
  e.timeout = std::chrono::milliseconds(provider_timeout_ms);
  e.retries = provider_retries;
  return e;
}

std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw UsageError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    out.emplace_back(trim(std::string_view(line).substr(0, eq)), trim(std::string_view(line).substr(eq + 1)));
  }
  return out;
}

PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides,
                           const std::function<std::optional<std::string>(const std::string&)>& env) {
  PipelineConfig config;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw UsageError("cannot read config " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    for (const auto& [k, v] : parse_config_text(ss.str())) config.set(k, v);
  }
  for (const auto& [k, v] : overrides) config.set(k, v);
  for (const auto& key : PipelineConfig::keys()) {
    std::string var = "NARRATIVE_";
    for (const char c : key) var += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    std::optional<std::string> value;
    if (env) {
      value = env(var);
    } else if (const char* raw = std::getenv(var.c_str())) {
      value = std::string(raw);
    }
    if (value) config.set(key, *value);
  }
  config.validate();
  return config;
}

}  // namespace narrative
