#include "narrative/influence.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>

#include <json.hpp>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"
#include "narrative/stats.hpp"

namespace narrative {

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

const char* to_string(Role role) { return role == Role::kOriginate ? "originate" : "amplify"; }

RoleAssignment classify_roles(const NarrativeTimeline& t, double amplify_cutoff) {
  RoleAssignment r;
  r.cluster_id = t.cluster_id;
  r.first_day = t.first_day();
  r.peak_day = t.peak_day();
  r.total_articles = t.total_articles();
  const auto cutoff = static_cast<std::size_t>(
      std::ceil(amplify_cutoff * static_cast<double>(r.total_articles) - 1e-9));
  std::set<std::string> seen;
  for (std::size_t i = 0; i < t.articles.size(); ++i) {
    const auto& a = t.articles[i];
    if (!seen.insert(a.domain).second) continue;  // only a domain's first article counts
    if (a.date == r.first_day) {
      r.originators.insert(a.domain);
    } else if (a.date < r.peak_day && i + 1 <= cutoff) {
      r.amplifiers.insert(a.domain);
    }
  }
  return r;
}

double rank_weight(std::uint64_t rank_bucket) {
  const double rank = static_cast<double>(rank_bucket == kUnranked ? kWorstRankBucket : rank_bucket);
  return 1.0 / std::log2(rank + 1.0);
}

void InfluenceConfig::validate() const {
  if (!(amplify_cutoff > 0.0 && amplify_cutoff < 1.0)) throw UsageError("amplify_cutoff must lie in (0, 1)");
  if (bootstrap_iterations == 0) throw UsageError("bootstrap_iterations must be positive");
  if (subset_size == 0) throw UsageError("subset_size must be positive");
  if (window_days <= 0) throw UsageError("window_days must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (!(weight_scale > 0.0)) throw UsageError("weight_scale must be positive");
}

InfluenceAnalyzer::InfluenceAnalyzer(std::vector<NarrativeTimeline> timelines, RankTable ranks,
                                     InfluenceConfig config)
    : timelines_(std::move(timelines)), ranks_(std::move(ranks)), config_(config) {
  config_.validate();
  std::set<std::string> domains;
  for (const auto& t : timelines_) {
    roles_.push_back(classify_roles(t, config_.amplify_cutoff));
    for (const auto& [d, first] : t.domain_first_date) domains.insert(d);
  }
  domains_.assign(domains.begin(), domains.end());
}

double InfluenceAnalyzer::weight(const std::string& domain) const {
  return config_.weight_scale * rank_weight(ranks_.bucket(domain));
}

std::vector<double> InfluenceAnalyzer::inclusion_weights(const std::string& domain, Role role) const {
  // Pool: every other domain. Each iteration draws one subset shared by all narratives.
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    if (domains_[i] != domain) pool.push_back(i);
  }
  std::vector<std::size_t> hits(domains_.size(), 0);
  const std::size_t take = std::min(config_.subset_size, pool.size());
  const std::uint64_t h = fnv1a(domain);
  std::seed_seq seq{static_cast<std::uint32_t>(config_.rng_seed), static_cast<std::uint32_t>(config_.rng_seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32),
                    static_cast<std::uint32_t>(role)};
  std::mt19937_64 rng(seq);
  for (std::size_t b = 0; b < config_.bootstrap_iterations; ++b) {
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      ++hits[pool[i]];
    }
  }
  std::vector<double> out(domains_.size());
  for (std::size_t i = 0; i < domains_.size(); ++i) {
    out[i] = static_cast<double>(hits[i]) * weight(domains_[i]) / static_cast<double>(config_.bootstrap_iterations);
  }
  return out;
}

InfluenceAnalyzer::Groups InfluenceAnalyzer::groups(const std::string& domain, Role role) const {
  Groups g;
  const auto inclusion = inclusion_weights(domain, role);
  auto domain_index = [&](const std::string& d) {
    return static_cast<std::size_t>(std::lower_bound(domains_.begin(), domains_.end(), d) - domains_.begin());
  };
  for (std::size_t n = 0; n < timelines_.size(); ++n) {
    const auto& t = timelines_[n];
    const auto& r = roles_[n];
    const auto own = t.domain_first_date.find(domain);
    if (own == t.domain_first_date.end()) continue;
    const bool originated = r.originators.count(domain) > 0;
    const bool amplified = r.amplifiers.count(domain) > 0;
    bool in_a = false;
    Date anchor;
    if (role == Role::kOriginate) {
      in_a = originated;
      anchor = r.first_day;
    } else {
      if (originated) continue;
      in_a = amplified;
      anchor = own->second;
    }
    double value = 0.0;
    for (const auto& a : t.articles) {
      if (a.date < anchor || a.date - anchor >= config_.window_days) continue;
      if (a.domain == domain || r.originators.count(a.domain)) continue;
      value += inclusion[domain_index(a.domain)];
    }
    const double to_peak = static_cast<double>(r.peak_day - anchor);
    (in_a ? g.a : g.b).push_back(value);
    (in_a ? g.peak_a : g.peak_b).push_back(to_peak);
  }
  return g;
}

EffectReport InfluenceAnalyzer::effect(const std::string& domain, Role role) const {
  EffectReport rep;
  rep.domain = domain;
  rep.role = role;
  rep.seed = config_.rng_seed;
  rep.num_comparisons = config_.num_comparisons > 0 ? config_.num_comparisons : 1;
  if (!std::binary_search(domains_.begin(), domains_.end(), domain)) {
    throw DataError("unknown domain " + domain);
  }
  const auto g = groups(domain, role);
  rep.eligible_narratives = g.a.size();
  rep.comparison_narratives = g.b.size();
  const bool need_b = role == Role::kOriginate;
  if (g.a.size() < config_.min_instances || (need_b && g.b.size() < config_.min_instances)) {
    rep.skipped = true;
    rep.skip_reason = "insufficient_instances";
    return rep;
  }
  if (g.a.size() < 2 || g.b.size() < 2) {
    rep.skipped = true;
    rep.skip_reason = "insufficient_comparison_group";
    return rep;
  }
  rep.weighted_external_delta = mean(g.a) - mean(g.b);
  rep.cohens_d = effect_size(g.a, g.b);
  const auto u = mann_whitney_u(g.a, g.b);
  rep.u_statistic = u.u;
  rep.p_value = u.p_value;
  rep.peak_delta_days = mean(g.peak_a) - mean(g.peak_b);
  rep.peak_cohens_d = effect_size(g.peak_a, g.peak_b);
  rep.peak_p_value = mann_whitney_u(g.peak_a, g.peak_b).p_value;
  rep.significant = rep.p_value < config_.alpha / static_cast<double>(rep.num_comparisons);
  return rep;
}

EffectReport InfluenceAnalyzer::origination_effect(const std::string& domain) const {
  return effect(domain, Role::kOriginate);
}

EffectReport InfluenceAnalyzer::amplification_effect(const std::string& domain) const {
  return effect(domain, Role::kAmplify);
}

PeakEffect InfluenceAnalyzer::time_to_peak_effect(const std::string& domain, Role role) const {
  const auto rep = effect(domain, role);
  if (rep.skipped) throw DataError(domain + ": " + rep.skip_reason);
  return {rep.peak_delta_days, rep.peak_cohens_d, rep.peak_p_value};
}

std::vector<EffectReport> InfluenceAnalyzer::analyze_all(Role role) const {
  std::vector<EffectReport> reports(domains_.size());
  parallel_for(domains_.size(), config_.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) reports[i] = effect(domains_[i], role);
  });
  std::size_t tested = 0;
  for (const auto& r : reports) tested += r.skipped ? 0 : 1;
  const std::size_t comparisons =
      config_.num_comparisons > 0 ? config_.num_comparisons : std::max<std::size_t>(tested, 1);
  for (auto& r : reports) {
    r.num_comparisons = comparisons;
    r.significant = !r.skipped && r.p_value < config_.alpha / static_cast<double>(comparisons);
  }
  return reports;
}

LagProfile InfluenceAnalyzer::lag_profile(const std::set<std::uint64_t>& bucket_filter) const {
  LagProfile lag;
  for (const auto& t : timelines_) {
    const Date peak = t.peak_day();
    for (const auto& a : t.articles) {
      if (!bucket_filter.empty() && !bucket_filter.count(ranks_.bucket(a.domain))) continue;
      const int offset = a.date - peak;
      ++lag.histogram[offset];
      ++lag.total;
      if (offset < 0) ++lag.before_peak;
    }
  }
  lag.proportion_before = lag.total > 0 ? static_cast<double>(lag.before_peak) / static_cast<double>(lag.total) : 0.0;
  return lag;
}

void export_effect_reports(const std::vector<EffectReport>& reports, std::ostream& out, bool jsonl) {
  if (jsonl) {
    for (const auto& r : reports) {
      nlohmann::json j = {{"domain", r.domain},
                          {"role", to_string(r.role)},
                          {"skipped", r.skipped},
                          {"skip_reason", r.skip_reason},
                          {"eligible_narratives", r.eligible_narratives},
                          {"comparison_narratives", r.comparison_narratives},
                          {"weighted_external_delta", finite_or_null(r.weighted_external_delta)},
                          {"cohens_d", finite_or_null(r.cohens_d)},
                          {"u_statistic", r.u_statistic},
                          {"p_value", r.p_value},
                          {"significant", r.significant},
                          {"peak_delta_days", finite_or_null(r.peak_delta_days)},
                          {"peak_cohens_d", finite_or_null(r.peak_cohens_d)},
                          {"peak_p_value", r.peak_p_value},
                          {"num_comparisons", r.num_comparisons},
                          {"seed", r.seed}};
      out << j.dump() << '\n';
    }
    return;
  }
  out << "domain\trole\tnarratives\tcomparison\twtd_ext_art_delta\tcohens_d\tu\tp_value\tsignificant"
         "\tto_peak_delta_days\tpeak_cohens_d\tpeak_p_value\tnum_comparisons\tseed\tskip_reason\n";
  out << std::setprecision(10);
  for (const auto& r : reports) {
    out << r.domain << '\t' << to_string(r.role) << '\t' << r.eligible_narratives << '\t'
        << r.comparison_narratives << '\t' << r.weighted_external_delta << '\t' << r.cohens_d << '\t'
        << r.u_statistic << '\t' << r.p_value << '\t' << (r.significant ? "yes" : "no") << '\t'
        << r.peak_delta_days << '\t' << r.peak_cohens_d << '\t' << r.peak_p_value << '\t'
        << r.num_comparisons << '\t' << r.seed << '\t' << (r.skipped ? r.skip_reason : "-") << '\n';
  }
}

}  // namespace narrative
