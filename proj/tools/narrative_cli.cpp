#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "narrative/error.hpp"
#include "narrative/pipeline.hpp"

namespace fs = std::filesystem;
using namespace narrative;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::string format = "tsv";

  bool jsonl() const { return format == "jsonl"; }
};

Common common;

void add_common(CLI::App* cmd) {
  cmd->add_option("-c,--config", common.config_path, "Config file (key = value lines)");
  cmd->add_option("--set", common.sets, "Override a config key: key=value")->take_all();
  cmd->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"tsv", "jsonl"}));
}

Pipeline open_pipeline() {
  std::vector<std::pair<std::string, std::string>> overrides;
  for (const auto& s : common.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    overrides.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  std::optional<fs::path> file;
  if (!common.config_path.empty()) file = common.config_path;
  return Pipeline(load_config(file, overrides));
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return in;
}

Date parse_date_arg(const std::string& s, const char* flag) {
  try {
    return Date::parse(s);
  } catch (const DataError&) {
    throw UsageError(std::string(flag) + " expects YYYY-MM-DD, got '" + s + "'");
  }
}

void print_fit_reports(const Pipeline& p, const std::vector<LedgerEntry>& entries) {
  RunLedger view;
  for (const auto& e : entries) view.append(e);
  write_provenance(p.provenance(), std::cout, common.jsonl());
  export_ledger(view, std::cout, common.jsonl());
}

void print_ingest(const IngestReport& r) {
  std::cout << "accepted\t" << r.accepted << "\nrejected\t" << r.rejected << "\nrenormalized\t"
            << r.renormalized_warnings << '\n';
  for (const auto& [reason, n] : r.reasons) std::cout << "rejected:" << reason << '\t' << n << '\n';
}

std::vector<QueryPassage> read_queries(std::istream& in, std::size_t dimension) {
  std::vector<QueryPassage> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      QueryPassage q;
      q.passage_id = j.at("passage_id").get<std::string>();
      q.embedding = j.at("vector").get<EmbeddingVector>();
      if (const auto check = validate_and_normalize(q.embedding, dimension); check.issue) {
        throw DataError(q.passage_id + ": " + to_string(*check.issue));
      }
      out.push_back(std::move(q));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::unique_ptr<RefutationClassifier> make_classifier(const PipelineConfig& c) {
  const auto e = c.endpoint(c.classifier_url);
  if (!e) return nullptr;
  return std::make_unique<HttpRefutationClassifier>(*e);
}

std::unique_ptr<Summarizer> make_summarizer(const PipelineConfig& c) {
  const auto e = c.endpoint(c.summarizer_url);
  if (!e) return nullptr;
  return std::make_unique<HttpSummarizer>(*e);
}

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad threshold '" + item + "'");
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Narrative tracking over a daily news corpus"};
  app.require_subcommand(1);
  app.set_version_flag("--version", code_version());

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Stage articles or embedded passages");
  ingest->require_subcommand(1);
  std::string ingest_file;
  bool ingest_no_embed = false;
  auto* ingest_articles = ingest->add_subcommand("articles", "Admit, segment, and embed articles");
  ingest_articles->add_option("file", ingest_file, "Article JSONL")->required();
  ingest_articles->add_flag("--no-embed", ingest_no_embed, "Write plain passages only");
  add_common(ingest_articles);
  auto* ingest_embeddings = ingest->add_subcommand("embeddings", "Stage embedded passages");
  ingest_embeddings->add_option("file", ingest_file, "Embedding record JSONL")->required();
  add_common(ingest_embeddings);

  // fit
  auto* fit = app.add_subcommand("fit", "Cluster and commit one day or a range of days");
  std::string fit_date, fit_from, fit_to;
  auto* opt_date = fit->add_option("--date", fit_date, "Day to fit");
  auto* opt_from = fit->add_option("--from", fit_from, "First day of a range");
  auto* opt_to = fit->add_option("--to", fit_to, "Last day of a range");
  opt_date->excludes(opt_from)->excludes(opt_to);
  opt_from->needs(opt_to);
  opt_to->needs(opt_from);
  add_common(fit);

  // curate
  auto* curate_cmd = app.add_subcommand("curate", "Retained narratives with keywords and summaries");
  std::vector<ClusterId> curate_ids;
  curate_cmd->add_option("--cluster", curate_ids, "Only these cluster ids");
  add_common(curate_cmd);

  // communities
  auto* comm = app.add_subcommand("communities", "Site graph and Louvain communities");
  std::string comm_out;
  comm->add_option("--out", comm_out, "Also write edge list and partition files here");
  add_common(comm);

  // influence
  auto* infl = app.add_subcommand("influence", "Origination and amplification effects");
  std::string infl_domain, infl_role = "both";
  bool infl_all = false;
  auto* opt_domain = infl->add_option("--domain", infl_domain, "One domain");
  auto* opt_all = infl->add_flag("--all", infl_all, "Every domain, Bonferroni corrected");
  opt_domain->excludes(opt_all);
  infl->add_option("--role", infl_role, "originate, amplify, or both")
      ->check(CLI::IsMember({"originate", "amplify", "both"}));
  add_common(infl);

  // trending
  auto* trend = app.add_subcommand("trending", "Week-over-week narrative growth");
  std::string trend_as_of;
  trend->add_option("--as-of", trend_as_of, "Last day of the current week (default: last committed day)");
  add_common(trend);

  // factcheck
  auto* fc = app.add_subcommand("factcheck", "Fact-check matching and efficacy");
  fc->require_subcommand(1);
  std::string fc_file, fc_thresholds;
  double fc_threshold = -2.0;
  auto* fc_load = fc->add_subcommand("load", "Validate and store a fact-check corpus");
  fc_load->add_option("file", fc_file, "Fact-check JSONL")->required();
  add_common(fc_load);
  auto* fc_match = fc->add_subcommand("match", "Match fact-checks to narratives");
  fc_match->add_option("--threshold", fc_threshold, "Passage similarity threshold");
  add_common(fc_match);
  auto* fc_classify = fc->add_subcommand("classify", "Classify matched pairs for refutation");
  add_common(fc_classify);
  auto* fc_eff = fc->add_subcommand("efficacy", "Per-organisation efficacy");
  add_common(fc_eff);
  auto* fc_sweep = fc->add_subcommand("sweep", "Matches and efficacy across thresholds");
  fc_sweep->add_option("--thresholds", fc_thresholds, "Comma-separated thresholds");
  add_common(fc_sweep);

  // match-corpus
  auto* mc = app.add_subcommand("match-corpus", "Match external passages (e.g. social posts) to narratives");
  std::string mc_file, mc_mode = "all";
  double mc_threshold = -2.0;
  mc->add_option("file", mc_file, "JSONL of {passage_id, vector}")->required();
  mc->add_option("--mode", mc_mode, "single or all")->check(CLI::IsMember({"single", "all"}));
  mc->add_option("--threshold", mc_threshold, "Similarity threshold");
  add_common(mc);

  // export
  auto* exp = app.add_subcommand("export", "Write a report with provenance");
  std::string exp_report, exp_out = ".", exp_as_of;
  exp->add_option("--report", exp_report, "Report name")->required()->check(CLI::IsMember(Pipeline::report_names()));
  exp->add_option("--out", exp_out, "Output directory");
  exp->add_option("--as-of", exp_as_of, "Reference day for trending");
  add_common(exp);

  // snapshot
  auto* snap = app.add_subcommand("snapshot", "Snapshot management");
  snap->require_subcommand(1);
  std::string snap_path, snap_date;
  bool snap_jsonl = false;
  auto* snap_save = snap->add_subcommand("save", "Copy a committed snapshot");
  snap_save->add_option("--out", snap_path, "Destination file")->required();
  snap_save->add_option("--date", snap_date, "Committed day (default: last)");
  add_common(snap_save);
  auto* snap_load = snap->add_subcommand("load", "Verify a snapshot file and describe it");
  snap_load->add_option("file", snap_path, "Snapshot file")->required();
  snap_load->add_flag("--export", snap_jsonl, "Print the snapshot as JSONL");
  add_common(snap_load);
  auto* snap_list = snap->add_subcommand("list", "Committed snapshots");
  add_common(snap_list);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    auto pipeline = open_pipeline();
    const auto& cfg = pipeline.config();
    const bool jsonl = common.jsonl();

    if (ingest_articles->parsed()) {
      auto in = open_input(ingest_file);
      std::unique_ptr<EmbeddingProvider> provider;
      if (const auto e = cfg.endpoint(cfg.embedding_url); e && !ingest_no_embed) {
        provider = std::make_unique<HttpEmbeddingProvider>(*e);
      }
      const auto r = pipeline.ingest_articles(in, provider.get());
      std::cout << "read\t" << r.read << "\nadmitted\t" << r.admitted << '\n';
      for (const auto& [reason, n] : r.rejected) std::cout << "rejected:" << reason << '\t' << n << '\n';
      std::cout << "passages\t" << r.passages << "\nembedded\t" << r.embedded << '\n';
      if (!provider) std::cerr << "no embedding endpoint; plain passages written under passages/\n";
    } else if (ingest_embeddings->parsed()) {
      auto in = open_input(ingest_file);
      print_ingest(pipeline.ingest_embeddings(in));
    } else if (fit->parsed()) {
      auto summarizer = make_summarizer(cfg);
      std::vector<LedgerEntry> entries;
      if (!fit_date.empty()) {
        entries.push_back(pipeline.run_daily(parse_date_arg(fit_date, "--date"), summarizer.get()));
      } else if (!fit_from.empty()) {
        entries = pipeline.run_range(parse_date_arg(fit_from, "--from"), parse_date_arg(fit_to, "--to"),
                                     summarizer.get());
      } else {
        throw UsageError("fit needs --date or --from/--to");
      }
      print_fit_reports(pipeline, entries);
    } else if (curate_cmd->parsed()) {
      const auto store = pipeline.load_latest();
      for (const auto id : curate_ids) {
        if (!store.has_cluster(id)) throw DataError("unknown cluster id " + std::to_string(id));
      }
      auto summarizer = make_summarizer(cfg);
      auto labels = curate(store, cfg.curation_config(), summarizer.get());
      if (!curate_ids.empty()) {
        std::erase_if(labels, [&](const NarrativeLabel& l) {
          return std::find(curate_ids.begin(), curate_ids.end(), l.cluster_id) == curate_ids.end();
        });
        if (labels.empty()) std::cerr << "none of the requested clusters passes the curation filter\n";
      }
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      if (jsonl) {
        export_labels_jsonl(labels, std::cout);
      } else {
        std::cout << "cluster_id\tarticles\tkeywords\tsummary\n";
        for (const auto& l : labels) {
          std::string kw;
          for (const auto& k : l.keywords) kw += (kw.empty() ? "" : ",") + k;
          std::string summary = l.summary.value_or("");
          std::replace(summary.begin(), summary.end(), '\t', ' ');
          std::replace(summary.begin(), summary.end(), '\n', ' ');
          std::cout << l.cluster_id << '\t' << store.cluster(l.cluster_id).article_count() << '\t' << kw << '\t'
                    << summary << '\n';
        }
      }
    } else if (comm->parsed()) {
      if (!comm_out.empty()) {
        for (const auto& p : pipeline.export_report("communities", comm_out, jsonl)) std::cerr << "wrote " << p << '\n';
      }
      const auto c = pipeline.communities(pipeline.load_latest());
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      if (jsonl) {
        for (const auto& [domain, community] : c.partition.community) {
          std::cout << nlohmann::json{{"domain", domain}, {"community", community}}.dump() << '\n';
        }
      } else {
        export_partition(c.partition, std::cout);
      }
      std::cerr << "sites " << c.graph.nodes.size() << ", edges " << c.graph.edges.size() << ", modularity "
                << std::setprecision(6) << c.partition.modularity << '\n';
    } else if (infl->parsed()) {
      if (infl_domain.empty() && !infl_all) throw UsageError("influence needs --domain or --all");
      const auto analyzer = pipeline.influence(pipeline.load_latest());
      std::vector<Role> roles;
      if (infl_role != "amplify") roles.push_back(Role::kOriginate);
      if (infl_role != "originate") roles.push_back(Role::kAmplify);
      std::vector<EffectReport> reports;
      if (infl_all) {
        for (const auto role : roles) {
          auto r = analyzer.analyze_all(role);
          reports.insert(reports.end(), r.begin(), r.end());
        }
      } else {
        const auto& domains = analyzer.domains();
        if (!std::binary_search(domains.begin(), domains.end(), infl_domain)) {
          throw DataError("unknown domain " + infl_domain);
        }
        for (const auto role : roles) {
          auto r = role == Role::kOriginate ? analyzer.origination_effect(infl_domain)
                                            : analyzer.amplification_effect(infl_domain);
          if (r.skipped) {
            std::cerr << "skipped " << infl_domain << " (" << to_string(role) << "): " << r.skip_reason << ", "
                      << r.eligible_narratives << " instances\n";
          }
          reports.push_back(std::move(r));
        }
      }
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      export_effect_reports(reports, std::cout, jsonl);
    } else if (trend->parsed()) {
      const auto store = pipeline.load_latest();
      std::optional<Date> as_of;
      if (!trend_as_of.empty()) as_of = parse_date_arg(trend_as_of, "--as-of");
      if (!as_of) as_of = pipeline.ledger().last_date();
      if (!as_of) throw DataError("nothing committed yet");
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      export_trending(trending(pipeline.timelines(store), *as_of, cfg.trending_min_volume), std::cout, jsonl);
    } else if (fc_load->parsed()) {
      auto in = open_input(fc_file);
      pipeline.load_factchecks(in);
      std::cout << "factchecks\t" << pipeline.factchecks().size() << '\n';
    } else if (fc_match->parsed()) {
      const auto store = pipeline.load_latest();
      const NarrativeMatcher matcher(store, pipeline.retained(store), cfg.threads);
      const double t = fc_threshold > -2.0 ? fc_threshold : cfg.match_threshold;
      const auto matches = match_factchecks(matcher, pipeline.factchecks(), t);
      pipeline.save_matches(matches);
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      if (jsonl) {
        write_matches_jsonl(matches, std::cout);
      } else {
        std::cout << "factcheck_id\torg\tpublished_date\tcluster_id\tpairs\n";
        for (const auto& m : matches) {
          std::cout << m.factcheck_id << '\t' << m.org << '\t' << m.published_date.to_string() << '\t' << m.cluster_id
                    << '\t' << m.pairs.size() << '\n';
        }
      }
    } else if (fc_classify->parsed()) {
      auto classifier = make_classifier(cfg);
      if (!classifier) throw UsageError("classifier_url is not configured");
      const auto store = pipeline.load_latest();
      auto matches = pipeline.matches();
      const auto stats = classify_refutations(matches, store, pipeline.factchecks(), *classifier, cfg.max_in_flight);
      pipeline.save_matches(matches);
      std::cout << "pairs_classified\t" << stats.pairs_classified << "\npairs_pending\t" << stats.pairs_pending
                << "\nmatches_refuted\t" << stats.matches_refuted << "\nmatches_pending\t" << stats.matches_pending
                << '\n';
    } else if (fc_eff->parsed()) {
      const auto store = pipeline.load_latest();
      const auto matches = pipeline.matches();
      const auto tl = pipeline.timelines(store);
      std::set<std::string> orgs;
      for (const auto& m : matches) orgs.insert(m.org);
      std::vector<EfficacyReport> reports;
      for (const auto& org : orgs) reports.push_back(factcheck_efficacy(org, matches, tl));
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      export_efficacy(reports, std::cout, jsonl);
    } else if (fc_sweep->parsed()) {
      const auto store = pipeline.load_latest();
      const NarrativeMatcher matcher(store, pipeline.retained(store), cfg.threads);
      const auto thresholds = fc_thresholds.empty() ? cfg.sweep_thresholds : parse_thresholds(fc_thresholds);
      auto classifier = make_classifier(cfg);
      const auto rows = threshold_sweep(matcher, pipeline.factchecks(), thresholds, pipeline.timelines(store),
                                        classifier.get(), cfg.max_in_flight);
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      if (!jsonl) std::cout << "threshold\torg\tnarratives_matched\tnarratives_refuted\tmed_articles_prior\n";
      for (const auto& row : rows) {
        for (const auto& [org, n] : row.narratives_matched) {
          const auto eff = row.efficacy.find(org);
          if (jsonl) {
            nlohmann::json j = {{"threshold", row.threshold}, {"org", org}, {"narratives_matched", n}};
            if (eff != row.efficacy.end()) {
              j["narratives_refuted"] = eff->second.narratives_factchecked;
              j["median_articles_prior"] = eff->second.median_articles_prior;
            }
            std::cout << j.dump() << '\n';
          } else {
            std::cout << row.threshold << '\t' << org << '\t' << n << '\t';
            if (eff != row.efficacy.end()) {
              std::cout << eff->second.narratives_factchecked << '\t' << eff->second.median_articles_prior;
            } else {
              std::cout << "-\t-";
            }
            std::cout << '\n';
          }
        }
      }
    } else if (mc->parsed()) {
      const auto store = pipeline.load_latest();
      const NarrativeMatcher matcher(store, pipeline.retained(store), cfg.threads);
      auto in = open_input(mc_file);
      const auto queries = read_queries(in, cfg.dimension);
      const double t = mc_threshold > -2.0 ? mc_threshold : cfg.match_threshold;
      const auto result = match_corpus(matcher, queries, mc_mode == "single" ? MatchMode::kSingleBest : MatchMode::kAllMatches, t);
      write_provenance(pipeline.provenance(), std::cout, jsonl);
      if (!jsonl) std::cout << "passage_id\tcluster_ids\n";
      for (const auto& [id, clusters] : result) {
        if (jsonl) {
          std::cout << nlohmann::json{{"passage_id", id}, {"cluster_ids", clusters}}.dump() << '\n';
        } else {
          std::cout << id << '\t';
          bool first = true;
          for (const auto c : clusters) {
            std::cout << (first ? "" : ",") << c;
            first = false;
          }
          std::cout << '\n';
        }
      }
    } else if (exp->parsed()) {
      std::optional<Date> as_of;
      if (!exp_as_of.empty()) as_of = parse_date_arg(exp_as_of, "--as-of");
      for (const auto& p : pipeline.export_report(exp_report, exp_out, jsonl, as_of)) std::cout << p.string() << '\n';
    } else if (snap_save->parsed()) {
      const auto ledger = pipeline.ledger();
      std::optional<Date> day = ledger.last_date();
      if (!snap_date.empty()) day = parse_date_arg(snap_date, "--date");
      if (!day) throw DataError("nothing committed yet");
      pipeline.load_snapshot(*day);  // verifies the file against the ledger
      write_file_atomic(snap_path, read_file(pipeline.snapshot_path(*day)));
      std::cout << ledger.find(*day)->snapshot_id << '\n';
    } else if (snap_load->parsed()) {
      const auto blob = read_file(snap_path);
      const auto store = snapshot_load(blob);
      if (snap_jsonl) {
        snapshot_export_jsonl(store, std::cout);
      } else {
        const auto h = snapshot_peek(blob);
        std::cout << "format_version\t" << h.format_version << "\ndimension\t" << h.dimension << "\nlambda\t"
                  << h.lambda << "\nclusters\t" << h.cluster_count << "\nmembers\t" << h.member_count
                  << "\nlast_day\t" << (store.last_day() ? store.last_day()->to_string() : "none") << '\n';
      }
    } else if (snap_list->parsed()) {
      const auto ledger = pipeline.ledger();
      if (jsonl) {
        ledger.write(std::cout);
      } else {
        std::cout << "date\tsnapshot_id\tconfig_hash\n";
        for (const auto& e : ledger.entries()) {
          std::cout << e.report.day.to_string() << '\t' << e.snapshot_id << '\t' << e.config_hash << '\n';
        }
      }
    }
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const ServiceError& e) {
    std::cerr << "service error: " << e.what() << '\n';
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
