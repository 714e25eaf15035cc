// casematch: command-line entry points for every pipeline stage.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "casematch/casematch.hpp"
#include "casematch/review_http.hpp"

namespace fs = std::filesystem;
using namespace casematch;

namespace {

void print_config(const std::string& command, const json& config) {
  std::cerr << "casematch " << command << " config: " << config.dump() << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  out << text;
  if (!out.flush()) throw data_error("write to '" + path + "' failed");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw data_error("'" + path + "': " + e.what());
  }
}

void write_truth(const std::string& path, const std::vector<GroundTruthPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  write_ground_truth(out, pairs);
}

/// Inputs shared by every command that reads a corpus.
struct CorpusArgs {
  std::string ontology;
  std::string corpus;
  std::string date_patterns;
  std::vector<std::string> exclude_atc;

  void add(CLI::App* app) {
    app->add_option("--ontology", ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
    app->add_option("--corpus", corpus, "Report corpus (JSON Lines)")->required()->check(CLI::ExistingFile);
    app->add_option("--date-patterns", date_patterns, "Narrative date pattern config")->check(CLI::ExistingFile);
    app->add_option("--exclude-atc", exclude_atc, "Drop reports with a drug whose ATC code has this prefix");
  }

  json to_json() const {
    return {{"ontology", ontology}, {"corpus", corpus}, {"date_patterns", date_patterns}, {"exclude_atc", exclude_atc}};
  }
};

/// Loaded corpus plus everything derived from it. Heap-held so that the
/// profiles' back-pointers survive moves.
struct Loaded {
  std::unique_ptr<Ontology> ontology;
  std::unique_ptr<Corpus> corpus;
  std::unique_ptr<FrequencyTables> tables;
  std::unique_ptr<DateExtractor> extractor;
  std::unique_ptr<PreparedCorpus> prepared;
};

Loaded load_base(const CorpusArgs& a) {
  Loaded l;
  l.ontology = std::make_unique<Ontology>(Ontology::load(a.ontology));
  CorpusOptions opt;
  opt.excluded_atc_prefixes = a.exclude_atc;
  l.corpus = std::make_unique<Corpus>(load_corpus(a.corpus, *l.ontology, opt));
  l.extractor = std::make_unique<DateExtractor>(a.date_patterns.empty() ? DateExtractor()
                                                                        : DateExtractor::load(a.date_patterns));
  return l;
}

Loaded load_prepared(const CorpusArgs& a, const std::string& tables_path) {
  Loaded l = load_base(a);
  l.tables = std::make_unique<FrequencyTables>(FrequencyTables::from_json(read_json(tables_path), *l.ontology));
  l.prepared = std::make_unique<PreparedCorpus>(*l.corpus, *l.ontology, *l.tables, *l.extractor);
  return l;
}

std::vector<GroundTruthPair> load_pairs(const std::vector<std::string>& paths) {
  std::vector<GroundTruthPair> out;
  for (const auto& p : paths) {
    auto part = load_ground_truth(p);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::vector<std::size_t> subset_for(const Corpus& corpus, const std::string& country) {
  if (country.empty()) {
    std::vector<std::size_t> all(corpus.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }
  auto s = country_indices(corpus, country);
  if (s.size() < 2) throw usage_error("country '" + country + "' has fewer than 2 reports");
  return s;
}

// ---------------------------------------------------------------------------

struct SynthCmd {
  std::string config;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t split_seed = 7;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("synth", "Generate a synthetic corpus with planted duplicates");
    c->add_option("--config", config, "Synthetic corpus config JSON (defaults when absent)")->check(CLI::ExistingFile);
    c->add_option("--out-dir", out_dir, "Output directory")->required();
    c->add_option("--seed", seed, "Override the config seed")->each([this](const std::string&) { seed_set = true; });
    c->add_option("--split-seed", split_seed, "Seed of the train/validation/test split");
    c->callback([this] { run(); });
  }

  void run() {
    SynthConfig cfg = config.empty() ? SynthConfig::defaults() : SynthConfig::load(config);
    if (seed_set) cfg.seed = seed;
    print_config("synth", {{"synth", cfg.to_json()}, {"split_seed", split_seed}, {"out_dir", out_dir}});
    const auto out = generate(cfg);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    write_json((dir / "ontology.json").string(), out.ontology.to_json());
    {
      std::ofstream f(dir / "corpus.jsonl");
      if (!f) throw data_error("cannot write corpus");
      write_corpus(f, out.corpus);
    }
    write_truth((dir / "truth.jsonl").string(), out.truth);
    const auto split = holdout_split(out.truth, {}, split_seed);
    write_truth((dir / "train.jsonl").string(), split.train);
    write_truth((dir / "validation.jsonl").string(), split.validation);
    write_truth((dir / "test.jsonl").string(), split.test);
    write_json((dir / "synth_config.json").string(), cfg.to_json());
    std::cout << json{{"reports", out.corpus.size()},
                      {"truth_pairs", out.truth.size()},
                      {"train", split.train.size()},
                      {"validation", split.validation.size()},
                      {"test", split.test.size()}}
                     .dump()
              << '\n';
  }
};

struct StatsCmd {
  CorpusArgs in;
  std::string out;
  std::uint64_t min_support = 1000;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("stats", "Build global and per-country frequency tables");
    in.add(c);
    c->add_option("--out", out, "Frequency table JSON")->required();
    c->add_option("--min-country-support", min_support, "Reports needed for a country table");
    c->callback([this] { run(); });
  }

  void run() {
    print_config("stats", {{"input", in.to_json()}, {"out", out}, {"min_country_support", min_support}});
    const auto l = load_base(in);
    const auto tables = build_tables(*l.corpus, *l.ontology, min_support);
    write_json(out, tables.to_json(*l.ontology));
    std::cout << json{{"reports", tables.total_reports()}, {"country_tables", tables.table_countries()}}.dump() << '\n';
  }
};

struct TrainCmd {
  CorpusArgs in;
  std::string tables;
  std::vector<std::string> pairs;
  std::string kind = "both";
  std::string out_dir;
  double neg_ratio = 0.0;
  double C = 1.0;
  std::uint64_t seed = 1;
  std::size_t cap = 1000;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("train", "Fit the drug and/or vaccine classifier, or the comparator");
    in.add(c);
    c->add_option("--tables", tables, "Frequency table JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--pairs", pairs, "Labelled pairs (JSON Lines); repeatable")->required()->check(CLI::ExistingFile);
    c->add_option("--kind", kind, "drug, vaccine, both or baseline")
        ->check(CLI::IsMember({"drug", "vaccine", "both", "baseline"}));
    c->add_option("--out-dir", out_dir, "Directory for model artifacts")->required();
    c->add_option("--neg-ratio", neg_ratio,
                  "Effective negative:positive ratio (default: 1e6 rescaled to the corpus size)");
    c->add_option("--C", C, "SVM cost");
    c->add_option("--neg-cap", cap, "Sampled negatives per positive");
    c->add_option("--seed", seed, "Seed for negative sampling, histograms and the solver");
    c->callback([this] { run(); });
  }

  void run() {
    auto l = load_prepared(in, tables);
    TrainOptions opt;
    opt.C = C;
    opt.seed = seed;
    opt.negatives_per_positive_cap = cap;
    opt.negative_ratio = neg_ratio > 0 ? neg_ratio : scaled_negative_ratio(l.corpus->size());
    print_config("train", {{"input", in.to_json()}, {"tables", tables}, {"pairs", pairs}, {"kind", kind},
                           {"options", opt.to_json()}, {"out_dir", out_dir}});
    const auto truth = load_pairs(pairs);
    fs::create_directories(out_dir);
    const fs::path dir(out_dir);
    json summary = json::object();
    if (kind == "baseline") {
      std::vector<std::pair<std::size_t, std::size_t>> dups;
      for (const auto& g : truth)
        if (g.label == Label::duplicate && g.detectable)
          dups.emplace_back(l.prepared->require(g.id_a), l.prepared->require(g.id_b));
      HitMissParams params = opt.hitmiss;
      fit_independence_histograms(params, *l.corpus, opt.seed, opt.histogram_pairs);
      const auto m = fit_baseline(*l.prepared, *l.tables, dups, params);
      m.save((dir / "baseline-model.json").string());
      summary["baseline"] = {{"threshold", m.threshold}, {"known_duplicates", dups.size()}};
    } else {
      const auto labelled = to_labelled(truth);
      for (ModelKind k : {ModelKind::drug, ModelKind::vaccine}) {
        if (kind != "both" && kind != to_string(k)) continue;
        const auto m = train(k, labelled, *l.prepared, *l.tables, opt);
        m.save((dir / (m.id() + ".json")).string());
        summary[m.id()] = {{"weights", m.weights}, {"intercept", m.intercept},
                           {"positives", m.metadata["positives"]}, {"solver", m.metadata["solver"]}};
      }
    }
    std::cout << summary.dump() << '\n';
  }
};

struct ScanCmd {
  CorpusArgs in;
  std::string tables;
  std::string drug_model, vaccine_model, baseline_model;
  std::string mode = "stream";
  std::uint64_t stop_at = 100;
  std::uint64_t max_pairs = 0;
  std::uint64_t seed = 1;
  std::uint64_t batch_size = 100'000'000;
  std::string country;
  std::string out;
  unsigned threads = 1;
  bool mask_ext = false;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("scan", "Exhaustive scan or random-pair precision run");
    in.add(c);
    c->add_option("--tables", tables, "Frequency table JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--drug-model", drug_model, "Drug model artifact")->check(CLI::ExistingFile);
    c->add_option("--vaccine-model", vaccine_model, "Vaccine model artifact")->check(CLI::ExistingFile);
    c->add_option("--baseline-model", baseline_model, "Score with the comparator instead")
        ->check(CLI::ExistingFile);
    c->add_option("--mode", mode, "exhaustive or stream")->check(CLI::IsMember({"exhaustive", "stream"}));
    c->add_option("--stop-at", stop_at, "Stream mode: stop after this many suspected pairs");
    c->add_option("--max-pairs", max_pairs, "Stream mode: give up after this many pairs (0 = no limit)");
    c->add_option("--seed", seed, "Stream seed");
    c->add_option("--batch-size", batch_size, "Stream batch size");
    c->add_option("--country", country, "Restrict the scan to one country's reports");
    c->add_option("--threads", threads, "Exhaustive mode worker threads");
    c->add_flag("--mask-ext", mask_ext, "Force the externally indicated feature to 0");
    c->add_option("--out", out, "Run record JSON")->required();
    c->callback([this] { run(); });
  }

  json config() const {
    return {{"input", in.to_json()}, {"tables", tables},   {"drug_model", drug_model},
            {"vaccine_model", vaccine_model}, {"baseline_model", baseline_model}, {"mode", mode},
            {"stop_at", stop_at}, {"max_pairs", max_pairs}, {"seed", seed}, {"batch_size", batch_size},
            {"country", country}, {"threads", threads}, {"mask_ext", mask_ext}, {"out", out}};
  }

  void run() {
    if (baseline_model.empty() == drug_model.empty())
      throw usage_error("scan: give either --drug-model (with optional --vaccine-model) or --baseline-model");
    print_config("scan", config());
    auto l = load_prepared(in, tables);
    const auto subset = subset_for(*l.corpus, country);
    const auto& prep = *l.prepared;

    std::optional<ClassifierModel> drug, vaccine;
    std::optional<BaselineScorer> baseline;
    std::unique_ptr<Engine> engine;
    if (!baseline_model.empty()) {
      baseline.emplace(*l.tables, BaselineModel::load(baseline_model));
    } else {
      drug = ClassifierModel::load(drug_model);
      if (!vaccine_model.empty()) vaccine = ClassifierModel::load(vaccine_model);
      EngineOptions eo;
      eo.mask_external = mask_ext;
      engine = std::make_unique<Engine>(prep, *l.tables, *drug, vaccine ? &*vaccine : nullptr, eo);
    }
    const std::string model_id = baseline ? "baseline" : (vaccine ? "drug-model+vaccine-model" : drug->id());

    auto baseline_flag = [&](std::size_t i, std::size_t j) -> std::optional<FlaggedPair> {
      const auto b = baseline->score(prep[i], prep[j]);
      if (!b.suspected) return std::nullopt;
      FlaggedPair f;
      f.id_a = std::min(prep[i].report->id, prep[j].report->id);
      f.id_b = std::max(prep[i].report->id, prep[j].report->id);
      f.score = b.total;
      f.model = "baseline";
      f.explanation = b.to_json();
      return f;
    };

    RunRecord rec;
    if (mode == "stream") {
      // Stream positions index into the scanned subset.
      RandomPairStream stream(subset.size(), seed, batch_size);
      const std::uint64_t limit = max_pairs ? max_pairs : std::numeric_limits<std::uint64_t>::max();
      if (baseline) {
        rec = precision_run(stream, model_id, [&](std::size_t i, std::size_t j) {
          return baseline_flag(subset[i], subset[j]);
        }, stop_at, limit);
      } else {
        auto classify = engine_classifier(*engine);
        rec = precision_run(stream, model_id, [&](std::size_t i, std::size_t j) {
          return classify(subset[i], subset[j]);
        }, stop_at, limit);
      }
    } else {
      rec.model_id = model_id;
      rec.n_reports = subset.size();
      rec.pairs_consumed = static_cast<std::uint64_t>(subset.size()) * (subset.size() - 1) / 2;
      rec.complete = true;
      ScanOptions so;
      so.threads = threads;
      so.emit = baseline ? Emit::unblocked : Emit::suspected;
      auto classify = engine ? std::optional(engine_classifier(*engine)) : std::nullopt;
      // The inverted-index scan visits exactly the blocking-passing pairs;
      // for the comparator it only supplies the candidate pairs.
      const Engine* scan_engine = engine.get();
      std::unique_ptr<Engine> candidate_engine;
      ClassifierModel never_drug, never_vaccine;
      if (!scan_engine) {
        never_vaccine.kind = ModelKind::vaccine;
        for (auto* m : {&never_drug, &never_vaccine}) {
          m->hitmiss = baseline->model().params;
          m->threshold = std::numeric_limits<double>::infinity();
        }
        candidate_engine = std::make_unique<Engine>(prep, *l.tables, never_drug, &never_vaccine);
        scan_engine = candidate_engine.get();
      }
      // Ordinals of an exhaustive run rank the suspected pairs in scan order.
      const auto counters = scan_engine->scan_candidates(
          subset,
          [&](const PairVerdict& v) {
            const std::size_t i = prep.require(v.id_a), j = prep.require(v.id_b);
            auto f = baseline ? baseline_flag(i, j) : (*classify)(i, j);
            if (!f) return;
            f->ordinal = rec.suspected.size();
            rec.suspected.push_back(std::move(*f));
          },
          baseline ? ScanOptions{Emit::unblocked, 1, so.rows_per_chunk} : so);
      std::cerr << "stage counters: " << counters.to_json().dump() << '\n';
    }
    write_json(out, rec.to_json());
    std::cout << json{{"model_id", rec.model_id}, {"pairs", rec.pairs_consumed},
                      {"suspected", rec.suspected.size()}, {"complete", rec.complete}}
                     .dump()
              << '\n';
  }
};

struct ClusterCmd {
  std::string run_path;
  std::string out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("cluster", "Group suspected pairs into duplicate groups");
    c->add_option("--run", run_path, "Run record JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--out", out, "Group output JSON")->required();
    c->callback([this] { run(); });
  }

  void run() {
    print_config("cluster", {{"run", run_path}, {"out", out}});
    const auto rec = RunRecord::load(run_path);
    std::vector<PairKey> pairs;
    for (const auto& f : rec.suspected) pairs.emplace_back(f.id_a, f.id_b);
    const auto res = cluster_groups(pairs, rec.n_reports);
    write_json(out, res.to_json());
    std::cout << json{{"groups", res.groups.size()}, {"remaining", res.remaining}}.dump() << '\n';
  }
};

struct EvalCmd {
  std::vector<std::string> runs;
  std::vector<std::string> truth;
  std::string table_inputs;
  std::string baseline_run, model_run, country;
  // recall mode
  CorpusArgs in;
  std::string tables, drug_model, vaccine_model;
  std::vector<std::string> recall_pairs;
  std::string out;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("eval", "Precision tables, per-country comparison and recall");
    c->add_option("--run", runs, "Precision run record; one precision row each")->check(CLI::ExistingFile);
    c->add_option("--truth", truth, "Ground-truth pairs (JSON Lines); repeatable")->check(CLI::ExistingFile);
    c->add_option("--table-inputs", table_inputs, "JSON array of raw precision-run counts")->check(CLI::ExistingFile);
    c->add_option("--baseline-run", baseline_run, "Exhaustive comparator run for one country")
        ->check(CLI::ExistingFile);
    c->add_option("--model-run", model_run, "Exhaustive model run for the same country")->check(CLI::ExistingFile);
    c->add_option("--country", country, "Country label for the comparison column");
    c->add_option("--ontology", in.ontology, "Ontology JSON (recall mode)")->check(CLI::ExistingFile);
    c->add_option("--corpus", in.corpus, "Report corpus (recall mode)")->check(CLI::ExistingFile);
    c->add_option("--date-patterns", in.date_patterns, "Narrative date pattern config")->check(CLI::ExistingFile);
    c->add_option("--tables", tables, "Frequency table JSON (recall mode)")->check(CLI::ExistingFile);
    c->add_option("--drug-model", drug_model, "Drug model (recall mode)")->check(CLI::ExistingFile);
    c->add_option("--vaccine-model", vaccine_model, "Vaccine model (recall mode)")->check(CLI::ExistingFile);
    c->add_option("--recall-pairs", recall_pairs, "Labelled pairs to measure recall on")->check(CLI::ExistingFile);
    c->add_option("--out", out, "Write the JSON report here as well");
    c->callback([this] { run(); });
  }

  void run() {
    print_config("eval", {{"runs", runs}, {"truth", truth}, {"table_inputs", table_inputs},
                          {"baseline_run", baseline_run}, {"model_run", model_run}, {"country", country},
                          {"recall_pairs", recall_pairs}, {"drug_model", drug_model},
                          {"vaccine_model", vaccine_model}});
    json report = json::object();
    std::string text;

    std::vector<PrecisionRow> rows;
    if (!table_inputs.empty()) {
      const auto j = read_json(table_inputs);
      if (!j.is_array()) throw data_error("table inputs must be a JSON array of rows");
      for (const auto& r : j) rows.push_back(PrecisionRow::from_json(r));
    }
    if (!runs.empty()) {
      if (truth.empty()) throw usage_error("eval --run needs --truth");
      const auto t = truth_index(load_pairs(truth));
      for (const auto& p : runs) rows.push_back(precision_row(RunRecord::load(p), t));
    }
    if (!rows.empty()) {
      json r = json::array();
      for (const auto& row : rows) r.push_back(row.to_json());
      report["precision_runs"] = r;
      text += render_precision_table(rows) + "\n";
    }

    if (!baseline_run.empty() || !model_run.empty()) {
      if (baseline_run.empty() || model_run.empty() || truth.empty())
        throw usage_error("per-country comparison needs --baseline-run, --model-run and --truth");
      const auto t = truth_index(load_pairs(truth));
      const auto b = RunRecord::load(baseline_run), m = RunRecord::load(model_run);
      if (b.n_reports != m.n_reports) throw data_error("comparison runs cover different report sets");
      auto flagged = [](const RunRecord& r) {
        std::vector<PairKey> out;
        for (const auto& f : r.suspected) out.push_back(pair_key(f.id_a, f.id_b));
        return out;
      };
      CountryComparison col;
      col.country = country.empty() ? "all" : country;
      col.n_reports = b.n_reports;
      col.baseline = method_outcome(flagged(b), b.n_reports, t);
      col.model = method_outcome(flagged(m), m.n_reports, t);
      report["country_comparisons"] = json::array({col.to_json()});
      const std::vector<CountryComparison> cols{col};
      text += render_country_comparison(cols) + "\n";
    }

    if (!recall_pairs.empty()) {
      if (in.ontology.empty() || in.corpus.empty() || tables.empty() || drug_model.empty())
        throw usage_error("recall needs --ontology, --corpus, --tables and --drug-model");
      auto l = load_prepared(in, tables);
      const auto drug = ClassifierModel::load(drug_model);
      std::optional<ClassifierModel> vaccine;
      if (!vaccine_model.empty()) vaccine = ClassifierModel::load(vaccine_model);
      const auto pairs = load_pairs(recall_pairs);
      json r = json::object();
      for (bool mask : {false, true}) {
        EngineOptions eo;
        eo.mask_external = mask;
        const Engine engine(*l.prepared, *l.tables, drug, vaccine ? &*vaccine : nullptr, eo);
        r[mask ? "masked_ext" : "full"] = evaluate_recall(engine, pairs).to_json();
      }
      report["recall"] = r;
      text += "recall: " + r.dump() + "\n";
    }

    if (report.empty()) throw usage_error("eval: nothing to evaluate (give --run, --table-inputs, --baseline-run/--model-run or --recall-pairs)");
    if (!out.empty()) write_json(out, report);
    std::cout << text << report.dump() << '\n';
  }
};

struct ServeCmd {
  std::string run_path;
  CorpusArgs in;
  std::string log_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string authoritative;
  std::string static_dir;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("serve", "HTTP review service for a run record");
    c->add_option("--run", run_path, "Run record JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--ontology", in.ontology, "Ontology JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--corpus", in.corpus, "Report corpus")->required()->check(CLI::ExistingFile);
    c->add_option("--log", log_path, "Annotation log (JSON Lines, appended)")->required();
    c->add_option("--host", host, "Bind address");
    c->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
    c->add_option("--authoritative", authoritative, "Annotator whose label wins disagreements");
    c->add_option("--static", static_dir, "Directory served at / (annotation console)")->check(CLI::ExistingDirectory);
    c->callback([this] { run(); });
  }

  void run() {
    print_config("serve", {{"run", run_path}, {"input", in.to_json()}, {"log", log_path}, {"host", host},
                           {"port", port}, {"authoritative", authoritative}, {"static", static_dir}});
    const auto l = load_base(in);
    ReviewSession session(RunRecord::load(run_path), *l.corpus, AnnotationLog(log_path), authoritative);
    httplib::Server server;
    register_review_routes(server, session);
    if (!static_dir.empty()) server.set_mount_point("/", static_dir);
    std::cerr << "listening on http://" << host << ":" << port << '\n';
    if (!server.listen(host, port)) throw usage_error("cannot listen on " + host + ":" + std::to_string(port));
  }
};

struct RetrainCmd {
  CorpusArgs in;
  std::string tables;
  std::vector<std::string> pairs;
  std::vector<std::string> annotations;
  std::string authoritative;
  std::string kind = "both";
  std::string out_dir;
  double neg_ratio = 0.0;
  double C = 1.0;
  std::uint64_t seed = 1;

  void add(CLI::App& root) {
    auto* c = root.add_subcommand("retrain", "Merge annotation logs into the training set and refit");
    in.add(c);
    c->add_option("--tables", tables, "Frequency table JSON")->required()->check(CLI::ExistingFile);
    c->add_option("--pairs", pairs, "Existing labelled pairs")->required()->check(CLI::ExistingFile);
    c->add_option("--annotations", annotations, "Annotation log(s)")->required()->check(CLI::ExistingFile);
    c->add_option("--authoritative", authoritative, "Annotator whose label wins disagreements");
    c->add_option("--kind", kind, "drug, vaccine or both")->check(CLI::IsMember({"drug", "vaccine", "both"}));
    c->add_option("--out-dir", out_dir, "Directory for model artifacts")->required();
    c->add_option("--neg-ratio", neg_ratio, "Effective negative:positive ratio (default: scaled)");
    c->add_option("--C", C, "SVM cost");
    c->add_option("--seed", seed, "Seed");
    c->callback([this] { run(); });
  }

  void run() {
    auto l = load_prepared(in, tables);
    TrainOptions opt;
    opt.C = C;
    opt.seed = seed;
    opt.negative_ratio = neg_ratio > 0 ? neg_ratio : scaled_negative_ratio(l.corpus->size());
    print_config("retrain", {{"input", in.to_json()}, {"pairs", pairs}, {"annotations", annotations},
                             {"authoritative", authoritative}, {"kind", kind}, {"options", opt.to_json()}});

    auto labelled = to_labelled(load_pairs(pairs));
    std::set<PairKey> seen;
    for (const auto& p : labelled) seen.insert(pair_key(p.id_a, p.id_b));
    std::vector<Annotation> log;
    for (const auto& path : annotations) {
      const auto part = AnnotationLog(path).effective();
      log.insert(log.end(), part.begin(), part.end());
    }
    // A pair already in the training set keeps its existing label.
    std::size_t added_pos = 0, added_neg = 0, skipped = 0;
    for (auto& p : annotations_to_training(log, authoritative)) {
      if (!seen.insert(pair_key(p.id_a, p.id_b)).second) {
        ++skipped;
        continue;
      }
      (p.label == Label::duplicate ? added_pos : added_neg) += 1;
      labelled.push_back(std::move(p));
    }

    fs::create_directories(out_dir);
    json summary = json::object();
    for (ModelKind k : {ModelKind::drug, ModelKind::vaccine}) {
      if (kind != "both" && kind != to_string(k)) continue;
      auto m = train(k, labelled, *l.prepared, *l.tables, opt);
      m.metadata["annotations"] = {{"logs", annotations},
                                   {"added_positive_pairs", added_pos},
                                   {"added_negative_pairs", added_neg},
                                   {"skipped_already_labelled", skipped},
                                   {"authoritative_annotator", authoritative}};
      m.save((fs::path(out_dir) / (m.id() + ".json")).string());
      summary[m.id()] = m.metadata["annotations"];
    }
    std::cout << summary.dump() << '\n';
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"casematch: duplicate detection for case safety reports"};
  app.require_subcommand(1);
  SynthCmd synth;
  StatsCmd stats;
  TrainCmd train_cmd;
  ScanCmd scan;
  ClusterCmd cluster;
  EvalCmd eval;
  ServeCmd serve;
  RetrainCmd retrain;
  synth.add(app);
  stats.add(app);
  train_cmd.add(app);
  scan.add(app);
  cluster.add(app);
  eval.add(app);
  serve.add(app);
  retrain.add(app);
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::usage ? 1 : 2;
  } catch (const json::exception& e) {
    std::cerr << "error: malformed input: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
