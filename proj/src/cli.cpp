#include "mapfilter/cli.hpp"

#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mapfilter/calib_filter.hpp"
#include "mapfilter/errors.hpp"
#include "mapfilter/evalkit.hpp"
#include "mapfilter/matcher.hpp"
#include "mapfilter/pooling.hpp"
#include "mapfilter/synth.hpp"
#include "mapfilter/tensor_store.hpp"
#include "mapfilter/text_io.hpp"

namespace mapfilter::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed document " + path.string() + ": " + e.what());
  }
}

std::vector<PooledMatrix> pool_manifest(const DatasetManifest& m) {
  return pyramid_pool_batch(load_tensors(m));
}

std::size_t common_channels(const std::vector<PooledMatrix>& pooled, const std::string& what) {
  if (pooled.empty()) throw DataError(what + " manifest has no entries");
  const std::size_t C = pooled.front().channels;
  for (const auto& p : pooled) {
    if (p.channels != C) throw DataError(what + " tensors have inconsistent channel counts");
  }
  return C;
}

// ---------------------------------------------------------------- calibrate

struct CalibrateOptions {
  std::string reference;
  std::string calibration;
  std::string correspondences;
  std::string query;
  std::string out;
  CalibConfig cfg;
};

void cmd_calibrate(const CalibrateOptions& o) {
  const auto ref_m = load_manifest(o.reference);
  const auto cal_m = load_manifest(o.calibration);
  const auto corr = read_correspondences(o.correspondences);
  if (!o.query.empty()) {
    const auto query_m = load_manifest(o.query);
    std::set<std::string> ids;
    for (const auto& e : query_m.entries) ids.insert(e.id);
    for (const auto& e : cal_m.entries) {
      if (ids.count(e.id)) {
        std::cerr << "warning: calibration image " << e.id
                  << " also appears in the query traverse\n";
        break;
      }
    }
  }

  const auto ref_pooled = pool_manifest(ref_m);
  const auto cal_pooled = pool_manifest(cal_m);
  const std::size_t C = common_channels(ref_pooled, "reference");
  if (common_channels(cal_pooled, "calibration") != C) {
    throw DataError("calibration and reference tensors differ in channel count");
  }

  const auto triplets = build_triplets(cal_pooled, ref_pooled, corr, o.cfg);
  const auto traces = greedy_filter_batch(triplets, o.cfg);

  std::vector<std::vector<std::size_t>> removed;
  FilterDocument doc;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    removed.push_back(traces[i].removed);
    doc.negative_indices.push_back(triplets[i].negative_index);
    doc.separated.push_back(traces[i].separated);
    doc.final_objective.push_back(traces[i].objective.back());
  }
  doc.layer_name = ref_m.layer_name;
  doc.channels = C;
  doc.per_map_dim = kPyramidSlots;
  doc.result = aggregate(removed, C);
  doc.config = o.cfg;
  write_filter_document(doc, o.out);
  std::cout << "kept " << doc.result.kept_count << " of " << C << " feature maps -> " << o.out
            << '\n';
}

// -------------------------------------------------------------------- match

struct MatchOptions {
  std::string query;
  std::string reference;
  std::string filter;
  bool no_filter = false;
  std::string out;
  std::string timing;
  MatcherConfig cfg;
};

void cmd_match(const MatchOptions& o) {
  const auto ref_m = load_manifest(o.reference);
  const auto query_m = load_manifest(o.query);
  const auto ref_pooled = pool_manifest(ref_m);
  const auto query_pooled = pool_manifest(query_m);
  const std::size_t C = common_channels(ref_pooled, "reference");
  if (common_channels(query_pooled, "query") != C) {
    throw DataError("query and reference tensors differ in channel count");
  }

  ChannelSet kept = ChannelSet::all(C);
  if (!o.no_filter) {
    const auto doc = read_filter_document(o.filter);
    if (doc.channels != C) {
      throw DataError("filter file was calibrated for C=" + std::to_string(doc.channels) +
                      " but tensors have C=" + std::to_string(C));
    }
    kept = doc.result.kept_set;
  }

  std::vector<std::string> ids;
  for (const auto& e : query_m.entries) ids.push_back(e.id);
  const ReferenceDatabase db(ref_pooled, kept);
  const auto matches = match_queries(db, query_pooled, ids, o.cfg);

  const ConfigEcho echo{
      {"query", o.query},
      {"reference", o.reference},
      {"filter", o.no_filter ? std::string("none") : o.filter},
      {"window", std::to_string(o.cfg.exclusion_window)},
      {"kept", std::to_string(kept.size())},
      {"C", std::to_string(C)},
  };
  write_match_table(matches.outcomes, echo, o.out);

  const fs::path timing_path = o.timing.empty() ? fs::path(o.out + ".timing.json") : fs::path(o.timing);
  const auto ms = to_milliseconds(matches.per_query_time);
  json t;
  t["kept"] = kept.size();
  t["C"] = C;
  t["per_query_ms"] = ms;
  t["mean_ms"] = timing_report(kept.size(), C, ms, ms).mean_filtered_ms;
  write_json(t, timing_path);
  std::cout << "matched " << matches.outcomes.size() << " queries using " << kept.size() << " of "
            << C << " feature maps -> " << o.out << '\n';
}

// --------------------------------------------------------------------- eval

struct EvalOptions {
  std::string matches;
  std::string baseline;
  std::string query;
  std::string reference;
  std::string truth;
  std::string gt_mode;
  double tolerance = 10.0;
  std::size_t grid = 100;
  std::string out;
  std::string summary;
  std::string baseline_out;
  std::string timing;
  std::string baseline_timing;
  std::string timing_out;
};

json curve_summary(const PRCurve& curve, std::size_t queries) {
  json s;
  s["max_f1"] = curve.max_f1;
  s["num_queries"] = queries;
  for (const auto& p : curve.points) {
    if (p.f1 == curve.max_f1) {
      s["best_threshold"] = p.threshold;
      s["precision_at_max_f1"] = p.precision;
      s["recall_at_max_f1"] = p.recall;
      break;
    }
  }
  return s;
}

void cmd_eval(const EvalOptions& o) {
  const auto query_m = load_manifest(o.query);
  const auto ref_m = load_manifest(o.reference);

  EvalConfig cfg;
  cfg.gt_mode = o.gt_mode.empty() ? query_m.gt_mode : parse_gt_mode(o.gt_mode);
  cfg.tolerance = o.tolerance;

  std::vector<GroundTruth> truths(query_m.entries.size());
  std::vector<std::optional<Position>> ref_positions;
  if (cfg.gt_mode == GtMode::kFrame) {
    std::vector<std::size_t> truth_index;
    if (!o.truth.empty()) {
      truth_index = read_correspondences(o.truth);
    } else {
      for (std::size_t i = 0; i < truths.size(); ++i) truth_index.push_back(i);
    }
    if (truth_index.size() < truths.size()) throw DataError("truth file shorter than query manifest");
    for (std::size_t i = 0; i < truths.size(); ++i) truths[i].true_index = truth_index[i];
  } else {
    for (std::size_t i = 0; i < truths.size(); ++i) {
      truths[i].query_position = query_m.entries[i].position;
      if (!truths[i].query_position) {
        throw DataError("metric evaluation: query " + query_m.entries[i].id + " has no position");
      }
    }
    for (const auto& e : ref_m.entries) ref_positions.push_back(e.position);
  }

  auto evaluate = [&](const std::string& table) {
    const auto outcomes = read_match_table(table);
    if (outcomes.empty()) throw DataError("match table is empty: " + table);
    std::vector<GroundTruth> ordered;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < query_m.entries.size(); ++i) index[query_m.entries[i].id] = i;
    for (const auto& m : outcomes) {
      const auto it = index.find(m.query_id);
      if (it == index.end()) throw DataError("match table query " + m.query_id + " not in manifest");
      if (m.best_index >= ref_m.entries.size()) {
        throw DataError("match table references index " + std::to_string(m.best_index) +
                        " beyond the reference manifest");
      }
      ordered.push_back(truths[it->second]);
    }
    EvalConfig c = cfg;
    c.thresholds = default_thresholds(outcomes, o.grid);
    return std::make_pair(pr_sweep(outcomes, ordered, c, ref_positions), outcomes.size());
  };

  const ConfigEcho echo{
      {"matches", o.matches},
      {"gt_mode", to_string(cfg.gt_mode)},
      {"tolerance", format_double(cfg.tolerance)},
      {"grid", std::to_string(o.grid)},
  };
  const auto [curve, n] = evaluate(o.matches);
  write_pr_curve(curve, echo, o.out);

  json summary;
  summary["config"] = {{"matches", o.matches},         {"gt_mode", to_string(cfg.gt_mode)},
                       {"tolerance", cfg.tolerance}, {"grid", o.grid},
                       {"truth", o.truth},           {"baseline", o.baseline}};
  summary["result"] = curve_summary(curve, n);
  std::cout << "max F1 " << format_double(curve.max_f1) << " (" << o.matches << ")\n";

  if (!o.baseline.empty()) {
    const auto [base_curve, bn] = evaluate(o.baseline);
    if (!o.baseline_out.empty()) {
      ConfigEcho becho = echo;
      becho[0].second = o.baseline;
      write_pr_curve(base_curve, becho, o.baseline_out);
    }
    summary["baseline"] = curve_summary(base_curve, bn);
    const double ratio = base_curve.max_f1 > 0.0 ? curve.max_f1 / base_curve.max_f1 : 0.0;
    summary["max_f1_ratio"] = ratio;
    summary["max_f1_gain"] = curve.max_f1 - base_curve.max_f1;
    std::cout << "max F1 " << format_double(base_curve.max_f1) << " (" << o.baseline << ")\n"
              << "ratio " << format_double(ratio) << '\n';
  }
  write_json(summary, o.summary.empty() ? fs::path(o.out + ".summary.json") : fs::path(o.summary));

  if (!o.timing.empty() && !o.baseline_timing.empty()) {
    const auto ft = read_json(o.timing);
    const auto bt = read_json(o.baseline_timing);
    const auto fms = ft.at("per_query_ms").get<std::vector<double>>();
    const auto bms = bt.at("per_query_ms").get<std::vector<double>>();
    const auto r = timing_report(ft.at("kept").get<std::size_t>(), ft.at("C").get<std::size_t>(),
                                 fms, bms);
    json j{{"mean_filtered_ms", r.mean_filtered_ms},
           {"mean_unfiltered_ms", r.mean_unfiltered_ms},
           {"time_ratio", r.time_ratio},
           {"kept", r.kept},
           {"C", r.channels},
           {"dimensional_reduction", r.dimensional_reduction}};
    write_json(j, o.timing_out.empty() ? fs::path(o.out + ".timing_report.json") : fs::path(o.timing_out));
    std::cout << "time ratio " << format_double(r.time_ratio) << ", dimensional reduction "
              << format_double(r.dimensional_reduction) << '\n';
  }
}

// -------------------------------------------------------------------- synth

struct SynthOptions {
  std::string out;
  std::size_t num_signal = 16;
  synth::SynthParams params;
};

void cmd_synth(SynthOptions o) {
  synth::assign_channels(o.params, o.num_signal);
  const auto ds = synth::generate(o.params);
  synth::write_dataset(ds, o.out);
  const auto& p = o.params;
  json echo{{"num_places", p.num_places},
            {"num_calibration", p.num_calibration},
            {"num_queries", p.num_queries},
            {"channels", p.channels},
            {"width", p.width},
            {"height", p.height},
            {"signal_channels", p.signal_channels},
            {"condition_noise_scale", p.condition_noise_scale},
            {"appearance_shift", p.appearance_shift},
            {"condition_pattern_weight", p.condition_pattern_weight},
            {"signal_jitter", p.signal_jitter},
            {"place_spacing_m", p.place_spacing_m},
            {"seed", p.seed}};
  write_json(echo, fs::path(o.out) / "synth_config.json");
  std::cout << "wrote synthetic dataset to " << o.out << '\n';
}

// --------------------------------------------------------------------- pool

struct PoolOptions {
  std::string tensor;
  std::vector<std::size_t> kept;
  std::string out;
};

void cmd_pool(const PoolOptions& o) {
  const auto pooled = pyramid_pool(read_tensor(o.tensor));
  const ChannelSet kept = o.kept.empty() ? ChannelSet::all(pooled.channels) : ChannelSet(o.kept);
  const std::string text = format_vector(flatten(pooled, kept));
  if (o.out.empty()) {
    std::cout << text << '\n';
  } else {
    std::ofstream out(o.out, std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + o.out);
    out << text << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Feature-map filtering calibration and place recognition evaluation"};
  app.set_config("--config", "", "Optional config file; command-line flags take precedence");
  app.require_subcommand(1);

  CalibrateOptions cal;
  auto* calibrate = app.add_subcommand("calibrate", "Select feature maps from calibration triplets");
  calibrate->add_option("--reference", cal.reference, "Reference traverse manifest")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--calibration", cal.calibration, "Calibration image manifest")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--correspondences", cal.correspondences, "True reference ordinal per calibration image")->required()->check(CLI::ExistingFile);
  calibrate->add_option("--query", cal.query, "Query traverse manifest (overlap check only)")->check(CLI::ExistingFile);
  calibrate->add_option("--threshold", cal.cfg.gradient_cutoff, "Gradient cut-off")->capture_default_str()->check(CLI::NonNegativeNumber);
  calibrate->add_option("--num-calib", cal.cfg.num_calibration_images, "Calibration images to use")->capture_default_str()->check(CLI::PositiveNumber);
  calibrate->add_option("--seed", cal.cfg.rng_seed, "Negative sampling seed")->capture_default_str();
  calibrate->add_option("--exclusion-radius", cal.cfg.negative_exclusion_radius, "Frames around the true match never used as negatives")->capture_default_str();
  calibrate->add_option("--out", cal.out, "Filter result document")->required();

  MatchOptions mat;
  auto* match = app.add_subcommand("match", "Single-frame matching against a reference traverse");
  match->add_option("--query", mat.query, "Query traverse manifest")->required()->check(CLI::ExistingFile);
  match->add_option("--reference", mat.reference, "Reference traverse manifest")->required()->check(CLI::ExistingFile);
  auto* filter_opt = match->add_option("--filter", mat.filter, "Filter result document")->check(CLI::ExistingFile);
  auto* no_filter = match->add_flag("--no-filter", mat.no_filter, "Use every feature map");
  filter_opt->excludes(no_filter);
  match->add_option("--window", mat.cfg.exclusion_window, "Half-width of the window excluded around the best match")->capture_default_str();
  match->add_option("--out", mat.out, "Match table")->required();
  match->add_option("--timing", mat.timing, "Timing report (default <out>.timing.json)");

  EvalOptions ev;
  auto* eval = app.add_subcommand("eval", "Precision/recall sweep over quality thresholds");
  eval->add_option("--matches", ev.matches, "Match table")->required()->check(CLI::ExistingFile);
  eval->add_option("--baseline", ev.baseline, "Second match table to compare against")->check(CLI::ExistingFile);
  eval->add_option("--query", ev.query, "Query traverse manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--reference", ev.reference, "Reference traverse manifest")->required()->check(CLI::ExistingFile);
  eval->add_option("--truth", ev.truth, "True reference ordinal per query (frame mode)")->check(CLI::ExistingFile);
  eval->add_option("--gt-mode", ev.gt_mode, "frame|metric (default: query manifest's)")->check(CLI::IsMember({"frame", "metric"}));
  eval->add_option("--tolerance", ev.tolerance, "Ground-truth tolerance, frames or meters")->capture_default_str()->check(CLI::NonNegativeNumber);
  eval->add_option("--grid", ev.grid, "Number of swept thresholds")->capture_default_str()->check(CLI::PositiveNumber);
  eval->add_option("--out", ev.out, "PR curve table")->required();
  eval->add_option("--summary", ev.summary, "Summary document (default <out>.summary.json)");
  eval->add_option("--baseline-out", ev.baseline_out, "PR curve table for the baseline");
  eval->add_option("--timing", ev.timing, "Timing file of the filtered run")->check(CLI::ExistingFile);
  eval->add_option("--baseline-timing", ev.baseline_timing, "Timing file of the unfiltered run")->check(CLI::ExistingFile);
  eval->add_option("--timing-out", ev.timing_out, "Timing comparison (default <out>.timing_report.json)");

  SynthOptions syn;
  syn.params = synth::SynthParams{};
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic two-condition dataset");
  synth_cmd->add_option("--out", syn.out, "Output directory")->required();
  synth_cmd->add_option("--seed", syn.params.seed)->capture_default_str();
  synth_cmd->add_option("--places", syn.params.num_places)->capture_default_str();
  synth_cmd->add_option("--num-calib", syn.params.num_calibration)->capture_default_str();
  synth_cmd->add_option("--queries", syn.params.num_queries)->capture_default_str();
  synth_cmd->add_option("--channels", syn.params.channels)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--signal", syn.num_signal, "Number of planted signal channels")->capture_default_str();
  synth_cmd->add_option("--width", syn.params.width)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--height", syn.params.height)->capture_default_str()->check(CLI::PositiveNumber);
  synth_cmd->add_option("--noise-scale", syn.params.condition_noise_scale)->capture_default_str()->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--shift", syn.params.appearance_shift)->capture_default_str();
  synth_cmd->add_option("--pattern-weight", syn.params.condition_pattern_weight)->capture_default_str();
  synth_cmd->add_option("--jitter", syn.params.signal_jitter)->capture_default_str();
  synth_cmd->add_option("--spacing", syn.params.place_spacing_m, "Meters between places")->capture_default_str();

  PoolOptions pl;
  auto* pool = app.add_subcommand("pool", "Print the pyramid-pooled vector of one tensor");
  pool->add_option("--tensor", pl.tensor, "FMAP file")->required()->check(CLI::ExistingFile);
  pool->add_option("--kept", pl.kept, "Comma-separated channel indices (default: all)")->delimiter(',');
  pool->add_option("--out", pl.out, "Write to a file instead of stdout");

  std::vector<std::string> argv = args;
  std::reverse(argv.begin(), argv.end());
  try {
    app.parse(argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (calibrate->parsed()) {
      cmd_calibrate(cal);
    } else if (match->parsed()) {
      if (!mat.no_filter && mat.filter.empty()) {
        std::cerr << "match: one of --filter or --no-filter is required\n";
        return kExitUsage;
      }
      cmd_match(mat);
    } else if (eval->parsed()) {
      cmd_eval(ev);
    } else if (synth_cmd->parsed()) {
      cmd_synth(syn);
    } else if (pool->parsed()) {
      cmd_pool(pl);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitDataError;
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace mapfilter::cli
