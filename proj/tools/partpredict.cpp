#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "partpredict/config.hpp"
#include "partpredict/dataset.hpp"
#include "partpredict/evalbench.hpp"
#include "partpredict/hfcn.hpp"
#include "partpredict/svg.hpp"

namespace pp = partpredict;

namespace {

// User mistakes (bad config, bad files, bad ranges) exit 1; broken internal
// invariants exit 2.
int classify_error(const pp::Error& e) {
  const std::string& kind = e.kind();
  if (kind == "ShapeMismatchError" || kind == "InconsistentTreeError" ||
      kind == "NonPositiveBaselineError") {
    return 2;
  }
  return 1;
}

struct CommonFlags {
  std::string config_path;
  std::string output_dir;
  std::string seed;
  std::string threads;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("-c,--config", flags.config_path, "configuration file (key = value lines)");
  cmd->add_option("--output-dir", flags.output_dir, "directory for all outputs");
  cmd->add_option("--seed", flags.seed, "master RNG seed");
  cmd->add_option("--threads", flags.threads, "worker threads (PARTPREDICT_THREADS overrides)");
}

pp::Config build_config(const CommonFlags& flags) {
  pp::Config cfg;
  if (!flags.config_path.empty()) cfg = pp::Config::from_file(flags.config_path);
  if (!flags.output_dir.empty()) cfg.set("output_dir", flags.output_dir);
  if (!flags.seed.empty()) cfg.set("seed", flags.seed);
  if (!flags.threads.empty()) cfg.set("threads", flags.threads);
  if (const char* env = std::getenv("PARTPREDICT_THREADS")) cfg.set("threads", env);
  std::filesystem::create_directories(cfg.get_string("output_dir"));
  return cfg;
}

pp::ArchSpec arch_from_config(const pp::Config& cfg) {
  pp::ArchSpec arch;
  const auto trunk = cfg.get_int_list("arch_trunk");
  const auto first = cfg.get_int_list("arch_branch_first");
  const auto mid = cfg.get_int_list("arch_branch_mid");
  if (trunk.size() != 8) throw pp::ConfigError("arch_trunk needs exactly 8 widths");
  if (first.size() != 4) throw pp::ConfigError("arch_branch_first needs exactly 4 widths");
  if (mid.size() != 4) throw pp::ConfigError("arch_branch_mid needs exactly 4 widths");
  std::copy(trunk.begin(), trunk.end(), arch.trunk_widths.begin());
  std::copy(first.begin(), first.end(), arch.branch_first_widths.begin());
  std::copy(mid.begin(), mid.end(), arch.branch_mid_widths.begin());
  arch.qp_norm_divisor = cfg.get_double("qp_norm_divisor");
  pp::validate_arch(arch);
  return arch;
}

std::vector<pp::Frame> gather_sources(const pp::Config& cfg) {
  std::vector<pp::Frame> frames;
  for (const std::string& path : cfg.get_string_list("source_pgms")) {
    frames.push_back(pp::read_pgm(path));
  }
  const int procedural = cfg.get_int("procedural_frames");
  if (procedural > 0) {
    const pp::ContentKind kind = pp::content_kind_from_name(cfg.get_string("procedural_kind"));
    const std::uint64_t seed = cfg.get_u64("seed");
    const int w = cfg.get_int("frame_width");
    const int h = cfg.get_int("frame_height");
    for (int i = 0; i < procedural; ++i) {
      frames.push_back(pp::make_frame(kind, w, h, seed + 1000003ull * static_cast<std::uint64_t>(i)));
    }
  }
  if (frames.empty()) {
    throw pp::ConfigError("no sources: set source_pgms and/or procedural_frames");
  }
  return frames;
}

pp::QSampler sampler_from_config(const pp::Config& cfg) {
  const auto values = cfg.get_int_list("q_values");
  if (!values.empty()) return pp::QSampler::fixed_set(values);
  return pp::QSampler::uniform_range(cfg.get_int("q_min"), cfg.get_int("q_max"));
}

int cmd_dataset(const pp::Config& cfg) {
  const auto frames = gather_sources(cfg);
  pp::GenerateOptions options;
  options.sampler = sampler_from_config(cfg);
  options.q_per_superblock = cfg.get_int("q_per_superblock");
  options.seed = cfg.get_u64("seed");
  options.threads = cfg.get_int("threads");

  const std::string dataset_path = cfg.get_path("dataset");
  pp::generate_dataset(frames, options, dataset_path);
  const std::string train_path = cfg.get_path("dataset_train");
  const std::string val_path = cfg.get_path("dataset_val");
  pp::split_dataset(dataset_path, cfg.get_double("split_fraction"), options.seed, train_path,
                    val_path);
  std::printf("dataset: %llu records (%s)\n",
              static_cast<unsigned long long>(pp::dataset_sample_count(dataset_path)),
              dataset_path.c_str());
  std::printf("train: %llu records (%s)\n",
              static_cast<unsigned long long>(pp::dataset_sample_count(train_path)),
              train_path.c_str());
  std::printf("val: %llu records (%s)\n",
              static_cast<unsigned long long>(pp::dataset_sample_count(val_path)),
              val_path.c_str());
  return 0;
}

int cmd_train(const pp::Config& cfg) {
  const auto train_set = pp::load_all(cfg.get_path("dataset_train"));
  const auto val_set = pp::load_all(cfg.get_path("dataset_val"));

  pp::HfcnNet net(arch_from_config(cfg));
  net.init(cfg.get_u64("seed"));
  std::printf("model: %lld parameters, %lld flops/sample\n",
              static_cast<long long>(pp::param_count(net.arch())),
              static_cast<long long>(pp::flop_count(net.arch())));

  pp::TrainHyper hyper;
  hyper.batch_size = cfg.get_int("batch_size");
  hyper.learning_rate = cfg.get_double("learning_rate");
  hyper.steps = cfg.get_int("steps");
  hyper.val_interval = cfg.get_int("val_interval");
  hyper.val_max_samples = cfg.get_int("val_max_samples");
  hyper.seed = cfg.get_u64("seed");
  const pp::TrainHistory history = pp::train(net, train_set, val_set, hyper);

  const std::string weights_path = cfg.get_path("weights");
  pp::save_weights(net, weights_path);

  const int log_interval = std::max(1, cfg.get_int("log_interval"));
  const std::string loss_path = cfg.get_path("loss_csv");
  std::ofstream loss(loss_path);
  if (!loss) throw pp::IoError("cannot write '" + loss_path + "'");
  loss << "step,train_loss,val_loss\n";
  for (const auto& e : history.entries) {
    if (e.step % log_interval != 0) continue;
    char line[96];
    if (e.val_loss.has_value()) {
      std::snprintf(line, sizeof(line), "%d,%.6f,%.6f\n", e.step, e.train_loss, *e.val_loss);
    } else {
      std::snprintf(line, sizeof(line), "%d,%.6f,\n", e.step, e.train_loss);
    }
    loss << line;
  }
  if (!history.entries.empty()) {
    std::printf("trained %zu steps, final train loss %.4f (%s)\n", history.entries.size(),
                history.entries.back().train_loss, weights_path.c_str());
  }
  return 0;
}

int cmd_eval(const pp::Config& cfg) {
  pp::HfcnNet net = pp::load_weights(cfg.get_path("weights"));
  auto records = pp::load_all(cfg.get_path("dataset_val"));
  const int cap = cfg.get_int("eval_max_samples");
  if (cap > 0 && records.size() > static_cast<std::size_t>(cap)) {
    records.resize(static_cast<std::size_t>(cap));
  }

  pp::HfcnPredictor predictor(net);
  const auto accuracy = pp::accuracy_per_level(predictor, records);
  const auto baseline = pp::majority_baseline(records);
  const double inconsistency = pp::prediction_inconsistency(predictor, records);
  pp::write_accuracy_csv(accuracy, baseline, inconsistency, cfg.get_path("accuracy_csv"));

  for (int level = 0; level < 4; ++level) {
    std::printf("level %d: accuracy %.2f%% (majority baseline %.2f%%)\n", level,
                accuracy[static_cast<std::size_t>(level)],
                baseline[static_cast<std::size_t>(level)]);
  }
  std::printf("inconsistent predictions: %.2f%%\n", 100.0 * inconsistency);
  return 0;
}

std::vector<pp::SequenceInput> bench_sequences(const pp::Config& cfg) {
  static const pp::ContentKind kKinds[] = {pp::ContentKind::kMixed, pp::ContentKind::kGradient,
                                           pp::ContentKind::kEdges, pp::ContentKind::kChecker,
                                           pp::ContentKind::kNoiseBlur};
  const int count = cfg.get_int("bench_sequences");
  const int frames = cfg.get_int("bench_frames");
  const std::uint64_t seed = cfg.get_u64("seed");
  std::vector<pp::SequenceInput> seqs;
  for (int i = 0; i < count; ++i) {
    const pp::ContentKind kind = kKinds[static_cast<std::size_t>(i) % 5];
    pp::SequenceInput s;
    s.name = pp::content_kind_name(kind) + std::to_string(i);
    s.frames = pp::make_sequence(kind, cfg.get_int("bench_width"), cfg.get_int("bench_height"),
                                 frames, seed + 77777ull * static_cast<std::uint64_t>(i + 1));
    seqs.push_back(std::move(s));
  }
  return seqs;
}

// Replaces measured times by their medians over repeats; rates and psnr are
// deterministic and identical across repeats.
std::vector<pp::SequenceRun> median_runs(const std::vector<std::vector<pp::SequenceRun>>& reps) {
  std::vector<pp::SequenceRun> out = reps.front();
  for (std::size_t s = 0; s < out.size(); ++s) {
    std::vector<double> totals;
    for (const auto& rep : reps) totals.push_back(rep[s].total_seconds);
    out[s].total_seconds = pp::median(totals);
    for (std::size_t k = 0; k < out[s].points.size(); ++k) {
      std::vector<double> secs;
      for (const auto& rep : reps) secs.push_back(rep[s].points[k].seconds);
      out[s].points[k].seconds = pp::median(secs);
    }
  }
  return out;
}

int cmd_bench(const pp::Config& cfg, bool use_oracle) {
  const auto seqs = bench_sequences(cfg);
  const auto qps = cfg.get_int_list("bench_qps");
  const int repeats = std::max(1, cfg.get_int("bench_repeats"));

  std::optional<pp::HfcnNet> net;
  std::optional<pp::HfcnPredictor> model_predictor;
  std::optional<pp::OraclePredictor> oracle_predictor;
  pp::PartitionPredictor* predictor = nullptr;
  if (use_oracle) {
    oracle_predictor.emplace();
    std::vector<pp::Superblock> sbs;
    for (const auto& s : seqs) {
      for (const pp::Frame& f : s.frames) {
        const auto blocks = pp::extract_superblocks(f);
        sbs.insert(sbs.end(), blocks.begin(), blocks.end());
      }
    }
    oracle_predictor->prime(sbs, qps);
    predictor = &*oracle_predictor;
    std::printf("benchmark model: search-label oracle\n");
  } else {
    const std::string weights_path = cfg.get_path("weights");
    if (std::filesystem::exists(weights_path)) {
      net.emplace(pp::load_weights(weights_path));
      std::printf("benchmark model: %s\n", weights_path.c_str());
    } else {
      net.emplace(arch_from_config(cfg));
      net->init(cfg.get_u64("seed"));
      std::printf("benchmark model: untrained (seed %llu); no weight file at %s\n",
                  static_cast<unsigned long long>(cfg.get_u64("seed")), weights_path.c_str());
    }
    model_predictor.emplace(*net);
    predictor = &*model_predictor;
  }

  std::vector<std::vector<pp::SequenceRun>> base_reps;
  for (int r = 0; r < repeats; ++r) {
    base_reps.push_back(pp::run_benchmark(seqs, qps, pp::BenchMode::kRdoBaseline, nullptr));
  }
  const auto baseline = median_runs(base_reps);

  std::vector<pp::SequenceRun> all_runs = baseline;
  std::vector<pp::SequenceSummary> all_rows;
  std::map<std::string, std::vector<pp::QpSpeedupRow>> per_qp;
  for (const std::string& mode_name : cfg.get_string_list("bench_modes")) {
    const pp::BenchMode mode = pp::bench_mode_from_name(mode_name);
    if (mode == pp::BenchMode::kRdoBaseline) continue;
    std::vector<std::vector<pp::SequenceRun>> reps;
    for (int r = 0; r < repeats; ++r) {
      reps.push_back(pp::run_benchmark(seqs, qps, mode, predictor));
    }
    const auto runs = median_runs(reps);
    all_runs.insert(all_runs.end(), runs.begin(), runs.end());
    const auto rows = pp::summarize(baseline, runs);
    all_rows.insert(all_rows.end(), rows.begin(), rows.end());
    per_qp[mode_name] = pp::speedup_vs_qp(baseline, runs);
  }

  pp::write_summary_csv(all_rows, cfg.get_string("output_dir") + "/summary.csv");
  pp::write_rd_curves_csv(all_runs, cfg.get_string("output_dir") + "/rd_curves.csv");

  // one table: qp, then a speedup column per mode
  const std::string qp_path = cfg.get_string("output_dir") + "/speedup_vs_qp.csv";
  std::ofstream qp_out(qp_path);
  if (!qp_out) throw pp::IoError("cannot write '" + qp_path + "'");
  qp_out << "qp";
  for (const auto& [name, rows] : per_qp) qp_out << "," << name;
  qp_out << "\n";
  if (!per_qp.empty()) {
    const std::size_t rows = per_qp.begin()->second.size();
    for (std::size_t k = 0; k < rows; ++k) {
      qp_out << per_qp.begin()->second[k].qp;
      for (const auto& [name, table] : per_qp) {
        char cell[32];
        std::snprintf(cell, sizeof(cell), ",%.2f", table[k].delta_t_pct);
        qp_out << cell;
      }
      qp_out << "\n";
    }
  }

  for (const auto& row : all_rows) {
    std::printf("%-12s %dx%-4d %-18s dT %6.1f%%  BD-rate %7.3f%%  BD-PSNR %7.3f dB  incons %.3f\n",
                row.sequence.c_str(), row.width, row.height, row.mode.c_str(), row.delta_t_pct,
                row.bd_rate_pct, row.bd_psnr_db, row.inconsistency_rate);
  }
  return 0;
}

int cmd_show_tree(const pp::Config& cfg, const std::string& input, int qp, int sb_index,
                  const std::string& weights, const std::string& svg_path) {
  const pp::Frame frame = pp::read_pgm(input);
  const auto sbs = pp::extract_superblocks(frame);
  if (sb_index < 0 || static_cast<std::size_t>(sb_index) >= sbs.size()) {
    throw pp::RangeError("superblock index " + std::to_string(sb_index) + " of " +
                         std::to_string(sbs.size()));
  }
  const pp::Superblock& sb = sbs[static_cast<std::size_t>(sb_index)];
  const pp::QpValue q(qp);

  pp::PartitionTree tree;
  if (!weights.empty()) {
    pp::HfcnNet net = pp::load_weights(weights);
    const pp::PartitionTree raw = pp::predict_tree(net, sb, q);
    tree = pp::correct_top_down(raw);
    if (!pp::is_consistent(raw)) std::printf("# prediction was inconsistent; corrected\n");
  } else {
    tree = pp::rdo_search(sb, q).tree;
  }
  std::fputs(pp::dump_tree(tree).c_str(), stdout);

  if (!svg_path.empty()) {
    std::ofstream out(svg_path);
    if (!out) throw pp::IoError("cannot write '" + svg_path + "'");
    out << pp::svg_tree_overlay(sb, pp::leaf_blocks(tree));
  }
  (void)cfg;
  return 0;
}

int cmd_plot(const std::string& input, const std::string& output, std::string title,
             std::string x_label) {
  std::ifstream in(input);
  if (!in) throw pp::IoError("cannot open '" + input + "'");
  std::string header;
  if (!std::getline(in, header)) throw pp::CorruptFileError("empty csv '" + input + "'");
  std::vector<std::string> names;
  {
    std::stringstream ss(header);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.size() < 2) throw pp::CorruptFileError("csv needs an x column and a series");

  std::vector<pp::ChartSeries> series(names.size() - 1);
  for (std::size_t i = 1; i < names.size(); ++i) series[i - 1].name = names[i];
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.empty()) continue;
    double x = 0.0;
    try {
      x = std::stod(cells[0]);
    } catch (const std::exception&) {
      continue;  // non-numeric row (e.g. trailing metadata)
    }
    for (std::size_t i = 1; i < cells.size() && i < names.size(); ++i) {
      if (cells[i].empty()) continue;
      try {
        series[i - 1].points.emplace_back(x, std::stod(cells[i]));
      } catch (const std::exception&) {
      }
    }
  }
  if (title.empty()) title = std::filesystem::path(input).stem().string();
  if (x_label.empty()) x_label = names[0];

  std::ofstream out(output);
  if (!out) throw pp::IoError("cannot write '" + output + "'");
  out << pp::svg_line_chart(title, x_label, series);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"superblock partition prediction toolkit: simulator-labeled datasets, "
               "hierarchical partition model training, and encoder benchmarks"};
  app.require_subcommand(1);

  CommonFlags dataset_flags, train_flags, eval_flags, bench_flags, show_flags;

  auto* dataset_cmd = app.add_subcommand("dataset", "generate and split a labeled dataset");
  add_common(dataset_cmd, dataset_flags);
  std::string ds_frames, ds_kind, ds_q_per_sb, ds_split;
  dataset_cmd->add_option("--frames", ds_frames, "procedural frame count");
  dataset_cmd->add_option("--kind", ds_kind, "procedural content kind");
  dataset_cmd->add_option("--q-per-sb", ds_q_per_sb, "qp draws per superblock");
  dataset_cmd->add_option("--split-fraction", ds_split, "train fraction of the split");

  auto* train_cmd = app.add_subcommand("train", "train the partition model");
  add_common(train_cmd, train_flags);
  std::string tr_steps, tr_batch, tr_lr, tr_weights;
  train_cmd->add_option("--steps", tr_steps, "optimizer steps");
  train_cmd->add_option("--batch-size", tr_batch, "samples per step");
  train_cmd->add_option("--learning-rate", tr_lr, "adam step size");
  train_cmd->add_option("--weights", tr_weights, "weight file to write");

  auto* eval_cmd = app.add_subcommand("eval", "per-level accuracy of a trained model");
  add_common(eval_cmd, eval_flags);
  std::string ev_weights, ev_dataset;
  eval_cmd->add_option("--weights", ev_weights, "weight file to evaluate");
  eval_cmd->add_option("--dataset", ev_dataset, "dataset to evaluate on");

  auto* bench_cmd = app.add_subcommand("bench", "encode benchmarks: baseline vs prediction");
  add_common(bench_cmd, bench_flags);
  std::string be_weights, be_repeats, be_modes;
  bench_cmd->add_option("--weights", be_weights, "weight file (untrained model if absent)");
  bench_cmd->add_option("--repeats", be_repeats, "timing repeats (medians reported)");
  bench_cmd->add_option("--modes", be_modes, "comma list: hfcn,hfcn_rdo_fallback");
  bool be_oracle = false;
  bench_cmd->add_flag("--oracle", be_oracle, "use precomputed search labels as the model");

  auto* show_cmd = app.add_subcommand("show-tree", "print (and render) one superblock's tree");
  add_common(show_cmd, show_flags);
  std::string st_input, st_weights, st_svg;
  int st_qp = 47, st_index = 0;
  show_cmd->add_option("--input", st_input, "8-bit PGM image")->required();
  show_cmd->add_option("--qp", st_qp, "internal qp value")->required();
  show_cmd->add_option("--sb-index", st_index, "superblock index within the frame");
  show_cmd->add_option("--weights", st_weights, "predict with this model instead of the search");
  show_cmd->add_option("--svg", st_svg, "write a partition overlay SVG here");

  auto* plot_cmd = app.add_subcommand("plot", "render a CSV as an SVG line chart");
  std::string pl_input, pl_output, pl_title, pl_xlabel;
  plot_cmd->add_option("--input", pl_input, "csv file (x column + series columns)")->required();
  plot_cmd->add_option("--output", pl_output, "svg file to write")->required();
  plot_cmd->add_option("--title", pl_title, "chart title");
  plot_cmd->add_option("--x-label", pl_xlabel, "x axis label");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (dataset_cmd->parsed()) {
      pp::Config cfg = build_config(dataset_flags);
      if (!ds_frames.empty()) cfg.set("procedural_frames", ds_frames);
      if (!ds_kind.empty()) cfg.set("procedural_kind", ds_kind);
      if (!ds_q_per_sb.empty()) cfg.set("q_per_superblock", ds_q_per_sb);
      if (!ds_split.empty()) cfg.set("split_fraction", ds_split);
      return cmd_dataset(cfg);
    }
    if (train_cmd->parsed()) {
      pp::Config cfg = build_config(train_flags);
      if (!tr_steps.empty()) cfg.set("steps", tr_steps);
      if (!tr_batch.empty()) cfg.set("batch_size", tr_batch);
      if (!tr_lr.empty()) cfg.set("learning_rate", tr_lr);
      if (!tr_weights.empty()) cfg.set("weights", tr_weights);
      return cmd_train(cfg);
    }
    if (eval_cmd->parsed()) {
      pp::Config cfg = build_config(eval_flags);
      if (!ev_weights.empty()) cfg.set("weights", ev_weights);
      if (!ev_dataset.empty()) cfg.set("dataset_val", ev_dataset);
      return cmd_eval(cfg);
    }
    if (bench_cmd->parsed()) {
      pp::Config cfg = build_config(bench_flags);
      if (!be_weights.empty()) cfg.set("weights", be_weights);
      if (!be_repeats.empty()) cfg.set("bench_repeats", be_repeats);
      if (!be_modes.empty()) cfg.set("bench_modes", be_modes);
      return cmd_bench(cfg, be_oracle);
    }
    if (show_cmd->parsed()) {
      pp::Config cfg = build_config(show_flags);
      return cmd_show_tree(cfg, st_input, st_qp, st_index, st_weights, st_svg);
    }
    if (plot_cmd->parsed()) {
      return cmd_plot(pl_input, pl_output, pl_title, pl_xlabel);
    }
  } catch (const pp::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return classify_error(e);
  } catch (const std::exception& e) {
    std::cerr << "error: InternalError: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
