// Command-line surface: generate / train / extract / eval / sampler-verify
// / sweep. Every command is deterministic given --seed and writes its
// outputs under --out.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dysent/errors.hpp"
#include "dysent/eval.hpp"
#include "dysent/graph.hpp"
#include "dysent/model.hpp"
#include "dysent/sampler.hpp"

namespace fs = std::filesystem;
using namespace dysent;

namespace {

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> out;
  for (double v : parse_grid(csv)) out.push_back(static_cast<std::uint64_t>(v));
  return out;
}

void write_edge_list(const DynamicGraph& g, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot write '" + path + "'");
  os << "# src dst t\n";
  for (int t = 0; t < g.T(); ++t)
    for (const auto& [u, v] : g.snapshots[t].edges) os << u << " " << v << " " << (t + 1) << "\n";
}

void write_label_table(const LabelTable& table, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot write '" + path + "'");
  for (const auto& rec : table.records) {
    if (table.kind == LabelTable::Kind::Static)
      os << rec.node << " " << rec.label << "\n";
    else
      os << rec.node << " " << (rec.t + 1) << " " << rec.label << "\n";
  }
}

DynamicGraph load_graph_arg(const std::string& edges, int T, const std::string& planted_cfg,
                            std::uint64_t seed, bool have_seed) {
  if (!planted_cfg.empty()) {
    PlantedConfig pc = planted_config_from_file(planted_cfg);
    if (have_seed) pc.seed = seed;
    return generate_planted(pc).graph;
  }
  if (edges.empty()) throw ContractError("either --edges or --planted is required");
  if (T < 1) throw ContractError("--T is required with --edges");
  return load_edge_list_file(edges, T);
}

int run(int argc, char** argv) {
  CLI::App app{"disentangled discrete-time dynamic graph representations"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".", edges_path, planted_path, labels_path;
  std::uint64_t seed = 0;
  bool have_seed = false;
  int T = 0;

  // generate
  auto* gen = app.add_subcommand("generate", "sample a planted dynamic graph with labels");
  gen->add_option("--config", config_path, "planted config file")->required();
  gen->add_option("--out", out_dir, "output directory");
  gen->add_option("--seed", seed, "seed override");

  // train
  auto* tr = app.add_subcommand("train", "train the two generators and the discriminator");
  tr->add_option("--config", config_path, "train config file");
  tr->add_option("--edges", edges_path, "edge list file (src dst t)");
  tr->add_option("--T", T, "snapshot count for --edges");
  tr->add_option("--planted", planted_path, "planted config file instead of --edges");
  tr->add_option("--out", out_dir, "output directory");
  tr->add_option("--seed", seed, "seed override");
  bool train_baseline_flag = false;
  tr->add_flag("--baseline", train_baseline_flag,
               "train the pretext-only backbone at full width instead");

  // extract
  auto* ex = app.add_subcommand("extract", "dump representations from a checkpoint");
  std::string ckpt_path;
  ex->add_option("--checkpoint", ckpt_path, "checkpoint file")->required();
  ex->add_option("--edges", edges_path, "edge list file");
  ex->add_option("--T", T, "snapshot count for --edges");
  ex->add_option("--planted", planted_path, "planted config file instead of --edges");
  ex->add_option("--out", out_dir, "output directory");
  ex->add_option("--seed", seed, "seed override for --planted");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate representations on a downstream task");
  std::string task = "link", variant = "combine", reps_dir;
  int eval_snapshot = 0, hidden_width = 0;
  double train_fraction = 0.5;
  ev->add_option("--task", task, "link | node-static | node-dynamic")->required();
  ev->add_option("--variant", variant, "combine | time-invariant | time-varying | baseline | pooled");
  ev->add_option("--reps", reps_dir, "directory produced by extract")->required();
  ev->add_option("--edges", edges_path, "edge list file (link task)");
  ev->add_option("--T", T, "snapshot count for --edges");
  ev->add_option("--planted", planted_path, "planted config (supplies graph and labels)");
  ev->add_option("--labels", labels_path, "label file (node tasks)");
  ev->add_option("--snapshot", eval_snapshot, "1-based held-out snapshot (link; default T)");
  ev->add_option("--train-fraction", train_fraction, "classifier train fraction (link)");
  ev->add_option("--hidden-width", hidden_width, "probe hidden width (0 = linear)");
  ev->add_option("--out", out_dir, "output directory");
  ev->add_option("--seed", seed, "evaluation seed");

  // sampler-verify
  auto* sv = app.add_subcommand("sampler-verify", "check the clip-overlap proposition exactly");
  std::string alphas_csv = "0.25,0.5,0.75,1.0";
  double alpha_single = 0.0;
  int lmin = 3, lmax = 20;
  sv->add_option("--alpha", alpha_single, "single alpha value");
  sv->add_option("--alphas", alphas_csv, "comma-separated alpha grid");
  sv->add_option("--lmin", lmin, "smallest clip range (>= 3)");
  sv->add_option("--lmax", lmax, "largest clip range");
  sv->add_option("--out", out_dir, "output directory");

  // sweep
  auto* sw = app.add_subcommand("sweep", "grid sweep over noise / data fraction / probe width");
  std::string kind = "noise", grid_csv, seeds_csv = "0";
  sw->add_option("--kind", kind, "noise | data-fraction | classifier-width")->required();
  sw->add_option("--grid", grid_csv, "comma-separated grid points")->required();
  sw->add_option("--config", config_path, "train config file");
  sw->add_option("--planted", planted_path, "planted config file")->required();
  sw->add_option("--seeds", seeds_csv, "comma-separated seeds");
  sw->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage-error: " << e.what() << "\n";
    return 2;
  }
  have_seed = app.count_all() > 0 &&
              ((gen->count("--seed") + tr->count("--seed") + ex->count("--seed") +
                ev->count("--seed")) > 0);

  fs::create_directories(out_dir);

  if (*gen) {
    PlantedConfig cfg = planted_config_from_file(config_path);
    if (have_seed) cfg.seed = seed;
    PlantedData data = generate_planted(cfg);
    write_edge_list(data.graph, (fs::path(out_dir) / "edges.txt").string());
    write_label_table(data.static_labels, (fs::path(out_dir) / "static_labels.txt").string());
    write_label_table(data.dynamic_labels, (fs::path(out_dir) / "dynamic_labels.txt").string());
    std::cout << "generated node_count=" << data.graph.node_count << " T=" << data.graph.T()
              << " edges=" << [&] {
                   std::size_t e = 0;
                   for (const auto& s : data.graph.snapshots) e += s.edge_count();
                   return e;
                 }()
              << " -> " << out_dir << "\n";
    return 0;
  }

  if (*tr) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{}
                                          : TrainConfig::from_kv(KeyValueConfig::from_file(config_path));
    if (have_seed) cfg.seed = seed;
    DynamicGraph g = load_graph_arg(edges_path, T, planted_path, cfg.seed, true);
    if (train_baseline_flag) {
      BaselineModel model = train_baseline(cfg, g);
      save_baseline_checkpoint(model, (fs::path(out_dir) / "model.ckpt").string());
      std::ofstream hist(fs::path(out_dir) / "history.csv");
      write_history_csv(model.history, hist);
    } else {
      DytedModel model = train(cfg, g);
      save_checkpoint(model, (fs::path(out_dir) / "model.ckpt").string());
      std::ofstream hist(fs::path(out_dir) / "history.csv");
      write_history_csv(model.history, hist);
    }
    std::cout << "trained " << (train_baseline_flag ? "baseline" : "dyted") << " for "
              << cfg.epochs << " epochs -> " << out_dir << "\n";
    return 0;
  }

  if (*ex) {
    DynamicGraph g = load_graph_arg(edges_path, T, planted_path, seed, have_seed);
    if (checkpoint_is_baseline(ckpt_path)) {
      BaselineModel model = load_baseline_checkpoint(ckpt_path);
      dump_baseline_embeddings(extract_baseline(model, g), out_dir);
    } else {
      DytedModel model = load_checkpoint(ckpt_path);
      dump_embeddings(extract_representations(model, g), out_dir);
    }
    std::cout << "extracted -> " << out_dir << "\n";
    return 0;
  }

  if (*ev) {
    std::vector<EvalReport> reports;
    const Variant var = variant_from_name(variant);
    if (task == "link") {
      DynamicGraph g = load_graph_arg(edges_path, T, planted_path, seed, have_seed);
      const int held = eval_snapshot > 0 ? eval_snapshot - 1 : g.T() - 1;
      if (held < 0 || held >= g.T()) throw ContractError("eval: --snapshot outside the graph");
      ad::Mat slice;
      if (var == Variant::Baseline) {
        std::vector<ad::Mat> reps = load_baseline_embeddings(reps_dir);
        slice = reps.back();
      } else {
        RepresentationSet reps = load_embeddings(reps_dir);
        const int last = static_cast<int>(reps.D.size()) - 1;
        if (var == Variant::TimeInvariant)
          slice = reps.S;
        else if (var == Variant::TimeVarying)
          slice = reps.D[last];
        else
          slice = reps.combined(last);
      }
      LinkEvalResult r =
          eval_link_prediction(slice, g.snapshots[held], train_fraction, seed);
      EvalReport report{"link", variant, seed, {{"auc", r.auc}, {"ap", r.ap}}};
      reports.push_back(report);
    } else if (task == "node-static" || task == "node-dynamic") {
      const bool is_static = task == "node-static";
      LabelTable table;
      if (!planted_path.empty()) {
        PlantedConfig pc = planted_config_from_file(planted_path);
        PlantedData data = generate_planted(pc);
        table = is_static ? data.static_labels : data.dynamic_labels;
      } else if (!labels_path.empty()) {
        table = load_labels_file(labels_path, is_static ? LabelTable::Kind::Static
                                                        : LabelTable::Kind::PerSnapshot);
      } else {
        throw ContractError("eval: node tasks need --labels or --planted");
      }
      ProbeData pd;
      if (var == Variant::Baseline || var == Variant::Pooled) {
        if (embeddings_are_baseline(reps_dir))
          pd = probe_data_baseline(load_baseline_embeddings(reps_dir), table,
                                   var == Variant::Pooled);
        else
          pd = probe_data(load_embeddings(reps_dir), table, var);
      } else {
        pd = probe_data(load_embeddings(reps_dir), table, var);
      }
      ClassifyResult r =
          eval_node_classification(pd.features, pd.labels, pd.class_count, seed, hidden_width);
      EvalReport report{task, variant, seed,
                        {{"micro-f1", r.f1.micro}, {"macro-f1", r.f1.macro}}};
      reports.push_back(report);
    } else {
      throw ContractError("eval: unknown task '" + task + "'");
    }
    std::ofstream os(fs::path(out_dir) / "metrics.csv");
    write_metrics_csv(reports, os);
    write_metrics_csv(reports, std::cout);
    return 0;
  }

  if (*sv) {
    std::vector<double> alphas =
        sv->count("--alpha") > 0 ? std::vector<double>{alpha_single} : parse_grid(alphas_csv);
    PropositionReport report = verify_proposition(alphas, lmin, lmax);
    std::ofstream os(fs::path(out_dir) / "sampler_verify.csv");
    write_proposition_csv(report, os);
    std::printf("rows=%zu violations=%d max_closed_form_gap=%.3g\n", report.rows.size(),
                report.violations, report.max_closed_form_gap);
    return report.violations == 0 ? 0 : 1;
  }

  if (*sw) {
    TrainConfig cfg = config_path.empty() ? TrainConfig{}
                                          : TrainConfig::from_kv(KeyValueConfig::from_file(config_path));
    PlantedConfig pc = planted_config_from_file(planted_path);
    std::vector<SweepRow> rows =
        sweep(sweep_kind_from_name(kind), parse_grid(grid_csv), cfg, pc, parse_seeds(seeds_csv));
    std::ofstream os(fs::path(out_dir) / "sweep.csv");
    write_sweep_csv(rows, os);
    std::cout << "sweep rows=" << rows.size() << " -> " << out_dir << "/sweep.csv\n";
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
