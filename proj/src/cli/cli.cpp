#include "tgseg/cli/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "tgseg/data/synthetic.hpp"
#include "tgseg/eval/report.hpp"
#include "tgseg/eval/selfcheck.hpp"
#include "tgseg/kern/kernels.hpp"
#include "tgseg/train/trainer.hpp"

namespace tgseg::cli {

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

data::Dataset load_or_fail(const std::string& dir) {
  return data::load_dataset(dir);
}

int cmd_gen_data(std::size_t n, std::size_t side, std::size_t dt, std::uint64_t seed,
                 const std::string& out, const std::string& split) {
  const data::Dataset d = data::generate_synthetic(n, side, dt, seed, split);
  data::save_dataset(d, out);
  std::printf("wrote %zu samples (side=%zu, dt=%zu, seed=%llu) to %s\n", d.size(),
              side, dt, static_cast<unsigned long long>(seed), out.c_str());
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& out_dir, const std::string& val_dir) {
  const train::TrainConfig cfg = train::TrainConfig::load(config_path);
  data::Dataset all = load_or_fail(data_dir);
  data::Dataset tr = all.with_split("train");
  if (tr.empty()) tr = all;
  data::Dataset val;
  if (!val_dir.empty()) val = load_or_fail(val_dir);
  const auto result = train::train(cfg, tr, val, out_dir);
  const auto& last = result.log.back();
  std::printf("trained %zu epochs; final val_dice=%.4f val_miou=%.4f; outputs in %s\n",
              cfg.epochs, last.val_dice, last.val_miou, out_dir.c_str());
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data_dir,
             const std::string& corrupt, std::uint64_t seed,
             const std::string& dump_dir) {
  aug::CorruptionSpec spec;
  if (!corrupt.empty()) spec = aug::CorruptionSpec::parse(corrupt);
  const data::Dataset ds = load_or_fail(data_dir);
  const model::Model m = model::load_checkpoint(ckpt);
  const eval::MetricResult r = eval::evaluate_model(
      m, ds, spec.kind == aug::CorruptionSpec::Kind::none ? nullptr : &spec, seed);
  std::printf("condition=%s dice=%.6f miou=%.6f n=%zu\n", spec.label().c_str(),
              r.dice, r.iou, r.n_samples);
  if (!dump_dir.empty()) eval::dump_predictions(m, ds, dump_dir);
  return 0;
}

int cmd_sweep(const std::string& ckpt, const std::string& data_dir,
              const std::string& grid, std::uint64_t seed, const std::string& csv_path) {
  const auto conditions = eval::parse_grid(grid);
  const data::Dataset ds = load_or_fail(data_dir);
  const model::Model m = model::load_checkpoint(ckpt);
  const eval::SweepReport rep = eval::robustness_sweep(m, ds, conditions, seed);
  std::fputs(rep.to_table().c_str(), stdout);
  std::ofstream csv(csv_path, std::ios::trunc | std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + csv_path);
  csv << rep.to_csv();
  std::printf("csv written to %s\n", csv_path.c_str());
  return 0;
}

int cmd_gradcheck(double tol32, std::size_t coords) {
  std::printf("kernel isa: %s\n", kern::active_isa());
  int failures = 0;
  auto report = [&](const eval::CheckResult& c, const char* mode) {
    std::printf("gradcheck %-28s %s %s max_rel=%.3g checked=%zu skipped=%zu\n",
                c.name.c_str(), mode, c.report.pass ? "PASS" : "FAIL",
                c.report.max_rel_err, c.report.checked, c.report.skipped_nonsmooth);
    if (!c.report.pass) ++failures;
  };
  for (const auto& c : eval::primitive_grad_checks_f32(tol32)) report(c, "f32");
  for (const auto& c : eval::primitive_grad_checks_f64()) report(c, "f64");
  report(eval::composite_grad_check_f32(tol32, coords), "f32");
  report(eval::composite_grad_check_f64(1e-6, coords), "f64");
  if (failures > 0) {
    std::fprintf(stderr, "error: gradcheck: %d check(s) failed\n", failures);
    return 1;
  }
  std::printf("all gradient checks passed\n");
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
  std::ifstream in(in_path);
  if (!in) throw std::runtime_error("cannot open " + in_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string md = eval::metrics_csv_to_markdown(buf.str());
  std::ofstream out(out_path, std::ios::trunc | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + out_path);
  out << md;
  std::printf("wrote %s\n", out_path.c_str());
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"text-guided segmentation workbench"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  std::size_t gen_n = 64, gen_side = 64, gen_dt = 128;
  std::uint64_t gen_seed = 1;
  std::string gen_out, gen_split = "train";
  gen->add_option("--n", gen_n, "sample count")->required();
  gen->add_option("--side", gen_side, "image side length");
  gen->add_option("--dt", gen_dt, "text embedding dimension");
  gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--split", gen_split, "split tag written to the manifest");

  auto* tr = app.add_subcommand("train", "train from a key=value config");
  std::string tr_config, tr_data, tr_out, tr_val;
  tr->add_option("--config", tr_config, "config file")->required();
  tr->add_option("--data", tr_data, "training dataset directory")->required();
  tr->add_option("--out", tr_out, "output directory")->required();
  tr->add_option("--val", tr_val, "held-out dataset directory");

  auto* ev = app.add_subcommand("eval", "evaluate a checkpoint");
  std::string ev_ckpt, ev_data, ev_corrupt, ev_dump;
  std::uint64_t ev_seed = 1;
  ev->add_option("--ckpt", ev_ckpt, "checkpoint directory")->required();
  ev->add_option("--data", ev_data, "dataset directory")->required();
  ev->add_option("--corrupt", ev_corrupt, "poisson:<dose> | blur:<k>[:<angle>]");
  ev->add_option("--seed", ev_seed, "corruption seed");
  ev->add_option("--dump-masks", ev_dump, "write predictions and overlays here");

  auto* sw = app.add_subcommand("sweep", "evaluate over a condition grid");
  std::string sw_ckpt, sw_data, sw_grid, sw_csv = "sweep.csv";
  std::uint64_t sw_seed = 1;
  sw->add_option("--ckpt", sw_ckpt, "checkpoint directory")->required();
  sw->add_option("--data", sw_data, "dataset directory")->required();
  sw->add_option("--grid", sw_grid, "comma list: clean,poisson:140,blur:7,...")->required();
  sw->add_option("--seed", sw_seed, "corruption/subsample seed");
  sw->add_option("--csv", sw_csv, "csv output path");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  double gc_tol = 5e-3;
  std::size_t gc_coords = 256;
  gc->add_option("--tol", gc_tol, "float32 relative tolerance");
  gc->add_option("--coords", gc_coords, "coordinates sampled in the composite check");

  auto* rp = app.add_subcommand("report", "render metrics.csv as markdown");
  std::string rp_in, rp_out;
  rp->add_option("--in", rp_in, "metrics.csv path")->required();
  rp->add_option("--out", rp_out, "markdown output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    std::cerr << app.help();
    return 2;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_n, gen_side, gen_dt, gen_seed, gen_out, gen_split);
    if (tr->parsed()) return cmd_train(tr_config, tr_data, tr_out, tr_val);
    if (ev->parsed()) return cmd_eval(ev_ckpt, ev_data, ev_corrupt, ev_seed, ev_dump);
    if (sw->parsed()) return cmd_sweep(sw_ckpt, sw_data, sw_grid, sw_seed, sw_csv);
    if (gc->parsed()) return cmd_gradcheck(gc_tol, gc_coords);
    if (rp->parsed()) return cmd_report(rp_in, rp_out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace tgseg::cli
