#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>

#include "ghostsr/accounting.hpp"
#include "ghostsr/checkpoint.hpp"
#include "ghostsr/clustering.hpp"
#include "ghostsr/config.hpp"
#include "ghostsr/errors.hpp"
#include "ghostsr/image.hpp"
#include "ghostsr/metrics.hpp"
#include "ghostsr/network.hpp"
#include "ghostsr/parallel.hpp"
#include "ghostsr/trainer.hpp"

namespace fs = std::filesystem;
using namespace ghostsr;

namespace {

enum Exit { kOk = 0, kInternal = 1, kBadInput = 2, kValidation = 3 };

Checkpoint load_checkpoint(const std::string& path) { return Checkpoint::load(path); }

Network load_network(const std::string& path, const std::string& config) {
  const Checkpoint ck = load_checkpoint(path);
  if (config.empty()) return Network::from_checkpoint(ck);
  return Network::from_checkpoint(load_config(config), ck);
}

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

void save_checkpoint(const Network& net, const std::string& path) {
  ensure_parent(path);
  net.to_checkpoint().save(path);
}

Shape parse_shape(const std::string& text) {
  std::vector<std::size_t> dims;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, 'x')) {
    std::size_t used = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(part, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != part.size() || part.empty() || v == 0) throw std::invalid_argument("bad shape '" + text + "'");
    dims.push_back(v);
  }
  if (dims.size() != 4) throw std::invalid_argument("shape must be NxCxHxW, got '" + text + "'");
  return Shape{dims[0], dims[1], dims[2], dims[3]};
}

std::string fmt_db(double v) {
  if (std::isinf(v)) return "inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(4) << v;
  return s.str();
}

// ---------------------------------------------------------------------------

struct PresetArgs {
  std::string name;
  bool list = false;
  std::string out;
};

int run_preset(const PresetArgs& a) {
  if (a.list || a.name.empty()) {
    for (const std::string& n : preset_names()) std::cout << n << "\n";
    return kOk;
  }
  const ModelConfig c = load_config(a.name);
  if (a.out.empty()) {
    std::cout << c.to_text();
  } else {
    ensure_parent(a.out);
    save_config(c, a.out);
  }
  return kOk;
}

struct InitArgs {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  double ratio = 0.0;
};

int run_init(const InitArgs& a) {
  Rng rng(a.seed);
  ModelConfig c = load_config(a.config);
  if (a.ratio > 0) c = with_ghost_ratio(c, a.ratio);
  const Network net = Network::random_init(c, rng);
  save_checkpoint(net, a.out);
  std::cout << "wrote " << a.out << " (" << c.name << ", hash " << std::hex << c.hash() << std::dec << ")\n";
  return kOk;
}

struct ClusterArgs {
  std::string checkpoint;
  std::string config;
  double ratio = 0.5;
  std::string out;
  std::uint64_t seed = 0;
  int iters = 50;
};

int run_cluster(const ClusterArgs& a) {
  const Network net = load_network(a.checkpoint, a.config);
  Rng rng(a.seed);
  const ConversionPlan plan = make_plan(net, a.ratio, rng, a.iters);
  if (a.out.empty()) {
    plan.write(std::cout);
  } else {
    ensure_parent(a.out);
    std::ofstream out(a.out, std::ios::binary);
    if (!out) throw std::invalid_argument("cannot write " + a.out);
    plan.write(out);
    std::cout << "wrote " << a.out << " (" << plan.layers.size() << " layers)\n";
  }
  return kOk;
}

struct ConvertArgs {
  std::string checkpoint;
  std::string config;
  std::string plan;
  double ratio = 0.5;
  std::string out;
};

int run_convert(const ConvertArgs& a) {
  const Network net = load_network(a.checkpoint, a.config);
  std::optional<ConversionPlan> plan;
  if (!a.plan.empty()) {
    std::ifstream in(a.plan, std::ios::binary);
    if (!in) throw NotFound("plan not found: " + a.plan);
    plan = ConversionPlan::read(in);
  }
  const Network ghost = convert_to_ghost(net, a.ratio, plan ? &*plan : nullptr);
  save_checkpoint(ghost, a.out);
  std::cout << "wrote " << a.out << " (ratio " << a.ratio << ", hash " << std::hex << ghost.config().hash()
            << std::dec << ")\n";
  return kOk;
}

struct TrainArgs {
  std::string checkpoint;
  std::string preset;
  std::string plan;
  double ratio = 0.5;
  std::string data;
  std::size_t synthetic = 8;
  bool fixed = false;
  std::size_t steps = 100;
  double lr = 1e-4;
  std::size_t batch = 16;
  std::size_t patch = 48;
  std::string loss = "l1";
  std::uint64_t seed = 0;
  bool no_augment = false;
  bool no_timing = false;
  bool freeze = false;
  std::string out;
  std::string log;
  std::string dump_pairs;
  std::size_t print_every = 50;
};

Batch to_batch(const std::vector<PatchPair>& pairs) {
  std::vector<Image> lr;
  std::vector<Image> hr;
  for (const PatchPair& p : pairs) {
    lr.push_back(p.lr);
    hr.push_back(p.hr);
  }
  return Batch{stack(lr), stack(hr)};
}

int run_train(const TrainArgs& a) {
  if (a.checkpoint.empty() == a.preset.empty()) {
    throw std::invalid_argument("train needs exactly one of --checkpoint or --preset");
  }
  Rng root(a.seed);
  Rng init_rng = root.fork(1);
  Rng data_rng = root.fork(2);

  Network net = a.checkpoint.empty() ? Network::random_init(load_config(a.preset), init_rng)
                                     : Network::from_checkpoint(load_checkpoint(a.checkpoint));
  if (net.ratio() == 0.0 && a.ratio > 0.0) {
    std::optional<ConversionPlan> plan;
    if (!a.plan.empty()) {
      std::ifstream in(a.plan, std::ios::binary);
      if (!in) throw NotFound("plan not found: " + a.plan);
      plan = ConversionPlan::read(in);
    }
    net = convert_to_ghost(net, a.ratio, plan ? &*plan : nullptr);
  }
  if (net.frozen() && net.ratio() > 0.0) throw InvalidState("cannot train a frozen checkpoint");
  const std::size_t scale = net.config().scale;

  std::vector<Image> images;
  if (!a.data.empty()) {
    for (const std::string& p : list_pngs(a.data)) images.push_back(read_png(p));
    if (images.empty()) throw NotFound("no PNG images in " + a.data);
  } else {
    for (std::size_t i = 0; i < a.synthetic; ++i) {
      images.push_back(synthetic_image(a.patch * scale, a.patch * scale, data_rng));
    }
  }

  const bool augment = !a.no_augment;
  std::optional<Batch> fixed;
  std::vector<PatchPair> fixed_pairs;
  if (a.fixed) {
    fixed_pairs = sample_patches(images, scale, a.patch, a.batch, data_rng, augment, std::cerr);
    fixed = to_batch(fixed_pairs);
  }
  BatchProvider provider = [&](std::size_t, Rng& rng) {
    if (fixed) return *fixed;
    return to_batch(sample_patches(images, scale, a.patch, a.batch, rng, augment, std::cerr));
  };

  if (!a.dump_pairs.empty()) {
    if (!a.fixed) throw std::invalid_argument("--dump-pairs needs --fixed");
    fs::create_directories(fs::path(a.dump_pairs) / "lr");
    fs::create_directories(fs::path(a.dump_pairs) / "hr");
    for (std::size_t i = 0; i < fixed_pairs.size(); ++i) {
      std::ostringstream name;
      name << std::setw(4) << std::setfill('0') << i << ".png";
      write_png((fs::path(a.dump_pairs) / "lr" / name.str()).string(), fixed_pairs[i].lr, 16);
      write_png((fs::path(a.dump_pairs) / "hr" / name.str()).string(), fixed_pairs[i].hr, 16);
    }
  }

  TrainOptions opt;
  opt.steps = a.steps;
  opt.adam.lr0 = a.lr;
  opt.seed = root.fork(3).next();
  opt.timing = !a.no_timing;
  if (a.loss == "l1") {
    opt.loss = LossKind::L1;
  } else if (a.loss == "l2") {
    opt.loss = LossKind::L2;
  } else {
    throw std::invalid_argument("--loss must be l1 or l2");
  }
  opt.on_step = [&](const LogRow& r) {
    if (a.print_every > 0 && (r.step % a.print_every == 0 || r.step + 1 == a.steps)) {
      std::cout << "step " << r.step << "  lr " << r.lr << "  loss " << r.loss;
      if (opt.timing) std::cout << "  " << std::fixed << std::setprecision(1) << r.wall_ms << " ms";
      std::cout << std::defaultfloat << std::setprecision(6) << "\n";
    }
  };

  TrainResult result = train(std::move(net), provider, opt);
  Network trained = a.freeze ? freeze(result.network) : std::move(result.network);
  save_checkpoint(trained, a.out);
  if (!a.log.empty()) {
    ensure_parent(a.log);
    std::ofstream log(a.log, std::ios::binary);
    write_log_csv(log, result.log);
  }
  std::cout << "wrote " << a.out << (a.freeze ? " (frozen)" : "") << "\n";
  return kOk;
}

struct FreezeArgs {
  std::string checkpoint;
  std::string out;
};

int run_freeze(const FreezeArgs& a) {
  const Network net = freeze(Network::from_checkpoint(load_checkpoint(a.checkpoint)));
  save_checkpoint(net, a.out);
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

struct EvalArgs {
  std::string checkpoint;
  std::string hr_dir;
  std::string lr_dir;
  std::string sr_dir;
  std::string save_sr;
  std::size_t scale = 0;
  bool csv = false;
};

struct EvalRow {
  std::string image;
  double psnr = 0.0;
  double ssim = 0.0;
  double bicubic_psnr = 0.0;
  double bicubic_ssim = 0.0;
};

int run_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.sr_dir.empty()) {
    throw std::invalid_argument("eval needs exactly one of --checkpoint or --sr-dir");
  }
  std::optional<Network> net;
  std::size_t scale = a.scale;
  if (!a.checkpoint.empty()) {
    net = Network::from_checkpoint(load_checkpoint(a.checkpoint));
    if (!net->frozen()) net = freeze(*net);
    if (scale != 0 && scale != net->config().scale) throw std::invalid_argument("--scale disagrees with checkpoint");
    scale = net->config().scale;
  }
  if (scale == 0) throw std::invalid_argument("--scale is required with --sr-dir");

  const std::vector<std::string> hr_paths = list_pngs(a.hr_dir);
  if (hr_paths.empty()) throw NotFound("no PNG images in " + a.hr_dir);
  if (!a.save_sr.empty()) fs::create_directories(a.save_sr);

  std::vector<EvalRow> rows;
  for (const std::string& hr_path : hr_paths) {
    const std::string file = fs::path(hr_path).filename().string();
    const Image hr = modcrop(read_png(hr_path), scale);
    Image lr;
    if (!a.lr_dir.empty()) {
      lr = read_png((fs::path(a.lr_dir) / file).string());
    } else {
      lr = bicubic_resize(hr, hr.h / scale, hr.w / scale);
    }
    if (lr.h * scale != hr.h || lr.w * scale != hr.w) {
      throw ValidationError("LR image " + file + " is not HR / " + std::to_string(scale));
    }
    Image sr;
    if (net) {
      sr = Image::from_tensor(forward_sr(*net, lr.to_tensor()));
    } else {
      sr = modcrop(read_png((fs::path(a.sr_dir) / file).string()), scale);
    }
    if (sr.h != hr.h || sr.w != hr.w) throw ValidationError("SR image " + file + " differs in size from HR");
    if (!a.save_sr.empty()) write_png((fs::path(a.save_sr) / file).string(), sr, 16);
    Image bic = bicubic_resize(lr, hr.h, hr.w);
    for (float& v : bic.data) v = std::clamp(v, 0.0f, 1.0f);

    const Image hy = shave(rgb_to_y(hr), scale);
    const Image sy = shave(rgb_to_y(sr), scale);
    const Image by = shave(rgb_to_y(bic), scale);
    rows.push_back({file, psnr(sy, hy, 0), ssim(sy, hy), psnr(by, hy, 0), ssim(by, hy)});
  }

  EvalRow mean{"mean", 0, 0, 0, 0};
  for (const EvalRow& r : rows) {
    mean.psnr += r.psnr / static_cast<double>(rows.size());
    mean.ssim += r.ssim / static_cast<double>(rows.size());
    mean.bicubic_psnr += r.bicubic_psnr / static_cast<double>(rows.size());
    mean.bicubic_ssim += r.bicubic_ssim / static_cast<double>(rows.size());
  }
  rows.push_back(mean);

  if (a.csv) {
    std::cout << "image,psnr_y,ssim_y,bicubic_psnr_y,bicubic_ssim_y\n" << std::setprecision(17);
    for (const EvalRow& r : rows) {
      std::cout << r.image << ',' << r.psnr << ',' << r.ssim << ',' << r.bicubic_psnr << ',' << r.bicubic_ssim << '\n';
    }
    return kOk;
  }
  std::size_t width = 5;
  for (const EvalRow& r : rows) width = std::max(width, r.image.size());
  std::cout << std::left << std::setw(static_cast<int>(width)) << "image" << std::right << std::setw(12) << "PSNR-Y"
            << std::setw(10) << "SSIM-Y" << std::setw(14) << "bicubic PSNR" << std::setw(14) << "bicubic SSIM"
            << "\n";
  for (const EvalRow& r : rows) {
    std::cout << std::left << std::setw(static_cast<int>(width)) << r.image << std::right << std::setw(12)
              << fmt_db(r.psnr) << std::setw(10) << std::fixed << std::setprecision(4) << r.ssim << std::setw(14)
              << fmt_db(r.bicubic_psnr) << std::setw(14) << r.bicubic_ssim << std::defaultfloat << "\n";
  }
  return kOk;
}

struct CountArgs {
  std::string config;
  std::string checkpoint;
  double ghost = 0.0;
  std::string hr = "720x1280";
  bool csv = false;
  bool summary = false;
};

int run_count(const CountArgs& a) {
  if (a.config.empty() == a.checkpoint.empty()) {
    throw std::invalid_argument("count needs exactly one of --config or --checkpoint");
  }
  ModelConfig c = a.config.empty() ? Network::from_checkpoint(load_checkpoint(a.checkpoint)).config()
                                   : load_config(a.config);
  if (a.ghost > 0) c = with_ghost_ratio(c, a.ghost);
  const auto x = a.hr.find('x');
  if (x == std::string::npos) throw std::invalid_argument("--hr must be HxW");
  const Shape s = parse_shape("1x1x" + a.hr);
  const CostReport report = count(c, s.h, s.w);
  if (a.csv) {
    write_report_csv(std::cout, report);
  } else {
    print_report(std::cout, report, !a.summary);
  }
  return kOk;
}

struct BenchArgs {
  std::string op = "all";
  std::string shape = "1x64x360x640";
  std::size_t reps = 10;
  std::size_t warmup = 3;
  int threads = 0;
  std::uint64_t seed = 0;
  bool csv = false;
};

int run_bench(const BenchArgs& a) {
  const Shape shape = parse_shape(a.shape);
  std::vector<BenchOp> ops;
  if (a.op == "all") {
    ops = {BenchOp::Shift, BenchOp::Depthwise3x3, BenchOp::Conv3x3};
  } else {
    ops = {parse_bench_op(a.op)};
  }
  BenchOptions opt{a.reps, a.warmup, a.seed};
  std::vector<BenchResult> results;
  const int saved = num_threads();
  set_num_threads(1);
  for (BenchOp op : ops) results.push_back(bench(op, shape, opt));
  if (a.threads > 1) {
    set_num_threads(a.threads);
    for (BenchOp op : ops) results.push_back(bench(op, shape, opt));
  }
  set_num_threads(saved);
  if (a.csv) {
    write_bench_csv(std::cout, results);
  } else {
    print_bench(std::cout, results);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ghost-feature super-resolution toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "ghostsr 0.1.0");

  PresetArgs preset_args;
  auto* preset_cmd = app.add_subcommand("preset", "List built-in models or print one as config text");
  preset_cmd->add_option("name", preset_args.name, "Preset name or config file");
  preset_cmd->add_flag("--list", preset_args.list, "List preset names");
  preset_cmd->add_option("-o,--out", preset_args.out, "Write the config to a file");

  InitArgs init_args;
  auto* init_cmd = app.add_subcommand("init", "Randomly initialise a checkpoint for a config");
  init_cmd->add_option("-c,--config", init_args.config, "Preset name or config file")->required();
  init_cmd->add_option("-o,--out", init_args.out, "Checkpoint path")->required();
  init_cmd->add_option("--seed", init_args.seed, "Random seed");
  init_cmd->add_option("--ratio", init_args.ratio, "Initialise already converted at this ghost ratio")
      ->check(CLI::Range(0.0, 0.99));

  ClusterArgs cluster_args;
  auto* cluster_cmd = app.add_subcommand("cluster", "Cluster pre-trained filters into a conversion plan");
  cluster_cmd->add_option("-k,--checkpoint", cluster_args.checkpoint, "Dense checkpoint")->required();
  cluster_cmd->add_option("-c,--config", cluster_args.config, "Config the checkpoint must match");
  cluster_cmd->add_option("-r,--ratio", cluster_args.ratio, "Ghost ratio")->check(CLI::Range(0.0, 0.99));
  cluster_cmd->add_option("-o,--out", cluster_args.out, "Plan file (stdout when omitted)");
  cluster_cmd->add_option("--seed", cluster_args.seed, "Random seed");
  cluster_cmd->add_option("--iters", cluster_args.iters, "Maximum Lloyd iterations")->check(CLI::PositiveNumber);

  ConvertArgs convert_args;
  auto* convert_cmd = app.add_subcommand("convert", "Convert a dense checkpoint into a ghost checkpoint");
  convert_cmd->add_option("-k,--checkpoint", convert_args.checkpoint, "Dense checkpoint")->required();
  convert_cmd->add_option("-c,--config", convert_args.config, "Config the checkpoint must match");
  convert_cmd->add_option("-p,--plan", convert_args.plan, "Plan from `cluster`");
  convert_cmd->add_option("-r,--ratio", convert_args.ratio, "Ghost ratio")->check(CLI::Range(0.0, 0.99));
  convert_cmd->add_option("-o,--out", convert_args.out, "Output checkpoint")->required();

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train or fine-tune a network");
  train_cmd->add_option("-k,--checkpoint", train_args.checkpoint, "Start from a checkpoint");
  train_cmd->add_option("--preset", train_args.preset, "Start from a random init of a preset or config file");
  train_cmd->add_option("-p,--plan", train_args.plan, "Conversion plan for a dense start");
  train_cmd->add_option("-r,--ratio", train_args.ratio, "Ghost ratio applied to a dense start (0 keeps it dense)")
      ->check(CLI::Range(0.0, 0.99));
  train_cmd->add_option("--data", train_args.data, "Directory of HR PNG images");
  train_cmd->add_option("--synthetic", train_args.synthetic, "Number of synthetic HR images when --data is absent")
      ->check(CLI::PositiveNumber);
  train_cmd->add_flag("--fixed", train_args.fixed, "Sample one batch and reuse it every step");
  train_cmd->add_option("--steps", train_args.steps, "Optimisation steps");
  train_cmd->add_option("--lr", train_args.lr, "Initial learning rate (cosine decay)")->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", train_args.batch, "Patches per step")->check(CLI::PositiveNumber);
  train_cmd->add_option("--patch", train_args.patch, "LR patch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--loss", train_args.loss, "l1 or l2");
  train_cmd->add_option("--seed", train_args.seed, "Random seed");
  train_cmd->add_flag("--no-augment", train_args.no_augment, "Disable flips and rotations");
  train_cmd->add_flag("--no-timing", train_args.no_timing, "Write wall_ms = 0 in the log");
  train_cmd->add_flag("--freeze", train_args.freeze, "Harden shifts before saving");
  train_cmd->add_option("-o,--out", train_args.out, "Output checkpoint")->required();
  train_cmd->add_option("--log", train_args.log, "Training log CSV");
  train_cmd->add_option("--dump-pairs", train_args.dump_pairs, "Write the fixed LR/HR pairs as PNG");
  train_cmd->add_option("--print-every", train_args.print_every, "Progress line interval (0 for none)");

  FreezeArgs freeze_args;
  auto* freeze_cmd = app.add_subcommand("freeze", "Replace shift proxies by hardened offsets");
  freeze_cmd->add_option("-k,--checkpoint", freeze_args.checkpoint, "Trained checkpoint")->required();
  freeze_cmd->add_option("-o,--out", freeze_args.out, "Output checkpoint")->required();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Y-channel PSNR/SSIM against HR images and the bicubic baseline");
  eval_cmd->add_option("-k,--checkpoint", eval_args.checkpoint, "Model to run (frozen on the fly)");
  eval_cmd->add_option("--sr-dir", eval_args.sr_dir, "Precomputed SR images instead of a model");
  eval_cmd->add_option("--hr-dir", eval_args.hr_dir, "HR reference images")->required();
  eval_cmd->add_option("--lr-dir", eval_args.lr_dir, "LR inputs (bicubic from HR when omitted)");
  eval_cmd->add_option("--scale", eval_args.scale, "Scale, required with --sr-dir");
  eval_cmd->add_option("--save-sr", eval_args.save_sr, "Write SR outputs here");
  eval_cmd->add_flag("--csv", eval_args.csv, "CSV instead of aligned text");

  CountArgs count_args;
  auto* count_cmd = app.add_subcommand("count", "Analytic parameters and FLOPs");
  count_cmd->add_option("-c,--config", count_args.config, "Preset name or config file");
  count_cmd->add_option("-k,--checkpoint", count_args.checkpoint, "Count the config stored in a checkpoint");
  count_cmd->add_option("--ghost", count_args.ghost, "Convert at this ghost ratio first")
      ->check(CLI::Range(0.0, 0.99));
  count_cmd->add_option("--hr", count_args.hr, "HR size HxW");
  count_cmd->add_flag("--csv", count_args.csv, "CSV instead of aligned text");
  count_cmd->add_flag("--summary", count_args.summary, "Totals only");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Time shift against depthwise and dense 3x3 convolution");
  bench_cmd->add_option("--op", bench_args.op, "shift, depthwise3x3, conv3x3 or all");
  bench_cmd->add_option("--shape", bench_args.shape, "NxCxHxW");
  bench_cmd->add_option("--reps", bench_args.reps, "Timed repetitions (>= 10)");
  bench_cmd->add_option("--warmup", bench_args.warmup, "Untimed repetitions");
  bench_cmd->add_option("--threads", bench_args.threads, "Also run with this many threads");
  bench_cmd->add_option("--seed", bench_args.seed, "Random seed");
  bench_cmd->add_flag("--csv", bench_args.csv, "CSV instead of aligned text");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadInput;
  }

  try {
    init_threads_from_env();
    if (preset_cmd->parsed()) return run_preset(preset_args);
    if (init_cmd->parsed()) return run_init(init_args);
    if (cluster_cmd->parsed()) return run_cluster(cluster_args);
    if (convert_cmd->parsed()) return run_convert(convert_args);
    if (train_cmd->parsed()) return run_train(train_args);
    if (freeze_cmd->parsed()) return run_freeze(freeze_args);
    if (eval_cmd->parsed()) return run_eval(eval_args);
    if (count_cmd->parsed()) return run_count(count_args);
    if (bench_cmd->parsed()) return run_bench(bench_args);
  } catch (const NotFound& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const ValidationError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const InvalidState& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const BenchCorrectnessError& e) {
    std::cerr << "validation failed: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInternal;
}
