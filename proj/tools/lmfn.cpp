// lmfn: blur, train, infer, eval, params, gradcheck.
//
// Exit codes: 0 success, 1 usage, 2 data/file, 3 numerical.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lmfn/lmfn.hpp"

namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Model config flags layered over an optional JSON file. Flags win.
struct ConfigFlags {
  std::string json_path;
  lmfn::ModelConfig defaults{};
  lmfn::ModelConfig flags{};
  std::vector<std::pair<CLI::Option*, std::function<void(lmfn::ModelConfig&)>>> setters;

  void attach(CLI::App& app) {
    app.add_option("--config", json_path, "JSON file with ModelConfig fields")->check(CLI::ExistingFile);
    auto add_int = [&](const char* name, int lmfn::ModelConfig::*field, const char* help) {
      CLI::Option* o = app.add_option(name, flags.*field, help)->capture_default_str();
      setters.emplace_back(o, [this, field](lmfn::ModelConfig& c) { c.*field = flags.*field; });
    };
    auto add_bool = [&](const char* name, bool lmfn::ModelConfig::*field, const char* help) {
      CLI::Option* o = app.add_option(name, flags.*field, help)->capture_default_str();
      setters.emplace_back(o, [this, field](lmfn::ModelConfig& c) { c.*field = flags.*field; });
    };
    add_int("--encoder-width", &lmfn::ModelConfig::encoder_width, "encoder channels");
    add_int("--decoder-width", &lmfn::ModelConfig::decoder_width, "decoder channels");
    add_int("--num-scales", &lmfn::ModelConfig::num_scales, "encoder downsampling stages");
    add_int("--num-rfdb", &lmfn::ModelConfig::num_rfdb, "distillation blocks in the decoder");
    add_int("--fusion-output-scale", &lmfn::ModelConfig::fusion_output_scale,
            "downsampling factor of the decoder input");
    add_bool("--mshf-enabled", &lmfn::ModelConfig::mshf_enabled, "multi-scale fusion encoder");
    add_bool("--rfdb-enabled", &lmfn::ModelConfig::rfdb_enabled, "distillation decoder blocks");
    add_bool("--attention-enabled", &lmfn::ModelConfig::attention_enabled, "ALFM and ACFM");
    add_bool("--global-skip", &lmfn::ModelConfig::global_skip, "add the input to the output");
    CLI::Option* o = app.add_option("--alfm-max-entries", flags.alfm_max_entries,
                                    "budget for the ALFM attention matrix")
                         ->capture_default_str();
    setters.emplace_back(o, [this](lmfn::ModelConfig& c) { c.alfm_max_entries = flags.alfm_max_entries; });
  }

  lmfn::ModelConfig resolve() const {
    lmfn::ModelConfig c = defaults;
    if (!json_path.empty()) {
      std::ifstream in(json_path);
      if (!in) throw DataError("cannot open config " + json_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw UsageError(json_path + ": " + e.what());
      }
      try {
        lmfn::merge_json(c, j);
      } catch (const std::exception& e) {
        throw UsageError(json_path + ": " + e.what());
      }
    }
    for (const auto& [opt, set] : setters)
      if (opt->count() > 0) set(c);
    try {
      c.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

lmfn::ImagePlane read_png(const fs::path& p) {
  try {
    return lmfn::load_png(p);
  } catch (const lmfn::ImageIoError& e) {
    throw DataError(e.what());
  }
}

void write_png(const fs::path& p, const lmfn::ImagePlane& img) {
  try {
    lmfn::save_png(p, img);
  } catch (const lmfn::ImageIoError& e) {
    throw DataError(e.what());
  }
}

std::vector<fs::path> png_files(const fs::path& dir) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

lmfn::Checkpoint read_checkpoint(const fs::path& p) {
  try {
    return lmfn::load_checkpoint(p);
  } catch (const lmfn::CheckpointError& e) {
    throw DataError(e.what());
  }
}

// ---------------------------------------------------------------- blur

struct BlurArgs {
  std::string in, out, kind = "gaussian";
  double sigma = 1.5;
  int length = 9;
  double angle = -1.0;
  std::uint64_t seed = 0;
};

/// Angle used when --angle is absent: uniform on [0, 180) from the seed.
double seeded_angle(std::uint64_t seed) {
  std::mt19937_64 rng(lmfn::sample_seed(seed, 0));
  return std::uniform_real_distribution<double>(0.0, 180.0)(rng);
}

int run_blur(const BlurArgs& a, const CLI::Option* angle_opt) {
  lmfn::BlurSpec spec;
  spec.seed = a.seed;
  if (a.kind == "gaussian") {
    spec.kind = lmfn::BlurKind::Gaussian;
    spec.sigma = a.sigma;
  } else {
    spec.kind = lmfn::BlurKind::Motion;
    spec.length = a.length;
    spec.angle_deg = angle_opt->count() > 0 ? a.angle : seeded_angle(a.seed);
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const lmfn::ImagePlane sharp = read_png(a.in);
  auto [blurred, target] = lmfn::synthesize_pair(sharp, spec);
  write_png(a.out, blurred);
  std::cout << "wrote " << a.out << " (" << blurred.dims() << ", "
            << (spec.kind == lmfn::BlurKind::Gaussian
                    ? "gaussian sigma=" + std::to_string(spec.sigma)
                    : "motion length=" + std::to_string(spec.length) +
                          " angle=" + std::to_string(spec.angle_deg))
            << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, out;
  std::int64_t steps = 1000;
  int batch = 4;
  int patch = 64;
  int patches = 32;
  double lr = 1e-4;
  int log_every = 10;
  std::uint64_t seed = 0;
};

int run_train(const TrainArgs& a, const ConfigFlags& cf) {
  const lmfn::ModelConfig config = cf.resolve();
  if (a.patch % config.required_multiple() != 0) {
    throw UsageError("--patch " + std::to_string(a.patch) + " must be a multiple of " +
                     std::to_string(config.required_multiple()));
  }
  if (!fs::is_directory(a.data)) throw DataError("--data " + a.data + " is not a directory");
  const auto files = png_files(a.data);
  if (files.empty()) throw DataError("--data " + a.data + " holds no .png files");
  std::vector<lmfn::ImagePlane> images;
  for (const auto& f : files) images.push_back(lmfn::to_rgb(read_png(f)));

  std::vector<lmfn::TrainingPair> pool;
  try {
    pool = lmfn::make_patch_pool(images, a.patch, a.patches, a.seed);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  lmfn::TrainOptions opt;
  opt.steps = a.steps;
  opt.batch_size = a.batch;
  opt.seed = a.seed;
  opt.log_every = a.log_every;
  opt.schedule.base_lr = a.lr;
  opt.on_log = [](const lmfn::TrainLogEntry& e) {
    std::cout << "step " << e.iteration << "  loss " << std::setprecision(6) << e.loss
              << "  lr " << e.lr << '\n';
  };
  lmfn::TrainResult r = lmfn::train(pool, config, opt);
  const fs::path out(a.out);
  try {
    lmfn::save_checkpoint(out, r.final_checkpoint);
    lmfn::save_checkpoint(out.string() + ".best", r.best_checkpoint);
    lmfn::write_loss_csv(out.string() + ".loss.csv", r.trace);
  } catch (const std::exception& e) {
    throw DataError(e.what());
  }
  std::cout << "wrote " << out.string() << ", " << out.string() << ".best, " << out.string()
            << ".loss.csv (" << r.model.total_param_count() << " parameters)\n";
  return kOk;
}

// ---------------------------------------------------------------- infer

int run_infer(const std::string& ckpt, const std::string& in, const std::string& out) {
  const lmfn::Checkpoint ck = read_checkpoint(ckpt);
  lmfn::LmfnModel model = [&] {
    try {
      return lmfn::model_from_checkpoint(ck);
    } catch (const std::exception& e) {
      throw DataError(ckpt + ": " + e.what());
    }
  }();
  const lmfn::ImagePlane img = read_png(in);
  const lmfn::ImagePlane pred = lmfn::deblur(model, img);
  if (!std::all_of(pred.values.begin(), pred.values.end(), [](float v) { return std::isfinite(v); })) {
    throw lmfn::NumericalError("infer: non-finite output");
  }
  write_png(out, pred);
  std::cout << "wrote " << out << " (" << pred.dims() << ")\n";
  return kOk;
}

// ---------------------------------------------------------------- eval

int run_eval(const std::string& pred, const std::string& target, const std::string& csv) {
  std::vector<std::string> names;
  std::vector<lmfn::ImagePlane> preds, targets;
  if (fs::is_directory(pred) != fs::is_directory(target)) {
    throw UsageError("--pred and --target must both be files or both be directories");
  }
  if (fs::is_directory(pred)) {
    for (const auto& p : png_files(pred)) {
      const fs::path t = fs::path(target) / p.filename();
      if (!fs::exists(t)) throw DataError("no target for " + p.string() + " (expected " + t.string() + ")");
      names.push_back(p.filename().string());
      preds.push_back(lmfn::to_rgb(read_png(p)));
      targets.push_back(lmfn::to_rgb(read_png(t)));
    }
    if (names.empty()) throw DataError(pred + " holds no .png files");
  } else {
    names.push_back(fs::path(pred).filename().string());
    preds.push_back(lmfn::to_rgb(read_png(pred)));
    targets.push_back(lmfn::to_rgb(read_png(target)));
  }
  lmfn::EvalReport rep;
  try {
    rep = lmfn::report_pairs(names, preds, targets);
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  std::cout << rep.table();
  if (!csv.empty()) {
    std::ofstream os(csv);
    if (!os) throw DataError("cannot write " + csv);
    rep.write_csv(os);
  }
  return kOk;
}

// ---------------------------------------------------------------- params

int run_params(const ConfigFlags& cf) {
  const lmfn::ModelConfig c = cf.resolve();
  const lmfn::LmfnModel model = lmfn::LmfnModel::build(c);
  const lmfn::ParamCountBreakdown b = lmfn::analytic_param_count(c);
  std::cout << model.summary_table() << '\n';
  auto row = [](const std::string& k, std::size_t v) {
    std::cout << std::left << std::setw(28) << k << std::right << std::setw(12) << v << '\n';
  };
  row("head", b.head);
  row("encoder", b.encoder);
  row("transition", b.transition);
  row("decoder blocks", b.decoder_blocks);
  row("  per decoder block", b.per_decoder_block);
  row("attention (ALFM+ACFM)", b.attention);
  row("merge", b.merge);
  row("tail", b.tail);
  row("total", model.total_param_count());
  const double ratio = static_cast<double>(model.total_param_count()) / lmfn::kReferenceModelSize;
  std::cout << std::left << std::setw(28) << "reference (published)" << std::right << std::setw(12)
            << static_cast<std::size_t>(lmfn::kReferenceModelSize) << '\n'
            << "ratio to reference: " << std::fixed << std::setprecision(3) << ratio << '\n';
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(std::uint64_t seed, int seeds) {
  bool ok = true;
  for (int k = 0; k < seeds; ++k) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
    for (const auto& c : lmfn::run_gradient_suite(s)) {
      const bool pass = c.report.passed();
      ok = ok && pass;
      std::cout << std::left << std::setw(6) << s << std::setw(22) << c.name << std::right
                << std::scientific << std::setprecision(3) << std::setw(12)
                << c.report.max_relative_error() << "  " << (pass ? "ok" : "FAIL") << '\n';
      if (!pass) {
        for (const auto& e : c.report.entries)
          if (e.relative_error >= c.report.tolerance)
            std::cout << "      " << e.name << " rel " << e.relative_error << '\n';
      }
    }
  }
  std::cout << (ok ? "all checks passed" : "gradient check FAILED") << '\n';
  return ok ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lmfn: lightweight multi-scale fusion deblurring network"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  BlurArgs blur;
  CLI::App* c_blur = app.add_subcommand("blur", "blur a PNG with a synthetic kernel");
  c_blur->add_option("--in", blur.in, "sharp input PNG")->required();
  c_blur->add_option("--out", blur.out, "blurred output PNG")->required();
  c_blur->add_option("--kind", blur.kind, "gaussian or motion")
      ->check(CLI::IsMember({"gaussian", "motion"}))
      ->capture_default_str();
  c_blur->add_option("--sigma", blur.sigma, "gaussian standard deviation")->capture_default_str();
  c_blur->add_option("--length", blur.length, "motion length, odd >= 3")->capture_default_str();
  CLI::Option* angle_opt = c_blur->add_option(
      "--angle", blur.angle, "motion angle in degrees [0,180); default: drawn from --seed");
  c_blur->add_option("--seed", blur.seed, "seed for drawn blur fields")->capture_default_str();

  TrainArgs tr;
  ConfigFlags train_cfg;
  CLI::App* c_train = app.add_subcommand("train", "train on synthetically blurred patches");
  c_train->add_option("--data", tr.data, "directory of sharp PNGs")->required();
  c_train->add_option("--out", tr.out, "checkpoint path; also writes <out>.best and <out>.loss.csv")
      ->required();
  c_train->add_option("--steps", tr.steps, "Adam steps")->capture_default_str();
  c_train->add_option("--batch", tr.batch, "batch size")->capture_default_str();
  c_train->add_option("--patch", tr.patch, "square patch side")->capture_default_str();
  c_train->add_option("--patches", tr.patches, "patches in the training pool")->capture_default_str();
  c_train->add_option("--lr", tr.lr, "base learning rate")->capture_default_str();
  c_train->add_option("--log-every", tr.log_every, "loss trace interval")->capture_default_str();
  c_train->add_option("--seed", tr.seed, "seed for init, patches, blur and shuffling")
      ->capture_default_str();
  train_cfg.attach(*c_train);

  std::string ck, in, out;
  CLI::App* c_infer = app.add_subcommand("infer", "deblur one PNG of any size");
  c_infer->add_option("--ckpt", ck, "checkpoint")->required();
  c_infer->add_option("--in", in, "blurred PNG")->required();
  c_infer->add_option("--out", out, "output PNG")->required();

  std::string pred, target, csv;
  CLI::App* c_eval = app.add_subcommand("eval", "PSNR/SSIM of predictions against targets");
  c_eval->add_option("--pred", pred, "PNG or directory")->required();
  c_eval->add_option("--target", target, "PNG or directory (matched by file name)")->required();
  c_eval->add_option("--csv", csv, "also write per-image CSV here");

  ConfigFlags params_cfg;
  CLI::App* c_params = app.add_subcommand("params", "parameter counts per block");
  params_cfg.attach(*c_params);

  std::uint64_t gc_seed = 0;
  int gc_seeds = 1;
  CLI::App* c_grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  c_grad->add_option("--seed", gc_seed, "first seed")->capture_default_str();
  c_grad->add_option("--seeds", gc_seeds, "number of consecutive seeds")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (c_blur->parsed()) return run_blur(blur, angle_opt);
    if (c_train->parsed()) return run_train(tr, train_cfg);
    if (c_infer->parsed()) return run_infer(ck, in, out);
    if (c_eval->parsed()) return run_eval(pred, target, csv);
    if (c_params->parsed()) return run_params(params_cfg);
    if (c_grad->parsed()) return run_gradcheck(gc_seed, gc_seeds);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const lmfn::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
