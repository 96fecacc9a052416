#include "njet/cli.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "njet/data.hpp"
#include "njet/fit.hpp"
#include "njet/gradcheck.hpp"
#include "njet/image_io.hpp"
#include "njet/train.hpp"

namespace njet::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

/// flags > --config JSON > built-in defaults. Call after parse: a field keeps
/// its parsed value when the flag appeared, otherwise the JSON value wins.
template <typename T>
void json_fallback(const json& j, const std::string& key, const CLI::Option* opt,
                   T& var) {
  if (opt != nullptr && opt->count() > 0) return;
  if (j.contains(key)) var = j.at(key).get<T>();
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  in >> j;
  if (!j.is_object()) throw std::runtime_error("config file must hold a JSON object");
  return j;
}

fs::path ensure_out_dir(const std::string& out) {
  require(!out.empty(), "--out directory is required");
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void echo_config(const fs::path& dir, const json& effective) {
  write_text(dir / "config.json", effective.dump(2) + "\n");
}

void set_threads(int threads) {
  require(threads >= 1, "--threads must be at least 1");
#ifdef _OPENMP
  omp_set_num_threads(threads);
#else
  (void)threads;
#endif
}

// ------------------------------------------------------------------- datasets

struct DataOptions {
  std::string data = "blobs";  // blobs | idx
  double scale = 1.0;
  Index train_count = 2000;
  Index eval_count = 500;
  int base_size = 28;  // blob image size at scale 1
  double blob_noise = 0.20;
  std::string data_dir;

  CLI::Option *data_opt = nullptr, *scale_opt = nullptr, *train_count_opt = nullptr,
              *eval_count_opt = nullptr, *base_size_opt = nullptr,
              *blob_noise_opt = nullptr, *data_dir_opt = nullptr;

  void attach(CLI::App& app) {
    data_opt = app.add_option("--data", data, "Dataset: blobs | idx")
                   ->check(CLI::IsMember({"blobs", "idx"}));
    scale_opt = app.add_option("--scale", scale, "Input scale factor");
    train_count_opt =
        app.add_option("--train-count", train_count, "Training sample count");
    eval_count_opt =
        app.add_option("--eval-count", eval_count, "Evaluation sample count");
    base_size_opt = app.add_option("--image-size", base_size,
                                   "Blob image size at scale 1 (scaled with --scale)");
    blob_noise_opt = app.add_option("--blob-noise", blob_noise,
                                    "Blob sensor-noise amplitude (uniform)");
    data_dir_opt = app.add_option(
        "--data-dir", data_dir, "IDX dataset root (default: env NJET_DATA_DIR)");
  }

  void fallback(const json& j) {
    json_fallback(j, "data", data_opt, data);
    json_fallback(j, "scale", scale_opt, scale);
    json_fallback(j, "train_count", train_count_opt, train_count);
    json_fallback(j, "eval_count", eval_count_opt, eval_count);
    json_fallback(j, "image_size", base_size_opt, base_size);
    json_fallback(j, "blob_noise", blob_noise_opt, blob_noise);
    json_fallback(j, "data_dir", data_dir_opt, data_dir);
  }

  json echo() const {
    return {{"data", data},
            {"scale", scale},
            {"train_count", train_count},
            {"eval_count", eval_count},
            {"image_size", base_size},
            {"blob_noise", blob_noise},
            {"data_dir", data_dir}};
  }

  std::string resolved_dir() const {
    if (!data_dir.empty()) return data_dir;
    if (const char* env = std::getenv("NJET_DATA_DIR")) return env;
    throw std::runtime_error(
        "IDX data requested but neither --data-dir nor NJET_DATA_DIR is set");
  }

  /// (train, eval) pair at the requested scale.
  std::pair<LabeledDataset, LabeledDataset> build(std::uint64_t seed) const {
    require(scale > 0.0, "--scale must be positive");
    require(train_count >= 1 && eval_count >= 1, "dataset counts must be positive");
    if (data == "blobs") {
      // Rendering natively at the requested scale images the same scene
      // family with a finer sensor: blob geometry dilates with the factor
      // while sensor noise stays at pixel scale.
      const int size = static_cast<int>(std::lround(base_size * scale));
      // Offset keeps the data stream independent of the training stream.
      LabeledDataset all = synth_blobs(train_count + eval_count, size, scale,
                                       seed + 1000003, blob_noise);
      return {all.slice(0, train_count), all.slice(train_count, eval_count)};
    }
    const fs::path root(resolved_dir());
    LabeledDataset train_set =
        load_idx((root / "train-images-idx3-ubyte").string(),
                 (root / "train-labels-idx1-ubyte").string());
    LabeledDataset eval_set = load_idx((root / "t10k-images-idx3-ubyte").string(),
                                       (root / "t10k-labels-idx1-ubyte").string());
    require(train_count <= train_set.count && eval_count <= eval_set.count,
            "requested more samples than the IDX files hold");
    train_set = train_set.slice(0, train_count);
    eval_set = eval_set.slice(0, eval_count);
    if (scale != 1.0) {
      train_set = make_multiscale(train_set, scale);
      eval_set = make_multiscale(eval_set, scale);
    }
    return {train_set, eval_set};
  }
};

// ---------------------------------------------------------------- arch options

struct ArchOptions {
  std::string arch = "toy";
  bool standard = false;  // standard fixed-size convs instead of N-Jet
  int order = 0;          // 0 = auto
  double extent_k = 2.0;
  int conv_size = 3;
  double subsample_r = 0.0;
  int toy_pool = 0;  // 0 = auto: round(2 * scale)
  Index c1 = 8, c2 = 16;

  CLI::Option *arch_opt = nullptr, *standard_opt = nullptr, *order_opt = nullptr,
              *k_opt = nullptr, *conv_size_opt = nullptr, *subsample_opt = nullptr,
              *pool_opt = nullptr, *c1_opt = nullptr, *c2_opt = nullptr;

  void attach(CLI::App& app) {
    arch_opt = app.add_option("--arch", arch, "Architecture: toy | two_layer | four_layer")
                   ->check(CLI::IsMember({"toy", "two_layer", "four_layer"}));
    standard_opt = app.add_flag("--standard", standard,
                                "Use fixed-size standard convolutions (baseline)");
    order_opt = app.add_option("--order", order,
                               "Basis order (0 = auto: 4 for toy, 3 otherwise)");
    k_opt = app.add_option("--k", extent_k, "Basis spatial extent factor");
    conv_size_opt =
        app.add_option("--conv-size", conv_size, "Standard conv filter size");
    subsample_opt = app.add_option("--subsample-r", subsample_r,
                                   "Safe-subsampling r (0 = disabled)");
    pool_opt = app.add_option("--toy-pool", toy_pool,
                              "Toy max-pool window (0 = auto: round(2*scale))");
    c1_opt = app.add_option("--c1", c1, "First-stage channel width");
    c2_opt = app.add_option("--c2", c2, "Second-stage channel width");
  }

  void fallback(const json& j) {
    json_fallback(j, "arch", arch_opt, arch);
    json_fallback(j, "standard", standard_opt, standard);
    json_fallback(j, "order", order_opt, order);
    json_fallback(j, "k", k_opt, extent_k);
    json_fallback(j, "conv_size", conv_size_opt, conv_size);
    json_fallback(j, "subsample_r", subsample_opt, subsample_r);
    json_fallback(j, "toy_pool", pool_opt, toy_pool);
    json_fallback(j, "c1", c1_opt, c1);
    json_fallback(j, "c2", c2_opt, c2);
  }

  json echo() const {
    return {{"arch", arch},        {"standard", standard},
            {"order", order},      {"k", extent_k},
            {"conv_size", conv_size}, {"subsample_r", subsample_r},
            {"toy_pool", toy_pool},   {"c1", c1},
            {"c2", c2}};
  }

  ArchSpec to_spec(const LabeledDataset& sample, double scale) const {
    ArchSpec spec;
    spec.arch = arch;
    spec.njet = !standard;
    spec.order = order;
    spec.extent_k = extent_k;
    spec.conv_size = conv_size;
    spec.in_channels = sample.channels;
    spec.image_h = sample.height;
    spec.image_w = sample.width;
    spec.class_count = sample.class_count;
    spec.subsample_r = subsample_r;
    spec.toy_pool = toy_pool > 0
                        ? toy_pool
                        : std::max(1, static_cast<int>(std::lround(2.0 * scale)));
    spec.c1 = c1;
    spec.c2 = c2;
    return spec;
  }
};

// -------------------------------------------------------------------- commands

int cmd_basis(int order, double sigma, double extent_k, int max_size,
              const std::string& out) {
  const fs::path dir = ensure_out_dir(out);
  SampleOptions opts;
  opts.max_size = max_size;
  const BasisStack stack = sample_basis({order, sigma, extent_k}, opts);

  std::string manifest = "index,i,j,size,min,max,sum,file\n";
  for (Index m = 0; m < stack.count(); ++m) {
    const auto [i, j] = stack.index_map[static_cast<std::size_t>(m)];
    char name[64];
    std::snprintf(name, sizeof name, "basis_%02d_dx%d_dy%d.pgm", int(m), i, j);
    write_pgm_centered((dir / name).string(), stack.filter(m));
    char line[256];
    std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.17g,%.17g,%.17g,%s\n", int(m),
                  i, j, stack.size, stack.filter(m).minCoeff(),
                  stack.filter(m).maxCoeff(), stack.filter(m).sum(), name);
    manifest += line;
  }
  write_text(dir / "manifest.csv", manifest);
  echo_config(dir, {{"command", "basis"},
                    {"order", order},
                    {"sigma", sigma},
                    {"k", extent_k},
                    {"max_size", max_size}});
  std::cout << stack.count() << " basis filters (size " << stack.size
            << ") written to " << dir.string() << "\n";
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, const std::string& out) {
  const std::vector<GradCheckResult> results = run_gradchecks(seed);
  bool ok = true;
  std::string csv = "name,max_rel_err\n";
  for (const auto& r : results) {
    std::printf("%-28s %.3e\n", r.name.c_str(), r.max_rel_err);
    csv += r.name + "," + format("%.17g", r.max_rel_err) + "\n";
    ok = ok && r.max_rel_err < 1e-4;
  }
  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    write_text(dir / "gradcheck.csv", csv);
    echo_config(dir, {{"command", "gradcheck"}, {"seed", seed}});
  }
  std::cout << (ok ? "gradcheck PASS" : "gradcheck FAIL") << "\n";
  return ok ? 0 : 2;
}

int cmd_fit(const std::string& patch_path, double sigma, int order, double extent_k,
            int border, int sweep_orders, const std::string& out) {
  const fs::path dir = ensure_out_dir(out);
  const Image patch = read_pnm(patch_path);

  std::string csv = "order,sigma,residual\n";
  const int max_order = std::max(order, sweep_orders);
  for (int n = sweep_orders > 0 ? 0 : order; n <= max_order; ++n) {
    const PatchFit fit = fit_patch(patch, sigma, n, extent_k, border);
    csv += std::to_string(n) + "," + format("%.17g", sigma) + "," +
           format("%.17g", fit.residual) + "\n";
    if (n == order) {
      const Image recon = reconstruct(fit.alphas, sigma, n, extent_k,
                                      static_cast<int>(patch.height));
      const std::string name =
          patch.channels == 3 ? "reconstruction.ppm" : "reconstruction.pgm";
      if (patch.channels == 3)
        write_ppm((dir / name).string(), recon);
      else
        write_pgm((dir / name).string(), recon);
    }
  }
  write_text(dir / "fit.csv", csv);
  echo_config(dir, {{"command", "fit"},
                    {"patch", patch_path},
                    {"sigma", sigma},
                    {"order", order},
                    {"k", extent_k},
                    {"border", border},
                    {"sweep_orders", sweep_orders}});
  std::cout << csv;
  return 0;
}

int cmd_train(const DataOptions& data, const ArchOptions& arch, TrainConfig config,
              int threads, const std::string& out, const json& effective) {
  const fs::path dir = ensure_out_dir(out);
  set_threads(threads);
  config.arch = arch.arch;
  config.subsample_r = arch.subsample_r;
  config.validate();

  auto [train_set, eval_set] = data.build(config.seed);
  Rng rng(config.seed);
  Network net = build_network(arch.to_spec(train_set, data.scale), rng);
  const SigmaTrace trace = train(net, train_set, eval_set, config, rng);

  std::ofstream csv(dir / "sigma_trace.csv", std::ios::binary);
  trace.write_csv(csv);
  csv.close();
  net.save((dir / "model.njet").string());
  echo_config(dir, effective);

  const double final_acc =
      trace.rows.empty() ? 0.0 : trace.rows.back().eval_accuracy;
  std::cout << "trained " << arch.arch << " for " << config.epochs
            << " epochs; final eval accuracy " << format("%.4f", final_acc)
            << "\n";
  for (std::size_t i = 0; i < net.njet_layers.size(); ++i)
    std::cout << "layer " << i << " sigma "
              << format("%.6f", net.njet_layers[i]->sigma()) << " (size "
              << net.njet_layers[i]->current_size() << ")\n";
  return 0;
}

int cmd_eval(const std::string& model, const DataOptions& data,
             std::uint64_t seed, Index batch, int threads,
             const std::string& out) {
  set_threads(threads);
  Network net = Network::load(model);
  auto [train_set, eval_set] = data.build(seed);
  (void)train_set;
  require(eval_set.height == net.spec.image_h && eval_set.width == net.spec.image_w,
          "eval: dataset resolution does not match the checkpointed model");
  const double acc = evaluate(net, eval_set, batch);
  std::cout << "accuracy " << format("%.6f", acc) << " on " << eval_set.count
            << " samples\n";
  if (!out.empty()) {
    const fs::path dir = ensure_out_dir(out);
    write_text(dir / "eval.csv", "accuracy,count\n" + format("%.17g", acc) + "," +
                                     std::to_string(eval_set.count) + "\n");
    echo_config(dir, {{"command", "eval"},
                      {"model", model},
                      {"seed", seed},
                      {"batch", batch},
                      {"data", data.echo()}});
  }
  return 0;
}

int cmd_export_filters(const std::string& model, int layer_filter,
                       const std::string& out) {
  const fs::path dir = ensure_out_dir(out);
  Network net = Network::load(model);
  std::string manifest = "layer,out,in,size,min,max,file\n";
  int exported = 0;

  for (std::size_t li = 0; li < net.conv_layers.size(); ++li) {
    if (layer_filter >= 0 && int(li) != layer_filter) continue;
    Index out_c, in_c;
    int size;
    RowMatrixXd filters;
    if (auto* nj = dynamic_cast<NJetConvLayer*>(net.conv_layers[li])) {
      const BasisStack basis =
          sample_basis({nj->order, nj->sigma(), nj->extent_k});
      const SynthesizedFilters synth = synthesize(nj->alphas, basis);
      filters = synth.filters;
      out_c = nj->out_channels;
      in_c = nj->in_channels;
      size = synth.size;
    } else {
      auto* conv = static_cast<Conv2dLayer*>(net.conv_layers[li]);
      filters = conv->weights;
      out_c = conv->out_channels;
      in_c = conv->in_channels;
      size = conv->size;
    }
    for (Index o = 0; o < out_c; ++o)
      for (Index c = 0; c < in_c; ++c) {
        char name[96];
        std::snprintf(name, sizeof name, "layer%02d_out%02d_in%02d.pgm", int(li),
                      int(o), int(c));
        ConstGridMap grid(filters.row(o * in_c + c).data(), size, size);
        write_pgm_centered((dir / name).string(), grid);
        char line[256];
        std::snprintf(line, sizeof line, "%d,%d,%d,%d,%.17g,%.17g,%s\n", int(li),
                      int(o), int(c), size, grid.minCoeff(), grid.maxCoeff(), name);
        manifest += line;
        ++exported;
      }
  }
  require(exported > 0, "export-filters: no matching convolution layer");
  write_text(dir / "manifest.csv", manifest);
  echo_config(dir, {{"command", "export-filters"},
                    {"model", model},
                    {"layer", layer_filter}});
  std::cout << exported << " filters written to " << dir.string() << "\n";
  return 0;
}

int cmd_erf(const std::string& model, const DataOptions& data, std::uint64_t seed,
            Index sample, Index y, Index x, const std::string& out) {
  const fs::path dir = ensure_out_dir(out);
  Network net = Network::load(model);
  auto [train_set, eval_set] = data.build(seed);
  (void)train_set;
  require(sample >= 0 && sample < eval_set.count, "erf: sample index out of range");
  require(eval_set.height == net.spec.image_h && eval_set.width == net.spec.image_w,
          "erf: dataset resolution does not match the checkpointed model");
  FeatureMap input = eval_set.batch(sample, 1);

  // Default to the center of the last spatial feature map.
  FeatureMap probe = input;
  for (Index i = 0; i < net.flatten_index; ++i)
    probe = net.layers[i]->forward(probe, false);
  if (y < 0) y = probe.height / 2;
  if (x < 0) x = probe.width / 2;

  const MatrixXd map = net.erf_map(input, y, x);
  const double moment = erf_second_moment(map);

  write_pgm_centered((dir / "erf.pgm").string(),
                     ConstGridMap(map.data(), map.rows(), map.cols()));
  write_text(dir / "erf.csv",
             "y,x,second_moment,mass\n" + std::to_string(y) + "," +
                 std::to_string(x) + "," + format("%.17g", moment) + "," +
                 format("%.17g", map.sum()) + "\n");
  echo_config(dir, {{"command", "erf"},
                    {"model", model},
                    {"seed", seed},
                    {"sample", sample},
                    {"y", y},
                    {"x", x},
                    {"data", data.echo()}});
  std::cout << "erf second moment " << format("%.6f", moment) << "\n";
  return 0;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"N-Jet structured receptive field filters: learned Gaussian "
               "derivative bases with trainable scale"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Print help for every subcommand");

  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON config file (flags override its values)")
      ->expected(1);

  // basis ---------------------------------------------------------------
  auto* basis_cmd = app.add_subcommand("basis", "Render the Gaussian derivative basis");
  int basis_order = 3, basis_max_size = 63;
  double basis_sigma = 1.0, basis_k = 2.0;
  std::string basis_out;
  auto* bo = basis_cmd->add_option("--order", basis_order, "Basis order N");
  auto* bs = basis_cmd->add_option("--sigma", basis_sigma, "Basis scale sigma");
  auto* bk = basis_cmd->add_option("--k", basis_k, "Spatial extent factor");
  auto* bm = basis_cmd->add_option("--max-size", basis_max_size, "Filter size cap");
  basis_cmd->add_option("--out", basis_out, "Output directory")->required();

  // gradcheck -----------------------------------------------------------
  auto* grad_cmd =
      app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  std::uint64_t grad_seed = 7;
  std::string grad_out;
  auto* gs = grad_cmd->add_option("--seed", grad_seed, "Random seed");
  grad_cmd->add_option("--out", grad_out, "Optional output directory for the CSV");

  // fit -----------------------------------------------------------------
  auto* fit_cmd = app.add_subcommand("fit", "Least-squares fit of alphas to a patch");
  std::string fit_patch_path, fit_out;
  double fit_sigma = 2.0, fit_k = 2.0;
  int fit_order = 3, fit_border = 1, fit_sweep = 0;
  fit_cmd->add_option("--patch", fit_patch_path, "Input PGM/PPM patch")->required();
  auto* fs_ = fit_cmd->add_option("--sigma", fit_sigma, "Basis scale sigma");
  auto* fo = fit_cmd->add_option("--order", fit_order, "Basis order N");
  auto* fk = fit_cmd->add_option("--k", fit_k, "Spatial extent factor");
  auto* fb = fit_cmd->add_option("--border", fit_border, "Border pixels to ignore");
  auto* fw = fit_cmd->add_option("--sweep-orders", fit_sweep,
                                 "Also sweep orders 0..MAX into fit.csv");
  fit_cmd->add_option("--out", fit_out, "Output directory")->required();

  // train ---------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train an architecture");
  DataOptions train_data;
  ArchOptions train_arch;
  TrainConfig tc;
  int train_threads = 1;
  std::string train_out;
  train_data.attach(*train_cmd);
  train_arch.attach(*train_cmd);
  auto* t_lr = train_cmd->add_option("--lr", tc.learning_rate, "Learning rate");
  auto* t_mom = train_cmd->add_option("--momentum", tc.momentum, "SGD momentum");
  auto* t_ep = train_cmd->add_option("--epochs", tc.epochs, "Training epochs");
  auto* t_bs = train_cmd->add_option("--batch", tc.batch_size, "Mini-batch size");
  auto* t_l2 = train_cmd->add_option("--alpha-l2", tc.alpha_l2,
                                     "L2 weight decay on alpha coefficients");
  auto* t_sl = train_cmd->add_option("--sigma-lr-scale", tc.sigma_lr_scale,
                                     "Learning-rate multiplier for log_sigma");
  auto* t_sw = train_cmd->add_option(
      "--sigma-warmup", tc.sigma_warmup_epochs,
      "Epochs to hold sigma fixed before it starts adapting");
  auto* t_seed = train_cmd->add_option("--seed", tc.seed, "Random seed");
  auto* t_thr = train_cmd->add_option("--threads", train_threads, "OpenMP threads");
  train_cmd->add_option("--out", train_out, "Output directory")->required();

  // eval ----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint");
  DataOptions eval_data;
  std::string eval_model, eval_out;
  std::uint64_t eval_seed = 0;
  Index eval_batch = 64;
  int eval_threads = 1;
  eval_data.attach(*eval_cmd);
  eval_cmd->add_option("--model", eval_model, "Checkpoint file")->required();
  auto* e_seed = eval_cmd->add_option(
      "--seed", eval_seed, "Dataset seed (match the training seed for blobs)");
  auto* e_bs = eval_cmd->add_option("--batch", eval_batch, "Evaluation batch size");
  auto* e_thr = eval_cmd->add_option("--threads", eval_threads, "OpenMP threads");
  eval_cmd->add_option("--out", eval_out, "Optional output directory");

  // export-filters ------------------------------------------------------
  auto* export_cmd =
      app.add_subcommand("export-filters", "Render learned filters as images");
  std::string export_model, export_out;
  int export_layer = -1;
  export_cmd->add_option("--model", export_model, "Checkpoint file")->required();
  export_cmd->add_option("--layer", export_layer,
                         "Conv layer index (-1 = all layers)");
  export_cmd->add_option("--out", export_out, "Output directory")->required();

  // erf -----------------------------------------------------------------
  auto* erf_cmd =
      app.add_subcommand("erf", "Effective receptive field of a trained model");
  DataOptions erf_data;
  std::string erf_model, erf_out;
  std::uint64_t erf_seed = 0;
  Index erf_sample = 0, erf_y = -1, erf_x = -1;
  erf_data.attach(*erf_cmd);
  erf_cmd->add_option("--model", erf_model, "Checkpoint file")->required();
  auto* r_seed = erf_cmd->add_option(
      "--seed", erf_seed, "Dataset seed (match the training seed for blobs)");
  erf_cmd->add_option("--sample", erf_sample, "Dataset sample index");
  erf_cmd->add_option("--y", erf_y, "Output row (-1 = center)");
  erf_cmd->add_option("--x", erf_x, "Output column (-1 = center)");
  erf_cmd->add_option("--out", erf_out, "Output directory")->required();

  // Lets global options (--config) appear after the subcommand name too.
  for (CLI::App* sub : {basis_cmd, grad_cmd, fit_cmd, train_cmd, eval_cmd,
                        export_cmd, erf_cmd})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    const json j = load_config(config_path);

    if (*basis_cmd) {
      json_fallback(j, "order", bo, basis_order);
      json_fallback(j, "sigma", bs, basis_sigma);
      json_fallback(j, "k", bk, basis_k);
      json_fallback(j, "max_size", bm, basis_max_size);
      return cmd_basis(basis_order, basis_sigma, basis_k, basis_max_size,
                       basis_out);
    }
    if (*grad_cmd) {
      json_fallback(j, "seed", gs, grad_seed);
      return cmd_gradcheck(grad_seed, grad_out);
    }
    if (*fit_cmd) {
      json_fallback(j, "sigma", fs_, fit_sigma);
      json_fallback(j, "order", fo, fit_order);
      json_fallback(j, "k", fk, fit_k);
      json_fallback(j, "border", fb, fit_border);
      json_fallback(j, "sweep_orders", fw, fit_sweep);
      return cmd_fit(fit_patch_path, fit_sigma, fit_order, fit_k, fit_border,
                     fit_sweep, fit_out);
    }
    if (*train_cmd) {
      train_data.fallback(j);
      train_arch.fallback(j);
      json_fallback(j, "lr", t_lr, tc.learning_rate);
      json_fallback(j, "momentum", t_mom, tc.momentum);
      json_fallback(j, "epochs", t_ep, tc.epochs);
      json_fallback(j, "batch", t_bs, tc.batch_size);
      json_fallback(j, "alpha_l2", t_l2, tc.alpha_l2);
      json_fallback(j, "sigma_lr_scale", t_sl, tc.sigma_lr_scale);
      json_fallback(j, "sigma_warmup", t_sw, tc.sigma_warmup_epochs);
      json_fallback(j, "seed", t_seed, tc.seed);
      json_fallback(j, "threads", t_thr, train_threads);
      json effective = {{"command", "train"},
                        {"lr", tc.learning_rate},
                        {"momentum", tc.momentum},
                        {"epochs", tc.epochs},
                        {"batch", tc.batch_size},
                        {"alpha_l2", tc.alpha_l2},
                        {"sigma_lr_scale", tc.sigma_lr_scale},
                        {"sigma_warmup", tc.sigma_warmup_epochs},
                        {"seed", tc.seed},
                        {"threads", train_threads},
                        {"data", train_data.echo()},
                        {"arch", train_arch.echo()}};
      return cmd_train(train_data, train_arch, tc, train_threads, train_out,
                       effective);
    }
    if (*eval_cmd) {
      eval_data.fallback(j);
      json_fallback(j, "seed", e_seed, eval_seed);
      json_fallback(j, "batch", e_bs, eval_batch);
      json_fallback(j, "threads", e_thr, eval_threads);
      return cmd_eval(eval_model, eval_data, eval_seed, eval_batch, eval_threads,
                      eval_out);
    }
    if (*export_cmd)
      return cmd_export_filters(export_model, export_layer, export_out);
    if (*erf_cmd) {
      erf_data.fallback(j);
      json_fallback(j, "seed", r_seed, erf_seed);
      return cmd_erf(erf_model, erf_data, erf_seed, erf_sample, erf_y, erf_x,
                     erf_out);
    }
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    // Bad values that slipped past flag parsing are usage errors.
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace njet::cli
