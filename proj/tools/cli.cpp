#include "cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semfilt/semfilt.hpp"

namespace semfilt::cli {

std::string format6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  std::string s(buf);
  if (s.find_first_of(".einn") == std::string::npos) s += ".0";
  return s;
}

namespace {

namespace fs = std::filesystem;

std::vector<Image> load_corpus(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::Io, "no .ppm/.pgm images in " + dir.string());
  std::vector<Image> images;
  images.reserve(files.size());
  for (const auto& f : files) images.push_back(load_image(f));
  return images;
}

// Appends "--key value" for every key=value line of the file whose flag is
// not already on the command line, giving flag > file > default precedence.
void merge_config_file(std::vector<std::string>& args) {
  const auto it = std::find(args.begin(), args.end(), "--config");
  if (it == args.end() || std::next(it) == args.end()) return;
  const fs::path path = *std::next(it);
  args.erase(it, it + 2);

  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config file " + path.string());
  const auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::MalformedFile,
                  path.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string flag = "--" + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) {
      args.push_back(flag);
      args.push_back(value);
    }
  }
}

struct SemanticFlags {
  double wc = 0.5;
  double we = 2.0;
  double wu = 0.0;
  double edge_threshold = kEdgeKurtosisThreshold;
  double color_threshold = kColorKurtosisThreshold;

  void add(CLI::App* cmd) {
    cmd->add_option("--wc", wc, "weight of color filter responses")->capture_default_str();
    cmd->add_option("--we", we, "weight of edge filter responses")->capture_default_str();
    cmd->add_option("--wu", wu, "weight of unassigned filter responses")->capture_default_str();
    cmd->add_option("--edge-threshold", edge_threshold, "kurtosis above which a filter is an edge")
        ->capture_default_str();
    cmd->add_option("--color-threshold", color_threshold, "kurtosis below which a filter is a color")
        ->capture_default_str();
  }
  SemanticWeights weights() const { return {wc, we, wu}; }
};

}  // namespace

int run(const std::vector<std::string>& input, std::ostream& out, std::ostream& err) {
  CLI::App app{"Interpretable color/edge filter sets learned by a regularized autoencoder", "semfilt"};
  app.require_subcommand(1);
  app.fallthrough();
  int threads = 1;
  auto* threads_opt =
      app.add_option("--threads", threads, "cap on internal parallelism; falls back to SEMFILT_THREADS")
          ->capture_default_str();
  app.set_help_all_flag("--help-all", "help for every subcommand");
  // Handled before parsing; registered so that it shows up in --help.
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value file; command-line flags take precedence");

  // train ------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train an autoencoder on patches from an image corpus");
  std::string corpus, out_path, reg_name = "elastic", penalty_scale = "dataset", costs_path;
  double beta = 5.0, lambda = 3e-3, epsilon = kDefaultZcaEpsilon;
  int per_image = 100, patch_side = 8;
  TrainConfig tcfg;
  train_cmd->add_option("--corpus", corpus, "directory of .ppm/.pgm training images")->required();
  train_cmd->add_option("--out", out_path, "model file to write")->required();
  train_cmd->add_option("--reg", reg_name, "none | l1 | l2 | elastic")->capture_default_str();
  train_cmd->add_option("--beta", beta, "l1 weight")->capture_default_str();
  train_cmd->add_option("--lambda", lambda, "l2 weight")->capture_default_str();
  train_cmd->add_option("--penalty-scale", penalty_scale,
                        "dataset: penalty against the summed error; patch: against the mean error")
      ->check(CLI::IsMember({"dataset", "patch"}))
      ->capture_default_str();
  train_cmd->add_option("--hidden", tcfg.hidden, "number of encoder filters")->capture_default_str();
  train_cmd->add_option("--epochs", tcfg.epochs, "passes over the patches")->capture_default_str();
  train_cmd->add_option("--lr", tcfg.learning_rate, "gradient descent step")->capture_default_str();
  train_cmd->add_option("--batch", tcfg.batch, "mini-batch size, 0 = full batch")->capture_default_str();
  train_cmd->add_option("--init-scale", tcfg.init_scale, "uniform init range, 0 = sqrt(6/(d+h+1))")
      ->capture_default_str();
  train_cmd->add_option("--seed", tcfg.seed, "seed for sampling, init and shuffling")->capture_default_str();
  train_cmd->add_option("--per-image", per_image, "patches drawn per image")->capture_default_str();
  train_cmd->add_option("--patch-side", patch_side, "patch edge in pixels")->capture_default_str();
  train_cmd->add_option("--epsilon", epsilon, "ZCA regularizer")->capture_default_str();
  train_cmd->add_option("--costs", costs_path, "optional file for the per-epoch objective");

  // gradcheck ----------------------------------------------------------------
  auto* grad_cmd = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  int gd = 6, gh = 4, gn = 10;
  std::string greg = "none";
  double gbeta = 5.0, glambda = 3e-3;
  std::uint64_t gseed = 1;
  grad_cmd->add_option("--dim", gd, "input dimension")->capture_default_str();
  grad_cmd->add_option("--hidden", gh, "hidden units")->capture_default_str();
  grad_cmd->add_option("--samples", gn, "patches in the instance")->capture_default_str();
  grad_cmd->add_option("--reg", greg, "none | l1 | l2 | elastic")->capture_default_str();
  grad_cmd->add_option("--beta", gbeta, "l1 weight")->capture_default_str();
  grad_cmd->add_option("--lambda", glambda, "l2 weight")->capture_default_str();
  grad_cmd->add_option("--seed", gseed, "instance seed")->capture_default_str();

  // filters ----------------------------------------------------------------
  auto* filt_cmd = app.add_subcommand("filters", "export the encoder filters as an image grid");
  std::string fmodel, fout, map_image, map_out, subset = "all";
  int cols = 10;
  SemanticFlags fsem;
  filt_cmd->add_option("--model", fmodel, "model file")->required();
  filt_cmd->add_option("--out", fout, "grid image (P6)")->required();
  filt_cmd->add_option("--cols", cols, "tiles per row")->check(CLI::PositiveNumber)->capture_default_str();
  filt_cmd->add_option("--map-image", map_image, "also render a max-activation map of this image");
  filt_cmd->add_option("--map-out", map_out, "where to write the max-activation map");
  filt_cmd->add_option("--subset", subset, "filters competing in the map: all | edge | color")
      ->check(CLI::IsMember({"all", "edge", "color"}))
      ->capture_default_str();
  filt_cmd->add_option("--edge-threshold", fsem.edge_threshold, "edge kurtosis threshold")->capture_default_str();
  filt_cmd->add_option("--color-threshold", fsem.color_threshold, "color kurtosis threshold")->capture_default_str();

  // group ------------------------------------------------------------------
  auto* group_cmd = app.add_subcommand("group", "label every filter as color, edge or unassigned");
  std::string gmodel;
  SemanticFlags gsem;
  group_cmd->add_option("--model", gmodel, "model file")->required();
  group_cmd->add_option("--edge-threshold", gsem.edge_threshold, "edge kurtosis threshold")->capture_default_str();
  group_cmd->add_option("--color-threshold", gsem.color_threshold, "color kurtosis threshold")->capture_default_str();

  // iqa --------------------------------------------------------------------
  auto* iqa_cmd = app.add_subcommand("iqa", "full-reference quality score of a distorted image");
  std::string imodel, ref_path, dist_path;
  SemanticFlags isem;
  iqa_cmd->add_option("--model", imodel, "model file")->required();
  iqa_cmd->add_option("--ref", ref_path, "reference image")->required();
  iqa_cmd->add_option("--dist", dist_path, "distorted image")->required();
  isem.add(iqa_cmd);

  // synth ------------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "render a synthetic traffic-sign data set");
  std::string sout;
  int per_class = 50, k = 4, side = 32;
  std::uint64_t sseed = 1;
  synth_cmd->add_option("--out", sout, "output directory")->required();
  synth_cmd->add_option("--per-class", per_class, "images per class")->capture_default_str();
  synth_cmd->add_option("--k", k, "number of classes (2..8)")->capture_default_str();
  synth_cmd->add_option("--side", side, "image edge in pixels (>= 24)")->capture_default_str();
  synth_cmd->add_option("--seed", sseed, "render seed")->capture_default_str();

  // recog-train ------------------------------------------------------------
  auto* rtrain_cmd = app.add_subcommand("recog-train", "train a softmax classifier on weighted responses");
  std::string rmodel, rdata, rout;
  SemanticFlags rsem;
  rsem.wc = 0.0;
  rsem.we = 1.0;
  SoftmaxConfig scfg;
  rtrain_cmd->add_option("--model", rmodel, "model file")->required();
  rtrain_cmd->add_option("--data", rdata, "directory with labels.txt")->required();
  rtrain_cmd->add_option("--out", rout, "classifier file to write")->required();
  rsem.add(rtrain_cmd);
  rtrain_cmd->add_option("--epochs", scfg.epochs, "passes over the data")->capture_default_str();
  rtrain_cmd->add_option("--lr", scfg.learning_rate, "gradient descent step")->capture_default_str();
  rtrain_cmd->add_option("--l2", scfg.l2, "weight decay")->capture_default_str();
  rtrain_cmd->add_option("--batch", scfg.batch, "mini-batch size, 0 = full batch")->capture_default_str();
  rtrain_cmd->add_option("--seed", scfg.seed, "shuffle seed")->capture_default_str();

  // recog-eval -------------------------------------------------------------
  auto* reval_cmd = app.add_subcommand("recog-eval", "accuracy per decolorization level");
  std::string emodel, eclf, edata;
  std::vector<int> levels{0, 1, 2, 3, 4, 5};
  SemanticFlags esem;
  reval_cmd->add_option("--model", emodel, "model file")->required();
  reval_cmd->add_option("--clf", eclf, "classifier file")->required();
  reval_cmd->add_option("--data", edata, "directory with labels.txt")->required();
  reval_cmd->add_option("--levels", levels, "comma separated decolorization levels")
      ->delimiter(',')
      ->capture_default_str();
  reval_cmd->add_option("--edge-threshold", esem.edge_threshold, "edge kurtosis threshold")->capture_default_str();
  reval_cmd->add_option("--color-threshold", esem.color_threshold, "color kurtosis threshold")->capture_default_str();

  // decolorize -------------------------------------------------------------
  auto* decol_cmd = app.add_subcommand("decolorize", "blend an image toward grayscale");
  std::string din, dout;
  int level = 5;
  decol_cmd->add_option("--in", din, "input image")->required();
  decol_cmd->add_option("--out", dout, "output image")->required();
  decol_cmd->add_option("--level", level, "0 (none) .. 5 (gray)")->check(CLI::Range(0, 5))->capture_default_str();

  std::vector<std::string> args = input;
  try {
    merge_config_file(args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }

  if (threads_opt->count() == 0) {
    if (const char* env = std::getenv("SEMFILT_THREADS"); env && *env) {
      const std::string_view text(env);
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), threads);
      if (ec != std::errc() || ptr != text.data() + text.size()) threads = 0;
    }
  }
  if (threads < 1) {
    err << "error: --threads (or SEMFILT_THREADS) must be a positive integer\n";
    return 2;
  }
  Eigen::setNbThreads(threads);

  try {
    if (train_cmd->parsed()) {
      tcfg.regularizer = Regularizer::make(parse_regularizer_kind(reg_name), beta, lambda);
      tcfg.penalty_scale = penalty_scale == "patch" ? PenaltyScale::PerPatch : PenaltyScale::PerDataset;
      const std::vector<Image> images = load_corpus(corpus);
      const PatchMatrix raw = sample_patches(images, per_image, patch_side, tcfg.seed);
      const ZcaTransform zca = fit_zca(raw, epsilon);
      const PatchMatrix white = apply_zca(zca, raw);
      if (white.count() < tcfg.hidden) {
        err << "warning: fewer patches (" << white.count() << ") than hidden units (" << tcfg.hidden << ")\n";
      }
      const TrainResult result = train(white, zca, tcfg);
      save_model(result.model, out_path);
      if (!costs_path.empty()) {
        std::ofstream costs(costs_path, std::ios::trunc);
        if (!costs) throw Error(ErrorCode::Io, "cannot write " + costs_path);
        for (std::size_t e = 0; e < result.costs.size(); ++e) {
          costs << e << ' ' << textblock::format_double(result.costs[e]) << '\n';
        }
      }
      out << "images " << images.size() << "\npatches " << white.count() << "\ninitial_cost "
          << format6(result.costs.front()) << "\nfinal_cost " << format6(result.costs.back())
          << "\nreconstruction_mse " << format6(reconstruction_error(result.model, white.data)) << '\n';
    } else if (grad_cmd->parsed()) {
      const Regularizer reg = Regularizer::make(parse_regularizer_kind(greg), gbeta, glambda);
      out << "max_relative_error " << format6(gradcheck(gd, gh, gn, reg, gseed)) << '\n';
    } else if (filt_cmd->parsed()) {
      const AutoencoderModel model = load_model(fmodel);
      export_filter_grid(model, fout, cols);
      if (!map_image.empty()) {
        if (map_out.empty()) throw Error(ErrorCode::InvalidArgument, "--map-image needs --map-out");
        const ConceptAssignment a = group_filters(model, fsem.edge_threshold, fsem.color_threshold);
        const std::vector<int> chosen = subset == "all"    ? a.all_filters()
                                        : subset == "edge" ? a.filters(Concept::Edge)
                                                           : a.filters(Concept::Color);
        const ActivationMap map = max_activation_map(model, load_image(map_image), chosen);
        save_image(render_activation_map(model, map), map_out);
      }
    } else if (group_cmd->parsed()) {
      const AutoencoderModel model = load_model(gmodel);
      const ConceptAssignment a = group_filters(model, gsem.edge_threshold, gsem.color_threshold);
      out << "filter kurtosis label\n";
      for (std::size_t j = 0; j < a.size(); ++j) {
        out << j << ' ' << format6(a.kappas[j]) << ' ' << to_string(a.labels[j]) << '\n';
      }
      out << "color " << a.count(Concept::Color) << " edge " << a.count(Concept::Edge)
          << " unassigned " << a.count(Concept::Unassigned) << '\n';
    } else if (iqa_cmd->parsed()) {
      const AutoencoderModel model = load_model(imodel);
      const ConceptAssignment a = group_filters(model, isem.edge_threshold, isem.color_threshold);
      const double score = iqa_score(model, a, isem.weights(), load_image(ref_path), load_image(dist_path));
      out << format6(score) << '\n';
    } else if (synth_cmd->parsed()) {
      save_labeled_set(gen_synthetic_signs(per_class, side, k, sseed), sout);
    } else if (rtrain_cmd->parsed()) {
      const AutoencoderModel model = load_model(rmodel);
      const ConceptAssignment a = group_filters(model, rsem.edge_threshold, rsem.color_threshold);
      const LabeledImageSet data = load_labeled_set(rdata);
      const SemanticWeights w = rsem.weights();
      const Eigen::MatrixXd x = feature_matrix(model, a, w, data.images);
      SoftmaxClassifier clf = train_softmax(x, data.labels, data.class_count, scfg);
      clf.semantic = w;
      save_classifier(clf, rout);
      out << "train_accuracy " << format6(accuracy(clf.predict(x), data.labels)) << '\n';
    } else if (reval_cmd->parsed()) {
      const AutoencoderModel model = load_model(emodel);
      const ConceptAssignment a = group_filters(model, esem.edge_threshold, esem.color_threshold);
      const SoftmaxClassifier clf = load_classifier(eclf);
      const LabeledImageSet data = load_labeled_set(edata);
      const std::vector<double> acc = evaluate_recognition(model, a, clf.semantic, clf, data, levels);
      out << "level accuracy\n";
      for (std::size_t i = 0; i < levels.size(); ++i) out << levels[i] << ' ' << format6(acc[i]) << '\n';
    } else if (decol_cmd->parsed()) {
      save_image(decolorize(load_image(din), level), dout);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}

}  // namespace semfilt::cli
