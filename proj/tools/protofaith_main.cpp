#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "protofaith/bundle_io.hpp"
#include "protofaith/error.hpp"
#include "protofaith/fixtures.hpp"
#include "protofaith/manifest.hpp"
#include "protofaith/metrics.hpp"
#include "protofaith/model.hpp"
#include "protofaith/netpbm.hpp"
#include "protofaith/report.hpp"
#include "protofaith/rng.hpp"
#include "protofaith/runner.hpp"
#include "protofaith/saliency.hpp"

namespace pf = protofaith;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::vector<pf::SaliencyMethod> parse_methods(const std::string& spec) {
  if (spec == "all") {
    return {pf::SaliencyMethod::upsample, pf::SaliencyMethod::smoothgrads,
            pf::SaliencyMethod::prp};
  }
  std::vector<pf::SaliencyMethod> methods;
  std::size_t start = 0;
  while (start <= spec.size()) {
    const std::size_t comma = spec.find(',', start);
    const std::string tok = spec.substr(start, comma == std::string::npos ? comma : comma - start);
    if (!tok.empty()) methods.push_back(pf::parse_saliency_method(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (methods.empty()) throw pf::ArgumentError("no saliency method given");
  return methods;
}

struct EvalOptions {
  std::string bundle_path;
  std::string manifest_path;
  std::string methods = "all";
  std::string role = "both";
  std::string fill = "mean";
  std::string out_dir = "reports";
  double a_max = 0.02;
  double step = 0.001;
  double top_fraction = 0.02;
  double threshold = 0.05;
  double tau = 0.1;
  int samples = 10;
  double noise_ratio = 0.2;
  std::uint64_t seed = 0;
};

struct EvalCase {
  int entry_index = -1;  // manifest entry holding the evaluated image
  std::string image_id;
  std::string role;
  pf::Target target;
  pf::SaliencyMethod method = pf::SaliencyMethod::upsample;
};

struct LoadedData {
  pf::ModelBundle bundle;
  pf::DatasetManifest manifest;
  std::vector<pf::Tensor> images;                      // per entry
  std::vector<std::optional<pf::PixelMask>> segments;  // per entry
};

LoadedData load_inputs(const EvalOptions& opts, bool need_segmentations) {
  LoadedData data;
  data.bundle = pf::load_bundle(opts.bundle_path);
  data.manifest = pf::load_manifest(opts.manifest_path);
  data.images.reserve(data.manifest.entries.size());
  for (const auto& entry : data.manifest.entries) {
    const pf::PpmImage ppm = pf::load_ppm(data.manifest.resolve(entry.image_path));
    bool resized = false;
    data.images.push_back(pf::image_to_tensor(ppm, data.manifest.normalization,
                                              data.bundle.input_h, data.bundle.input_w,
                                              &resized));
    if (resized) {
      std::cerr << "note: resized " << entry.id << " from " << ppm.width << "x" << ppm.height
                << " to " << data.bundle.input_w << "x" << data.bundle.input_h << "\n";
    }
    if (need_segmentations && entry.segmentation_path) {
      const pf::PgmImage pgm = pf::load_pgm(data.manifest.resolve(*entry.segmentation_path));
      data.segments.push_back(
          pf::segmentation_to_mask(pgm, data.bundle.input_h, data.bundle.input_w));
    } else {
      data.segments.push_back(std::nullopt);
    }
  }
  return data;
}

std::vector<EvalCase> enumerate_cases(const LoadedData& data, const EvalOptions& opts,
                                      bool need_segmentations) {
  const auto methods = parse_methods(opts.methods);
  const bool want_test = opts.role == "both" || opts.role == "test-patch";
  const bool want_proto = opts.role == "both" || opts.role == "prototype";
  if (!want_test && !want_proto && opts.role != "prototype" && opts.role != "test-patch") {
    throw pf::ArgumentError("role must be prototype, test-patch or both");
  }

  std::vector<EvalCase> cases;
  if (want_test) {
    // Test images: entries tagged "test", or every entry when none are.
    bool any_test = false;
    for (const auto& e : data.manifest.entries) any_test = any_test || e.split == "test";
    for (std::size_t idx = 0; idx < data.manifest.entries.size(); ++idx) {
      const auto& entry = data.manifest.entries[idx];
      if (any_test && entry.split != "test") continue;
      if (need_segmentations && !data.segments[idx]) continue;
      const auto targets = pf::select_targets(data.bundle, data.images[idx]);
      for (const pf::Target& t : targets) {
        for (pf::SaliencyMethod m : methods) {
          cases.push_back({static_cast<int>(idx), entry.id, "test-patch", t, m});
        }
      }
    }
  }
  if (want_proto) {
    for (int i = 0; i < data.bundle.prototypes.count(); ++i) {
      const auto& prov = data.bundle.prototypes.provenance[static_cast<std::size_t>(i)];
      if (!prov) continue;
      if (prov->image_id < 0 ||
          prov->image_id >= static_cast<int>(data.manifest.entries.size())) {
        throw pf::ArgumentError("prototype " + std::to_string(i) +
                                " provenance image id " + std::to_string(prov->image_id) +
                                " is not in the manifest");
      }
      const std::size_t idx = static_cast<std::size_t>(prov->image_id);
      if (need_segmentations && !data.segments[idx]) continue;
      const pf::Features f = pf::extract_features(data.bundle, data.images[idx]);
      const pf::SimilarityMap map =
          pf::similarity_map(f.chw, data.bundle.prototypes.vectors[static_cast<std::size_t>(i)],
                             data.bundle.simfn, i, data.manifest.entries[idx].id);
      const pf::Target t = pf::max_similarity(map);
      for (pf::SaliencyMethod m : methods) {
        cases.push_back({prov->image_id, data.manifest.entries[idx].id, "prototype", t, m});
      }
    }
  }
  if (cases.empty()) throw pf::ArgumentError("no evaluable cases in the manifest");
  return cases;
}

pf::RunParameters make_params(const std::string& command, const EvalOptions& opts,
                              const pf::ModelBundle& bundle) {
  pf::RunParameters p;
  p.command = command;
  for (pf::SaliencyMethod m : parse_methods(opts.methods)) {
    p.methods.push_back(pf::saliency_method_name(m));
  }
  p.a_max = opts.a_max;
  p.step = opts.step;
  p.top_fraction = opts.top_fraction;
  p.relevance_threshold = opts.threshold;
  p.smoothgrads_samples = opts.samples;
  p.smoothgrads_noise_ratio = opts.noise_ratio;
  p.fill = opts.fill;
  p.seed = opts.seed;
  p.policy = pf::target_policy_name(bundle.policy.kind);
  p.theta = bundle.policy.theta;
  p.tau_threshold = opts.tau;
  return p;
}

void print_summaries(const std::vector<pf::ReportRow>& rows) {
  for (const pf::SummaryRow& s : pf::aggregate_report(rows)) {
    if (s.audc_count > 0) {
      std::cout << "mean AUDC [method=" << s.method << " role=" << s.role
                << " cases=" << s.audc_count << "] = " << pf::format_fixed(s.mean_audc, 1)
                << "\n";
    }
    if (s.relevance_count > 0) {
      std::cout << "irrelevant [method=" << s.method << " role=" << s.role
                << " cases=" << s.relevance_count
                << "] = " << pf::format_fixed(s.irrelevant_pct, 2) << "%\n";
    }
  }
}

enum class EvalKind { deletion, relevance, erf };

int run_eval(EvalKind kind, const EvalOptions& opts) {
  const bool need_seg = kind == EvalKind::relevance;
  const LoadedData data = load_inputs(opts, need_seg);
  const std::vector<EvalCase> cases = enumerate_cases(data, opts, need_seg);
  const pf::DeletionGrid grid{opts.a_max, opts.step};
  const pf::FillPolicy fill = pf::FillPolicy::parse(opts.fill, data.manifest.fill_mean);

  std::vector<pf::ReportRow> rows(cases.size());
  std::vector<pf::DeletionCurve> curves(kind == EvalKind::relevance ? 0 : cases.size());
  std::vector<pf::ErfRow> erf_rows(kind == EvalKind::erf ? cases.size() : 0);

  pf::parallel_for(static_cast<std::int64_t>(cases.size()), pf::thread_count_from_env(),
                   [&](std::int64_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    const EvalCase& c = cases[static_cast<std::size_t>(k)];
    const pf::Tensor& image = data.images[static_cast<std::size_t>(c.entry_index)];
    pf::SmoothgradsOptions sg;
    sg.samples = opts.samples;
    sg.noise_ratio = opts.noise_ratio;
    sg.seed = pf::Rng::derive(opts.seed, static_cast<std::uint64_t>(k));
    pf::SaliencyMap saliency =
        pf::compute_saliency(data.bundle, image, c.target, c.method, sg);
    saliency.image_id = c.image_id;

    pf::ReportRow& row = rows[static_cast<std::size_t>(k)];
    row.image_id = c.image_id;
    row.prototype_index = c.target.prototype_index;
    row.role = c.role;
    row.method = pf::saliency_method_name(c.method);
    row.fill = fill.name();
    row.seed = opts.seed;
    if (kind == EvalKind::relevance) {
      const auto& seg = data.segments[static_cast<std::size_t>(c.entry_index)];
      const pf::RelevanceResult rel =
          pf::relevance(saliency, *seg, opts.top_fraction, opts.threshold);
      row.relevance_fraction = rel.fraction;
      row.irrelevant = rel.irrelevant;
      row.grid_id = "-";
    } else {
      pf::DeletionCurve curve =
          pf::deletion_curve(data.bundle, image, c.target, saliency, grid, fill);
      curve.meta.image_id = c.image_id;
      curve.meta.seed = opts.seed;
      row.audc = curve.audc;
      row.grid_id = grid.id();
      if (kind == EvalKind::erf) {
        const auto a_star = pf::erf_from_curve(curve, opts.tau);
        erf_rows[static_cast<std::size_t>(k)] = {c.image_id, c.target.prototype_index,
                                                 pf::saliency_method_name(c.method), a_star,
                                                 opts.tau};
      }
      curves[static_cast<std::size_t>(k)] = std::move(curve);
    }
    row.elapsed_ms = std::chrono::duration<double, std::milli>(
                         std::chrono::steady_clock::now() - t0).count();
  });

  const std::string command = kind == EvalKind::deletion ? "eval-deletion"
                              : kind == EvalKind::relevance ? "eval-relevance"
                                                            : "erf";
  pf::write_reports(rows, curves, make_params(command, opts, data.bundle), opts.out_dir,
                    erf_rows);
  print_summaries(rows);
  if (kind == EvalKind::erf) {
    for (const pf::ErfRow& r : erf_rows) {
      std::cout << "erf [image=" << r.image_id << " prototype=" << r.prototype_index
                << " method=" << r.method << "] a* = "
                << (r.a_star ? pf::format_fixed(*r.a_star, 4) : std::string("none")) << "\n";
    }
  }
  std::cout << "reports written to " << fs::path(opts.out_dir).string() << "\n";
  return 0;
}

int run_project(const std::string& bundle_path, const std::string& manifest_path,
                const std::string& out_path) {
  pf::ModelBundle bundle = pf::load_bundle(bundle_path);
  const pf::DatasetManifest manifest = pf::load_manifest(manifest_path);

  // Projection set: the train split when present, otherwise every entry.
  bool any_train = false;
  for (const auto& e : manifest.entries) any_train = any_train || e.split == "train";
  std::vector<pf::Tensor> images;
  std::vector<int> entry_of_image;
  for (std::size_t idx = 0; idx < manifest.entries.size(); ++idx) {
    if (any_train && manifest.entries[idx].split != "train") continue;
    const pf::PpmImage ppm = pf::load_ppm(manifest.resolve(manifest.entries[idx].image_path));
    images.push_back(pf::image_to_tensor(ppm, manifest.normalization, bundle.input_h,
                                         bundle.input_w));
    entry_of_image.push_back(static_cast<int>(idx));
  }

  pf::project_prototypes(bundle, images);
  // Provenance refers to positions in the projection list; remap to manifest
  // entry indices so later runs can resolve the images.
  for (auto& prov : bundle.prototypes.provenance) {
    if (prov) prov->image_id = entry_of_image[static_cast<std::size_t>(prov->image_id)];
  }
  pf::save_bundle(bundle, out_path.empty() ? bundle_path : out_path);

  for (int i = 0; i < bundle.prototypes.count(); ++i) {
    const auto& prov = bundle.prototypes.provenance[static_cast<std::size_t>(i)];
    std::cout << "prototype " << i << " -> image " << prov->image_id << " cell (" << prov->h
              << "," << prov->w << ")\n";
  }
  return 0;
}

int run_explain(const std::string& bundle_path, const std::string& image_path,
                const std::string& method_name, const std::string& manifest_path,
                const std::string& out_dir, double top_fraction, int samples,
                double noise_ratio, std::uint64_t seed, const std::string& policy_name,
                double theta) {
  pf::ModelBundle bundle = pf::load_bundle(bundle_path);
  if (!policy_name.empty()) {
    if (policy_name == "protopnet_top10") {
      bundle.policy.kind = pf::TargetPolicyKind::protopnet_top10;
    } else if (policy_name == "prototree_threshold") {
      bundle.policy.kind = pf::TargetPolicyKind::prototree_threshold;
    } else {
      throw pf::ArgumentError("policy must be protopnet_top10 or prototree_threshold");
    }
  }
  if (theta >= 0.0) bundle.policy.theta = theta;
  pf::Normalization norm;
  if (!manifest_path.empty()) {
    norm = pf::load_manifest(manifest_path).normalization;
  }
  const pf::PpmImage ppm = pf::load_ppm(image_path);
  const pf::Tensor image = pf::image_to_tensor(ppm, norm, bundle.input_h, bundle.input_w);

  const pf::SaliencyMethod method = pf::parse_saliency_method(method_name);
  const auto targets = pf::select_targets(bundle, image);
  if (targets.empty()) {
    std::cout << "no prototype passes the target policy for this image\n";
    return 0;
  }

  fs::create_directories(out_dir);
  json boxes = json::array();
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const pf::Target& t = targets[k];
    pf::SmoothgradsOptions sg;
    sg.samples = samples;
    sg.noise_ratio = noise_ratio;
    sg.seed = pf::Rng::derive(seed, k);
    const pf::SaliencyMap saliency = pf::compute_saliency(bundle, image, t, method, sg);

    // Upsampling crops at the 95th percentile; gradient methods keep the
    // top-2% most salient pixels.
    const pf::PixelMask mask = method == pf::SaliencyMethod::upsample
                                   ? pf::percentile_mask(saliency, 0.95)
                                   : pf::top_fraction_mask(saliency, top_fraction);
    const pf::PartPatch patch = pf::crop_patch(image, mask);

    const std::string stem = "saliency_p" + std::to_string(t.prototype_index);
    pf::save_pgm(pf::saliency_to_pgm(saliency), fs::path(out_dir) / (stem + ".pgm"));

    json box;
    box["prototype_index"] = t.prototype_index;
    box["cell"] = {{"h", t.h}, {"w", t.w}};
    box["score"] = t.score;
    box["box"] = {{"top", patch.top},
                  {"left", patch.left},
                  {"bottom", patch.bottom},
                  {"right", patch.right}};
    box["degenerate_full_image"] = patch.full_image();
    box["saliency_pgm"] = stem + ".pgm";
    boxes.push_back(std::move(box));

    std::cout << "prototype " << t.prototype_index << " score "
              << pf::format_fixed(t.score, 4) << " box [" << patch.top << "," << patch.left
              << ")-(" << patch.bottom << "," << patch.right << ")"
              << (patch.full_image() ? " degenerate-full-image" : "") << "\n";
  }

  json doc;
  doc["method"] = method_name;
  doc["image"] = image_path;
  doc["seed"] = seed;
  doc["top_fraction"] = top_fraction;
  doc["smoothgrads_samples"] = samples;
  doc["smoothgrads_noise_ratio"] = noise_ratio;
  doc["patches"] = std::move(boxes);
  std::ofstream out(fs::path(out_dir) / "boxes.json", std::ios::binary);
  if (!out) throw pf::IoError("cannot write boxes.json under " + out_dir);
  out << doc.dump(2) << "\n";
  std::cout << "explanation written to " << out_dir << "\n";
  return 0;
}

pf::PpmImage tensor_to_ppm(const pf::Tensor& image) {
  pf::PpmImage ppm;
  ppm.height = image.dim(1);
  ppm.width = image.dim(2);
  ppm.rgb.resize(static_cast<std::size_t>(ppm.width) * ppm.height * 3);
  for (int y = 0; y < ppm.height; ++y) {
    for (int x = 0; x < ppm.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const float v = std::clamp(image.at(c, y, x), 0.0f, 1.0f);
        ppm.rgb[(static_cast<std::size_t>(y) * ppm.width + x) * 3 + static_cast<std::size_t>(c)] =
            static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  return ppm;
}

int run_gen_fixture(const std::string& kind, std::uint64_t seed, const std::string& out_dir,
                    int image_size) {
  fs::create_directories(fs::path(out_dir) / "images");
  pf::DatasetManifest manifest;
  manifest.base_dir = out_dir;

  if (kind == "planted") {
    const pf::PlantedFixture fx = pf::gen_planted_off_grid(seed, image_size);
    pf::save_bundle(fx.bundle, fs::path(out_dir) / "bundle.pxeb");
    pf::save_ppm(tensor_to_ppm(fx.image), fs::path(out_dir) / "images" / "img_000.ppm");

    fs::create_directories(fs::path(out_dir) / "segmentations");
    pf::PgmImage seg;
    seg.width = image_size;
    seg.height = image_size;
    seg.gray.assign(static_cast<std::size_t>(image_size) * image_size, 0);
    for (int y = 0; y < image_size; ++y) {
      for (int x = 0; x < image_size; ++x) {
        if (fx.object_segmentation.test(y, x)) {
          seg.gray[static_cast<std::size_t>(y) * image_size + x] = 255;
        }
      }
    }
    pf::save_pgm(seg, fs::path(out_dir) / "segmentations" / "seg_000.pgm");

    manifest.entries.push_back(
        {"img_000", "images/img_000.ppm", "segmentations/seg_000.pgm", std::nullopt, "test"});
    pf::save_manifest(manifest, fs::path(out_dir) / "manifest.json");
    std::cout << "planted fixture: region rows [" << fx.region.top << "," << fx.region.bottom
              << ") cols [" << fx.region.left << "," << fx.region.right << "), cell ("
              << fx.cell_h << "," << fx.cell_w << "), s_m = "
              << pf::format_fixed(fx.expected_similarity, 6) << "\n";
  } else if (kind == "random") {
    pf::RandomFixtureOptions opts;
    opts.image_size = std::min(image_size, 32);
    const pf::RandomFixture fx = pf::gen_random(seed, opts);
    pf::save_bundle(fx.bundle, fs::path(out_dir) / "bundle.pxeb");
    pf::save_ppm(tensor_to_ppm(fx.image), fs::path(out_dir) / "images" / "img_000.ppm");
    manifest.entries.push_back({"img_000", "images/img_000.ppm", std::nullopt, std::nullopt,
                                "test"});
    for (int extra = 1; extra <= 2; ++extra) {
      const pf::RandomFixture other =
          pf::gen_random(pf::Rng::derive(seed, static_cast<std::uint64_t>(extra)), opts);
      const std::string name = "img_00" + std::to_string(extra);
      pf::save_ppm(tensor_to_ppm(other.image), fs::path(out_dir) / "images" / (name + ".ppm"));
      manifest.entries.push_back({name, "images/" + name + ".ppm", std::nullopt, std::nullopt,
                                  "train"});
    }
    pf::save_manifest(manifest, fs::path(out_dir) / "manifest.json");
    std::cout << "random fixture with " << fx.bundle.backbone.size() << " layers, "
              << fx.bundle.prototypes.count() << " prototypes\n";
  } else {
    throw pf::ArgumentError("fixture kind must be planted or random");
  }
  std::cout << "fixture written to " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prototype-explanation faithfulness toolkit"};
  app.require_subcommand(1);

  // project
  auto* project = app.add_subcommand("project", "Project prototypes onto the nearest latent "
                                                "vectors of a projection set");
  std::string pr_bundle, pr_manifest, pr_out;
  project->add_option("bundle", pr_bundle, "model bundle (.pxeb)")->required();
  project->add_option("manifest", pr_manifest, "dataset manifest (.json)")->required();
  project->add_option("--out", pr_out, "output bundle path (default: overwrite input)");

  // explain
  auto* explain = app.add_subcommand("explain", "Emit part-visualisation patches for one image");
  std::string ex_bundle, ex_image, ex_method = "upsample", ex_manifest, ex_out = "explanation";
  std::string ex_policy;
  double ex_a = 0.02, ex_noise = 0.2, ex_theta = -1.0;
  int ex_samples = 10;
  std::uint64_t ex_seed = 0;
  explain->add_option("bundle", ex_bundle)->required();
  explain->add_option("image", ex_image, "input image (binary PPM)")->required();
  explain->add_option("--method", ex_method, "upsample|smoothgrads|prp");
  explain->add_option("--manifest", ex_manifest, "manifest supplying normalization");
  explain->add_option("--out-dir", ex_out);
  explain->add_option("--a", ex_a, "top fraction for gradient-method crops");
  explain->add_option("--samples", ex_samples, "smoothgrads noisy samples");
  explain->add_option("--noise-ratio", ex_noise);
  explain->add_option("--seed", ex_seed);
  explain->add_option("--policy", ex_policy,
                      "override the bundle's target policy (protopnet_top10|prototree_threshold)");
  explain->add_option("--theta", ex_theta, "override the prototree_threshold theta");

  // shared eval options
  EvalOptions del, rel, erf;
  auto add_common = [](CLI::App* cmd, EvalOptions& o) {
    cmd->add_option("bundle", o.bundle_path)->required();
    cmd->add_option("manifest", o.manifest_path)->required();
    cmd->add_option("--method", o.methods, "upsample|smoothgrads|prp|all");
    cmd->add_option("--role", o.role, "prototype|test-patch|both");
    cmd->add_option("--fill", o.fill, "mean|zero|gray");
    cmd->add_option("--seed", o.seed);
    cmd->add_option("--out-dir", o.out_dir);
    cmd->add_option("--samples", o.samples, "smoothgrads noisy samples");
    cmd->add_option("--noise-ratio", o.noise_ratio);
  };

  auto* eval_del = app.add_subcommand("eval-deletion", "Deletion curves and AUDC");
  add_common(eval_del, del);
  eval_del->add_option("--amax", del.a_max);
  eval_del->add_option("--step", del.step);

  auto* eval_rel = app.add_subcommand("eval-relevance",
                                      "Intersection of salient pixels with segmentations");
  add_common(eval_rel, rel);
  eval_rel->add_option("--a", rel.top_fraction, "salient-pixel fraction");
  eval_rel->add_option("--threshold", rel.threshold, "irrelevance threshold");

  auto* eval_erf = app.add_subcommand("erf", "Effective-receptive-field estimation");
  add_common(eval_erf, erf);
  erf.a_max = 0.10;
  erf.step = 0.005;
  eval_erf->add_option("--amax", erf.a_max);
  eval_erf->add_option("--step", erf.step);
  eval_erf->add_option("--tau", erf.tau, "similarity-ratio threshold");

  // gen-fixture
  auto* gen = app.add_subcommand("gen-fixture", "Generate a synthetic model + dataset");
  std::string gen_kind = "planted", gen_out = "fixture";
  std::uint64_t gen_seed = 0;
  int gen_size = 20;
  gen->add_option("--kind", gen_kind, "planted|random");
  gen->add_option("--seed", gen_seed);
  gen->add_option("--out-dir", gen_out);
  gen->add_option("--image-size", gen_size);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (project->parsed()) return run_project(pr_bundle, pr_manifest, pr_out);
    if (explain->parsed()) {
      return run_explain(ex_bundle, ex_image, ex_method, ex_manifest, ex_out, ex_a, ex_samples,
                         ex_noise, ex_seed, ex_policy, ex_theta);
    }
    if (eval_del->parsed()) return run_eval(EvalKind::deletion, del);
    if (eval_rel->parsed()) return run_eval(EvalKind::relevance, rel);
    if (eval_erf->parsed()) return run_eval(EvalKind::erf, erf);
    if (gen->parsed()) return run_gen_fixture(gen_kind, gen_seed, gen_out, gen_size);
  } catch (const pf::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  } catch (const pf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
