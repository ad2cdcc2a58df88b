#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "protofaith/metrics.hpp"

namespace protofaith {

/// One evaluated (image, prototype, method) case. `elapsed_ms` is runtime
/// bookkeeping only and is never serialized, so report files stay
/// byte-identical across runs with the same seed.
struct ReportRow {
  std::string image_id;
  int prototype_index = -1;
  std::string role;    // "prototype" | "test-patch"
  std::string method;  // "upsample" | "smoothgrads" | "prp"
  std::optional<double> audc;
  std::optional<double> relevance_fraction;
  std::optional<bool> irrelevant;
  std::string grid_id;
  std::string fill;
  std::uint64_t seed = 0;
  double elapsed_ms = 0.0;
};

/// Parameters echoed into summary.json so any case can be re-run
/// bit-identically.
struct RunParameters {
  std::string command;
  std::vector<std::string> methods;
  double a_max = 0.02;
  double step = 0.001;
  double top_fraction = 0.02;
  double relevance_threshold = 0.05;
  int smoothgrads_samples = 10;
  double smoothgrads_noise_ratio = 0.2;
  std::string fill = "mean";
  std::uint64_t seed = 0;
  std::string integration = "trapezoid";
  std::string lrp_hidden_rule = "zplus";
  std::string lrp_input_rule = "zB";
  double lrp_stabilizer = 1e-9;
  double audc_scale = 10000.0;
  std::string policy;
  double theta = 0.5;
  double tau_threshold = 0.1;

  std::string to_json() const;
};

struct ErfRow {
  std::string image_id;
  int prototype_index = -1;
  std::string method;
  std::optional<double> a_star;
  double tau_threshold = 0.1;
};

struct ReportFiles {
  std::filesystem::path cases_csv;
  std::filesystem::path summary_json;
  std::filesystem::path curves_csv;
  std::filesystem::path curves_svg;
  std::filesystem::path erf_csv;  // empty unless ERF rows were written
};

inline constexpr const char* kCasesCsvHeader =
    "image_id,prototype_index,role,method,audc,relevance_fraction,irrelevant,grid_id,"
    "fill_policy,seed";

/// Writes cases.csv, summary.json, curves.csv and curves.svg under out_dir.
/// Rows must be non-empty; numeric formatting is fixed so identical inputs
/// produce identical bytes.
ReportFiles write_reports(const std::vector<ReportRow>& rows,
                          const std::vector<DeletionCurve>& curves, const RunParameters& params,
                          const std::filesystem::path& out_dir,
                          const std::vector<ErfRow>& erf_rows = {});

std::string format_fixed(double v, int decimals);

}  // namespace protofaith
