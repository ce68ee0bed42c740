#pragma once

#include "glmm/experiment.hpp"
#include "glmm/metrics.hpp"
#include "glmm/serialization.hpp"

#include <filesystem>
#include <optional>

namespace glmm {

/// Writes the dataset of one (parameter point, repetition) of a scenario.
DatasetFiles cmd_generate(const ExperimentConfig& config, std::size_t point, int rep,
                          const std::filesystem::path& out_dir);

struct FitOptions {
  Method method = Method::Glmm;
  /// 0 takes the cluster count from the labels or the truth graphs.
  Index k = 0;
  Hyperparameters hp;
  Seed seed{1};
  /// Group priors built from (possibly noisy) labels, glmm and ghmm only.
  std::optional<Labels> prior_labels;
  double prior_confidence = 1.0;
  bool freeze_prior = true;
  /// GMM graphs keep this many strongest precision entries. Unset: the edge
  /// count of the aligned truth graph when truth is available.
  std::optional<Index> gmm_edge_count;
  bool gmm_project = true;
};

struct FitOutput {
  ModelRecord model;
  /// Training responsibilities produced by the fit itself.
  Matrix gamma;
  /// Present when labels or truth graphs are available.
  std::optional<MetricReport> report;
  Json trace;
};

FitOutput cmd_fit(const DatasetFiles& data, const FitOptions& options);
/// model.json, responsibilities.csv, labels.csv, trace.json and metrics.json
/// (when a report exists).
void write_fit_output(const std::filesystem::path& out_dir, const FitOutput& out);

/// Metrics of a stored model on a dataset. Responsibilities are recomputed
/// from the model unless `gamma` is given.
MetricReport cmd_eval(const ModelRecord& model, const DatasetFiles& data, const std::optional<Matrix>& gamma = {});

struct Prediction {
  Matrix gamma;
  Labels labels;
};
Prediction cmd_predict(const ModelRecord& model, const Matrix& signals);
/// responsibilities.csv and labels.csv.
void write_prediction(const std::filesystem::path& out_dir, const Prediction& p);

}  // namespace glmm
