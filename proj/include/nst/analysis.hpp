#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nst/model.hpp"
#include "nst/stats.hpp"
#include "nst/tensor.hpp"

namespace nst {

// (1-alpha) * a + alpha * b, exact at the endpoints.
StyleEmbedding interpolate_embedding(const StyleEmbedding& a, const StyleEmbedding& b, double alpha);

// Embedding of a content photograph; feeding it back into the transfer net
// approximates the identity after training (a reported, never asserted,
// property).
StyleEmbedding identity_embedding(const Tensor& content, const ModelParams& prediction_params,
                                  const PredictionNetConfig& config);

struct StudyRecord {
    std::string group;
    std::string style_id;
    std::string content_id;
    double content_loss = 0.0;
    double style_loss = 0.0;
    double total = 0.0;
    double min_gram_distance = std::numeric_limits<double>::quiet_NaN();  // proximity study only
};

struct GroupSummary {
    std::string group;
    std::string metric;  // content_loss | style_loss | total
    SummaryStats stats;
};

struct StudyResult {
    std::vector<StudyRecord> records;
    std::vector<GroupSummary> summaries;
    std::optional<Regression> regression;         // proximity study
    std::optional<TTestResult> style_ttest;       // baseline comparison
    std::optional<TTestResult> content_ttest;     // baseline comparison
};

// Loss distributions of T(c, P(s)) over observed (training) and unobserved
// style groups, across the first `photo_count` content images.
StudyResult generalization_study(const TrainedModel& model, const Corpus& observed, const Corpus& unobserved,
                                 const Corpus& contents, std::size_t photo_count);

// Same pairs evaluated under the model and a baseline, with paired t-tests
// over the per-pair style and content losses (model minus baseline).
StudyResult baseline_comparison_study(const TrainedModel& model, const TrainedModel& baseline, const Corpus& styles,
                                      const Corpus& contents, std::size_t photo_count);

// L2 distance between the concatenated per-layer Gram matrices, weighted by
// 1/n_i like the style loss (so distance^2 and style loss share units).
double gram_distance(const LossNetwork& net, const Tensor& a, const Tensor& b);

// Per test style: min Gram distance to the training styles (ties broken by
// the lowest index) against the mean style loss over contents, with a
// least-squares fit over (distance, loss).
StudyResult gram_proximity_study(const TrainedModel& model, const Corpus& train_styles, const Corpus& test_styles,
                                 const Corpus& contents, std::size_t photo_count);

// Trains one model per style count (augmentation disabled) and evaluates
// each on held-out styles. Counts must be ascending and within the pool.
std::vector<StudyResult> scaling_experiment(const RunConfig& base_config, const Corpus& style_pool,
                                            const std::vector<std::size_t>& counts, const Corpus& eval_styles,
                                            const Corpus& contents);

// Two models trained on distinct corpora, evaluated on test styles from
// each domain. Fails if an evaluation style appears in either training
// corpus (hash check). Returns one StudyResult per test domain with the two
// models as groups.
std::pair<StudyResult, StudyResult> cross_dataset_study(const TrainedModel& model_a, const TrainedModel& model_b,
                                                        const Corpus& styles_a, const Corpus& styles_b,
                                                        const Corpus& contents, std::size_t photo_count);

struct PcaGrid {
    std::size_t grid_n = 0;
    std::vector<double> offsets;       // in standard deviations
    std::vector<StyleEmbedding> embeddings;  // row-major grid_n x grid_n
    std::vector<Tensor> images;             // row-major, rows sweep PC2, cols PC1
    PcaResult pca;
};

// Stylizations across the +/- k_std sigma span of an embedding set's first
// two principal components; the center cell uses the mean embedding.
PcaGrid pca_grid_stylize(const std::vector<StyleEmbedding>& embeddings, const Tensor& content, double k_std,
                         std::size_t grid_n, const TrainedModel& model);

// records.csv + summary.csv (+ stats.csv when regression/t-test data exist).
void write_study_csvs(const StudyResult& result, const std::filesystem::path& dir, const std::string& prefix);

}  // namespace nst
