#include "nst/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "nst/csv.hpp"

namespace nst {

StyleEmbedding interpolate_embedding(const StyleEmbedding& a, const StyleEmbedding& b, double alpha) {
    if (a.dim() != b.dim()) {
        throw std::invalid_argument("embedding dim mismatch: " + std::to_string(a.dim()) + " vs " +
                                    std::to_string(b.dim()));
    }
    if (alpha == 0.0) return a;
    if (alpha == 1.0) return b;
    StyleEmbedding out;
    out.values = Tensor(a.values.shape());
    for (std::size_t i = 0; i < out.values.size(); ++i) {
        out.values[i] = (1.0 - alpha) * a.values[i] + alpha * b.values[i];
    }
    return out;
}

StyleEmbedding identity_embedding(const Tensor& content, const ModelParams& prediction_params,
                                  const PredictionNetConfig& config) {
    return predict_embedding(content, prediction_params, config);
}

namespace {

std::size_t effective_photos(const Corpus& contents, std::size_t photo_count) {
    if (contents.size() == 0) throw std::invalid_argument("content corpus is empty");
    if (photo_count == 0) throw std::invalid_argument("photo_count must be >= 1");
    return std::min(photo_count, contents.size());
}

void append_group_records(std::vector<StudyRecord>& records, const TrainedModel& model, const LossNetwork& net,
                          const std::string& group, const Corpus& styles, const Corpus& contents,
                          std::size_t n_photos) {
    for (std::size_t s = 0; s < styles.size(); ++s) {
        for (std::size_t c = 0; c < n_photos; ++c) {
            const Tensor stylized = stylize_image(model, contents.images[c], styles.images[s]);
            const LossReport rep =
                total_loss(stylized, contents.images[c], styles.images[s], net, model.config.lambda_s);
            StudyRecord r;
            r.group = group;
            r.style_id = styles.ids[s];
            r.content_id = contents.ids[c];
            r.content_loss = rep.content_loss;
            r.style_loss = rep.style_loss;
            r.total = rep.total;
            records.push_back(std::move(r));
        }
    }
}

void summarize_groups(StudyResult& result) {
    std::vector<std::string> groups;
    for (const StudyRecord& r : result.records) {
        if (std::find(groups.begin(), groups.end(), r.group) == groups.end()) groups.push_back(r.group);
    }
    for (const std::string& group : groups) {
        std::vector<double> content, style, total;
        for (const StudyRecord& r : result.records) {
            if (r.group != group) continue;
            content.push_back(r.content_loss);
            style.push_back(r.style_loss);
            total.push_back(r.total);
        }
        result.summaries.push_back(GroupSummary{group, "content_loss", summarize(content)});
        result.summaries.push_back(GroupSummary{group, "style_loss", summarize(style)});
        result.summaries.push_back(GroupSummary{group, "total", summarize(total)});
    }
}

}  // namespace

StudyResult generalization_study(const TrainedModel& model, const Corpus& observed, const Corpus& unobserved,
                                 const Corpus& contents, std::size_t photo_count) {
    if (observed.size() == 0 || unobserved.size() == 0) {
        throw std::invalid_argument("generalization study needs non-empty style groups");
    }
    const std::size_t n_photos = effective_photos(contents, photo_count);
    const LossNetwork net = loss_network(model.config);
    StudyResult result;
    append_group_records(result.records, model, net, "observed", observed, contents, n_photos);
    append_group_records(result.records, model, net, "unobserved", unobserved, contents, n_photos);
    summarize_groups(result);
    return result;
}

StudyResult baseline_comparison_study(const TrainedModel& model, const TrainedModel& baseline, const Corpus& styles,
                                      const Corpus& contents, std::size_t photo_count) {
    if (styles.size() == 0) throw std::invalid_argument("baseline comparison needs styles");
    const std::size_t n_photos = effective_photos(contents, photo_count);
    const LossNetwork net = loss_network(model.config);
    StudyResult result;
    append_group_records(result.records, model, net, "model", styles, contents, n_photos);
    append_group_records(result.records, baseline, net, "baseline", styles, contents, n_photos);
    summarize_groups(result);

    const std::size_t n_pairs = styles.size() * n_photos;
    std::vector<double> model_style(n_pairs), base_style(n_pairs), model_content(n_pairs), base_content(n_pairs);
    for (std::size_t i = 0; i < n_pairs; ++i) {
        model_style[i] = result.records[i].style_loss;
        model_content[i] = result.records[i].content_loss;
        base_style[i] = result.records[n_pairs + i].style_loss;
        base_content[i] = result.records[n_pairs + i].content_loss;
    }
    if (n_pairs >= 2) {
        result.style_ttest = paired_t_test(model_style, base_style);
        result.content_ttest = paired_t_test(model_content, base_content);
    }
    return result;
}

double gram_distance(const LossNetwork& net, const Tensor& a, const Tensor& b) {
    const std::vector<Tensor> fa = net.features(a);
    const std::vector<Tensor> fb = net.features(b);
    double sum = 0.0;
    for (std::size_t i : net.style_layers()) {
        const Tensor ga = gram_matrix(fa[i]);
        const Tensor gb = gram_matrix(fb[i]);
        if (!ga.same_shape(gb)) {
            throw std::invalid_argument("gram distance needs matching channel counts per layer");
        }
        double frob = 0.0;
        for (std::size_t k = 0; k < ga.size(); ++k) frob += (ga[k] - gb[k]) * (ga[k] - gb[k]);
        const std::size_t units = fa[i].extent(1) * fa[i].extent(2) * fa[i].extent(3);
        sum += frob / static_cast<double>(units);
    }
    return std::sqrt(sum);
}

StudyResult gram_proximity_study(const TrainedModel& model, const Corpus& train_styles, const Corpus& test_styles,
                                 const Corpus& contents, std::size_t photo_count) {
    if (train_styles.size() < 1) throw std::invalid_argument("proximity study needs at least one training style");
    if (test_styles.size() == 0) throw std::invalid_argument("proximity study needs test styles");
    const std::size_t n_photos = effective_photos(contents, photo_count);
    const LossNetwork net = loss_network(model.config);

    StudyResult result;
    std::vector<double> distances, mean_losses;
    for (std::size_t s = 0; s < test_styles.size(); ++s) {
        double min_dist = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < train_styles.size(); ++t) {
            const double d = gram_distance(net, test_styles.images[s], train_styles.images[t]);
            if (d < min_dist) min_dist = d;  // strict <: ties keep the lowest index
        }
        double loss_sum = 0.0;
        for (std::size_t c = 0; c < n_photos; ++c) {
            const Tensor stylized = stylize_image(model, contents.images[c], test_styles.images[s]);
            const LossReport rep =
                total_loss(stylized, contents.images[c], test_styles.images[s], net, model.config.lambda_s);
            StudyRecord r;
            r.group = "test";
            r.style_id = test_styles.ids[s];
            r.content_id = contents.ids[c];
            r.content_loss = rep.content_loss;
            r.style_loss = rep.style_loss;
            r.total = rep.total;
            r.min_gram_distance = min_dist;
            result.records.push_back(std::move(r));
            loss_sum += rep.style_loss;
        }
        distances.push_back(min_dist);
        mean_losses.push_back(loss_sum / static_cast<double>(n_photos));
    }
    summarize_groups(result);
    if (distances.size() >= 2) {
        try {
            result.regression = linear_regression(distances, mean_losses);
        } catch (const std::invalid_argument&) {
            // constant distances: no meaningful fit
        }
    }
    return result;
}

std::vector<StudyResult> scaling_experiment(const RunConfig& base_config, const Corpus& style_pool,
                                            const std::vector<std::size_t>& counts, const Corpus& eval_styles,
                                            const Corpus& contents) {
    if (counts.empty()) throw std::invalid_argument("scaling experiment needs at least one count");
    for (std::size_t i = 0; i + 1 < counts.size(); ++i) {
        if (counts[i] >= counts[i + 1]) throw std::invalid_argument("scaling counts must be strictly ascending");
    }
    if (counts.front() == 0) throw std::invalid_argument("scaling counts must be positive");
    if (counts.back() > style_pool.size()) {
        throw std::invalid_argument("scaling count " + std::to_string(counts.back()) + " exceeds the style pool (" +
                                    std::to_string(style_pool.size()) + ")");
    }

    std::vector<StudyResult> results;
    for (std::size_t count : counts) {
        Corpus subset;
        subset.images.assign(style_pool.images.begin(),
                             style_pool.images.begin() + static_cast<std::ptrdiff_t>(count));
        subset.ids.assign(style_pool.ids.begin(), style_pool.ids.begin() + static_cast<std::ptrdiff_t>(count));
        subset.hashes.assign(style_pool.hashes.begin(),
                             style_pool.hashes.begin() + static_cast<std::ptrdiff_t>(count));
        RunConfig cfg = base_config;
        cfg.augment = false;  // the scaling procedure trains without augmentation
        const TrainedModel model = model_from_train_result(train_joint(cfg, contents, subset));
        results.push_back(
            generalization_study(model, subset, eval_styles, contents, base_config.study_photo_count));
    }
    return results;
}

std::pair<StudyResult, StudyResult> cross_dataset_study(const TrainedModel& model_a, const TrainedModel& model_b,
                                                        const Corpus& styles_a, const Corpus& styles_b,
                                                        const Corpus& contents, std::size_t photo_count) {
    std::set<std::uint64_t> trained;
    for (std::uint64_t h : recorded_style_hashes(model_a)) trained.insert(h);
    for (std::uint64_t h : recorded_style_hashes(model_b)) trained.insert(h);
    for (const Corpus* styles : {&styles_a, &styles_b}) {
        for (std::size_t i = 0; i < styles->size(); ++i) {
            if (trained.contains(styles->hashes[i])) {
                throw std::invalid_argument("evaluation style '" + styles->ids[i] +
                                            "' appears in a training corpus (hash match)");
            }
        }
    }
    const std::size_t n_photos = effective_photos(contents, photo_count);
    const LossNetwork net_a = loss_network(model_a.config);
    const LossNetwork net_b = loss_network(model_b.config);

    auto evaluate = [&](const Corpus& styles) {
        StudyResult r;
        append_group_records(r.records, model_a, net_a, "model_a", styles, contents, n_photos);
        append_group_records(r.records, model_b, net_b, "model_b", styles, contents, n_photos);
        summarize_groups(r);
        return r;
    };
    return {evaluate(styles_a), evaluate(styles_b)};
}

PcaGrid pca_grid_stylize(const std::vector<StyleEmbedding>& embeddings, const Tensor& content, double k_std,
                         std::size_t grid_n, const TrainedModel& model) {
    if (embeddings.size() < 3) throw std::invalid_argument("pca grid needs at least 3 embeddings");
    if (grid_n == 0) throw std::invalid_argument("grid_n must be >= 1");
    const std::size_t dim = embeddings.front().dim();
    std::vector<std::vector<double>> data;
    for (const StyleEmbedding& e : embeddings) {
        if (e.dim() != dim) throw std::invalid_argument("embedding dims differ");
        data.emplace_back(e.values.values().begin(), e.values.values().end());
    }

    PcaGrid grid;
    grid.grid_n = grid_n;
    grid.pca = pca(data, std::min<std::size_t>(2, std::min(dim, embeddings.size() - 1)));
    const double sigma1 = std::sqrt(grid.pca.explained_variance[0]);
    const double sigma2 = grid.pca.explained_variance.size() > 1 ? std::sqrt(grid.pca.explained_variance[1]) : 0.0;

    for (std::size_t i = 0; i < grid_n; ++i) {
        grid.offsets.push_back(grid_n == 1 ? 0.0
                                           : -k_std + 2.0 * k_std * static_cast<double>(i) /
                                                          static_cast<double>(grid_n - 1));
    }

    for (std::size_t row = 0; row < grid_n; ++row) {
        for (std::size_t col = 0; col < grid_n; ++col) {
            StyleEmbedding e;
            e.values = Tensor(Shape{dim});
            for (std::size_t k = 0; k < dim; ++k) {
                double v = grid.pca.mean[k];
                v += grid.offsets[col] * sigma1 * grid.pca.components[0][k];
                if (grid.pca.components.size() > 1) {
                    v += grid.offsets[row] * sigma2 * grid.pca.components[1][k];
                }
                e.values[k] = v;
            }
            grid.images.push_back(
                transfer_forward(content, e, model.params, transfer_config(model.config)));
            grid.embeddings.push_back(std::move(e));
        }
    }
    return grid;
}

void write_study_csvs(const StudyResult& result, const std::filesystem::path& dir, const std::string& prefix) {
    std::filesystem::create_directories(dir);
    const bool with_distance = std::any_of(result.records.begin(), result.records.end(), [](const StudyRecord& r) {
        return !std::isnan(r.min_gram_distance);
    });

    std::vector<std::string> header = {"group", "style_id", "content_id", "content_loss", "style_loss", "total"};
    if (with_distance) header.push_back("min_gram_distance");
    std::vector<std::vector<std::string>> rows;
    for (const StudyRecord& r : result.records) {
        std::vector<std::string> row = {r.group,
                                        r.style_id,
                                        r.content_id,
                                        format_double(r.content_loss),
                                        format_double(r.style_loss),
                                        format_double(r.total)};
        if (with_distance) row.push_back(format_double(r.min_gram_distance));
        rows.push_back(std::move(row));
    }
    write_csv(dir / (prefix + "_records.csv"), header, rows);

    rows.clear();
    for (const GroupSummary& g : result.summaries) {
        rows.push_back({g.group, g.metric, std::to_string(g.stats.n), format_double(g.stats.mean),
                        format_double(g.stats.median), format_double(g.stats.stddev), format_double(g.stats.p10),
                        format_double(g.stats.q25), format_double(g.stats.q75), format_double(g.stats.p90)});
    }
    write_csv(dir / (prefix + "_summary.csv"),
              {"group", "metric", "n", "mean", "median", "std", "p10", "q25", "q75", "p90"}, rows);

    if (result.regression || result.style_ttest || result.content_ttest) {
        rows.clear();
        if (result.regression) {
            rows.push_back({"regression", "slope", format_double(result.regression->slope)});
            rows.push_back({"regression", "intercept", format_double(result.regression->intercept)});
            rows.push_back({"regression", "r2", format_double(result.regression->r2)});
        }
        if (result.style_ttest) {
            rows.push_back({"ttest_style", "t", format_double(result.style_ttest->t)});
            rows.push_back({"ttest_style", "p", format_double(result.style_ttest->p)});
        }
        if (result.content_ttest) {
            rows.push_back({"ttest_content", "t", format_double(result.content_ttest->t)});
            rows.push_back({"ttest_content", "p", format_double(result.content_ttest->p)});
        }
        write_csv(dir / (prefix + "_stats.csv"), {"kind", "name", "value"}, rows);
    }
}

}  // namespace nst
