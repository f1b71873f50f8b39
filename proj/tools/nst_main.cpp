// Command-line front end: training, stylization, the two baselines and the
// embedding-space studies, all driven by the flat run config.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "nst/analysis.hpp"
#include "nst/csv.hpp"
#include "nst/errors.hpp"
#include "nst/fileio.hpp"
#include "nst/gradsuite.hpp"
#include "nst/model.hpp"
#include "nst/tsne.hpp"

namespace fs = std::filesystem;
using namespace nst;

namespace {

// A usage-level error (exit code 2) as opposed to a runtime failure (1).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

RunConfig resolve_config(const std::string& config_flag) {
    if (!config_flag.empty()) return load_config_file(config_flag);
    if (const char* env = std::getenv("NST_CONFIG")) return load_config_file(env);
    return RunConfig{};
}

void guard_overwrite(const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs) {
    for (const fs::path& out : outputs) {
        const fs::path canon_out = fs::weakly_canonical(out);
        for (const fs::path& in : inputs) {
            if (canon_out == fs::weakly_canonical(in)) {
                throw UsageError("output path " + out.string() + " would overwrite input " + in.string());
            }
        }
    }
}

std::string indexed_name(std::size_t i, const std::string& ext) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%03zu", i);
    return std::string(buf) + ext;
}

void write_trace(const std::string& path, const std::vector<TraceRow>& trace) {
    if (path.empty()) return;
    std::string out = trace_csv_header();
    for (const TraceRow& row : trace) out += trace_csv_row(row);
    atomic_write_file(path, out);
}

Corpus load_required_corpus(const std::string& dir, const std::string& what) {
    Corpus corpus = load_corpus(dir);
    if (corpus.size() == 0) throw std::runtime_error(what + " corpus at " + dir + " holds no images");
    return corpus;
}

// ---- subcommand bodies ----

int cmd_train(const std::string& config_flag, std::string contents_dir, std::string styles_dir,
              const std::string& out, const std::string& trace, bool adain) {
    RunConfig cfg = resolve_config(config_flag);
    if (contents_dir.empty()) contents_dir = cfg.content_dir;
    if (styles_dir.empty()) styles_dir = cfg.style_dir;
    if (contents_dir.empty() || styles_dir.empty()) {
        throw UsageError("content/style corpus directories must come from flags or the config");
    }
    cfg.content_dir = contents_dir;
    cfg.style_dir = styles_dir;
    const Corpus contents = load_required_corpus(contents_dir, "content");
    const Corpus styles = load_required_corpus(styles_dir, "style");
    TrainResult result = adain ? train_adain_baseline(cfg, contents, styles) : train_joint(cfg, contents, styles);
    write_trace(trace, result.trace);
    const TraceRow& last = result.trace.back();
    save_checkpoint(to_checkpoint(model_from_train_result(std::move(result))), out);
    std::printf("trained %llu steps; final total loss %.6g; checkpoint %s\n",
                static_cast<unsigned long long>(cfg.budget), last.total, out.c_str());
    return 0;
}

int cmd_stylize(const std::string& ckpt, const std::string& content, const std::string& style,
                const std::string& out) {
    guard_overwrite({content, style, ckpt}, {out});
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Tensor result = stylize_image(model, load_image(content), load_image(style));
    save_image(result, out);
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

int cmd_embed(const std::string& ckpt, const std::string& image, const std::string& out, bool bottleneck) {
    guard_overwrite({image, ckpt}, {out});
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Tensor img = load_image(image);
    const Tensor values = bottleneck ? model_bottleneck(model, img) : model_embed(model, img).values;
    std::string line;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ',';
        line += format_double(values[i]);
    }
    line += '\n';
    atomic_write_file(out, line);
    std::printf("%s dim %zu -> %s\n", bottleneck ? "bottleneck" : "embedding", values.size(), out.c_str());
    return 0;
}

int cmd_interpolate(const std::string& ckpt, const std::string& content, const std::string& style,
                    std::size_t alpha_steps, const std::string& out_dir, const std::string& format) {
    if (alpha_steps < 1) throw UsageError("--alpha-steps must be >= 1");
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Tensor content_img = load_image(content);
    const Tensor style_img = load_image(style);
    const StyleEmbedding id = model_embed(model, content_img);
    const StyleEmbedding target = model_embed(model, style_img);
    const TransferNetConfig tcfg = transfer_config(model.config);
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i <= alpha_steps; ++i) {
        const double alpha = static_cast<double>(i) / static_cast<double>(alpha_steps);
        const StyleEmbedding mix = interpolate_embedding(id, target, alpha);
        const Tensor img = transfer_forward(content_img, mix, model.params, tcfg);
        save_image(img, fs::path(out_dir) / indexed_name(i, format == "png" ? ".png" : ".ppm"));
    }
    std::printf("wrote %zu images to %s\n", alpha_steps + 1, out_dir.c_str());
    return 0;
}

int cmd_optimize(const std::string& config_flag, const std::string& content, const std::string& style,
                 const std::string& out, const std::string& trace, std::optional<std::size_t> steps,
                 std::optional<double> lambda_s) {
    guard_overwrite({content, style}, {out});
    RunConfig cfg = resolve_config(config_flag);
    const LossNetwork net = loss_network(cfg);
    AdamConfig adam = adam_config(cfg);
    adam.alpha = cfg.pixel_lr;
    const OptimizeResult result =
        direct_optimize(load_image(content), load_image(style), net, lambda_s.value_or(cfg.lambda_s),
                        steps.value_or(cfg.optimize_steps), adam);
    save_image(result.best_image, out);
    write_trace(trace, result.trace);
    std::printf("initial total %.6g; best total %.6g at step %zu; wrote %s\n", result.trace.front().total,
                result.best_report.total, result.best_step, out.c_str());
    return 0;
}

int cmd_study_generalization(const std::string& ckpt, const std::string& observed_dir,
                             const std::string& unobserved_dir, const std::string& contents_dir,
                             const std::string& out_dir, std::optional<std::size_t> photos,
                             const std::string& baseline_ckpt) {
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Corpus observed = load_required_corpus(observed_dir, "observed style");
    const Corpus unobserved = load_required_corpus(unobserved_dir, "unobserved style");
    const Corpus contents = load_required_corpus(contents_dir, "content");
    const std::size_t n_photos = photos.value_or(model.config.study_photo_count);
    const StudyResult result = generalization_study(model, observed, unobserved, contents, n_photos);
    write_study_csvs(result, out_dir, "generalization");
    if (!baseline_ckpt.empty()) {
        const TrainedModel baseline = model_from_checkpoint(load_checkpoint(baseline_ckpt));
        const StudyResult cmp = baseline_comparison_study(model, baseline, unobserved, contents, n_photos);
        write_study_csvs(cmp, out_dir, "comparison");
        if (cmp.style_ttest) {
            std::printf("style paired t-test: t=%.6g p=%.6g\n", cmp.style_ttest->t, cmp.style_ttest->p);
        }
    }
    std::printf("generalization study: %zu records -> %s\n", result.records.size(), out_dir.c_str());
    return 0;
}

int cmd_study_proximity(const std::string& ckpt, const std::string& train_dir, const std::string& test_dir,
                        const std::string& contents_dir, const std::string& out_dir,
                        std::optional<std::size_t> photos) {
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Corpus train_styles = load_required_corpus(train_dir, "training style");
    const Corpus test_styles = load_required_corpus(test_dir, "test style");
    const Corpus contents = load_required_corpus(contents_dir, "content");
    const StudyResult result = gram_proximity_study(model, train_styles, test_styles, contents,
                                                    photos.value_or(model.config.study_photo_count));
    write_study_csvs(result, out_dir, "proximity");
    if (result.regression) {
        std::printf("proximity regression: slope=%.6g intercept=%.6g r2=%.6g\n", result.regression->slope,
                    result.regression->intercept, result.regression->r2);
    }
    return 0;
}

int cmd_study_scaling(const std::string& config_flag, const std::string& styles_dir,
                      const std::string& eval_styles_dir, const std::string& contents_dir,
                      const std::vector<std::size_t>& counts, const std::string& out_dir) {
    RunConfig cfg = resolve_config(config_flag);
    const Corpus pool = load_required_corpus(styles_dir, "style pool");
    const Corpus eval_styles = load_required_corpus(eval_styles_dir, "evaluation style");
    const Corpus contents = load_required_corpus(contents_dir, "content");
    const std::vector<StudyResult> results = scaling_experiment(cfg, pool, counts, eval_styles, contents);

    std::vector<std::vector<std::string>> box_rows;
    for (std::size_t i = 0; i < results.size(); ++i) {
        write_study_csvs(results[i], out_dir, "scaling_" + std::to_string(counts[i]));
        for (const GroupSummary& g : results[i].summaries) {
            if (g.group != "unobserved") continue;
            box_rows.push_back({std::to_string(counts[i]), g.metric, format_double(g.stats.median),
                                format_double(g.stats.q25), format_double(g.stats.q75), format_double(g.stats.p10),
                                format_double(g.stats.p90)});
        }
    }
    write_csv(fs::path(out_dir) / "scaling_boxstats.csv",
              {"style_count", "metric", "median", "q25", "q75", "p10", "p90"}, box_rows);
    std::printf("scaling experiment over %zu counts -> %s\n", counts.size(), out_dir.c_str());
    return 0;
}

int cmd_study_cross(const std::string& ckpt_a, const std::string& ckpt_b, const std::string& styles_a_dir,
                    const std::string& styles_b_dir, const std::string& contents_dir, const std::string& out_dir,
                    std::optional<std::size_t> photos) {
    const TrainedModel model_a = model_from_checkpoint(load_checkpoint(ckpt_a));
    const TrainedModel model_b = model_from_checkpoint(load_checkpoint(ckpt_b));
    const Corpus styles_a = load_required_corpus(styles_a_dir, "domain-A style");
    const Corpus styles_b = load_required_corpus(styles_b_dir, "domain-B style");
    const Corpus contents = load_required_corpus(contents_dir, "content");
    const auto [ra, rb] = cross_dataset_study(model_a, model_b, styles_a, styles_b, contents,
                                              photos.value_or(model_a.config.study_photo_count));
    write_study_csvs(ra, out_dir, "cross_a");
    write_study_csvs(rb, out_dir, "cross_b");
    std::printf("cross-dataset study -> %s\n", out_dir.c_str());
    return 0;
}

int cmd_pca_grid(const std::string& ckpt, const std::string& styles_dir, const std::string& content,
                 double k_std, std::size_t grid_n, const std::string& out_dir, const std::string& format) {
    const TrainedModel model = model_from_checkpoint(load_checkpoint(ckpt));
    const Corpus styles = load_required_corpus(styles_dir, "style");
    const Tensor content_img = load_image(content);
    std::vector<StyleEmbedding> embeddings;
    for (const Tensor& s : styles.images) embeddings.push_back(model_embed(model, s));
    const PcaGrid grid = pca_grid_stylize(embeddings, content_img, k_std, grid_n, model);
    fs::create_directories(out_dir);
    const std::string ext = format == "png" ? ".png" : ".ppm";
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 0; r < grid_n; ++r) {
        for (std::size_t c = 0; c < grid_n; ++c) {
            const std::string name = indexed_name(r, "") + "_" + indexed_name(c, ext);
            save_image(grid.images[r * grid_n + c], fs::path(out_dir) / name);
            rows.push_back({std::to_string(r), std::to_string(c), format_double(grid.offsets[c]),
                            format_double(grid.offsets[r]), name});
        }
    }
    write_csv(fs::path(out_dir) / "grid_coords.csv", {"row", "col", "pc1_std", "pc2_std", "file"}, rows);
    std::printf("wrote %zux%zu grid to %s\n", grid_n, grid_n, out_dir.c_str());
    return 0;
}

int cmd_tsne(const std::string& config_flag, const std::string& input, const std::string& out,
             const std::string& kl_trace, std::optional<double> perplexity, std::optional<std::size_t> iters,
             std::uint64_t seed) {
    guard_overwrite({input}, {out});
    RunConfig cfg = resolve_config(config_flag);
    const std::vector<std::vector<double>> rows = read_numeric_csv(input);
    if (rows.empty()) throw std::runtime_error("tsne input " + input + " is empty");
    Tensor points(Shape{rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j) points.at2(i, j) = rows[i][j];
    TsneConfig tcfg;
    tcfg.perplexity = perplexity.value_or(cfg.tsne_perplexity);
    tcfg.iters = iters.value_or(cfg.tsne_iters);
    tcfg.seed = seed;
    const TsneResult result = tsne(points, tcfg);
    std::string layout;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        layout += format_double(result.layout.at2(i, 0));
        layout += ',';
        layout += format_double(result.layout.at2(i, 1));
        layout += '\n';
    }
    atomic_write_file(out, layout);
    if (!kl_trace.empty()) {
        std::string trace;
        for (double kl : result.kl_trace) {
            trace += format_double(kl);
            trace += '\n';
        }
        atomic_write_file(kl_trace, trace);
    }
    std::printf("tsne: %zu points, final KL %.6g -> %s\n", rows.size(), result.kl_trace.back(), out.c_str());
    return 0;
}

int cmd_grad_check(std::size_t seeds, double tolerance) {
    const std::vector<GradSuiteEntry> entries = run_gradient_suite(seeds, tolerance);
    bool all_ok = true;
    for (const GradSuiteEntry& e : entries) {
        std::printf("%-28s max rel err %.3e  %s\n", e.name.c_str(), e.max_rel_err, e.ok ? "ok" : "FAIL");
        all_ok = all_ok && e.ok;
    }
    if (!all_ok) throw std::runtime_error("gradient suite failed");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"arbitrary artistic style transfer at configurable scale"};
    app.require_subcommand(1);

    std::string config_flag;
    app.add_option("--config", config_flag, "run config file (defaults to $NST_CONFIG, then built-ins)");

    // train / train-adain
    std::string contents_dir, styles_dir, out_path, trace_path;
    CLI::App* train = app.add_subcommand("train", "jointly train the prediction and transfer networks");
    CLI::App* train_adain = app.add_subcommand("train-adain", "train the statistics-matching baseline decoder");
    for (CLI::App* cmd : {train, train_adain}) {
        cmd->add_option("--contents", contents_dir, "content corpus directory (overrides config)");
        cmd->add_option("--styles", styles_dir, "style corpus directory (overrides config)");
        cmd->add_option("--out", out_path, "output checkpoint path")->required();
        cmd->add_option("--trace", trace_path, "write the loss trace CSV here");
    }

    // stylize
    std::string ckpt, content, style, image;
    CLI::App* stylize = app.add_subcommand("stylize", "render a content image under a style image");
    stylize->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    stylize->add_option("--content", content, "content image")->required();
    stylize->add_option("--style", style, "style image")->required();
    stylize->add_option("--out", out_path, "output image (.ppm or .png)")->required();

    bool bottleneck_flag = false;
    CLI::App* embed = app.add_subcommand("embed", "write the style embedding of an image as CSV");
    embed->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    embed->add_option("--image", image, "input image")->required();
    embed->add_option("--out", out_path, "output CSV")->required();
    embed->add_flag("--bottleneck", bottleneck_flag, "emit the compressed internal representation instead");

    std::size_t alpha_steps = 4;
    std::string out_dir, format = "ppm";
    CLI::App* interpolate = app.add_subcommand(
        "interpolate", "sweep from the content's identity embedding to a style embedding");
    interpolate->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    interpolate->add_option("--content", content, "content image")->required();
    interpolate->add_option("--style", style, "style image")->required();
    interpolate->add_option("--alpha-steps", alpha_steps, "number of interpolation steps (emits steps+1 images)");
    interpolate->add_option("--out-dir", out_dir, "output directory")->required();
    interpolate->add_option("--format", format, "image format: ppm or png");

    std::optional<std::size_t> steps_flag;
    std::optional<double> lambda_flag;
    CLI::App* optimize = app.add_subcommand("optimize", "direct pixel-space optimization baseline");
    optimize->add_option("--content", content, "content image")->required();
    optimize->add_option("--style", style, "style image")->required();
    optimize->add_option("--out", out_path, "output image")->required();
    optimize->add_option("--trace", trace_path, "write the loss trace CSV here");
    optimize->add_option("--steps", steps_flag, "optimization steps (default from config)");
    optimize->add_option("--lambda-s", lambda_flag, "style weight (default from config)");

    std::string observed_dir, unobserved_dir, baseline_ckpt;
    std::optional<std::size_t> photos_flag;
    CLI::App* study_gen = app.add_subcommand("study-generalization",
                                             "loss distributions over observed and unobserved styles");
    study_gen->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    study_gen->add_option("--observed", observed_dir, "styles the model trained on")->required();
    study_gen->add_option("--unobserved", unobserved_dir, "held-out styles")->required();
    study_gen->add_option("--contents", contents_dir, "content images")->required();
    study_gen->add_option("--out-dir", out_dir, "output directory")->required();
    study_gen->add_option("--photos", photos_flag, "content images per style (default from config)");
    study_gen->add_option("--baseline-checkpoint", baseline_ckpt,
                          "also compare against this model with paired t-tests");

    std::string train_styles_dir, test_styles_dir;
    CLI::App* study_prox = app.add_subcommand("study-proximity",
                                              "style loss against Gram distance to the training set");
    study_prox->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    study_prox->add_option("--train-styles", train_styles_dir, "training styles")->required();
    study_prox->add_option("--test-styles", test_styles_dir, "held-out styles")->required();
    study_prox->add_option("--contents", contents_dir, "content images")->required();
    study_prox->add_option("--out-dir", out_dir, "output directory")->required();
    study_prox->add_option("--photos", photos_flag, "content images per style");

    std::vector<std::size_t> counts;
    std::string eval_styles_dir;
    CLI::App* study_scaling = app.add_subcommand("study-scaling",
                                                 "train per style count and evaluate held-out styles");
    study_scaling->add_option("--styles", styles_dir, "style pool directory")->required();
    study_scaling->add_option("--eval-styles", eval_styles_dir, "held-out evaluation styles")->required();
    study_scaling->add_option("--contents", contents_dir, "content images")->required();
    study_scaling->add_option("--counts", counts, "ascending style counts, e.g. --counts 1 2 4 8")->required();
    study_scaling->add_option("--out-dir", out_dir, "output directory")->required();

    std::string ckpt_b, styles_a_dir, styles_b_dir;
    CLI::App* study_cross = app.add_subcommand("study-cross",
                                               "evaluate two models across each other's style domains");
    study_cross->add_option("--checkpoint-a", ckpt, "first model")->required();
    study_cross->add_option("--checkpoint-b", ckpt_b, "second model")->required();
    study_cross->add_option("--styles-a", styles_a_dir, "test styles from domain A")->required();
    study_cross->add_option("--styles-b", styles_b_dir, "test styles from domain B")->required();
    study_cross->add_option("--contents", contents_dir, "content images")->required();
    study_cross->add_option("--out-dir", out_dir, "output directory")->required();
    study_cross->add_option("--photos", photos_flag, "content images per style");

    double k_std = 4.0;
    std::size_t grid_n = 5;
    CLI::App* pca_grid = app.add_subcommand("pca-grid",
                                            "stylizations across an artist's principal embedding axes");
    pca_grid->add_option("--checkpoint", ckpt, "trained checkpoint")->required();
    pca_grid->add_option("--styles", styles_dir, "style images of one artist (>= 3)")->required();
    pca_grid->add_option("--content", content, "content image")->required();
    pca_grid->add_option("--k-std", k_std, "half-span of each axis in standard deviations");
    pca_grid->add_option("--grid-n", grid_n, "grid resolution per axis");
    pca_grid->add_option("--out-dir", out_dir, "output directory")->required();
    pca_grid->add_option("--format", format, "image format: ppm or png");

    std::string input_csv, kl_trace_path;
    std::optional<double> perplexity_flag;
    std::optional<std::size_t> iters_flag;
    std::uint64_t tsne_seed = 1;
    CLI::App* tsne_cmd = app.add_subcommand("tsne", "2-d embedding map of a numeric CSV");
    tsne_cmd->add_option("--input", input_csv, "input CSV, one point per row")->required();
    tsne_cmd->add_option("--out", out_path, "output CSV of 2-d coordinates")->required();
    tsne_cmd->add_option("--kl-trace", kl_trace_path, "write the per-iteration KL trace here");
    tsne_cmd->add_option("--perplexity", perplexity_flag, "target perplexity (default from config)");
    tsne_cmd->add_option("--iters", iters_flag, "iterations (default from config)");
    tsne_cmd->add_option("--seed", tsne_seed, "layout init seed");

    std::size_t gc_seeds = 20;
    double gc_tolerance = 1e-4;
    CLI::App* grad = app.add_subcommand("grad-check", "finite-difference verification of all gradients");
    grad->add_option("--seeds", gc_seeds, "seeded instances per check");
    grad->add_option("--tolerance", gc_tolerance, "max relative error allowed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n\n" << app.help() << std::flush;
        return 2;
    }

    try {
        if (*train) return cmd_train(config_flag, contents_dir, styles_dir, out_path, trace_path, false);
        if (*train_adain) return cmd_train(config_flag, contents_dir, styles_dir, out_path, trace_path, true);
        if (*stylize) return cmd_stylize(ckpt, content, style, out_path);
        if (*embed) return cmd_embed(ckpt, image, out_path, bottleneck_flag);
        if (*interpolate) return cmd_interpolate(ckpt, content, style, alpha_steps, out_dir, format);
        if (*optimize) return cmd_optimize(config_flag, content, style, out_path, trace_path, steps_flag,
                                           lambda_flag);
        if (*study_gen) return cmd_study_generalization(ckpt, observed_dir, unobserved_dir, contents_dir, out_dir,
                                                        photos_flag, baseline_ckpt);
        if (*study_prox) return cmd_study_proximity(ckpt, train_styles_dir, test_styles_dir, contents_dir, out_dir,
                                                    photos_flag);
        if (*study_scaling) return cmd_study_scaling(config_flag, styles_dir, eval_styles_dir, contents_dir, counts,
                                                     out_dir);
        if (*study_cross) return cmd_study_cross(ckpt, ckpt_b, styles_a_dir, styles_b_dir, contents_dir, out_dir,
                                                 photos_flag);
        if (*pca_grid) return cmd_pca_grid(ckpt, styles_dir, content, k_std, grid_n, out_dir, format);
        if (*tsne_cmd) return cmd_tsne(config_flag, input_csv, out_path, kl_trace_path, perplexity_flag, iters_flag,
                                       tsne_seed);
        if (*grad) return cmd_grad_check(gc_seeds, gc_tolerance);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
