#include "ino/training.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "ino/tensor_ops.hpp"

namespace ino {

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: learning rate must be positive");
    if (!(decay > 0.0 && decay <= 1.0)) throw std::invalid_argument("TrainConfig: decay must be in (0, 1]");
    if (decay_interval == 0) throw std::invalid_argument("TrainConfig: decay interval must be positive");
    if (reg < 0.0) throw std::invalid_argument("TrainConfig: regularization coefficient must be >= 0");
    if (max_epochs == 0) throw std::invalid_argument("TrainConfig: max epochs must be positive");
    if (patience >= max_epochs) throw std::invalid_argument("TrainConfig: patience must be < max epochs");
}

std::string TrainReport::to_json() const {
    nlohmann::json j;
    j["train_loss"] = train_loss;
    nlohmann::json vals = nlohmann::json::array();
    for (double v : val_error) {
        if (std::isnan(v)) {
            vals.push_back(nullptr);
        } else {
            vals.push_back(v);
        }
    }
    j["val_error"] = std::move(vals);
    j["best_epoch"] = best_epoch;
    j["best_val_error"] = best_val_error;
    j["epochs"] = epochs();
    j["wall_seconds"] = wall_seconds;
    j["diverged"] = diverged;
    return j.dump(2);
}

double relative_l2(const Tensor& pred, const Tensor& truth) {
    if (!pred.same_shape(truth)) {
        throw std::invalid_argument("relative_l2: shapes " + pred.shape_str() + " vs " + truth.shape_str());
    }
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        num += d * d;
        den += truth[i] * truth[i];
    }
    if (!(den > 0.0)) throw std::invalid_argument("relative_l2: zero-norm reference field");
    return std::sqrt(num / den);
}

double scheduled_lr(const TrainConfig& config, std::size_t epoch) {
    return config.lr * std::pow(config.decay, static_cast<double>(epoch / config.decay_interval));
}

namespace {

double l2_penalty(const ModelParams& params) {
    double s = 0.0;
    for (const Tensor& t : params.tensors) {
        for (std::size_t i = 0; i < t.size(); ++i) s += t[i] * t[i];
    }
    return s;
}

}  // namespace

double batch_loss(const ModelParams& params, const Dataset& ds, const std::vector<std::size_t>& indices,
                  double reg) {
    if (indices.empty()) throw std::invalid_argument("batch_loss: empty batch");
    double s = 0.0;
    for (std::size_t idx : indices) {
        s += relative_l2(forward(params, ds.cloud_of(idx), ds.f[idx]), ds.u[idx]);
    }
    return s / static_cast<double>(indices.size()) + reg * l2_penalty(params);
}

Dataset augment(const Dataset& ds, const AugmentSpec& spec, std::uint64_t seed) {
    Dataset out = ds;
    if (spec.count == 0) return out;
    out.validate();

    if (out.sample_clouds.empty()) {
        out.sample_clouds.assign(out.num_samples(), out.cloud);
    }
    Rng rng(Rng::derive(seed, 0x617567));
    const std::vector<std::size_t> base = out.train_idx;
    for (std::size_t copy = 0; copy < spec.count; ++copy) {
        for (std::size_t idx : base) {
            const double gx = rng.uniform(-spec.translate_range, spec.translate_range);
            const double gy = rng.uniform(-spec.translate_range, spec.translate_range);
            const double theta = rng.uniform(0.0, spec.rotate_range);
            FrameTransform t = compose(FrameTransform::translation(gx, gy), FrameTransform::rotation(theta));
            auto [cloud, fs] = apply_transform(out.cloud_of(idx), FunctionSample{out.f[idx], out.u[idx]}, t,
                                               out.layout);
            out.sample_clouds.push_back(std::make_shared<PointCloud>(std::move(cloud)));
            out.f.push_back(std::move(fs.f));
            out.u.push_back(std::move(fs.u));
            out.train_idx.push_back(out.f.size() - 1);
        }
    }
    out.validate();
    return out;
}

TrainReport fit(const TrainConfig& config, ModelParams& params, const Dataset& dataset) {
    config.validate();
    params.config.validate();
    const auto t_start = std::chrono::steady_clock::now();

    const Dataset* ds = &dataset;
    Dataset augmented;
    if (config.augment.count > 0) {
        augmented = augment(dataset, config.augment, config.seed);
        ds = &augmented;
    }
    ds->validate();
    if (ds->train_idx.empty()) throw std::invalid_argument("fit: empty training split");
    if (ds->val_idx.empty()) throw std::invalid_argument("fit: empty validation split");

    // Kernel features and pair tables are fixed per sample; built once.
    std::vector<std::size_t> train = ds->train_idx;
    std::vector<SampleCache> train_cache, val_cache;
    train_cache.reserve(train.size());
    for (std::size_t idx : train) train_cache.push_back(build_cache(params.config, ds->cloud_of(idx), ds->f[idx]));
    val_cache.reserve(ds->val_idx.size());
    for (std::size_t idx : ds->val_idx) {
        val_cache.push_back(build_cache(params.config, ds->cloud_of(idx), ds->f[idx]));
    }

    auto validation_error = [&](const ModelParams& p) {
        double s = 0.0;
        for (std::size_t k = 0; k < ds->val_idx.size(); ++k) {
            const std::size_t idx = ds->val_idx[k];
            s += relative_l2(forward(p, ds->cloud_of(idx), ds->f[idx], val_cache[k]), ds->u[idx]);
        }
        return s / static_cast<double>(ds->val_idx.size());
    };

    AdamConfig adam_cfg;
    adam_cfg.lr = config.lr;
    AdamState adam = make_adam(adam_cfg, params.tensors);

    TrainReport report;
    std::vector<Tensor> best = params.tensors;
    double saved_train_loss = std::numeric_limits<double>::infinity();
    std::size_t since_improve = 0;
    const std::size_t n_train = train.size();
    const std::size_t batch =
        (config.batch_size == 0 || config.batch_size > n_train) ? n_train : config.batch_size;

    std::vector<Tensor> grad_sum;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        adam.cfg.lr = scheduled_lr(config, epoch);

        // Order of training samples for this epoch.
        std::vector<std::size_t> order(n_train);
        for (std::size_t i = 0; i < n_train; ++i) order[i] = i;
        if (batch < n_train) {
            Rng shuffle_rng(Rng::derive(config.seed, 0x73687566ULL + epoch));
            for (std::size_t i = n_train; i > 1; --i) {
                const std::size_t j = static_cast<std::size_t>(shuffle_rng.below(i));
                std::swap(order[i - 1], order[j]);
            }
        }

        double epoch_loss_sum = 0.0;
        const double reg_value = config.reg > 0.0 ? config.reg * l2_penalty(params) : 0.0;
        for (std::size_t start = 0; start < n_train; start += batch) {
            const std::size_t stop = std::min(start + batch, n_train);
            const auto batch_n = static_cast<double>(stop - start);

            grad_sum.assign(params.tensors.size(), Tensor());
            for (std::size_t bi = start; bi < stop; ++bi) {
                const std::size_t slot = order[bi];
                const std::size_t idx = train[slot];
                Graph graph;
                TapeModel tm = bind_tape(graph, params);
                const Graph::NodeId pred = forward_tape(graph, tm, ds->cloud_of(idx), ds->f[idx],
                                                        train_cache[slot]);
                const double truth_norm = ops::l2norm(ds->u[idx]).item();
                if (!(truth_norm > 0.0)) throw std::runtime_error("fit: zero-norm training target");
                const Graph::NodeId diff = graph.sub(pred, graph.input(ds->u[idx]));
                const Graph::NodeId loss = graph.scale(graph.l2norm(diff), 1.0 / truth_norm);
                epoch_loss_sum += graph.value(loss).item();

                auto grads = graph.backward(loss);
                for (std::size_t k = 0; k < tm.param_ids.size(); ++k) {
                    Tensor& g = grads.at(tm.param_ids[k]);
                    if (grad_sum[k].size() == 0) {
                        grad_sum[k] = std::move(g);
                    } else {
                        double* dst = grad_sum[k].data();
                        const double* src = g.data();
                        for (std::size_t i = 0; i < grad_sum[k].size(); ++i) dst[i] += src[i];
                    }
                }
            }
            for (std::size_t k = 0; k < grad_sum.size(); ++k) {
                double* g = grad_sum[k].data();
                const double* p = params.tensors[k].data();
                const double inv = 1.0 / batch_n;
                for (std::size_t i = 0; i < grad_sum[k].size(); ++i) {
                    g[i] = g[i] * inv + 2.0 * config.reg * p[i];
                }
            }
            adam_step(adam, params.tensors, grad_sum);
        }

        const double train_loss = epoch_loss_sum / static_cast<double>(n_train) + reg_value;
        report.train_loss.push_back(train_loss);
        if (!std::isfinite(train_loss)) {
            report.diverged = true;
            report.val_error.push_back(std::numeric_limits<double>::quiet_NaN());
            break;
        }

        // Validate only when the train loss improved over the last saved model.
        double val = std::numeric_limits<double>::quiet_NaN();
        bool improved = false;
        if (train_loss < saved_train_loss) {
            val = validation_error(params);
            if (val < report.best_val_error) {
                report.best_val_error = val;
                report.best_epoch = epoch;
                best = params.tensors;
                saved_train_loss = train_loss;
                improved = true;
            }
        }
        report.val_error.push_back(val);

        if (improved) {
            since_improve = 0;
        } else {
            since_improve += 1;
            if (since_improve >= config.patience) break;
        }
    }

    params.tensors = best;
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

GridSearchResult grid_search(const OperatorConfig& config, const Dataset& ds, const TrainConfig& base,
                             std::span<const double> lrs, std::span<const double> decays,
                             std::span<const double> regs) {
    if (lrs.empty() || decays.empty() || regs.empty()) {
        throw std::invalid_argument("grid_search: empty grid");
    }
    GridSearchResult result;
    result.best.val_error = std::numeric_limits<double>::infinity();
    const InitScales scales = data_init_scales(config, ds);
    for (double lr : lrs) {
        for (double decay : decays) {
            for (double reg : regs) {
                TrainConfig tc = base;
                tc.lr = lr;
                tc.decay = decay;
                tc.reg = reg;
                ModelParams params = init_params(config, tc.seed, scales);
                const TrainReport report = fit(tc, params, ds);
                GridSearchEntry entry{lr, decay, reg, report.best_val_error};
                if (entry.val_error < result.best.val_error) result.best = entry;
                result.tried.push_back(entry);
            }
        }
    }
    return result;
}

InitScales data_init_scales(const OperatorConfig& config, const Dataset& ds) {
    config.validate();
    ds.validate();
    if (ds.train_idx.empty()) throw std::invalid_argument("data_init_scales: empty training split");

    InitScales scales;
    scales.lift_in.assign(config.lift_input_width(), 0.0);
    scales.kernel_in.assign(config.kernel_input_width(), 0.0);

    // Lifting-input and target statistics over the whole training split.
    std::size_t lift_rows = 0, out_count = 0;
    double out_sq = 0.0;
    for (std::size_t idx : ds.train_idx) {
        const PointCloud& cloud = ds.cloud_of(idx);
        Tensor lift_in;
        if (config.arch == Architecture::gno) {
            const Tensor* parts[2] = {&cloud.coords, &ds.f[idx]};
            lift_in = ops::concat_cols(parts);
        } else {
            lift_in = invariant_node_features(config.layout, ds.f[idx]);
        }
        for (std::size_t i = 0; i < lift_in.rows(); ++i) {
            for (std::size_t c = 0; c < lift_in.cols(); ++c) {
                scales.lift_in[c] += lift_in.at(i, c) * lift_in.at(i, c);
            }
        }
        lift_rows += lift_in.rows();
        for (std::size_t i = 0; i < ds.u[idx].size(); ++i) out_sq += ds.u[idx][i] * ds.u[idx][i];
        out_count += ds.u[idx].size();
    }
    for (double& s : scales.lift_in) s = std::sqrt(s / static_cast<double>(lift_rows));
    scales.output = std::sqrt(out_sq / static_cast<double>(out_count));

    // Kernel-argument statistics from the first training sample's pair table.
    const std::size_t first = ds.train_idx.front();
    const SampleCache cache = build_cache(config, ds.cloud_of(first), ds.f[first]);
    const Tensor& feats = cache.features;
    for (std::size_t i = 0; i < feats.rows(); ++i) {
        for (std::size_t c = 0; c < feats.cols(); ++c) {
            scales.kernel_in[c] += feats.at(i, c) * feats.at(i, c);
        }
    }
    for (double& s : scales.kernel_in) s = std::sqrt(s / static_cast<double>(feats.rows()));
    return scales;
}

ModelParams init_params_for_data(const OperatorConfig& config, std::uint64_t seed, const Dataset& ds) {
    return init_params(config, seed, data_init_scales(config, ds));
}

ModelParams shallow_to_deep(const ModelParams& trained, std::size_t new_layers) {
    if (new_layers < trained.config.layers) {
        throw std::invalid_argument("shallow_to_deep: target depth is shallower than the source");
    }
    ModelParams out = trained;
    const double horizon = trained.config.effective_tau() * static_cast<double>(trained.config.layers);
    out.config.layers = new_layers;
    out.config.tau = horizon / static_cast<double>(new_layers);
    return out;
}

}  // namespace ino
