#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include "manifold_embed/corpus.hpp"
#include "manifold_embed/errors.hpp"
#include "manifold_embed/file_util.hpp"
#include "manifold_embed/manifolds.hpp"
#include "manifold_embed/matrix.hpp"
#include "manifold_embed/parallel.hpp"
#include "manifold_embed/rng.hpp"

namespace manifold_embed {

inline constexpr int kModelFormatVersion = 1;

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t d_embed = 64;
    std::size_t d_head = 3;  // forced by the manifold's head arity
    ManifoldKind manifold = ManifoldKind::sphere(3);
    double margin = 0.2;
    double learning_rate = 1e-3;
    std::size_t epochs = 20;
    std::size_t batch_size = 128;
    std::size_t triplets_per_epoch = 0;  // 0 = 20 x corpus size
    std::uint64_t seed = 42;
    std::size_t max_len = 64;

    void validate() const {
        if (vocab_size < 2) throw ConfigError("ModelConfig: vocab_size must be >= 2");
        if (d_embed < 1) throw ConfigError("ModelConfig: d_embed must be >= 1");
        if (!(margin >= 0.0)) throw ConfigError("ModelConfig: margin must be >= 0");
        if (!(learning_rate > 0.0))
            throw ConfigError("ModelConfig: learning_rate must be positive");
        if (batch_size < 1) throw ConfigError("ModelConfig: batch_size must be >= 1");
        if (max_len < 1) throw ConfigError("ModelConfig: max_len must be >= 1");
        if (d_head != manifold.head_dim())
            throw ConfigError("ModelConfig: d_head " + std::to_string(d_head) +
                              " does not match " + manifold.name() + " head arity " +
                              std::to_string(manifold.head_dim()));
    }
};

// Embedding table -> mean pooling -> dense head -> manifold projection.
// Row 0 of E is the PAD row, frozen at zero through every update.
struct EmbeddingModel {
    Matrix embedding;  // vocab_size x d_embed
    Matrix head_w;     // d_embed x d_head
    Matrix head_b;     // 1 x d_head
    ModelConfig config;
};

inline EmbeddingModel init_model(const ModelConfig& config, SeededRng& rng) {
    config.validate();
    EmbeddingModel model;
    model.config = config;
    model.embedding = Matrix(config.vocab_size, config.d_embed);
    for (std::size_t i = 1; i < config.vocab_size; ++i)  // PAD row stays zero
        for (std::size_t j = 0; j < config.d_embed; ++j)
            model.embedding(i, j) = rng.uniform(-0.05, 0.05);
    model.head_w = Matrix(config.d_embed, config.d_head);
    const double fan_in = 1.0 / std::sqrt(static_cast<double>(config.d_embed));
    for (std::size_t k = 0; k < model.head_w.size(); ++k)
        model.head_w[k] = rng.uniform(-fan_in, fan_in);
    model.head_b = Matrix(1, config.d_head);
    return model;
}

struct ForwardCache {
    Matrix pooled;  // 1 x d_embed
    Matrix head;    // 1 x d_head
    Matrix point;   // 1 x ambient
};

// Mean is taken over all stored positions; the PAD row is zero, so padded
// empty documents pool to the bias alone.
inline ForwardCache forward_cached(const EmbeddingModel& model, const TokenizedDoc& doc) {
    const auto& cfg = model.config;
    ForwardCache cache;
    cache.pooled = Matrix(1, cfg.d_embed);
    if (doc.token_ids.empty()) throw ConfigError("forward: empty token sequence");
    for (const auto id : doc.token_ids) {
        if (id >= cfg.vocab_size)
            throw ConfigError("forward: token id " + std::to_string(id) +
                              " outside vocabulary of size " + std::to_string(cfg.vocab_size));
        const double* row = model.embedding.row_ptr(id);
        for (std::size_t j = 0; j < cfg.d_embed; ++j) cache.pooled[j] += row[j];
    }
    const double inv_len = 1.0 / static_cast<double>(doc.token_ids.size());
    for (std::size_t j = 0; j < cfg.d_embed; ++j) cache.pooled[j] *= inv_len;

    cache.head = Matrix(1, cfg.d_head);
    for (std::size_t k = 0; k < cfg.d_embed; ++k) {
        const double p = cache.pooled[k];
        const double* wrow = model.head_w.row_ptr(k);
        for (std::size_t j = 0; j < cfg.d_head; ++j) cache.head[j] += p * wrow[j];
    }
    for (std::size_t j = 0; j < cfg.d_head; ++j) cache.head[j] += model.head_b[j];

    cache.point = project(cfg.manifold, cache.head);
    return cache;
}

inline Matrix forward(const EmbeddingModel& model, const TokenizedDoc& doc) {
    return forward_cached(model, doc).point;
}

inline double squared_distance(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols() || a.rows() != 1 || b.rows() != 1)
        throw ConfigError("squared_distance: arity mismatch " + a.shape_str() + " vs " +
                          b.shape_str());
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

// Hinge triplet loss on ambient (chordal) coordinates.
inline double triplet_loss(const Matrix& anchor, const Matrix& positive,
                           const Matrix& negative, double margin) {
    const double gap =
        squared_distance(anchor, positive) - squared_distance(anchor, negative) + margin;
    return gap > 0.0 ? gap : 0.0;
}

struct TripletPointGrads {
    Matrix anchor, positive, negative;
    bool active = false;
};

// Subgradient of the hinge; the flat branch is taken at the exact boundary.
inline TripletPointGrads triplet_loss_backward(const Matrix& anchor,
                                               const Matrix& positive,
                                               const Matrix& negative, double margin) {
    TripletPointGrads grads;
    const std::size_t dim = anchor.cols();
    grads.anchor = Matrix(1, dim);
    grads.positive = Matrix(1, dim);
    grads.negative = Matrix(1, dim);
    if (triplet_loss(anchor, positive, negative, margin) <= 0.0) return grads;
    grads.active = true;
    for (std::size_t j = 0; j < dim; ++j) {
        const double ap = anchor[j] - positive[j];
        const double an = anchor[j] - negative[j];
        grads.anchor[j] = 2.0 * (ap - an);
        grads.positive[j] = -2.0 * ap;
        grads.negative[j] = 2.0 * an;
    }
    return grads;
}

// Accumulated parameter gradients for a batch. The embedding gradient is kept
// dense but only rows listed in `touched` are nonzero, which keeps the
// optimizer update and the zeroing pass proportional to the batch.
struct ParamGrads {
    Matrix embedding;  // vocab_size x d_embed
    Matrix head_w;     // d_embed x d_head
    Matrix head_b;     // 1 x d_head
    std::vector<std::uint32_t> touched;
    std::vector<char> touched_flag;

    explicit ParamGrads(const ModelConfig& cfg)
        : embedding(cfg.vocab_size, cfg.d_embed),
          head_w(cfg.d_embed, cfg.d_head),
          head_b(1, cfg.d_head),
          touched_flag(cfg.vocab_size, 0) {}

    void reset() {
        for (auto row : touched) {
            double* p = embedding.row_ptr(row);
            for (std::size_t j = 0; j < embedding.cols(); ++j) p[j] = 0.0;
            touched_flag[row] = 0;
        }
        touched.clear();
        head_w.fill(0.0);
        head_b.fill(0.0);
    }

    void scale(double factor) {
        for (auto row : touched) {
            double* p = embedding.row_ptr(row);
            for (std::size_t j = 0; j < embedding.cols(); ++j) p[j] *= factor;
        }
        for (std::size_t k = 0; k < head_w.size(); ++k) head_w[k] *= factor;
        for (std::size_t k = 0; k < head_b.size(); ++k) head_b[k] *= factor;
    }
};

namespace detail {

// Backprop one branch: ambient gradient -> head -> pooled -> embedding rows.
inline void backprop_branch(const EmbeddingModel& model, const TokenizedDoc& doc,
                            const ForwardCache& cache, const Matrix& point_grad,
                            ParamGrads& grads) {
    const auto& cfg = model.config;
    const Matrix head_grad = project_backward(cfg.manifold, cache.head, point_grad);

    for (std::size_t j = 0; j < cfg.d_head; ++j) grads.head_b[j] += head_grad[j];
    for (std::size_t k = 0; k < cfg.d_embed; ++k) {
        const double p = cache.pooled[k];
        double* grow = grads.head_w.row_ptr(k);
        for (std::size_t j = 0; j < cfg.d_head; ++j) grow[j] += p * head_grad[j];
    }

    Matrix pooled_grad(1, cfg.d_embed);
    for (std::size_t k = 0; k < cfg.d_embed; ++k) {
        const double* wrow = model.head_w.row_ptr(k);
        double s = 0.0;
        for (std::size_t j = 0; j < cfg.d_head; ++j) s += wrow[j] * head_grad[j];
        pooled_grad[k] = s;
    }

    const double inv_len = 1.0 / static_cast<double>(doc.token_ids.size());
    for (const auto id : doc.token_ids) {
        if (id == Vocabulary::kPadId) continue;  // PAD row frozen
        if (!grads.touched_flag[id]) {
            grads.touched_flag[id] = 1;
            grads.touched.push_back(id);
        }
        double* erow = grads.embedding.row_ptr(id);
        for (std::size_t j = 0; j < cfg.d_embed; ++j) erow[j] += pooled_grad[j] * inv_len;
    }
}

}  // namespace detail

// Loss and parameter gradients for one triplet, shared by the trainer and the
// gradient-check tests.
inline double accumulate_triplet_gradients(const EmbeddingModel& model,
                                           const TokenizedDoc& anchor,
                                           const TokenizedDoc& positive,
                                           const TokenizedDoc& negative,
                                           ParamGrads& grads, bool* active = nullptr) {
    const ForwardCache fa = forward_cached(model, anchor);
    const ForwardCache fp = forward_cached(model, positive);
    const ForwardCache fn = forward_cached(model, negative);
    const double loss = triplet_loss(fa.point, fp.point, fn.point, model.config.margin);
    const auto point_grads =
        triplet_loss_backward(fa.point, fp.point, fn.point, model.config.margin);
    if (active) *active = point_grads.active;
    if (point_grads.active) {
        detail::backprop_branch(model, anchor, fa, point_grads.anchor, grads);
        detail::backprop_branch(model, positive, fp, point_grads.positive, grads);
        detail::backprop_branch(model, negative, fn, point_grads.negative, grads);
    }
    return loss;
}

// Adam accumulators; embedding moments are updated lazily on touched rows.
struct TrainerState {
    Matrix m_embedding, v_embedding;
    Matrix m_head_w, v_head_w;
    Matrix m_head_b, v_head_b;
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    explicit TrainerState(const ModelConfig& cfg)
        : m_embedding(cfg.vocab_size, cfg.d_embed),
          v_embedding(cfg.vocab_size, cfg.d_embed),
          m_head_w(cfg.d_embed, cfg.d_head),
          v_head_w(cfg.d_embed, cfg.d_head),
          m_head_b(1, cfg.d_head),
          v_head_b(1, cfg.d_head) {}
};

struct EpochStats {
    double mean_loss = 0.0;
    double active_fraction = 0.0;
    double wall_time_sec = 0.0;
};

struct TrainStats {
    std::vector<EpochStats> epochs;
};

namespace detail {

inline void adam_update_span(double* param, double* m, double* v, const double* grad,
                             std::size_t n, const TrainerState& st, double bc1,
                             double bc2, double lr) {
    for (std::size_t k = 0; k < n; ++k) {
        m[k] = st.beta1 * m[k] + (1.0 - st.beta1) * grad[k];
        v[k] = st.beta2 * v[k] + (1.0 - st.beta2) * grad[k] * grad[k];
        param[k] -= lr * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + st.epsilon);
    }
}

}  // namespace detail

inline void apply_adam_step(EmbeddingModel& model, TrainerState& state,
                            const ParamGrads& grads) {
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    const double lr = model.config.learning_rate;
    const std::size_t d_embed = model.config.d_embed;

    for (const auto row : grads.touched)
        detail::adam_update_span(model.embedding.row_ptr(row), state.m_embedding.row_ptr(row),
                                 state.v_embedding.row_ptr(row), grads.embedding.row_ptr(row),
                                 d_embed, state, bc1, bc2, lr);
    detail::adam_update_span(model.head_w.row_ptr(0), state.m_head_w.row_ptr(0),
                             state.v_head_w.row_ptr(0), grads.head_w.row_ptr(0),
                             grads.head_w.size(), state, bc1, bc2, lr);
    detail::adam_update_span(model.head_b.row_ptr(0), state.m_head_b.row_ptr(0),
                             state.v_head_b.row_ptr(0), grads.head_b.row_ptr(0),
                             grads.head_b.size(), state, bc1, bc2, lr);

    // PAD row is frozen at zero; the scatter never touches it, this is the guard.
    double* pad = model.embedding.row_ptr(Vocabulary::kPadId);
    for (std::size_t j = 0; j < d_embed; ++j) pad[j] = 0.0;
}

// Triplet training loop. Deterministic given (seed, config, corpus): batches
// run in sampled order, gradients accumulate in fixed triplet order, and the
// optimizer touches parameters in a fixed sequence.
inline TrainStats train(EmbeddingModel& model, const LabeledCorpus& corpus,
                        const Vocabulary& vocab, SeededRng& rng) {
    const auto& cfg = model.config;
    cfg.validate();
    if (vocab.size() != cfg.vocab_size)
        throw ConfigError("train: vocabulary size " + std::to_string(vocab.size()) +
                          " does not match model vocab_size " +
                          std::to_string(cfg.vocab_size));

    std::vector<TokenizedDoc> encoded;
    encoded.reserve(corpus.size());
    for (const auto& doc : corpus.documents) encoded.push_back(encode(doc, vocab, cfg.max_len));
    const std::vector<int> labels = corpus.labels();

    const std::size_t per_epoch =
        cfg.triplets_per_epoch > 0 ? cfg.triplets_per_epoch : 20 * corpus.size();

    TrainerState state(cfg);
    ParamGrads grads(cfg);
    TrainStats stats;
    stats.epochs.reserve(cfg.epochs);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_start = std::chrono::steady_clock::now();
        const auto triplets = sample_triplets(labels, per_epoch, rng);

        double loss_sum = 0.0;
        std::size_t active_count = 0;
        for (std::size_t begin = 0; begin < triplets.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, triplets.size());
            grads.reset();
            for (std::size_t t = begin; t < end; ++t) {
                const auto& triplet = triplets[t];
                bool active = false;
                const double loss = accumulate_triplet_gradients(
                    model, encoded[triplet.anchor], encoded[triplet.positive],
                    encoded[triplet.negative], grads, &active);
                if (!std::isfinite(loss))
                    throw NumericError(
                        "train: non-finite loss at epoch " + std::to_string(epoch) +
                        ", batch " + std::to_string(begin / cfg.batch_size) +
                        ", triplet (" + std::to_string(triplet.anchor) + "," +
                        std::to_string(triplet.positive) + "," +
                        std::to_string(triplet.negative) + ")");
                loss_sum += loss;
                active_count += active;
            }
            grads.scale(1.0 / static_cast<double>(end - begin));
            if (!grads.head_w.all_finite() || !grads.head_b.all_finite())
                throw NumericError("train: non-finite gradient at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(begin / cfg.batch_size));
            apply_adam_step(model, state, grads);
        }

        EpochStats es;
        es.mean_loss = loss_sum / static_cast<double>(triplets.size());
        es.active_fraction =
            static_cast<double>(active_count) / static_cast<double>(triplets.size());
        es.wall_time_sec =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
                .count();
        stats.epochs.push_back(es);
    }
    return stats;
}

// Batch inference: row i of the result is forward() on document i.
inline std::pair<Matrix, std::vector<int>> embed_corpus(const EmbeddingModel& model,
                                                        const LabeledCorpus& corpus,
                                                        const Vocabulary& vocab) {
    const std::size_t ambient = model.config.manifold.ambient_dim();
    Matrix points(corpus.size(), ambient);
    std::vector<int> labels = corpus.labels();
    std::exception_ptr failure;
    std::mutex failure_mutex;
    parallel_for(corpus.size(), [&](std::size_t i) {
        try {
            const TokenizedDoc doc = encode(corpus.documents[i], vocab, model.config.max_len);
            const Matrix point = forward(model, doc);
            double* row = points.row_ptr(i);
            for (std::size_t j = 0; j < ambient; ++j) row[j] = point[j];
        } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
        }
    });
    if (failure) std::rethrow_exception(failure);
    return {std::move(points), std::move(labels)};
}

// ---------------------------------------------------------------------------
// Persistence: one JSON document carrying config, label names, vocabulary in
// id order, and the three parameter tensors. Doubles survive bit-exactly via
// shortest round-trip decimal serialization.

struct ModelBundle {
    EmbeddingModel model;
    Vocabulary vocab;
    std::vector<std::string> label_names;
};

namespace detail {

inline nlohmann::json manifold_to_json(const ManifoldKind& kind) {
    nlohmann::json j;
    j["family"] = kind.name();
    switch (kind.family()) {
        case ManifoldFamily::Sphere:
        case ManifoldFamily::Euclidean:
            j["dim"] = kind.head_dim();
            break;
        case ManifoldFamily::TorusEmbedded:
            j["major_radius"] = kind.major_radius();
            j["minor_radius"] = kind.minor_radius();
            break;
        default:
            break;
    }
    return j;
}

inline ManifoldKind manifold_from_json(const nlohmann::json& j) {
    const std::string family = j.at("family").get<std::string>();
    if (family == "sphere") return ManifoldKind::sphere(j.at("dim").get<std::size_t>());
    if (family == "euclidean")
        return ManifoldKind::euclidean(j.at("dim").get<std::size_t>());
    if (family == "torus_flat") return ManifoldKind::torus_flat();
    if (family == "torus_embedded")
        return ManifoldKind::torus_embedded(j.at("major_radius").get<double>(),
                                            j.at("minor_radius").get<double>());
    if (family == "mobius_flat") return ManifoldKind::mobius_flat();
    if (family == "mobius_embedded") return ManifoldKind::mobius_embedded();
    throw IoError("model file: unknown manifold family '" + family + "'");
}

inline nlohmann::json matrix_to_json(const Matrix& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const nlohmann::json& j, std::size_t rows, std::size_t cols,
                               const char* name) {
    if (!j.is_array() || j.size() != rows)
        throw IoError("model file: " + std::string(name) + " shape mismatch, expected " +
                      std::to_string(rows) + " rows");
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = j[i];
        if (!row.is_array() || row.size() != cols)
            throw IoError("model file: " + std::string(name) + " shape mismatch at row " +
                          std::to_string(i) + ", expected " + std::to_string(cols) +
                          " columns");
        for (std::size_t jx = 0; jx < cols; ++jx) m(i, jx) = row[jx].get<double>();
    }
    m.ensure_finite(name);
    return m;
}

}  // namespace detail

inline void save_model(const ModelBundle& bundle, const std::string& path) {
    const auto& cfg = bundle.model.config;
    nlohmann::json j;
    j["format_version"] = kModelFormatVersion;
    j["config"] = {{"vocab_size", cfg.vocab_size},
                   {"d_embed", cfg.d_embed},
                   {"d_head", cfg.d_head},
                   {"manifold", detail::manifold_to_json(cfg.manifold)},
                   {"margin", cfg.margin},
                   {"learning_rate", cfg.learning_rate},
                   {"epochs", cfg.epochs},
                   {"batch_size", cfg.batch_size},
                   {"triplets_per_epoch", cfg.triplets_per_epoch},
                   {"seed", cfg.seed},
                   {"max_len", cfg.max_len}};
    j["label_names"] = bundle.label_names;
    j["vocab"] = bundle.vocab.id_to_token;
    j["E"] = detail::matrix_to_json(bundle.model.embedding);
    j["W"] = detail::matrix_to_json(bundle.model.head_w);
    j["b"] = detail::matrix_to_json(bundle.model.head_b);
    atomic_write_text_file(path, j.dump());
}

inline ModelBundle load_model(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kModelFormatVersion)
            throw IoError("model file version mismatch: found " + std::to_string(version) +
                          ", expected " + std::to_string(kModelFormatVersion));

        const auto& jc = j.at("config");
        ModelConfig cfg;
        cfg.vocab_size = jc.at("vocab_size").get<std::size_t>();
        cfg.d_embed = jc.at("d_embed").get<std::size_t>();
        cfg.d_head = jc.at("d_head").get<std::size_t>();
        cfg.manifold = detail::manifold_from_json(jc.at("manifold"));
        cfg.margin = jc.at("margin").get<double>();
        cfg.learning_rate = jc.at("learning_rate").get<double>();
        cfg.epochs = jc.at("epochs").get<std::size_t>();
        cfg.batch_size = jc.at("batch_size").get<std::size_t>();
        cfg.triplets_per_epoch = jc.at("triplets_per_epoch").get<std::size_t>();
        cfg.seed = jc.at("seed").get<std::uint64_t>();
        cfg.max_len = jc.at("max_len").get<std::size_t>();
        try {
            cfg.validate();
        } catch (const ConfigError& e) {
            throw IoError("model file config invalid: " + std::string(e.what()));
        }

        ModelBundle bundle;
        bundle.model.config = cfg;
        bundle.label_names = j.at("label_names").get<std::vector<std::string>>();
        bundle.model.embedding =
            detail::matrix_from_json(j.at("E"), cfg.vocab_size, cfg.d_embed, "E");
        bundle.model.head_w =
            detail::matrix_from_json(j.at("W"), cfg.d_embed, cfg.d_head, "W");
        bundle.model.head_b = detail::matrix_from_json(j.at("b"), 1, cfg.d_head, "b");

        bundle.vocab.id_to_token = j.at("vocab").get<std::vector<std::string>>();
        if (bundle.vocab.id_to_token.size() != cfg.vocab_size)
            throw IoError("model file: vocab length does not match config vocab_size");
        bundle.vocab.frequencies.assign(cfg.vocab_size, 0);
        for (std::uint32_t id = 2; id < bundle.vocab.id_to_token.size(); ++id)
            bundle.vocab.token_to_id.emplace(bundle.vocab.id_to_token[id], id);
        return bundle;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("malformed model file " + path + ": " + e.what());
    }
}

}  // namespace manifold_embed
