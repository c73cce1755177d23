#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fairpath/autodiff.hpp"
#include "fairpath/param_vector.hpp"
#include "fairpath/tape.hpp"

namespace fairpath::models {

enum class Activation : std::uint8_t { relu, linear };
enum class Task : std::uint8_t { regression, binary_classification };
enum class LossKind : std::uint8_t { square, logistic };

LossKind loss_for_task(Task task);

// Representation network: fully connected layers arch[0] -> ... -> arch.back(),
// `activation` on hidden layers and `embed_activation` on the final (embedding)
// output.
struct ReprNet {
    ParamVector params;
    std::vector<int> arch;
    Activation activation = Activation::relu;
    Activation embed_activation = Activation::linear;
    std::optional<double> norm_cap;

    int input_dim() const { return arch.front(); }
    int embed_dim() const { return arch.back(); }

    static ReprNet init(std::vector<int> arch, Activation activation, std::uint64_t seed,
                        Activation embed_activation = Activation::linear, double init_scale = 1.0);
    static ReprNet identity(int dim);  // single linear layer, identity weights
};

// Linear predictor on the embedding: weight (embed x 1) plus bias scalar.
struct Head {
    ParamVector params;
    Task task = Task::regression;
    std::optional<double> norm_cap;

    int embed_dim() const;

    static Head zeros(int embed_dim, Task task);
    static Head init(int embed_dim, Task task, std::uint64_t seed);
};

// --- taped builders (compose onto a caller-owned tape) ---

// Records the embedding of the rows bound at x_id; returns the z node.
int record_embed(Tape& tape, const TapeBinding& net_binding, int x_id, const ReprNet& net);

// Records z * w + b; returns the (n x 1) score node.
int record_scores(Tape& tape, const TapeBinding& head_binding, int z_id);

// Records the mean loss of scores against constant labels; returns scalar node.
int record_loss(Tape& tape, int scores_id, int labels_id, LossKind kind);

// --- eager convenience wrappers ---

Tensor embed(const ReprNet& net, const Tensor& x_batch);
Tensor predict(const Head& head, const ReprNet& net, const Tensor& x_batch);
// Scores from a precomputed embedding.
Tensor predict_embedded(const Head& head, const Tensor& z_batch);
double group_loss(const Head& head, const ReprNet& net, const Tensor& x_batch, const Tensor& y_batch, LossKind kind);
double loss_on_embedding(const Head& head, const Tensor& z_batch, const Tensor& y_batch, LossKind kind);

// Tensor layout checks shared by the eager wrappers.
void require_batch(const ReprNet& net, const Tensor& x_batch, const char* what);
void require_labels(const Tensor& y_batch, int n, LossKind kind, const char* what);

}  // namespace fairpath::models
