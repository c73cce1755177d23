#include "fairpath/models.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "fairpath/rng.hpp"

namespace fairpath::models {

LossKind loss_for_task(Task task) {
    return task == Task::regression ? LossKind::square : LossKind::logistic;
}

ReprNet ReprNet::init(std::vector<int> arch, Activation activation, std::uint64_t seed, Activation embed_activation,
                      double init_scale) {
    if (arch.size() < 2) throw std::invalid_argument("ReprNet: arch needs at least input and embed widths");
    for (int w : arch) {
        if (w < 1) throw std::invalid_argument("ReprNet: layer widths must be >= 1");
    }
    ReprNet net;
    net.arch = std::move(arch);
    net.activation = activation;
    net.embed_activation = embed_activation;
    auto rng = make_rng(seed);
    for (std::size_t l = 0; l + 1 < net.arch.size(); ++l) {
        const int fan_in = net.arch[l];
        const int fan_out = net.arch[l + 1];
        const double std = init_scale / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> w(static_cast<std::size_t>(fan_in) * fan_out);
        for (auto& v : w) v = rand_normal(rng, 0.0, std);
        net.params.add("w" + std::to_string(l), {fan_in, fan_out}, std::move(w));
        net.params.add_zeros("b" + std::to_string(l), {fan_out});
    }
    return net;
}

ReprNet ReprNet::identity(int dim) {
    ReprNet net;
    net.arch = {dim, dim};
    net.activation = Activation::linear;
    net.embed_activation = Activation::linear;
    std::vector<double> w(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) w[static_cast<std::size_t>(i) * dim + i] = 1.0;
    net.params.add("w0", {dim, dim}, std::move(w));
    net.params.add_zeros("b0", {dim});
    return net;
}

int Head::embed_dim() const { return params.layout.at(0).shape.at(0); }

Head Head::zeros(int embed_dim, Task task) {
    Head h;
    h.task = task;
    h.params.add_zeros("w", {embed_dim, 1});
    h.params.add_zeros("b", {1});
    return h;
}

Head Head::init(int embed_dim, Task task, std::uint64_t seed) {
    Head h = zeros(embed_dim, task);
    auto rng = make_rng(seed);
    const double std = 1.0 / std::sqrt(static_cast<double>(embed_dim));
    for (std::size_t i = 0; i < static_cast<std::size_t>(embed_dim); ++i) h.params.values[i] = rand_normal(rng, 0.0, std);
    return h;
}

int record_embed(Tape& tape, const TapeBinding& net_binding, int x_id, const ReprNet& net) {
    const Tensor& x = tape.value(x_id);
    if (x.shape.size() != 2 || x.shape[1] != net.input_dim()) {
        throw std::invalid_argument("embed: batch shape " + x.shape_str() + " does not match input width " +
                                    std::to_string(net.input_dim()));
    }
    const std::size_t n_layers = net.arch.size() - 1;
    if (net_binding.leaf_ids.size() != 2 * n_layers) {
        throw std::invalid_argument("embed: binding does not match architecture");
    }
    int h = x_id;
    for (std::size_t l = 0; l < n_layers; ++l) {
        int lin = tape.bias_add(tape.matmul(h, net_binding.leaf_ids[2 * l]), net_binding.leaf_ids[2 * l + 1]);
        const bool last = (l + 1 == n_layers);
        const Activation act = last ? net.embed_activation : net.activation;
        h = act == Activation::relu ? tape.relu(lin) : lin;
    }
    return h;
}

int record_scores(Tape& tape, const TapeBinding& head_binding, int z_id) {
    if (head_binding.leaf_ids.size() != 2) throw std::invalid_argument("record_scores: head binding needs w and b");
    const Tensor& z = tape.value(z_id);
    const Tensor& w = tape.value(head_binding.leaf_ids[0]);
    if (z.shape.size() != 2 || z.shape[1] != w.shape[0]) {
        throw std::invalid_argument("record_scores: embedding " + z.shape_str() + " does not match head width " +
                                    std::to_string(w.shape[0]));
    }
    return tape.bias_add(tape.matmul(z_id, head_binding.leaf_ids[0]), head_binding.leaf_ids[1]);
}

int record_loss(Tape& tape, int scores_id, int labels_id, LossKind kind) {
    const Tensor& s = tape.value(scores_id);
    const Tensor& y = tape.value(labels_id);
    if (s.shape != y.shape) {
        throw std::invalid_argument("record_loss: scores " + s.shape_str() + " vs labels " + y.shape_str());
    }
    if (kind == LossKind::square) {
        return tape.mean(tape.square(tape.sub(scores_id, labels_id)));
    }
    // log(1 + exp(-y * s)) via the stable softplus
    int neg_margin = tape.affine(tape.mul(scores_id, labels_id), -1.0, 0.0);
    return tape.mean(tape.softplus(neg_margin));
}

void require_batch(const ReprNet& net, const Tensor& x_batch, const char* what) {
    if (x_batch.shape.size() != 2 || x_batch.shape[1] != net.input_dim()) {
        throw std::invalid_argument(std::string(what) + ": batch shape " + x_batch.shape_str() +
                                    " does not match input width " + std::to_string(net.input_dim()));
    }
}

void require_labels(const Tensor& y_batch, int n, LossKind kind, const char* what) {
    if (y_batch.numel() == 0) throw std::invalid_argument(std::string(what) + ": empty batch");
    if (y_batch.numel() != n) {
        throw std::invalid_argument(std::string(what) + ": label count " + std::to_string(y_batch.numel()) +
                                    " does not match batch size " + std::to_string(n));
    }
    if (kind == LossKind::logistic) {
        for (std::size_t i = 0; i < y_batch.data.size(); ++i) {
            double y = y_batch.data[i];
            if (y != 1.0 && y != -1.0) {
                throw std::invalid_argument(std::string(what) + ": logistic labels must be in {-1,+1}, sample " +
                                            std::to_string(i) + " has " + std::to_string(y));
            }
        }
    }
}

Tensor embed(const ReprNet& net, const Tensor& x_batch) {
    require_batch(net, x_batch, "embed");
    Tape tape;
    auto binding = bind_params(tape, net.params);
    int x = tape.constant(x_batch);
    int z = record_embed(tape, binding, x, net);
    return tape.value(z);
}

Tensor predict_embedded(const Head& head, const Tensor& z_batch) {
    Tape tape;
    auto binding = bind_params(tape, head.params);
    int z = tape.constant(z_batch);
    int s = record_scores(tape, binding, z);
    return tape.value(s);
}

Tensor predict(const Head& head, const ReprNet& net, const Tensor& x_batch) {
    return predict_embedded(head, embed(net, x_batch));
}

double loss_on_embedding(const Head& head, const Tensor& z_batch, const Tensor& y_batch, LossKind kind) {
    Tape tape;
    auto binding = bind_params(tape, head.params);
    int z = tape.constant(z_batch);
    int s = record_scores(tape, binding, z);
    // per-sample check before reducing, to report the offending index
    Tensor scores = tape.value(s);
    int n = scores.shape[0];
    require_labels(y_batch, n, kind, "group_loss");
    int y = tape.constant(Tensor({n, 1}, y_batch.data));
    int loss = record_loss(tape, s, y, kind);
    double v = tape.value(loss).scalar_value();
    if (!std::isfinite(v)) {
        for (int i = 0; i < n; ++i) {
            double si = scores.data[static_cast<std::size_t>(i)];
            double yi = y_batch.data[static_cast<std::size_t>(i)];
            double li = kind == LossKind::square ? (si - yi) * (si - yi) : std::log1p(std::exp(-yi * si));
            if (!std::isfinite(li)) {
                throw std::runtime_error("group_loss: non-finite loss at sample " + std::to_string(i));
            }
        }
        throw std::runtime_error("group_loss: non-finite mean loss");
    }
    return v;
}

double group_loss(const Head& head, const ReprNet& net, const Tensor& x_batch, const Tensor& y_batch, LossKind kind) {
    require_batch(net, x_batch, "group_loss");
    if (x_batch.shape[0] == 0) throw std::invalid_argument("group_loss: empty batch");
    return loss_on_embedding(head, embed(net, x_batch), y_batch, kind);
}

}  // namespace fairpath::models
