#include "securekl/plain_ml.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "securekl/errors.hpp"
#include "securekl/rng.hpp"

namespace securekl {

double sigmoid_exact(double z) { return 1.0 / (1.0 + std::exp(-z)); }

namespace {

double mean_squared_loss(const std::vector<double>& X, size_t n, size_t d,
                         const std::vector<double>& y, const std::vector<double>& w) {
    double acc = 0;
    for (size_t i = 0; i < n; ++i) {
        double z = 0;
        for (size_t j = 0; j < d; ++j) z += X[i * d + j] * w[j];
        double e = sigmoid_exact(z) - y[i];
        acc += e * e;
    }
    return acc / static_cast<double>(n);
}

} // namespace

PlainModel plain_logreg_train(const std::vector<double>& X, size_t n, size_t d,
                              const std::vector<double>& y, const SgdHyperparams& hp,
                              uint64_t shuffle_seed) {
    validate_hyperparams(hp);
    if (X.size() != n * d || y.size() != n) {
        throw ShapeMismatch("feature matrix / label vector sizes disagree");
    }
    size_t positives = 0;
    for (double v : y) {
        if (v != 0.0 && v != 1.0) throw DegenerateLabels("labels must be 0 or 1");
        positives += v == 1.0;
    }
    if (n > 0 && (positives == 0 || positives == n)) {
        throw DegenerateLabels("both classes must be present");
    }

    PlainModel model;
    model.weights.assign(d, 0.0);
    std::vector<double> momentum(d, 0.0), grad(d);

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        Rng perm_rng(derive_seed(shuffle_seed, static_cast<uint64_t>(epoch)));
        auto perm = perm_rng.permutation(n);
        for (size_t start = 0; start < n; start += hp.batch_size) {
            size_t stop = std::min(n, start + static_cast<size_t>(hp.batch_size));
            double inv_b = 1.0 / static_cast<double>(stop - start);
            std::fill(grad.begin(), grad.end(), 0.0);
            for (size_t r = start; r < stop; ++r) {
                size_t row = perm[r];
                double z = 0;
                for (size_t j = 0; j < d; ++j) z += X[row * d + j] * model.weights[j];
                double e = sigmoid_exact(z) - y[row];
                for (size_t j = 0; j < d; ++j) grad[j] += e * X[row * d + j];
            }
            for (size_t j = 0; j < d; ++j) {
                double g = grad[j] * inv_b + hp.weight_decay * model.weights[j];
                momentum[j] = hp.momentum * momentum[j] + (1.0 - hp.dampening) * g;
                model.weights[j] -= hp.learning_rate * momentum[j];
            }
        }

        double loss = mean_squared_loss(X, n, d, y, model.weights);
        if (!std::isfinite(loss)) throw NonFinite("epoch loss diverged");
        model.training_log.push_back(loss);
        if (loss < best - hp.tolerance) {
            best = loss;
            stale = 0;
        } else if (++stale >= hp.patience) {
            break;
        }
    }
    return model;
}

double plain_mean_score(const PlainModel& model, const std::vector<double>& X, size_t m) {
    if (m == 0) throw EmptySource("cannot score an empty source dataset");
    size_t d = model.weights.size();
    if (X.size() != m * d) throw ShapeMismatch("source feature width does not match the model");
    double acc = 0;
    for (size_t i = 0; i < m; ++i) {
        double z = 0;
        for (size_t j = 0; j < d; ++j) z += X[i * d + j] * model.weights[j];
        acc += sigmoid_exact(z);
    }
    return acc / static_cast<double>(m);
}

} // namespace securekl
