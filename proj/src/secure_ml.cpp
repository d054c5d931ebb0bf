#include "securekl/secure_ml.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "securekl/errors.hpp"
#include "securekl/rng.hpp"

namespace securekl {

SgdHyperparams secure_sgd_defaults() {
    SgdHyperparams hp;
    hp.learning_rate = 0.0974;
    hp.patience = 5;
    hp.tolerance = 0.000132;
    hp.momentum = 0.907;
    hp.weight_decay = 8.14e-7;
    hp.dampening = 0.0545;
    return hp;
}

SgdHyperparams plain_sgd_defaults() {
    SgdHyperparams hp;
    hp.learning_rate = 0.0795;
    hp.patience = 2;
    hp.tolerance = 0.000117;
    hp.momentum = 0.886;
    hp.weight_decay = 1.81e-9;
    hp.dampening = 0.0545;
    return hp;
}

void validate_hyperparams(const SgdHyperparams& hp) {
    if (!(hp.learning_rate > 0)) throw ConfigInvalid("learning_rate must be > 0");
    if (!(hp.momentum >= 0 && hp.momentum < 1)) throw ConfigInvalid("momentum must be in [0,1)");
    if (!(hp.tolerance > 0)) throw ConfigInvalid("tolerance must be > 0");
    if (hp.batch_size < 1) throw ConfigInvalid("batch_size must be >= 1");
    if (hp.max_epochs < 0) throw ConfigInvalid("max_epochs must be >= 0");
    if (hp.patience < 0) throw ConfigInvalid("patience must be >= 0");
    if (!(hp.weight_decay >= 0)) throw ConfigInvalid("weight_decay must be >= 0");
    if (!(hp.dampening >= 0 && hp.dampening < 1)) throw ConfigInvalid("dampening must be in [0,1)");
}

namespace {

/// exp(x) ~ (1 + x/2^8)^(2^8) by repeated squaring. Intended for x <= 0,
/// where every intermediate lies in [0, 1]; decays to 0 for deeply
/// negative x instead of blowing up.
SharedTensor exp_by_squaring(PartySession& s, const SharedTensor& x) {
    SharedTensor v = s.add_public(s.scale_public(x, 1.0 / 256.0), 1.0);
    for (int i = 0; i < 8; ++i) v = s.mul(v, v);
    return v;
}

/// 1/v for v in [1, 2]: Newton y <- y(2 - vy), ten steps, seeded with
/// y0 = 3 exp(0.5 - v) + 0.003 which lands inside the convergence basin
/// for this domain. All intermediates stay below 4.
SharedTensor reciprocal_unit_range(PartySession& s, const SharedTensor& v) {
    SharedTensor arg = s.affine_int(v, -1, 0.5);  // 0.5 - v, exact
    SharedTensor y = s.add_public(s.scale_public(exp_by_squaring(s, arg), 3.0), 0.003);
    for (int i = 0; i < 10; ++i) {
        SharedTensor t = s.mul(v, y);
        SharedTensor u = s.affine_int(t, -1, 2.0);  // 2 - vy, exact
        y = s.mul(y, u);
    }
    return y;
}

} // namespace

SharedTensor secure_sigmoid(PartySession& s, const SharedTensor& z) {
    // w = [z < 0] as an exact shared 0/1, so the rest of the pipeline only
    // ever sees the non-positive half-line where the exp approximation is
    // bounded. sigmoid(z) = r + w(1 - 2r) with r = sigmoid(|z|).
    SharedTensor w = s.ltz(z);
    SharedTensor zw = s.mul(z, w);
    SharedTensor neg_abs = st_sub(st_add(zw, zw), z);  // -|z| = 2zw - z
    SharedTensor e = exp_by_squaring(s, neg_abs);
    SharedTensor r = reciprocal_unit_range(s, s.add_public(e, 1.0));
    SharedTensor wr = s.mul(w, r);
    return st_sub(st_add(r, w), st_add(wr, wr));
}

namespace {

/// Forward pass + scalar mean squared error against the labels, opened.
double opened_epoch_loss(PartySession& s, const SharedTensor& X, const SharedTensor& labels,
                         const SharedTensor& w) {
    auto p = secure_sigmoid(s, s.matmul(X, w));
    auto d = st_sub(p, labels);
    auto sq = s.mul(d, d);
    auto mean = s.scale_public_hi(st_sum(sq), 1.0 / static_cast<double>(X.rows()));
    return fx_decode(s.open(mean, OpenTag::loss).at(0, 0), s.fx());
}

} // namespace

SecureModel secure_logreg_train(PartySession& s, const SharedTensor& X,
                                const SharedTensor& labels, const SgdHyperparams& hp,
                                const SecureTrainOptions& opt) {
    validate_hyperparams(hp);
    size_t n = X.rows(), d = X.cols();
    if (labels.rows() != n || labels.cols() != 1) {
        throw ShapeMismatch("labels must be [n x 1] matching the feature rows");
    }
    if (opt.known_positive_count != SIZE_MAX &&
        (opt.known_positive_count == 0 || opt.known_positive_count >= n)) {
        throw DegenerateLabels("membership classes are " +
                               std::to_string(opt.known_positive_count) + "/" +
                               std::to_string(n) + "; need both present");
    }

    SecureModel model;
    model.cfg = s.fx();
    model.weights = s.share_public(RingTensor(d, 1));  // zeros: deterministic, convex task
    SharedTensor momentum = s.share_public(RingTensor(d, 1));

    double best = std::numeric_limits<double>::infinity();
    int stale = 0;
    for (int epoch = 0; epoch < hp.max_epochs; ++epoch) {
        Rng perm_rng(derive_seed(opt.shuffle_seed, static_cast<uint64_t>(epoch)));
        auto perm = perm_rng.permutation(n);
        for (size_t start = 0; start < n; start += hp.batch_size) {
            size_t stop = std::min(n, start + static_cast<size_t>(hp.batch_size));
            std::vector<size_t> idx(perm.begin() + start, perm.begin() + stop);
            auto Xb = st_take_rows(X, idx);
            auto yb = st_take_rows(labels, idx);
            auto p = secure_sigmoid(s, s.matmul(Xb, model.weights));
            auto g = s.matmul(st_transpose(Xb), st_sub(p, yb));
            g = s.scale_public_hi(g, 1.0 / static_cast<double>(idx.size()));
            if (hp.weight_decay > 0) {
                g = st_add(g, s.scale_public_hi(model.weights, hp.weight_decay));
            }
            momentum = st_add(s.scale_public(momentum, hp.momentum),
                              s.scale_public(g, 1.0 - hp.dampening));
            model.weights = st_sub(model.weights, s.scale_public(momentum, hp.learning_rate));
        }

        if (opt.strict) continue;
        double loss = opened_epoch_loss(s, X, labels, model.weights);
        if (!std::isfinite(loss) || loss < -0.01 || loss > 100.0) {
            throw NonFinite("epoch loss " + std::to_string(loss) + " is out of range");
        }
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

double secure_mean_score(PartySession& s, const SecureModel& model, const SharedTensor& X_src) {
    size_t m = X_src.rows();
    if (m == 0) throw EmptySource("cannot score an empty source dataset");
    if (X_src.cols() != model.weights.rows()) {
        throw ShapeMismatch("source feature width does not match the model");
    }
    auto p = secure_sigmoid(s, s.matmul(X_src, model.weights));
    auto mean = s.scale_public_hi(st_sum(p), 1.0 / static_cast<double>(m));
    return fx_decode(s.open(mean, OpenTag::final_score).at(0, 0), s.fx());
}

} // namespace securekl
