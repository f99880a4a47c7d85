#ifndef MIXNET_SVM_HPP
#define MIXNET_SVM_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mixnet/archive.hpp"
#include "mixnet/evalmetrics.hpp"
#include "mixnet/features.hpp"

namespace mixnet {

struct SvmConfig {
    double C = 1.0;
    double gamma = 1.0;
    double tol = 1e-3;
    int max_passes = 10;
    int max_iter = 20000;
};

// RBF-kernel C-SVC trained with sequential minimal optimization, plus a
// logistic (Platt) calibration mapping decision values to [0,1] attack
// scores. Immutable after training.
struct SvmModel {
    std::string descriptor_id;
    double gamma = 1.0;
    std::vector<std::vector<double>> support_vectors;
    std::vector<double> coeffs;  // alpha_i * y_i per support vector
    double bias = 0.0;
    double platt_a = -1.0, platt_b = 0.0;  // p = 1 / (1 + exp(a*f + b))
    double decision_threshold = 0.5;       // EER threshold on calibrated training scores

    double decision_value(const FeatureVector& f) const {
        if (f.descriptor_id != descriptor_id)
            throw std::invalid_argument("svm: descriptor mismatch: model '" + descriptor_id +
                                        "' vs feature '" + f.descriptor_id + "'");
        double sum = bias;
        for (size_t i = 0; i < support_vectors.size(); ++i) {
            double d2 = 0.0;
            const auto& sv = support_vectors[i];
            for (size_t k = 0; k < sv.size(); ++k) {
                double d = sv[k] - f.values[k];
                d2 += d * d;
            }
            sum += coeffs[i] * std::exp(-gamma * d2);
        }
        return sum;
    }

    // calibrated attack probability; monotone increasing in the decision value
    double predict_score(const FeatureVector& f) const {
        double v = decision_value(f);
        return 1.0 / (1.0 + std::exp(platt_a * v + platt_b));
    }
};

namespace detail {

inline double rbf(const std::vector<double>& a, const std::vector<double>& b, double gamma) {
    double d2 = 0.0;
    for (size_t k = 0; k < a.size(); ++k) {
        double d = a[k] - b[k];
        d2 += d * d;
    }
    return std::exp(-gamma * d2);
}

// Platt 1999 sigmoid fit with Lin-Weng-Keerthi's robust Newton iteration.
inline void fit_platt(const std::vector<double>& decisions, const std::vector<int>& labels,
                      double& a, double& b) {
    const size_t n = decisions.size();
    double np = 0, nn = 0;
    for (int y : labels) (y == 1 ? np : nn)++;
    const double hi = (np + 1.0) / (np + 2.0);
    const double lo = 1.0 / (nn + 2.0);
    std::vector<double> t(n);
    for (size_t i = 0; i < n; ++i) t[i] = labels[i] == 1 ? hi : lo;

    a = 0.0;
    b = std::log((nn + 1.0) / (np + 1.0));
    const double min_step = 1e-10, sigma = 1e-12;
    double fval = 0.0;
    auto objective = [&](double A, double B) {
        double v = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double z = A * decisions[i] + B;
            // stable log(1 + exp(...)) forms
            if (z >= 0)
                v += t[i] * z + std::log1p(std::exp(-z));
            else
                v += (t[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return v;
    };
    fval = objective(a, b);
    for (int it = 0; it < 100; ++it) {
        double h11 = sigma, h22 = sigma, h21 = 0, g1 = 0, g2 = 0;
        for (size_t i = 0; i < n; ++i) {
            double z = a * decisions[i] + b;
            double p = z >= 0 ? std::exp(-z) / (1.0 + std::exp(-z)) : 1.0 / (1.0 + std::exp(z));
            double q = 1.0 - p;  // q = sigmoid(z)
            double d1 = t[i] - p;
            double d2 = p * q;
            g1 += decisions[i] * d1;
            g2 += d1;
            h11 += decisions[i] * decisions[i] * d2;
            h22 += d2;
            h21 += decisions[i] * d2;
        }
        if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
        double det = h11 * h22 - h21 * h21;
        double da = -(h22 * g1 - h21 * g2) / det;
        double db = -(-h21 * g1 + h11 * g2) / det;
        double g = g1 * da + g2 * db;
        double step = 1.0;
        while (step >= min_step) {
            double na = a + step * da, nb = b + step * db;
            double nf = objective(na, nb);
            if (nf < fval + 1e-4 * step * g) {
                a = na;
                b = nb;
                fval = nf;
                break;
            }
            step *= 0.5;
        }
        if (step < min_step) break;
    }
}

}  // namespace detail

// SMO on the dual problem. Deterministic: pair selection scans indices in
// order, second index maximizes |E_i - E_j|.
inline SvmModel train_svm(const std::vector<FeatureVector>& features,
                          const std::vector<int>& labels, const SvmConfig& cfg = {}) {
    const size_t n = features.size();
    if (n != labels.size()) throw std::invalid_argument("train_svm: feature/label size mismatch");
    size_t np = 0, nn = 0;
    for (int b : labels) (b == 1 ? np : nn)++;
    if (np == 0 || nn == 0) throw std::invalid_argument("train_svm: need samples of both classes");
    if (np < 2 || nn < 2) throw std::invalid_argument("train_svm: need at least 2 samples per class");
    for (const auto& f : features)
        if (f.descriptor_id != features.front().descriptor_id)
            throw std::invalid_argument("train_svm: mixed descriptor ids");

    std::vector<double> y(n);
    for (size_t i = 0; i < n; ++i) y[i] = labels[i] == 1 ? 1.0 : -1.0;

    // kernel matrix; desk-scale sample counts keep this small
    std::vector<std::vector<double>> K(n, std::vector<double>(n));
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i; j < n; ++j)
            K[i][j] = K[j][i] = detail::rbf(features[i].values, features[j].values, cfg.gamma);

    std::vector<double> alpha(n, 0.0);
    double b = 0.0;
    // error cache: E[i] = f(x_i) - y_i, updated incrementally after each step
    std::vector<double> E(n);
    for (size_t i = 0; i < n; ++i) E[i] = -y[i];

    int passes = 0, iter = 0;
    while (passes < cfg.max_passes && iter < cfg.max_iter) {
        int changed = 0;
        for (size_t i = 0; i < n; ++i, ++iter) {
            double Ei = E[i];
            bool violates = (y[i] * Ei < -cfg.tol && alpha[i] < cfg.C) ||
                            (y[i] * Ei > cfg.tol && alpha[i] > 0);
            if (!violates) continue;
            // second choice: maximal |Ei - Ej|
            size_t j = n;
            double best = -1.0;
            for (size_t cand = 0; cand < n; ++cand) {
                if (cand == i) continue;
                double gap = std::abs(Ei - E[cand]);
                if (gap > best) {
                    best = gap;
                    j = cand;
                }
            }
            if (j == n) continue;
            double Ej = E[j];
            double ai_old = alpha[i], aj_old = alpha[j];
            double L, H;
            if (y[i] != y[j]) {
                L = std::max(0.0, aj_old - ai_old);
                H = std::min(cfg.C, cfg.C + aj_old - ai_old);
            } else {
                L = std::max(0.0, ai_old + aj_old - cfg.C);
                H = std::min(cfg.C, ai_old + aj_old);
            }
            if (L >= H) continue;
            double eta = 2.0 * K[i][j] - K[i][i] - K[j][j];
            if (eta >= 0) continue;
            double aj = aj_old - y[j] * (Ei - Ej) / eta;
            aj = std::clamp(aj, L, H);
            if (std::abs(aj - aj_old) < 1e-7) continue;
            double ai = ai_old + y[i] * y[j] * (aj_old - aj);
            alpha[i] = ai;
            alpha[j] = aj;
            double b1 = b - Ei - y[i] * (ai - ai_old) * K[i][i] - y[j] * (aj - aj_old) * K[i][j];
            double b2 = b - Ej - y[i] * (ai - ai_old) * K[i][j] - y[j] * (aj - aj_old) * K[j][j];
            double b_new;
            if (ai > 0 && ai < cfg.C)
                b_new = b1;
            else if (aj > 0 && aj < cfg.C)
                b_new = b2;
            else
                b_new = 0.5 * (b1 + b2);
            double db = b_new - b;
            b = b_new;
            for (size_t k = 0; k < n; ++k)
                E[k] += y[i] * (ai - ai_old) * K[i][k] + y[j] * (aj - aj_old) * K[j][k] + db;
            ++changed;
        }
        passes = changed == 0 ? passes + 1 : 0;
    }

    SvmModel model;
    model.descriptor_id = features.front().descriptor_id;
    model.gamma = cfg.gamma;
    model.bias = b;
    for (size_t i = 0; i < n; ++i)
        if (alpha[i] > 1e-12) {
            model.support_vectors.push_back(features[i].values);
            model.coeffs.push_back(alpha[i] * y[i]);
        }

    // Platt calibration on training decision values
    std::vector<double> dec(n);
    for (size_t i = 0; i < n; ++i) dec[i] = model.decision_value(features[i]);
    detail::fit_platt(dec, labels, model.platt_a, model.platt_b);

    // decision threshold at the EER of calibrated training scores
    std::vector<ScoredSample> scored(n);
    for (size_t i = 0; i < n; ++i) {
        scored[i].sample_id = strf("train_%zu", i);
        scored[i].final_score = 1.0 / (1.0 + std::exp(model.platt_a * dec[i] + model.platt_b));
        scored[i].truth = labels[i];
    }
    model.decision_threshold = roc_and_eer(scored).eer_threshold;
    return model;
}

// 3-fold cross-validated grid search over (C, gamma) on the training data;
// selects the configuration with the highest mean CV accuracy, ties broken
// by the earlier grid position.
inline SvmConfig svm_grid_search(const std::vector<FeatureVector>& features,
                                 const std::vector<int>& labels,
                                 const std::vector<double>& Cs,
                                 const std::vector<double>& gammas, uint64_t seed = 0) {
    if (Cs.empty() || gammas.empty())
        throw std::invalid_argument("svm_grid_search: empty grid");
    const int kfold = 3;
    std::vector<size_t> order(features.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);

    SvmConfig best;
    double best_acc = -1.0;
    for (double C : Cs)
        for (double gamma : gammas) {
            SvmConfig cfg;
            cfg.C = C;
            cfg.gamma = gamma;
            size_t correct = 0, total = 0;
            for (int f = 0; f < kfold; ++f) {
                std::vector<FeatureVector> tr;
                std::vector<int> trl;
                std::vector<size_t> te;
                for (size_t pos = 0; pos < order.size(); ++pos) {
                    if (static_cast<int>(pos % kfold) == f)
                        te.push_back(order[pos]);
                    else {
                        tr.push_back(features[order[pos]]);
                        trl.push_back(labels[order[pos]]);
                    }
                }
                int c0 = 0, c1 = 0;
                for (int l : trl) (l == 1 ? c1 : c0)++;
                if (c0 < 2 || c1 < 2) continue;
                SvmModel m = train_svm(tr, trl, cfg);
                for (size_t idx : te) {
                    double s = m.predict_score(features[idx]);
                    int pred = s >= m.decision_threshold ? 1 : 0;
                    correct += pred == labels[idx];
                    ++total;
                }
            }
            double acc = total ? static_cast<double>(correct) / total : 0.0;
            if (acc > best_acc) {
                best_acc = acc;
                best = cfg;
            }
        }
    return best;
}

inline void save_svm(const SvmModel& m, const std::string& path) {
    Archive a;
    a.meta["kind"] = "svm";
    a.meta["kernel"] = "rbf";
    a.meta["descriptor_id"] = m.descriptor_id;
    a.meta["gamma"] = m.gamma;
    a.meta["bias"] = m.bias;
    a.meta["platt_a"] = m.platt_a;
    a.meta["platt_b"] = m.platt_b;
    a.meta["decision_threshold"] = m.decision_threshold;
    a.meta["sv_count"] = m.support_vectors.size();
    a.meta["sv_dim"] = m.support_vectors.empty() ? 0 : m.support_vectors[0].size();
    std::vector<double> flat;
    for (const auto& sv : m.support_vectors) flat.insert(flat.end(), sv.begin(), sv.end());
    a.arrays["support_vectors"] = std::move(flat);
    a.arrays["coeffs"] = m.coeffs;
    a.save(path);
}

inline SvmModel load_svm(const std::string& path) {
    Archive a = Archive::load(path);
    if (a.meta.value("kind", "") != "svm")
        throw std::runtime_error("load_svm: " + path + " is not an svm archive");
    SvmModel m;
    m.descriptor_id = a.meta.at("descriptor_id").get<std::string>();
    m.gamma = a.meta.at("gamma").get<double>();
    m.bias = a.meta.at("bias").get<double>();
    m.platt_a = a.meta.at("platt_a").get<double>();
    m.platt_b = a.meta.at("platt_b").get<double>();
    m.decision_threshold = a.meta.at("decision_threshold").get<double>();
    size_t count = a.meta.at("sv_count").get<size_t>();
    size_t dim = a.meta.at("sv_dim").get<size_t>();
    const auto& flat = a.arrays.at("support_vectors");
    m.coeffs = a.arrays.at("coeffs");
    if (flat.size() != count * dim || m.coeffs.size() != count)
        throw std::runtime_error("load_svm: inconsistent array sizes in " + path);
    m.support_vectors.resize(count);
    for (size_t i = 0; i < count; ++i)
        m.support_vectors[i].assign(flat.begin() + i * dim, flat.begin() + (i + 1) * dim);
    return m;
}

}  // namespace mixnet

#endif
