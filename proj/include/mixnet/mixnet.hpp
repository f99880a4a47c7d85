#ifndef MIXNET_MIXNET_HPP
#define MIXNET_MIXNET_HPP

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mixnet/backbones.hpp"
#include "mixnet/datamodel.hpp"
#include "mixnet/nn.hpp"

namespace mixnet {

// Categorical cross-entropy; probabilities are clamped to [1e-7, 1] before
// the log.
inline double cross_entropy(const std::vector<double>& target,
                            const std::vector<double>& probs) {
    if (target.size() != probs.size())
        throw std::invalid_argument(strf("cross_entropy: length mismatch %zu vs %zu",
                                         target.size(), probs.size()));
    double loss = 0.0;
    for (size_t i = 0; i < target.size(); ++i) {
        double p = std::clamp(probs[i], 1e-7, 1.0);
        loss -= target[i] * std::log(p);
    }
    return loss;
}

enum class FusionKind { trainable_softmax, fixed_max };

struct MixNetConfig {
    // ordered branch list; names must be a subset of {print, replay, mask}
    std::vector<std::pair<std::string, BackboneSpec>> branches;
    std::vector<double> alphas;  // one per branch, then the final coefficient
    FusionKind fusion = FusionKind::trainable_softmax;

    void validate() const {
        if (branches.size() != 2 && branches.size() != 3)
            throw std::invalid_argument("mixnet: config needs 2 or 3 branches");
        if (alphas.size() != branches.size() + 1)
            throw std::invalid_argument(strf(
                "mixnet: %zu branches need %zu loss coefficients, got %zu", branches.size(),
                branches.size() + 1, alphas.size()));
        std::set<std::string> names;
        for (const auto& [name, spec] : branches) {
            if (name != "print" && name != "replay" && name != "mask")
                throw std::invalid_argument("mixnet: unknown branch name '" + name + "'");
            if (!names.insert(name).second)
                throw std::invalid_argument("mixnet: duplicate branch '" + name + "'");
            spec.validate();
        }
        for (double a : alphas)
            if (a < 0) throw std::invalid_argument("mixnet: loss coefficients must be >= 0");
    }

    bool has_branch(const std::string& name) const {
        for (const auto& [n, _] : branches)
            if (n == name) return true;
        return false;
    }

    json to_json() const {
        json j;
        json br = json::array();
        for (const auto& [name, spec] : branches)
            br.push_back({{"name", name},
                          {"family", to_string(spec.family)},
                          {"pretrained", to_string(spec.pretrained)},
                          {"input_h", spec.input_h},
                          {"input_w", spec.input_w}});
        j["branches"] = br;
        j["alphas"] = alphas;
        j["fusion"] = fusion == FusionKind::trainable_softmax ? "trainable_softmax" : "fixed_max";
        return j;
    }

    static MixNetConfig from_json(const json& j) {
        MixNetConfig c;
        for (const auto& b : j.at("branches")) {
            BackboneSpec spec;
            spec.family = backbone_family_from_string(b.at("family").get<std::string>());
            spec.pretrained = pretrained_from_string(b.at("pretrained").get<std::string>());
            spec.input_h = b.at("input_h").get<int>();
            spec.input_w = b.at("input_w").get<int>();
            c.branches.emplace_back(b.at("name").get<std::string>(), spec);
        }
        c.alphas = j.at("alphas").get<std::vector<double>>();
        c.fusion = j.at("fusion").get<std::string>() == "fixed_max" ? FusionKind::fixed_max
                                                                    : FusionKind::trainable_softmax;
        return c;
    }
};

struct LossBreakdown {
    double print_loss = 0.0;
    double replay_loss = 0.0;
    double mask_loss = 0.0;   // stays 0 for two-branch models
    double final_loss = 0.0;
    double total_loss = 0.0;
};

// Forward-pass state kept between forward() and the loss/backward step.
struct MixNetActivations {
    std::vector<nn::Tensor> branch_logits;  // per branch, (N,2,1,1)
    std::vector<nn::Tensor> branch_probs;
    nn::Tensor fusion_input;                // (N, B, 1, 1) branch attack probabilities
    nn::Tensor fusion_logits;               // (N,2,1,1)
    nn::Tensor fusion_probs;
    int batch = 0;
};

// The multi-specialist detector: one sub-network per attack, branch
// confidences fused by a trainable 2-node softmax layer (or a fixed max).
// Branch parameter sets are disjoint by construction, which is what makes
// the gradient-routing property literal: a branch's loss can only reach its
// own parameters, while the final loss reaches every branch through the
// fusion layer.
class MixNetModel {
  public:
    MixNetModel(MixNetConfig config, Rng& rng) : config_(std::move(config)) {
        config_.validate();
        for (const auto& [name, spec] : config_.branches)
            branches_.push_back(build_backbone(spec, rng));
        if (config_.fusion == FusionKind::trainable_softmax) {
            fusion_ = std::make_unique<nn::Dense>(static_cast<int>(branches_.size()), 2, rng);
            // orient the fusion so higher branch confidence means attack;
            // a randomly inverted start makes the final loss fight the
            // branch losses
            auto params = fusion_->params();
            const int nb = static_cast<int>(branches_.size());
            for (int b = 0; b < nb; ++b) {
                params[0].value[b] = -1.0;       // genuine row
                params[0].value[nb + b] = 1.0;   // attack row
            }
            params[1].value[0] = params[1].value[1] = 0.0;
        }
    }

    const MixNetConfig& config() const { return config_; }
    size_t branch_count() const { return branches_.size(); }
    const std::string& branch_name(size_t i) const { return config_.branches[i].first; }
    Backbone& branch(size_t i) { return branches_[i]; }

    int branch_index(const std::string& name) const {
        for (size_t i = 0; i < branches_.size(); ++i)
            if (config_.branches[i].first == name) return static_cast<int>(i);
        return -1;
    }

    MixNetActivations forward_batch(const nn::Tensor& images, bool train) {
        check_input(images);
        MixNetActivations act;
        act.batch = images.n;
        for (auto& b : branches_) {
            nn::Tensor logits = b.graph.forward(images, train);
            act.branch_probs.push_back(nn::softmax_rows(logits));
            act.branch_logits.push_back(std::move(logits));
        }
        act.fusion_input = nn::Tensor(images.n, static_cast<int>(branches_.size()), 1, 1);
        for (size_t bi = 0; bi < branches_.size(); ++bi)
            for (int s = 0; s < images.n; ++s)
                act.fusion_input.at(s, static_cast<int>(bi), 0, 0) =
                    act.branch_probs[bi].at(s, 1, 0, 0);
        if (config_.fusion == FusionKind::trainable_softmax) {
            std::vector<const nn::Tensor*> in{&act.fusion_input};
            act.fusion_logits = fusion_->forward(in, train);
            act.fusion_probs = nn::softmax_rows(act.fusion_logits);
        } else {
            // fixed max: final attack probability is the largest branch score
            act.fusion_probs = nn::Tensor(images.n, 2, 1, 1);
            max_index_.assign(images.n, 0);
            for (int s = 0; s < images.n; ++s) {
                double best = -1.0;
                for (size_t bi = 0; bi < branches_.size(); ++bi) {
                    double v = act.fusion_input.at(s, static_cast<int>(bi), 0, 0);
                    if (v > best) {
                        best = v;
                        max_index_[s] = static_cast<int>(bi);
                    }
                }
                act.fusion_probs.at(s, 1, 0, 0) = best;
                act.fusion_probs.at(s, 0, 0, 0) = 1.0 - best;
            }
        }
        return act;
    }

    std::vector<ScoreQuadruple> forward(const nn::Tensor& images) {
        MixNetActivations act = forward_batch(images, false);
        return scores_of(act);
    }

    std::vector<ScoreQuadruple> scores_of(const MixNetActivations& act) const {
        std::vector<ScoreQuadruple> out(act.batch);
        for (int s = 0; s < act.batch; ++s) {
            ScoreQuadruple q;
            for (size_t bi = 0; bi < branches_.size(); ++bi) {
                double v = act.branch_probs[bi].at(s, 1, 0, 0);
                const std::string& name = config_.branches[bi].first;
                if (name == "print")
                    q.print_score = v;
                else if (name == "replay")
                    q.replay_score = v;
                else
                    q.mask_score = v;
            }
            q.final_score = act.fusion_probs.at(s, 1, 0, 0);
            out[s] = q;
        }
        return out;
    }

    // Per-branch batch-mean cross-entropies against the branch bits plus the
    // final-classification loss, combined with the configured coefficients.
    LossBreakdown total_loss(const MixNetActivations& act,
                             const std::vector<LabelQuadruple>& labels) const {
        if (static_cast<int>(labels.size()) != act.batch)
            throw std::invalid_argument("total_loss: outputs and labels misaligned");
        LossBreakdown lb;
        std::vector<double> branch_losses(branches_.size(), 0.0);
        double final_loss = 0.0;
        for (int s = 0; s < act.batch; ++s) {
            for (size_t bi = 0; bi < branches_.size(); ++bi) {
                int bit = branch_bit(labels[s], config_.branches[bi].first);
                std::vector<double> y = bit ? std::vector<double>{0.0, 1.0}
                                            : std::vector<double>{1.0, 0.0};
                std::vector<double> p{act.branch_probs[bi].at(s, 0, 0, 0),
                                      act.branch_probs[bi].at(s, 1, 0, 0)};
                branch_losses[bi] += cross_entropy(y, p);
            }
            std::vector<double> yf = labels[s].final_label
                                         ? std::vector<double>{0.0, 1.0}
                                         : std::vector<double>{1.0, 0.0};
            std::vector<double> pf{act.fusion_probs.at(s, 0, 0, 0),
                                   act.fusion_probs.at(s, 1, 0, 0)};
            final_loss += cross_entropy(yf, pf);
        }
        for (auto& l : branch_losses) l /= act.batch;
        final_loss /= act.batch;
        for (size_t bi = 0; bi < branches_.size(); ++bi) {
            const std::string& name = config_.branches[bi].first;
            if (name == "print")
                lb.print_loss = branch_losses[bi];
            else if (name == "replay")
                lb.replay_loss = branch_losses[bi];
            else
                lb.mask_loss = branch_losses[bi];
        }
        lb.final_loss = final_loss;
        lb.total_loss = combine(branch_losses, final_loss, config_.alphas);
        return lb;
    }

    static double combine(const std::vector<double>& branch_losses, double final_loss,
                          const std::vector<double>& alphas) {
        double t = 0.0;
        for (size_t i = 0; i < branch_losses.size(); ++i) t += alphas[i] * branch_losses[i];
        return t + alphas.back() * final_loss;
    }

    // Backpropagate the total loss; gradients accumulate in the parameter
    // buffers. Requires a preceding forward_batch(train=true).
    void backward_total(const MixNetActivations& act, const std::vector<LabelQuadruple>& labels) {
        const int n = act.batch;
        const double alpha_final = config_.alphas.back();

        // final-loss gradient w.r.t. fusion probabilities
        nn::Tensor dfusion_in(n, static_cast<int>(branches_.size()), 1, 1);
        if (config_.fusion == FusionKind::trainable_softmax) {
            nn::Tensor dlogits(n, 2, 1, 1);
            for (int s = 0; s < n; ++s) {
                double y1 = labels[s].final_label ? 1.0 : 0.0;
                dlogits.at(s, 0, 0, 0) = alpha_final * (act.fusion_probs.at(s, 0, 0, 0) - (1.0 - y1)) / n;
                dlogits.at(s, 1, 0, 0) = alpha_final * (act.fusion_probs.at(s, 1, 0, 0) - y1) / n;
            }
            auto gin = fusion_->backward(dlogits);
            dfusion_in = std::move(gin[0]);
        } else {
            // d(final CE)/d(max input); only the arg-max branch receives gradient
            for (int s = 0; s < n; ++s) {
                double m = act.fusion_probs.at(s, 1, 0, 0);
                double y1 = labels[s].final_label ? 1.0 : 0.0;
                double p1 = std::clamp(m, 1e-7, 1.0 - 1e-7);
                double d = alpha_final * (-y1 / p1 + (1.0 - y1) / (1.0 - p1)) / n;
                dfusion_in.at(s, max_index_[s], 0, 0) = d;
            }
        }

        for (size_t bi = 0; bi < branches_.size(); ++bi) {
            const double alpha_b = config_.alphas[bi];
            // branch CE contribution straight to logits
            nn::Tensor dlogits(n, 2, 1, 1);
            for (int s = 0; s < n; ++s) {
                double y1 = branch_bit(labels[s], config_.branches[bi].first) ? 1.0 : 0.0;
                dlogits.at(s, 0, 0, 0) = alpha_b * (act.branch_probs[bi].at(s, 0, 0, 0) - (1.0 - y1)) / n;
                dlogits.at(s, 1, 0, 0) = alpha_b * (act.branch_probs[bi].at(s, 1, 0, 0) - y1) / n;
            }
            // final-loss contribution through the branch attack probability
            nn::Tensor dprobs(n, 2, 1, 1);
            for (int s = 0; s < n; ++s)
                dprobs.at(s, 1, 0, 0) = dfusion_in.at(s, static_cast<int>(bi), 0, 0);
            nn::Tensor dl2 = nn::softmax_backward_rows(act.branch_probs[bi], dprobs);
            for (size_t i = 0; i < dlogits.size(); ++i) dlogits.v[i] += dl2.v[i];
            branches_[bi].graph.backward(dlogits);
        }
    }

    // gradient of one isolated loss term; index = branch index, or -1 for
    // the final classification loss
    void backward_single_loss(const MixNetActivations& act,
                              const std::vector<LabelQuadruple>& labels, int term) {
        const int n = act.batch;
        if (term >= 0) {
            nn::Tensor dlogits(n, 2, 1, 1);
            for (int s = 0; s < n; ++s) {
                double y1 = branch_bit(labels[s], config_.branches[term].first) ? 1.0 : 0.0;
                dlogits.at(s, 0, 0, 0) = (act.branch_probs[term].at(s, 0, 0, 0) - (1.0 - y1)) / n;
                dlogits.at(s, 1, 0, 0) = (act.branch_probs[term].at(s, 1, 0, 0) - y1) / n;
            }
            branches_[term].graph.backward(dlogits);
            return;
        }
        if (config_.fusion != FusionKind::trainable_softmax)
            throw std::invalid_argument("backward_single_loss: final loss needs trainable fusion");
        nn::Tensor dlogits(n, 2, 1, 1);
        for (int s = 0; s < n; ++s) {
            double y1 = labels[s].final_label ? 1.0 : 0.0;
            dlogits.at(s, 0, 0, 0) = (act.fusion_probs.at(s, 0, 0, 0) - (1.0 - y1)) / n;
            dlogits.at(s, 1, 0, 0) = (act.fusion_probs.at(s, 1, 0, 0) - y1) / n;
        }
        auto gin = fusion_->backward(dlogits);
        for (size_t bi = 0; bi < branches_.size(); ++bi) {
            nn::Tensor dprobs(n, 2, 1, 1);
            for (int s = 0; s < n; ++s)
                dprobs.at(s, 1, 0, 0) = gin[0].at(s, static_cast<int>(bi), 0, 0);
            nn::Tensor dl = nn::softmax_backward_rows(act.branch_probs[bi], dprobs);
            branches_[bi].graph.backward(dl);
        }
    }

    std::vector<nn::ParamView> params() {
        std::vector<nn::ParamView> all;
        for (size_t bi = 0; bi < branches_.size(); ++bi)
            for (auto p : branches_[bi].graph.params()) {
                p.name = "branch." + config_.branches[bi].first + "/" + p.name;
                all.push_back(p);
            }
        if (fusion_)
            for (auto p : fusion_->params()) {
                p.name = "fusion/" + p.name;
                all.push_back(p);
            }
        return all;
    }

    std::vector<nn::ParamView> branch_params(size_t bi) { return branches_[bi].graph.params(); }
    std::vector<nn::ParamView> fusion_params() {
        return fusion_ ? fusion_->params() : std::vector<nn::ParamView>{};
    }

    void zero_grad() {
        for (auto& p : params()) std::fill(p.grad, p.grad + p.count, 0.0);
    }

    void sgd_step(double lr) { nn::sgd_step(params(), lr); }

    // no parameter buffer is shared between two branches (or with fusion)
    bool parameter_sets_disjoint() {
        std::set<const double*> seen;
        for (auto& p : params())
            if (!seen.insert(p.value).second) return false;
        return true;
    }

    nn::Dense* fusion_layer() { return fusion_.get(); }

    static int branch_bit(const LabelQuadruple& l, const std::string& name) {
        if (name == "print") return l.print_label;
        if (name == "replay") return l.replay_label;
        return l.mask_label;
    }

    void check_input(const nn::Tensor& images) const {
        const auto& spec = config_.branches.front().second;
        if (images.c != spec.input_c || images.h != spec.input_h || images.w != spec.input_w)
            throw std::invalid_argument(strf(
                "mixnet: input shape %s does not match configured (%d,%d,%d)",
                images.shape_str().c_str(), spec.input_c, spec.input_h, spec.input_w));
    }

  private:
    MixNetConfig config_;
    std::vector<Backbone> branches_;
    std::unique_ptr<nn::Dense> fusion_;
    std::vector<int> max_index_;  // fixed-max fusion bookkeeping
};

inline std::unique_ptr<MixNetModel> build(const MixNetConfig& config, Rng& rng) {
    return std::make_unique<MixNetModel>(config, rng);
}

// --- gradient routing check ---

struct RoutingReport {
    // max |grad| of loss term (row) over parameters of branch (col)
    std::vector<std::vector<double>> cross_grad_linf;
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// Verifies the structural property that branch c's loss cannot touch branch
// b's parameters for b != c, while the final loss reaches every branch.
inline RoutingReport gradient_routing_check(MixNetModel& model, const nn::Tensor& images,
                                            const std::vector<LabelQuadruple>& labels) {
    const size_t nb = model.branch_count();
    RoutingReport rep;
    rep.cross_grad_linf.assign(nb + 1, std::vector<double>(nb, 0.0));
    MixNetActivations act = model.forward_batch(images, true);
    for (size_t term = 0; term <= nb; ++term) {
        model.zero_grad();
        model.backward_single_loss(act, labels, term == nb ? -1 : static_cast<int>(term));
        for (size_t b = 0; b < nb; ++b) {
            double linf = 0.0;
            for (auto& p : model.branch_params(b))
                for (size_t i = 0; i < p.count; ++i)
                    linf = std::max(linf, std::abs(p.grad[i]));
            rep.cross_grad_linf[term][b] = linf;
            if (term < nb && term != b && linf != 0.0)
                rep.violations.push_back(strf(
                    "loss '%s' leaks gradient %g into branch '%s'",
                    model.branch_name(term).c_str(), linf, model.branch_name(b).c_str()));
        }
    }
    model.zero_grad();
    return rep;
}

// --- vanilla single-backbone baseline ---

class VanillaModel {
  public:
    VanillaModel(const BackboneSpec& spec, Rng& rng) : backbone_(build_backbone(spec, rng)) {}

    Backbone& backbone() { return backbone_; }
    const BackboneSpec& spec() const { return backbone_.spec; }

    // attack probability per sample
    std::vector<double> forward(const nn::Tensor& images, bool train = false) {
        nn::Tensor logits = backbone_.graph.forward(images, train);
        last_probs_ = nn::softmax_rows(logits);
        std::vector<double> out(images.n);
        for (int s = 0; s < images.n; ++s) out[s] = last_probs_.at(s, 1, 0, 0);
        return out;
    }

    double loss_and_backward(const std::vector<int>& attack_bits) {
        const int n = last_probs_.n;
        double loss = 0.0;
        nn::Tensor dlogits(n, 2, 1, 1);
        for (int s = 0; s < n; ++s) {
            double y1 = attack_bits[s] ? 1.0 : 0.0;
            std::vector<double> y{1.0 - y1, y1};
            std::vector<double> p{last_probs_.at(s, 0, 0, 0), last_probs_.at(s, 1, 0, 0)};
            loss += cross_entropy(y, p);
            dlogits.at(s, 0, 0, 0) = (p[0] - y[0]) / n;
            dlogits.at(s, 1, 0, 0) = (p[1] - y[1]) / n;
        }
        backbone_.graph.backward(dlogits);
        return loss / n;
    }

    std::vector<nn::ParamView> params() { return backbone_.graph.params(); }
    void zero_grad() { backbone_.graph.zero_grad(); }
    void sgd_step(double lr) { nn::sgd_step(params(), lr); }

  private:
    Backbone backbone_;
    nn::Tensor last_probs_;
};

inline std::unique_ptr<VanillaModel> build_vanilla(const BackboneSpec& spec, Rng& rng) {
    return std::make_unique<VanillaModel>(spec, rng);
}

// --- checkpoints ---

inline void save_checkpoint(MixNetModel& model, const std::string& path,
                            const json& training_meta = json::object()) {
    Archive a;
    a.meta["kind"] = "mixnet";
    a.meta["config"] = model.config().to_json();
    a.meta["training"] = training_meta;
    for (size_t bi = 0; bi < model.branch_count(); ++bi)
        nn::store_params(model.branch(bi).graph, a,
                         "branch." + model.branch_name(bi) + "/");
    if (auto* f = model.fusion_layer())
        for (const auto& p : f->params())
            a.arrays["fusion/" + p.name] = std::vector<double>(p.value, p.value + p.count);
    a.save(path);
}

inline std::unique_ptr<MixNetModel> load_checkpoint(const std::string& path,
                                                    json* training_meta = nullptr) {
    Archive a = Archive::load(path);
    if (a.meta.value("kind", "") != "mixnet")
        throw std::runtime_error("load_checkpoint: " + path + " is not a mixnet checkpoint");
    MixNetConfig config = MixNetConfig::from_json(a.meta.at("config"));
    Rng rng(0);  // weights are overwritten below
    auto model = std::make_unique<MixNetModel>(config, rng);
    for (size_t bi = 0; bi < model->branch_count(); ++bi)
        nn::load_params(model->branch(bi).graph, a, "branch." + model->branch_name(bi) + "/");
    if (auto* f = model->fusion_layer())
        for (auto& p : f->params()) {
            const auto& src = a.arrays.at("fusion/" + p.name);
            if (src.size() != p.count)
                throw std::runtime_error("load_checkpoint: fusion shape mismatch in " + path);
            std::copy(src.begin(), src.end(), p.value);
        }
    if (training_meta) *training_meta = a.meta.value("training", json::object());
    return model;
}

inline void save_vanilla(VanillaModel& model, const std::string& path,
                         const json& training_meta = json::object()) {
    Archive a;
    a.meta["kind"] = "vanilla";
    a.meta["family"] = to_string(model.spec().family);
    a.meta["pretrained"] = to_string(model.spec().pretrained);
    a.meta["input_h"] = model.spec().input_h;
    a.meta["input_w"] = model.spec().input_w;
    a.meta["training"] = training_meta;
    nn::store_params(model.backbone().graph, a, "net/");
    a.save(path);
}

inline std::unique_ptr<VanillaModel> load_vanilla(const std::string& path) {
    Archive a = Archive::load(path);
    if (a.meta.value("kind", "") != "vanilla")
        throw std::runtime_error("load_vanilla: " + path + " is not a vanilla checkpoint");
    BackboneSpec spec;
    spec.family = backbone_family_from_string(a.meta.at("family").get<std::string>());
    spec.pretrained = pretrained_from_string(a.meta.at("pretrained").get<std::string>());
    spec.input_h = a.meta.at("input_h").get<int>();
    spec.input_w = a.meta.at("input_w").get<int>();
    Rng rng(0);
    auto model = std::make_unique<VanillaModel>(spec, rng);
    nn::load_params(model->backbone().graph, a, "net/");
    return model;
}

}  // namespace mixnet

#endif
