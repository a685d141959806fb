#include "otae/serialize.hpp"

#include "otae/errors.hpp"

namespace otae::serialize {

namespace {

json optional_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json matrix_json(const std::vector<std::optional<double>>& m, std::size_t n) {
    json rows = json::array();
    for (std::size_t a = 0; a < n; ++a) {
        json row = json::array();
        for (std::size_t b = 0; b < n; ++b) row.push_back(optional_value(m[a * n + b]));
        rows.push_back(std::move(row));
    }
    return rows;
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

json to_json(const data::SyntheticConfig& c) {
    return {{"subjects", c.subjects},
            {"classes", c.classes},
            {"dim", c.dim},
            {"per_class", c.per_class},
            {"class_separation", c.class_separation},
            {"subject_shift", c.subject_shift},
            {"multipliers", c.multipliers},
            {"noise", c.noise},
            {"seed", c.seed}};
}

json to_json(const data::NormalizationStats& s) {
    return {{"mean", s.mean}, {"stddev", s.stddev}, {"fitted_on", s.fitted_on}, {"warnings", s.warnings}};
}

data::NormalizationStats normalization_from_json(const json& j) {
    data::NormalizationStats s;
    s.mean = j.at("mean").get<std::vector<double>>();
    s.stddev = j.at("stddev").get<std::vector<double>>();
    s.fitted_on = j.at("fitted_on").get<std::string>();
    s.warnings = get_or(j, "warnings", std::vector<std::string>{});
    return s;
}

json to_json(const nn::MlpParams& p) {
    json layers = json::array();
    for (const auto& l : p.layers)
        layers.push_back({{"input_dim", l.spec.input_dim},
                          {"output_dim", l.spec.output_dim},
                          {"activation", nn::to_string(l.spec.activation)},
                          {"weights", l.weights.data},
                          {"bias", l.bias}});
    return {{"seed", p.seed}, {"init_scheme", p.init_scheme}, {"layers", layers}};
}

nn::MlpParams mlp_from_json(const json& j) {
    nn::MlpParams p;
    p.seed = j.at("seed").get<std::uint64_t>();
    p.init_scheme = j.at("init_scheme").get<std::string>();
    std::vector<nn::LayerSpec> specs;
    for (const auto& l : j.at("layers")) {
        nn::LayerSpec s{l.at("input_dim").get<std::size_t>(), l.at("output_dim").get<std::size_t>(),
                        nn::activation_from_string(l.at("activation").get<std::string>())};
        specs.push_back(s);
        p.layers.push_back({s, Tensor2(s.input_dim, s.output_dim, l.at("weights").get<std::vector<double>>()),
                            l.at("bias").get<std::vector<double>>()});
        if (p.layers.back().bias.size() != s.output_dim) throw DataError("checkpoint bias has the wrong length");
    }
    nn::validate_specs(specs);
    return p;
}

json to_json(const weighting::EstimatorConfig& e) {
    return {{"kind", weighting::to_string(e.kind)},
            {"n_projections", e.n_projections},
            {"order", e.order},
            {"group", weighting::to_string(e.group)},
            {"exact_support_cap", e.exact_support_cap},
            {"sliced_support_cap", e.sliced_support_cap}};
}

weighting::EstimatorConfig estimator_from_json(const json& j) {
    weighting::EstimatorConfig e;
    e.kind = weighting::estimator_from_string(j.at("kind").get<std::string>());
    e.n_projections = j.at("n_projections").get<std::size_t>();
    e.order = j.at("order").get<double>();
    e.group = weighting::group_from_string(j.at("group").get<std::string>());
    e.exact_support_cap = j.at("exact_support_cap").get<std::size_t>();
    e.sliced_support_cap = j.at("sliced_support_cap").get<std::size_t>();
    return e;
}

json to_json(const weighting::SubjectWeights& w) {
    json subjects = json::object();
    for (std::size_t i = 0; i < w.subjects.size(); ++i)
        subjects[w.subjects[i]] = {{"alpha", i < w.alpha.size() ? w.alpha[i] : 0.0}, {"lambda", w.lambda[i]}};
    return {{"subjects", subjects},
            {"order", w.subjects},
            {"lambda_g", w.lambda_group},
            {"mode", weighting::to_string(w.mode)},
            {"beta", w.beta},
            {"uniform_fallback", w.uniform_fallback},
            {"space", weighting::to_string(w.space)},
            {"estimator", to_json(w.estimator)},
            {"seed", w.seed}};
}

weighting::SubjectWeights weights_from_json(const json& j) {
    weighting::SubjectWeights w;
    w.subjects = j.at("order").get<std::vector<std::string>>();
    for (const auto& s : w.subjects) {
        const auto& e = j.at("subjects").at(s);
        w.alpha.push_back(e.at("alpha").get<double>());
        w.lambda.push_back(e.at("lambda").get<double>());
    }
    w.lambda_group = j.at("lambda_g").get<double>();
    w.mode = weighting::mode_from_string(j.at("mode").get<std::string>());
    w.beta = j.at("beta").get<double>();
    w.uniform_fallback = get_or(j, "uniform_fallback", false);
    w.space = weighting::space_from_string(j.at("space").get<std::string>());
    w.estimator = estimator_from_json(j.at("estimator"));
    w.seed = j.at("seed").get<std::uint64_t>();
    return w;
}

json to_json(const model::TrainConfig& c) {
    json j = {{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"plain_sgd", c.plain_sgd},
              {"recon_weight", c.recon_weight},
              {"loss_mode", model::to_string(c.loss_mode)},
              {"weighting",
               {{"mode", weighting::to_string(c.weighting.mode)},
                {"beta", c.weighting.beta},
                {"space", weighting::to_string(c.weighting.space)},
                {"refresh_interval", c.weighting.refresh_interval},
                {"estimator", to_json(c.weighting.estimator)}}},
              {"arch",
               {{"encoder_hidden", c.arch.encoder_hidden},
                {"latent_dim", c.arch.latent_dim},
                {"classifier_hidden", c.arch.classifier_hidden},
                {"hidden_activation", nn::to_string(c.arch.hidden_activation)}}},
              {"seed", c.seed}};
    j["fixed_weights"] = c.fixed_weights ? to_json(*c.fixed_weights) : json(nullptr);
    return j;
}

model::TrainConfig train_config_from_json(const json& j) {
    model::TrainConfig c;
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.learning_rate = j.at("learning_rate").get<double>();
    c.plain_sgd = j.at("plain_sgd").get<bool>();
    c.recon_weight = j.at("recon_weight").get<double>();
    c.loss_mode = model::loss_mode_from_string(j.at("loss_mode").get<std::string>());
    const auto& w = j.at("weighting");
    c.weighting.mode = weighting::mode_from_string(w.at("mode").get<std::string>());
    c.weighting.beta = w.at("beta").get<double>();
    c.weighting.space = weighting::space_from_string(w.at("space").get<std::string>());
    c.weighting.refresh_interval = w.at("refresh_interval").get<std::size_t>();
    c.weighting.estimator = estimator_from_json(w.at("estimator"));
    const auto& a = j.at("arch");
    c.arch.encoder_hidden = a.at("encoder_hidden").get<std::vector<std::size_t>>();
    c.arch.latent_dim = a.at("latent_dim").get<std::size_t>();
    c.arch.classifier_hidden = a.at("classifier_hidden").get<std::vector<std::size_t>>();
    c.arch.hidden_activation = nn::activation_from_string(a.at("hidden_activation").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("fixed_weights") && !j.at("fixed_weights").is_null())
        c.fixed_weights = weights_from_json(j.at("fixed_weights"));
    return c;
}

json to_json(const model::CompositeLossBreakdown& b, const std::vector<std::string>& subjects) {
    json per = json::object();
    for (std::size_t s = 0; s < b.c_s_i.size() && s < subjects.size(); ++s) per[subjects[s]] = b.c_s_i[s];
    return {{"r_g", b.r_g}, {"c_g", b.c_g}, {"c_s_i", per}, {"c_s", b.c_s}, {"total", b.total}};
}

json history_to_json(const model::TrainResult& r) {
    json epochs = json::array();
    for (const auto& e : r.history) {
        json je = to_json(e.mean, r.weights.subjects);
        je["epoch"] = e.epoch;
        je["batches"] = e.batches;
        je["weights_refreshed"] = e.weights_refreshed;
        epochs.push_back(std::move(je));
    }
    json log = json::array();
    for (const auto& w : r.weight_log) log.push_back(to_json(w));
    return {{"epochs", epochs}, {"weights", to_json(r.weights)}, {"weight_log", log}};
}

json checkpoint_to_json(const model::Checkpoint& c) {
    json j = {{"format", "otae.checkpoint"},
              {"version", c.version},
              {"encoder", to_json(c.model.encoder)},
              {"decoder", to_json(c.model.decoder)},
              {"classifier", to_json(c.model.classifier)},
              {"config", to_json(c.config)},
              {"weights", to_json(c.weights)},
              {"seed", c.config.seed}};
    j["normalizer"] = c.normalizer ? to_json(*c.normalizer) : json(nullptr);
    return j;
}

model::Checkpoint checkpoint_from_json(const json& j) {
    try {
        if (j.at("format").get<std::string>() != "otae.checkpoint") throw DataError("not an otae checkpoint");
        model::Checkpoint c;
        c.version = j.at("version").get<int>();
        if (c.version != model::kCheckpointVersion)
            throw DataError("unsupported checkpoint version " + std::to_string(c.version));
        c.model.encoder = mlp_from_json(j.at("encoder"));
        c.model.decoder = mlp_from_json(j.at("decoder"));
        c.model.classifier = mlp_from_json(j.at("classifier"));
        c.model.validate();
        c.config = train_config_from_json(j.at("config"));
        c.weights = weights_from_json(j.at("weights"));
        if (!j.at("normalizer").is_null()) c.normalizer = normalization_from_json(j.at("normalizer"));
        return c;
    } catch (const json::exception& e) {
        throw DataError(std::string("malformed checkpoint: ") + e.what());
    }
}

json to_json(const eval::SeparationReport& r) {
    json cen = json::array();
    for (const auto& c : r.centroids) cen.push_back(c.empty() ? json(nullptr) : json(c));
    return {{"split", data::to_string(r.split)},
            {"classes", r.classes},
            {"class_counts", r.class_counts},
            {"centroids", cen},
            {"centroid_distance", matrix_json(r.centroid_distance, r.classes)},
            {"min_distance", matrix_json(r.min_distance, r.classes)}};
}

json to_json(const eval::FoldResult& f) {
    json j = {{"fold", f.fold},
              {"held_out", f.held_out},
              {"train_subjects", f.train_subjects},
              {"train_split_id", f.train_split_id},
              {"test_split_id", f.test_split_id},
              {"normalizer_fitted_on", f.normalizer_fitted_on},
              {"wall_seconds", f.wall_seconds}};
    if (!f.ok()) {
        j["error"] = f.error;
        return j;
    }
    j["accuracy"] = f.accuracy;
    j["weights"] = to_json(f.weights);
    j["separation"] = {{"train", to_json(f.train_separation)}, {"test", to_json(f.test_separation)}};
    return j;
}

json to_json(const eval::EvalConfig& c) {
    return {{"train", to_json(c.train)}, {"loso", {{"fold_cap", c.loso.fold_cap}, {"seed", c.loso.seed}}}};
}

json to_json(const eval::SplitComparison& s) {
    auto pairs = [](const std::vector<eval::PairChange>& v) {
        json a = json::array();
        for (const auto& p : v)
            a.push_back({{"classes", {p.a, p.b}},
                         {"centroid_pct", optional_value(p.centroid_pct)},
                         {"min_pct", optional_value(p.min_pct)}});
        return a;
    };
    json per = json::array();
    for (const auto& f : s.per_fold) per.push_back(pairs(f));
    return {{"per_fold", per},
            {"mean_over_folds", pairs(s.mean_over_folds)},
            {"mean_centroid_pct", optional_value(s.mean_centroid_pct)},
            {"mean_min_pct", optional_value(s.mean_min_pct)}};
}

json to_json(const eval::ModeSummary& s) {
    return {{"accuracy_mean", s.accuracy_mean}, {"accuracy_std", s.accuracy_std}, {"folds_ok", s.folds_ok}};
}

json loso_report(const eval::EvalConfig& cfg, const std::vector<eval::FoldResult>& folds) {
    json jf = json::array();
    for (const auto& f : folds) jf.push_back(to_json(f));
    return {{"schema", kReportSchema},
            {"kind", "loso"},
            {"config", to_json(cfg)},
            {"folds", jf},
            {"summary", to_json(eval::summarize(folds))}};
}

json comparison_report(const eval::ComparisonReport& r) {
    json folds = json::array();
    for (std::size_t f = 0; f < r.baseline.size(); ++f)
        folds.push_back({{"baseline", to_json(r.baseline[f])}, {"weighted", to_json(r.weighted[f])}});
    json fingerprints = json::array();
    for (const auto& f : r.baseline) fingerprints.push_back({f.train_split_id, f.test_split_id});
    return {{"schema", kReportSchema},
            {"kind", "compare"},
            {"baseline_config", to_json(r.baseline_config)},
            {"weighted_config", to_json(r.weighted_config)},
            {"split_fingerprints", fingerprints},
            {"folds", folds},
            {"percent_change", {{"test", to_json(r.test)}, {"train", to_json(r.train)}}},
            {"accuracy", {{"baseline", to_json(r.baseline_summary)}, {"weighted", to_json(r.weighted_summary)}}},
            {"errors", r.errors}};
}

json strip_timings(json j) {
    if (j.is_object()) {
        j.erase("wall_seconds");
        for (auto& el : j.items()) el.value() = strip_timings(el.value());
    } else if (j.is_array()) {
        for (auto& v : j) v = strip_timings(v);
    }
    return j;
}

}  // namespace otae::serialize
