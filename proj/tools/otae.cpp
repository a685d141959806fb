// otae: synthetic data, subject weights, training and leave-one-subject-out
// evaluation from the command line.

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "otae/data.hpp"
#include "otae/errors.hpp"
#include "otae/eval.hpp"
#include "otae/model.hpp"
#include "otae/rng.hpp"
#include "otae/serialize.hpp"
#include "otae/weighting.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace otae;

namespace {

constexpr const char* kVersion = "otae 1.0.0";

struct TrainOpts {
    std::size_t epochs = 100;
    std::size_t batch = 64;
    double lr = 1e-3;
    bool sgd = false;
    double recon_weight = 1.0;
    std::string loss = "weighted";
    std::string weight_mode = "budget";
    double beta = 0.5;
    std::string space = "input";
    std::size_t refresh = 5;
    std::string estimator = "sliced";
    std::size_t projections = 64;
    std::string group = "include";
    std::size_t exact_cap = ot::kDefaultSupportCap;
    std::size_t latent = 8;
    std::vector<std::size_t> encoder_hidden{32};
    std::vector<std::size_t> classifier_hidden{16};
    std::string activation = "relu";
    std::string fixed_weights;
};

struct Common {
    std::uint64_t seed = 0;
    std::string output;
};

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot open " + p.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw DataError("cannot write " + p.string());
    out << text;
}

std::string digest(const fs::path& p) { return "fnv1a64:" + data::hex64(fnv1a64(read_file(p))); }

weighting::EstimatorConfig estimator_config(const TrainOpts& o) {
    weighting::EstimatorConfig e;
    e.kind = weighting::estimator_from_string(o.estimator);
    e.n_projections = o.projections;
    e.group = weighting::group_from_string(o.group);
    e.exact_support_cap = o.exact_cap;
    return e;
}

model::TrainConfig train_config(const TrainOpts& o, std::uint64_t seed) {
    model::TrainConfig c;
    c.epochs = o.epochs;
    c.batch_size = o.batch;
    c.learning_rate = o.lr;
    c.plain_sgd = o.sgd;
    c.recon_weight = o.recon_weight;
    c.loss_mode = model::loss_mode_from_string(o.loss);
    c.weighting.mode = weighting::mode_from_string(o.weight_mode);
    c.weighting.beta = o.beta;
    c.weighting.space = weighting::space_from_string(o.space);
    c.weighting.refresh_interval = o.refresh;
    c.weighting.estimator = estimator_config(o);
    c.arch.latent_dim = o.latent;
    c.arch.encoder_hidden = o.encoder_hidden;
    c.arch.classifier_hidden = o.classifier_hidden;
    c.arch.hidden_activation = nn::activation_from_string(o.activation);
    c.seed = seed;
    if (!o.fixed_weights.empty()) {
        try {
            c.fixed_weights = serialize::weights_from_json(json::parse(read_file(o.fixed_weights)));
        } catch (const json::exception& e) {
            throw DataError("fixed weights file " + o.fixed_weights + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

void add_weighting_options(CLI::App* sub, TrainOpts& o) {
    sub->add_option("--mode,--weight-mode", o.weight_mode, "paper | budget")->capture_default_str();
    sub->add_option("--beta", o.beta, "budget share of the per-subject terms")->capture_default_str();
    sub->add_option("--space", o.space, "input | latent")->capture_default_str();
    sub->add_option("--estimator", o.estimator, "sliced | exact")->capture_default_str();
    sub->add_option("--projections", o.projections, "sliced directions")->capture_default_str();
    sub->add_option("--group", o.group, "include | exclude (subject in its own group)")->capture_default_str();
    sub->add_option("--exact-cap", o.exact_cap, "combined support cap for the exact solver")->capture_default_str();
}

void add_train_options(CLI::App* sub, TrainOpts& o) {
    sub->add_option("--epochs", o.epochs)->capture_default_str();
    sub->add_option("--batch-size", o.batch, "0 = full batch")->capture_default_str();
    sub->add_option("--lr", o.lr)->capture_default_str();
    sub->add_flag("--sgd", o.sgd, "plain SGD instead of Adam");
    sub->add_option("--recon-weight", o.recon_weight)->capture_default_str();
    sub->add_option("--loss", o.loss, "baseline | weighted")->capture_default_str();
    sub->add_option("--refresh", o.refresh, "epochs between latent-space weight updates")->capture_default_str();
    sub->add_option("--latent-dim", o.latent)->capture_default_str();
    sub->add_option("--encoder-hidden", o.encoder_hidden)->capture_default_str();
    sub->add_option("--classifier-hidden", o.classifier_hidden)->capture_default_str();
    sub->add_option("--activation", o.activation, "relu | tanh")->capture_default_str();
    sub->add_option("--fixed-weights", o.fixed_weights, "weights JSON to use instead of computing them");
    add_weighting_options(sub, o);
}

void write_manifest(const fs::path& artifact, const std::string& command, const CLI::App& app,
                    std::uint64_t seed, const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                    const json& resolved) {
    json digests = json::object();
    for (const auto& p : inputs) digests[p.string()] = digest(p);
    json artifacts = json::array();
    for (const auto& p : outputs) artifacts.push_back(p.string());
    json m = {{"tool", kVersion},
              {"command", command},
              {"resolved_options", app.config_to_str(true, false)},
              {"resolved_config", resolved},
              {"seeds",
               {{"root", seed},
                {"init", derive_seed(seed, "init/encoder")},
                {"shuffle", derive_seed(seed, "shuffle")},
                {"weights", derive_seed(seed, "weights")},
                {"synth", derive_seed(seed, "synth")},
                {"loso", derive_seed(seed, "loso")}}},
              {"inputs", digests},
              {"artifacts", artifacts}};
    write_file(fs::path(artifact.string() + ".manifest.json"), m.dump(2) + "\n");
}

std::string fmt(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subject-weighted autoencoder training and evaluation"};
    app.set_version_flag("--version", kVersion);
    app.set_config("--config", "", "TOML config file; command-line flags take precedence");
    app.require_subcommand(1);

    // synth
    data::SyntheticConfig synth;
    std::vector<std::string> outliers;
    Common synth_c;
    synth_c.seed = 42;
    auto* cmd_synth = app.add_subcommand("synth", "generate a synthetic dataset with subject shifts");
    cmd_synth->add_option("--subjects", synth.subjects)->capture_default_str();
    cmd_synth->add_option("--classes", synth.classes)->capture_default_str();
    cmd_synth->add_option("--dim", synth.dim)->capture_default_str();
    cmd_synth->add_option("--per-class", synth.per_class, "samples per subject per class")->capture_default_str();
    cmd_synth->add_option("--separation", synth.class_separation)->capture_default_str();
    cmd_synth->add_option("--subject-shift", synth.subject_shift)->capture_default_str();
    cmd_synth->add_option("--noise", synth.noise)->capture_default_str();
    cmd_synth->add_option("--outlier", outliers, "SUBJECT_INDEX:MULTIPLIER (repeatable)");
    cmd_synth->add_option("--seed", synth_c.seed)->capture_default_str();
    cmd_synth->add_option("-o,--output", synth_c.output, "output CSV")->required();

    // weights
    TrainOpts w_opts;
    Common w_c;
    std::string w_input, w_checkpoint;
    bool w_no_normalize = false;
    auto* cmd_weights = app.add_subcommand("weights", "per-subject distances and loss scales");
    cmd_weights->add_option("dataset", w_input, "input CSV")->required();
    add_weighting_options(cmd_weights, w_opts);
    cmd_weights->add_option("--checkpoint", w_checkpoint, "encoder for --space latent");
    cmd_weights->add_flag("--no-normalize", w_no_normalize, "skip z-scoring the features");
    cmd_weights->add_option("--seed", w_c.seed)->capture_default_str();
    cmd_weights->add_option("-o,--output", w_c.output, "output JSON (default: stdout)");

    // train
    TrainOpts t_opts;
    Common t_c;
    std::string t_input, t_history;
    auto* cmd_train = app.add_subcommand("train", "train one model on the whole dataset");
    cmd_train->add_option("dataset", t_input, "input CSV")->required();
    add_train_options(cmd_train, t_opts);
    cmd_train->add_option("--seed", t_c.seed)->capture_default_str();
    cmd_train->add_option("-o,--output", t_c.output, "checkpoint JSON")->required();
    cmd_train->add_option("--history", t_history, "loss history JSON (default: <output>.history.json)");

    // loso / compare
    TrainOpts l_opts;
    Common l_c;
    std::string l_input;
    std::size_t l_fold_cap = 0;
    int l_jobs = 0;
    auto* cmd_loso = app.add_subcommand("loso", "leave-one-subject-out evaluation");
    auto* cmd_compare = app.add_subcommand("compare", "baseline vs weighted loss under LOSO");
    for (auto* sub : {cmd_loso, cmd_compare}) {
        sub->add_option("dataset", l_input, "input CSV")->required();
        add_train_options(sub, l_opts);
        sub->add_option("--fold-cap", l_fold_cap, "max folds (0 = one per subject)")->capture_default_str();
        sub->add_option("--jobs", l_jobs, "parallel folds (0 = OTAE_JOBS or all cores)")->capture_default_str();
        sub->add_option("--seed", l_c.seed)->capture_default_str();
        sub->add_option("-o,--output", l_c.output, "report JSON")->required();
    }

    // project
    std::string p_input, p_checkpoint, p_output, p_split = "full";
    auto* cmd_project = app.add_subcommand("project", "3-component PCA of the latent codes as CSV");
    cmd_project->add_option("dataset", p_input, "input CSV")->required();
    cmd_project->add_option("--checkpoint", p_checkpoint)->required();
    cmd_project->add_option("--split", p_split, "value written to the split column")->capture_default_str();
    cmd_project->add_option("-o,--output", p_output, "projection CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ExitCode::usage);
    }

    try {
        if (*cmd_synth) {
            for (const auto& spec : outliers) {
                const auto colon = spec.find(':');
                if (colon == std::string::npos) throw ConfigError("--outlier expects INDEX:MULTIPLIER, got " + spec);
                const auto idx = std::stoul(spec.substr(0, colon));
                const double mult = std::stod(spec.substr(colon + 1));
                if (idx >= synth.subjects) throw ConfigError("--outlier index out of range: " + spec);
                if (synth.multipliers.size() <= idx) synth.multipliers.resize(idx + 1, 1.0);
                synth.multipliers[idx] = mult;
            }
            synth.seed = synth_c.seed;
            const auto ds = data::synth_generate(synth);
            const fs::path out = synth_c.output;
            write_file(out, data::to_csv(ds));
            const fs::path sidecar = out.string() + ".config.json";
            write_file(sidecar, serialize::to_json(synth).dump(2) + "\n");
            write_manifest(out, "synth", *cmd_synth, synth.seed, {}, {out, sidecar}, serialize::to_json(synth));
            std::cerr << "wrote " << ds.size() << " samples from " << ds.subjects.size() << " subjects to " << out
                      << "\n";
            return 0;
        }

        if (*cmd_weights) {
            auto ds = data::load_csv(w_input).as_train_split("train:" + digest(w_input));
            if (!w_no_normalize) ds = data::apply_normalizer(data::fit_normalizer(ds), ds);
            const auto est = estimator_config(w_opts);
            const auto space = weighting::space_from_string(w_opts.space);
            std::optional<model::Checkpoint> ckpt;
            if (space == weighting::Space::latent) {
                if (w_checkpoint.empty()) throw ConfigError("--space latent needs --checkpoint");
                ckpt = model::load_checkpoint(w_checkpoint);
            }
            const auto alphas =
                weighting::compute_alphas(ds, space, ckpt ? &ckpt->model.encoder : nullptr, est, w_c.seed);
            auto w = weighting::compute_lambdas(alphas, weighting::mode_from_string(w_opts.weight_mode), w_opts.beta);
            w.estimator = est;
            w.space = space;
            w.seed = w_c.seed;
            const std::string text = serialize::to_json(w).dump(2) + "\n";
            if (w_c.output.empty()) {
                std::cout << text;
            } else {
                write_file(w_c.output, text);
                std::vector<fs::path> inputs{w_input};
                if (!w_checkpoint.empty()) inputs.emplace_back(w_checkpoint);
                write_manifest(w_c.output, "weights", *cmd_weights, w_c.seed, inputs, {w_c.output},
                               serialize::to_json(w));
            }
            return 0;
        }

        if (*cmd_train) {
            const auto cfg = train_config(t_opts, t_c.seed);
            const auto raw = data::load_csv(t_input).as_train_split("train:" + digest(t_input));
            const auto stats = data::fit_normalizer(raw);
            const auto ds = data::apply_normalizer(stats, raw);
            for (const auto& warn : stats.warnings) std::cerr << "warning: " << warn << "\n";
            const auto res = model::train(ds, cfg);
            const fs::path out = t_c.output;
            model::save_checkpoint({model::kCheckpointVersion, res.model, cfg, res.weights, stats}, out);
            const fs::path hist = t_history.empty() ? fs::path(out.string() + ".history.json") : fs::path(t_history);
            write_file(hist, serialize::history_to_json(res).dump(2) + "\n");
            write_manifest(out, "train", *cmd_train, cfg.seed, {t_input}, {out, hist}, serialize::to_json(cfg));
            if (!res.history.empty())
                std::cerr << "final epoch total loss " << res.history.back().mean.total << "\n";
            return 0;
        }

        if (*cmd_loso || *cmd_compare) {
            eval::EvalConfig cfg;
            cfg.train = train_config(l_opts, l_c.seed);
            cfg.loso = {l_fold_cap, l_c.seed};
            cfg.jobs = l_jobs;
            const auto ds = data::load_csv(l_input);
            const auto t0 = std::chrono::steady_clock::now();
            json report;
            std::vector<std::string> errors;
            const std::string name = *cmd_loso ? "loso" : "compare";
            if (*cmd_loso) {
                const auto folds = eval::run_loso(ds, cfg);
                report = serialize::loso_report(cfg, folds);
                for (const auto& f : folds)
                    if (!f.ok()) errors.push_back("fold " + std::to_string(f.fold) + " (" + f.held_out + "): " + f.error);
            } else {
                const auto rep = eval::compare_modes(ds, cfg);
                report = serialize::comparison_report(rep);
                errors = rep.errors;
                if (rep.test.mean_centroid_pct)
                    std::cerr << "mean test centroid change " << *rep.test.mean_centroid_pct << "%\n";
                if (rep.test.mean_min_pct) std::cerr << "mean test min-distance change " << *rep.test.mean_min_pct << "%\n";
            }
            report["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            report["dataset"] = {{"path", l_input}, {"digest", digest(l_input)}};
            write_file(l_c.output, report.dump(2) + "\n");
            write_manifest(l_c.output, name, *cmd_loso ? *cmd_loso : *cmd_compare, l_c.seed, {l_input},
                           {l_c.output}, serialize::to_json(cfg));
            if (!errors.empty()) {
                for (const auto& e : errors) std::cerr << "error: " << e << "\n";
                return static_cast<int>(ExitCode::numeric);
            }
            return 0;
        }

        if (*cmd_project) {
            const auto ckpt = model::load_checkpoint(p_checkpoint);
            auto ds = data::load_csv(p_input);
            if (ckpt.normalizer) ds = data::apply_normalizer(*ckpt.normalizer, ds);
            const Tensor2 z = model::encode(ckpt.model, ds.features());
            const std::size_t comps = std::min<std::size_t>(3, z.cols);
            const auto pca = eval::pca_project(z, comps);
            std::ostringstream out;
            out << "pc1,pc2,pc3,label,subject_id,split\n";
            for (std::size_t i = 0; i < ds.size(); ++i) {
                for (std::size_t c = 0; c < 3; ++c) out << (c < comps ? fmt(pca.projected(i, c)) : "0") << ',';
                out << ds.samples[i].label << ',' << ds.samples[i].subject_id << ',' << p_split << '\n';
            }
            write_file(p_output, out.str());
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.exit_code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(ExitCode::data);
    }
    return static_cast<int>(ExitCode::usage);
}
