#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "deepmal/pipeline/commands.hpp"
#include "deepmal/util/error.hpp"

namespace fs = std::filesystem;
using namespace deepmal;

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kIngest = 3, kFormat = 4, kTraining = 5, kData = 6 };

fs::path data_dir() {
    const char* env = std::getenv("DEEPMAL_DATA_DIR");
    return env && *env ? fs::path(env) : fs::path("data");
}

void ensure_parent(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

template <class T>
std::optional<T> opt_if(bool set, const T& value) {
    return set ? std::optional<T>(value) : std::nullopt;
}

void report_line(const eval::EvalReport& r) {
    std::printf("model %s: %zu samples, accuracy %.4f", r.model.c_str(), r.samples, r.accuracy);
    std::printf(", AUC %.4f", r.auc);
    std::printf("\n");
    for (const auto& c : r.per_class) {
        std::printf("  %-12s P %.4f  R %.4f  F1 %.4f  support %zu\n", c.name.c_str(), c.precision, c.recall, c.f1,
                    c.support);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Raw-byte traffic classification toolkit: synthesize, extract, train, evaluate, predict"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.get_formatter()->column_width(38);
    app.footer("Environment: DEEPMAL_DATA_DIR sets the directory for default outputs (now: " + data_dir().string() +
               ").\nExit status: 0 ok, 2 configuration, 3 ingest, 4 format, 5 training, 6 dataset/evaluation, 1 other.");

    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    app.add_option("--threads", threads, "Worker threads per stage")->check(CLI::Range(1u, 1024u));
    const fs::path dir = data_dir();

    // synth
    pipeline::SynthOptions so;
    std::string preset;
    std::string spec_path;
    std::uint64_t synth_seed = 0;
    std::size_t flows_per_class = 0;
    std::string synth_out = (dir / "corpus").string();
    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic pcap corpus and manifest");
    auto* o_preset = synth->add_option("--preset", preset, "Built-in corpus: separable, hard or multiclass4");
    auto* o_spec = synth->add_option("--spec", spec_path, "JSON corpus description")->check(CLI::ExistingFile);
    o_preset->excludes(o_spec);
    auto* o_sseed = synth->add_option("--seed", synth_seed, "Override the corpus seed (0 keeps the spec's)");
    auto* o_fpc = synth->add_option("--flows-per-class", flows_per_class, "Override every class's flow count (0 keeps)");
    synth->add_option("--out", synth_out, "Output directory");

    // extract
    pipeline::ExtractOptions eo;
    std::string repr_name = "flows";
    std::size_t n_bytes = 0;
    std::size_t max_per_class = 0;
    std::string extract_out = (dir / "dataset.dmds").string();
    std::string csv_out;
    std::string manifest;
    bool no_balance = false;
    auto* extract = app.add_subcommand("extract", "Turn a capture manifest into a dataset file");
    extract->add_option("--manifest", manifest, "Manifest TSV listing pcap files and labels")->required();
    extract->add_option("--repr", repr_name, "Representation: packets, flows or expert")
        ->check(CLI::IsMember({"packets", "flows", "expert"}));
    extract->add_option("--n", n_bytes, "Bytes kept per packet (0: 1024 for packets, 100 for flows)");
    extract->add_option("--m", eo.m, "Packets kept per flow");
    extract->add_option("--idle-timeout", eo.idle_timeout, "Flow idle timeout in seconds");
    extract->add_flag("--no-balance", no_balance, "Keep every sample instead of undersampling to the rarest class");
    extract->add_option("--max-per-class", max_per_class, "Cap on samples per class (0: no cap)");
    extract->add_flag("--keep-empty", eo.keep_empty, "Keep packets or flows without payload bytes");
    extract->add_option("--seed", eo.seed, "Master seed");
    extract->add_option("--out", extract_out, "Dataset output path");
    extract->add_option("--csv", csv_out, "Also write the dataset as CSV");

    // train
    pipeline::TrainOptions to;
    std::string arch_name;
    std::string baseline_name;
    std::size_t epochs = 0;
    std::string dataset_in;
    std::string checkpoint_out = (dir / "model.dmck").string();
    std::string history_out;
    auto* train = app.add_subcommand("train", "Fit a network preset or shallow baseline on a dataset");
    train->add_option("--dataset", dataset_in, "Dataset file from extract")->required()->check(CLI::ExistingFile);
    auto* o_arch = train->add_option("--arch", arch_name, "Network preset: packets-binary, flows-binary, packets-multiclass");
    auto* o_base = train->add_option("--baseline", baseline_name, "Shallow model: cart, rf, nb, knn, svm or mlp");
    o_arch->excludes(o_base);
    train->add_option("--epochs", epochs, "Epochs (0: 100 packets-binary, 10 flows-binary, 50 packets-multiclass)");
    train->add_option("--batch-size", to.batch_size, "Minibatch size");
    train->add_option("--lr", to.learning_rate, "Adam learning rate");
    train->add_option("--decay", to.decay, "Per-epoch learning-rate decay factor");
    train->add_option("--train-frac", to.split.train, "Training share of the split");
    train->add_option("--val-frac", to.split.validation, "Validation share of the split");
    train->add_option("--test-frac", to.split.test, "Test share of the split");
    train->add_option("--seed", to.seed, "Master seed");
    train->add_option("--max-depth", to.shallow.max_depth, "cart/rf: maximum tree depth");
    train->add_option("--min-leaf", to.shallow.min_leaf, "cart/rf: minimum samples per leaf");
    train->add_option("--trees", to.shallow.trees, "rf: number of trees");
    train->add_option("--max-features", to.shallow.max_features, "cart/rf: features per split (0: sqrt(d) for rf, d for cart)");
    train->add_option("--k", to.shallow.k, "knn: neighbours");
    train->add_option("--svm-lambda", to.shallow.svm_lambda, "svm: regularization strength");
    train->add_option("--svm-epochs", to.shallow.svm_epochs, "svm: passes over the data");
    train->add_option("--mlp-hidden", to.shallow.mlp_hidden, "mlp: hidden layer widths")->delimiter(',');
    train->add_option("--mlp-epochs", to.shallow.mlp_epochs, "mlp: epochs");
    train->add_option("--checkpoint", checkpoint_out, "Checkpoint output path");
    train->add_option("--history", history_out, "Per-epoch history CSV output path");

    // eval
    pipeline::EvalOptions vo;
    std::string eval_ckpt = (dir / "model.dmck").string();
    std::string eval_data;
    std::string subset_name = "test";
    std::string report_out = (dir / "report.json").string();
    std::string roc_out;
    std::string conf_out;
    auto* evalc = app.add_subcommand("eval", "Score a checkpoint on one split of a dataset");
    evalc->add_option("--checkpoint", eval_ckpt, "Checkpoint from train")->check(CLI::ExistingFile);
    evalc->add_option("--dataset", eval_data, "Dataset the checkpoint was trained on")->required()->check(CLI::ExistingFile);
    evalc->add_option("--split", subset_name, "Subset: train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}));
    evalc->add_option("--report", report_out, "JSON report output path");
    evalc->add_option("--roc", roc_out, "ROC curve CSV output path");
    evalc->add_option("--confusion", conf_out, "Confusion matrix CSV output path");

    // predict
    pipeline::PredictOptions po;
    std::string pred_ckpt = (dir / "model.dmck").string();
    std::string capture;
    std::string pred_out = (dir / "predictions.csv").string();
    auto* predict = app.add_subcommand("predict", "Score every packet or flow of one pcap file");
    predict->add_option("--checkpoint", pred_ckpt, "Checkpoint from train")->check(CLI::ExistingFile);
    predict->add_option("--capture", capture, "pcap file")->required()->check(CLI::ExistingFile);
    predict->add_option("--out", pred_out, "Scored listing CSV output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kConfig;
    }

    try {
        if (*synth) {
            if (!*o_preset && !*o_spec) throw ConfigError("synth needs --preset or --spec");
            if (*o_preset) so.preset = preset;
            if (*o_spec) so.spec_path = spec_path;
            so.seed = opt_if(*o_sseed && synth_seed != 0, synth_seed);
            so.flows_per_class = opt_if(*o_fpc && flows_per_class != 0, flows_per_class);
            so.out_dir = synth_out;
            so.threads = threads;
            fs::create_directories(so.out_dir);
            const auto corpus = pipeline::run_synth(so);
            std::size_t total = 0;
            for (auto c : corpus.packets_per_file) total += c;
            std::printf("wrote %zu files, %zu packets, manifest %s\n", corpus.packets_per_file.size(), total,
                        corpus.manifest_path.string().c_str());
        } else if (*extract) {
            eo.manifest = manifest;
            eo.representation = repr::dataset_kind_from_string(repr_name);
            eo.n = opt_if(n_bytes != 0, n_bytes);
            eo.balance = !no_balance;
            eo.max_per_class = opt_if(max_per_class != 0, max_per_class);
            eo.out = extract_out;
            if (!csv_out.empty()) eo.csv = csv_out;
            eo.threads = threads;
            ensure_parent(eo.out);
            const auto s = pipeline::run_extract(eo);
            std::size_t skipped = 0;
            for (const auto& st : s.stats) skipped += st.skipped();
            std::printf("%zu packets (%zu skipped), %zu flows -> %zu samples of shape %s\n", s.packets, skipped,
                        s.flows, s.dataset.size(), nn::shape_string(s.dataset.inputs.shape()).c_str());
            const auto counts = s.dataset.class_counts();
            for (std::size_t c = 0; c < counts.size(); ++c) {
                std::printf("  %-12s %zu\n", s.dataset.class_names[c].c_str(), counts[c]);
            }
        } else if (*train) {
            to.dataset = dataset_in;
            if (!arch_name.empty()) to.architecture = models::architecture_from_string(arch_name);
            if (!baseline_name.empty()) to.baseline = baselines::shallow_kind_from_string(baseline_name);
            to.epochs = opt_if(epochs != 0, epochs);
            to.checkpoint = checkpoint_out;
            if (!history_out.empty()) to.history = history_out;
            to.threads = threads;
            if (to.history) ensure_parent(*to.history);
            const auto s = pipeline::run_train(to, [](const std::string& line) { std::printf("%s\n", line.c_str()); });
            std::printf("trained %s, validation accuracy %.4f, checkpoint %s\n", s.model.c_str(),
                        s.validation_accuracy, to.checkpoint.string().c_str());
        } else if (*evalc) {
            vo.checkpoint = eval_ckpt;
            vo.dataset = eval_data;
            vo.subset = pipeline::subset_from_string(subset_name);
            vo.report = report_out;
            if (!roc_out.empty()) vo.roc = roc_out;
            if (!conf_out.empty()) vo.confusion = conf_out;
            vo.threads = threads;
            for (const auto& p : {vo.report, vo.roc, vo.confusion}) {
                if (p) ensure_parent(*p);
            }
            report_line(pipeline::run_eval(vo));
        } else if (*predict) {
            po.checkpoint = pred_ckpt;
            po.capture = capture;
            po.out = pred_out;
            po.threads = threads;
            ensure_parent(po.out);
            const auto rows = pipeline::run_predict(po);
            std::printf("scored %zu rows -> %s\n", rows, po.out.string().c_str());
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kConfig;
    } catch (const IngestError& e) {
        std::fprintf(stderr, "ingest error: %s\n", e.what());
        return kIngest;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kFormat;
    } catch (const MalformedPacket& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return kFormat;
    } catch (const TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kTraining;
    } catch (const DatasetError& e) {
        std::fprintf(stderr, "dataset error: %s\n", e.what());
        return kData;
    } catch (const EvaluationError& e) {
        std::fprintf(stderr, "evaluation error: %s\n", e.what());
        return kData;
    } catch (const fs::filesystem_error& e) {
        std::fprintf(stderr, "ingest error: %s\n", e.what());
        return kIngest;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kOther;
    }
    return kOk;
}
