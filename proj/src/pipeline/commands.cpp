#include "deepmal/pipeline/commands.hpp"

#include <cstdio>
#include <fstream>

#include "deepmal/capture/manifest.hpp"
#include "deepmal/features/expert.hpp"
#include "deepmal/nn/checkpoint.hpp"
#include "deepmal/util/error.hpp"
#include "deepmal/util/parallel.hpp"
#include "deepmal/util/seed.hpp"

namespace deepmal::pipeline {
namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestError("cannot write " + path.string());
    return out;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

void write_history(const std::filesystem::path& path, const nn::History& history) {
    auto out = open_out(path);
    out << "epoch,train_loss,train_acc,val_loss,val_acc\n";
    for (const auto& e : history) {
        out << e.epoch << ',' << fmt(e.train_loss) << ',' << fmt(e.train_acc) << ',' << fmt(e.val_loss) << ','
            << fmt(e.val_acc) << '\n';
    }
}

std::vector<std::vector<flow::FlowRecord>> assemble_per_file(const capture::IngestResult& ingest, double timeout,
                                                             std::size_t m, unsigned threads) {
    std::vector<std::vector<flow::FlowRecord>> flows(ingest.per_file.size());
    parallel_chunks(flows.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) flows[i] = flow::assemble_flows(ingest.per_file[i], timeout, m);
    });
    return flows;
}

nlohmann::json representation_json(const repr::Dataset& ds) {
    return {{"kind", repr::to_string(ds.kind)},
            {"n", ds.n},
            {"m", ds.m},
            {"idle_timeout", ds.idle_timeout},
            {"classes", ds.class_names},
            {"shape", std::vector<std::size_t>(ds.inputs.shape().begin() + 1, ds.inputs.shape().end())}};
}

repr::SplitSpec stored_split(const nlohmann::json& j) {
    repr::SplitSpec s;
    s.train = j.at("train").get<double>();
    s.validation = j.at("validation").get<double>();
    s.test = j.at("test").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    return s;
}

double accuracy_of(const std::vector<double>& scores, std::size_t cols, std::span<const std::uint8_t> labels) {
    if (labels.empty()) return 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::size_t pred = 0;
        if (cols == 1) {
            pred = scores[i] >= 0.5 ? 1 : 0;
        } else {
            for (std::size_t c = 1; c < cols; ++c) {
                if (scores[i * cols + c] > scores[i * cols + pred]) pred = c;
            }
        }
        correct += pred == labels[i];
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

std::string write_checkpoint_dir(const std::filesystem::path& path) {
    const auto parent = path.parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec) throw IngestError("cannot create " + parent.string());
    }
    return path.string();
}

}  // namespace

synth::GeneratedCorpus run_synth(const SynthOptions& o) {
    if (o.preset.has_value() == o.spec_path.has_value()) {
        throw ConfigError("synth needs exactly one of --preset or --spec");
    }
    synth::CorpusSpec spec = o.preset ? synth::CorpusSpec::preset(*o.preset) : synth::CorpusSpec::load(*o.spec_path);
    if (o.seed) spec.seed = *o.seed;
    if (o.flows_per_class) {
        for (auto& c : spec.classes) c.flows = *o.flows_per_class;
    }
    spec.validate();
    auto corpus = synth::generate_corpus(spec, o.out_dir, o.threads);
    auto out = open_out(o.out_dir / "corpus.json");
    out << spec.to_json().dump(2) << '\n';
    return corpus;
}

std::size_t default_bytes(repr::DatasetKind kind) { return kind == repr::DatasetKind::Packets ? 1024 : 100; }

ExtractSummary build_dataset(const ExtractOptions& o) {
    const std::size_t n = o.n.value_or(default_bytes(o.representation));
    if (n == 0) throw ConfigError("--n must be at least 1");
    if (o.m == 0) throw ConfigError("--m must be at least 1");
    if (!(o.idle_timeout > 0)) throw ConfigError("--idle-timeout must be positive");
    const auto manifest = capture::CaptureManifest::load(o.manifest);
    const auto ingest = capture::ingest(manifest, o.threads);

    repr::BalancePolicy policy;
    policy.balance = o.balance;
    policy.max_per_class = o.max_per_class;
    policy.drop_empty = !o.keep_empty;
    policy.seed = derive_seed(o.seed, "balance");

    ExtractSummary s;
    s.stats = ingest.stats;
    for (const auto& f : ingest.per_file) s.packets += f.size();
    const auto& classes = manifest.classes.names();

    switch (o.representation) {
        case repr::DatasetKind::Packets: {
            std::vector<capture::PacketRecord> all;
            all.reserve(s.packets);
            for (const auto& f : ingest.per_file) all.insert(all.end(), f.begin(), f.end());
            s.dataset = repr::build_packet_dataset(all, n, classes, policy);
            break;
        }
        case repr::DatasetKind::Flows: {
            const auto per_file = assemble_per_file(ingest, o.idle_timeout, o.m, o.threads);
            std::vector<flow::FlowRecord> all;
            for (const auto& f : per_file) all.insert(all.end(), f.begin(), f.end());
            s.flows = all.size();
            s.dataset = repr::build_flow_dataset(all, o.m, n, classes, policy);
            break;
        }
        case repr::DatasetKind::Expert: {
            const auto per_file = assemble_per_file(ingest, o.idle_timeout, flow::kKeepAllPackets, o.threads);
            std::vector<flow::FlowRecord> all;
            std::vector<features::FlowContext> contexts;
            for (const auto& f : per_file) {
                const auto ctx = features::flow_contexts(f);
                all.insert(all.end(), f.begin(), f.end());
                contexts.insert(contexts.end(), ctx.begin(), ctx.end());
            }
            s.flows = all.size();
            s.dataset = features::build_expert_dataset(all, classes, policy, contexts);
            s.dataset.n = n;
            s.dataset.m = o.m;
            break;
        }
    }
    s.dataset.idle_timeout = o.idle_timeout;
    return s;
}

ExtractSummary run_extract(const ExtractOptions& o) {
    auto s = build_dataset(o);
    repr::save_dataset(s.dataset, o.out);
    if (o.csv) repr::export_csv(s.dataset, *o.csv);
    return s;
}

std::size_t default_epochs(models::Architecture arch) {
    switch (arch) {
        case models::Architecture::PacketsBinary: return 100;
        case models::Architecture::FlowsBinary: return 10;
        case models::Architecture::PacketsMulticlass: return 50;
    }
    return 10;
}

TrainSummary run_train(const TrainOptions& o, const Logger& log) {
    if (o.architecture.has_value() == o.baseline.has_value()) {
        throw ConfigError("train needs exactly one of --arch or --baseline");
    }
    if (o.batch_size == 0) throw ConfigError("--batch-size must be positive");
    if (!(o.learning_rate > 0)) throw ConfigError("--lr must be positive");
    if (!(o.decay > 0) || o.decay > 1) throw ConfigError("--decay must lie in (0, 1]");
    repr::SplitSpec split = o.split;
    split.seed = derive_seed(o.seed, "split");
    split.validate();
    o.shallow.validate();

    const auto ds = repr::load_dataset(o.dataset);
    const auto parts = repr::split_dataset(ds, split);

    nn::Container ckpt;
    TrainSummary summary;
    if (o.architecture) {
        const auto arch = *o.architecture;
        const bool packets = arch != models::Architecture::FlowsBinary;
        if (packets && ds.kind != repr::DatasetKind::Packets) {
            throw ConfigError(models::to_string(arch) + " needs a packets dataset, got " + repr::to_string(ds.kind));
        }
        if (!packets && ds.kind != repr::DatasetKind::Flows) {
            throw ConfigError("flows-binary needs a flows dataset, got " + repr::to_string(ds.kind));
        }
        if (arch != models::Architecture::PacketsMulticlass && ds.num_classes() != 2) {
            throw ConfigError(models::to_string(arch) + " needs exactly two classes, dataset has " +
                              std::to_string(ds.num_classes()));
        }
        const std::size_t n = ds.inputs.shape().back();
        const std::size_t m = ds.kind == repr::DatasetKind::Flows ? ds.inputs.dim(1) : 1;
        auto config = models::build_architecture(arch, n, m, ds.num_classes());
        nn::Network net(config, derive_seed(o.seed, "init"));
        nn::TrainConfig tc;
        tc.epochs = o.epochs.value_or(default_epochs(arch));
        tc.batch_size = o.batch_size;
        tc.seed = derive_seed(o.seed, "train");
        tc.adam.learning_rate = o.learning_rate;
        tc.adam.decay = o.decay;
        if (tc.epochs == 0) throw ConfigError("--epochs must be positive");
        summary.history = nn::train(net, parts.train.inputs, parts.train.labels, &parts.validation.inputs,
                                    parts.validation.labels, tc, [&](const nn::EpochStats& e) {
                                        if (log) {
                                            log("epoch " + std::to_string(e.epoch) + " loss " + fmt(e.train_loss) +
                                                " acc " + fmt(e.train_acc) + " val_loss " + fmt(e.val_loss) +
                                                " val_acc " + fmt(e.val_acc));
                                        }
                                    });
        summary.validation_accuracy = summary.history.empty() ? 0.0 : summary.history.back().val_acc;
        summary.model = models::to_string(arch);
        nn::store_network(net, ckpt);
        ckpt.header["architecture"] = summary.model;
        ckpt.header["train"] = {{"epochs", tc.epochs},
                                {"batch_size", tc.batch_size},
                                {"learning_rate", tc.adam.learning_rate},
                                {"decay", tc.adam.decay}};
    } else {
        auto params = o.shallow;
        params.seed = derive_seed(o.seed, "baseline");
        params.threads = o.threads;
        auto model = baselines::make_shallow(*o.baseline, params);
        model->fit(baselines::flatten_for_shallow(parts.train), parts.train.labels, ds.num_classes());
        const auto val = model->predict_scores(baselines::flatten_for_shallow(parts.validation));
        summary.validation_accuracy = accuracy_of(val.values, val.classes, parts.validation.labels);
        summary.model = baselines::to_string(*o.baseline);
        summary.history.push_back({1, 0.0, model->training_accuracy(), 0.0, summary.validation_accuracy});
        if (log) {
            log(summary.model + " train_acc " + fmt(model->training_accuracy()) + " val_acc " +
                fmt(summary.validation_accuracy));
        }
        model->store(ckpt);
    }
    ckpt.header["representation"] = representation_json(ds);
    ckpt.header["split"] = {{"train", split.train}, {"validation", split.validation}, {"test", split.test},
                            {"seed", split.seed}};
    ckpt.header["seed"] = o.seed;
    ckpt.header["history"] = nn::to_json(summary.history);
    ckpt.save(write_checkpoint_dir(o.checkpoint));
    if (o.history) write_history(*o.history, summary.history);
    return summary;
}

Subset subset_from_string(const std::string& name) {
    if (name == "train") return Subset::Train;
    if (name == "val" || name == "validation") return Subset::Validation;
    if (name == "test") return Subset::Test;
    if (name == "all") return Subset::All;
    throw ConfigError("unknown split '" + name + "' (expected train, val, test or all)");
}

std::string to_string(Subset s) {
    switch (s) {
        case Subset::Train: return "train";
        case Subset::Validation: return "val";
        case Subset::Test: return "test";
        case Subset::All: return "all";
    }
    return "unknown";
}

LoadedModel LoadedModel::load(const std::filesystem::path& path, unsigned threads) {
    const auto c = nn::Container::load(path);
    LoadedModel m;
    m.header_ = c.header;
    if (!c.header.contains("representation")) throw FormatError("checkpoint lacks representation metadata");
    const auto kind = c.header.value("kind", std::string());
    if (kind == "network") {
        m.network_ = std::make_unique<nn::Network>(nn::restore_network(c));
    } else if (kind == "shallow") {
        auto header = c.header;
        header["params"]["threads"] = threads;
        m.shallow_ = baselines::ShallowModel::restore(c);
    } else {
        throw FormatError("unknown checkpoint kind '" + kind + "'");
    }
    return m;
}

std::size_t LoadedModel::columns() const {
    return network_ ? network_->config().output_width() : shallow_->num_classes();
}

std::string LoadedModel::name() const {
    return network_ ? network_->config().name : baselines::to_string(shallow_->kind());
}

repr::DatasetKind LoadedModel::representation() const {
    return repr::dataset_kind_from_string(header_.at("representation").at("kind").get<std::string>());
}

std::vector<std::string> LoadedModel::class_names() const {
    return header_.at("representation").at("classes").get<std::vector<std::string>>();
}

void LoadedModel::check_compatible(const repr::Dataset& ds) const {
    const auto& r = header_.at("representation");
    if (ds.kind != representation()) {
        throw ConfigError("model was trained on " + r.at("kind").get<std::string>() + " data, dataset holds " +
                          repr::to_string(ds.kind));
    }
    const auto shape = r.at("shape").get<std::vector<std::size_t>>();
    if (!std::equal(shape.begin(), shape.end(), ds.inputs.shape().begin() + 1, ds.inputs.shape().end())) {
        throw ConfigError("dataset sample shape " + nn::shape_string(nn::Shape(ds.inputs.shape().begin() + 1,
                                                                               ds.inputs.shape().end())) +
                          " differs from the model's " + nn::shape_string(shape));
    }
    if (ds.class_names != class_names()) throw ConfigError("dataset classes differ from the model's");
}

std::vector<double> LoadedModel::scores(const repr::Dataset& ds) {
    if (network_) {
        const auto probs = network_->predict(ds.inputs);
        return {probs.values().begin(), probs.values().end()};
    }
    return shallow_->predict_scores(baselines::flatten_for_shallow(ds)).values;
}

eval::EvalReport run_eval(const EvalOptions& o) {
    auto model = LoadedModel::load(o.checkpoint, o.threads);
    const auto ds = repr::load_dataset(o.dataset);
    model.check_compatible(ds);
    repr::Dataset subset;
    if (o.subset == Subset::All) {
        subset = ds;
    } else {
        const auto parts = repr::split_dataset(ds, stored_split(model.header().at("split")));
        subset = o.subset == Subset::Train ? parts.train : o.subset == Subset::Validation ? parts.validation : parts.test;
    }
    const auto scores = model.scores(subset);
    auto report = eval::evaluate_scores(scores, model.columns(), subset.labels, ds.class_names, model.name());
    if (o.report) report.save_json(*o.report);
    if (o.roc) report.save_roc_csv(*o.roc);
    if (o.confusion) report.save_confusion_csv(*o.confusion);
    return report;
}

std::size_t run_predict(const PredictOptions& o) {
    auto model = LoadedModel::load(o.checkpoint, o.threads);
    const auto& r = model.header().at("representation");
    const auto shape = r.at("shape").get<std::vector<std::size_t>>();
    const double timeout = r.at("idle_timeout").get<double>();
    const auto parsed = capture::parse_capture(o.capture, 0);
    const auto classes = model.class_names();

    repr::Dataset ds;
    ds.kind = model.representation();
    ds.class_names = classes;
    struct Row {
        capture::Timestamp ts;
        capture::Address src, dst;
        std::uint16_t sport = 0, dport = 0;
        capture::Transport transport = capture::Transport::OTHER;
        std::size_t packets = 1;
    };
    std::vector<Row> rows;

    if (ds.kind == repr::DatasetKind::Packets) {
        const std::size_t n = shape.at(0);
        ds.inputs = nn::Tensor({parsed.packets.size(), n});
        for (std::size_t i = 0; i < parsed.packets.size(); ++i) {
            const auto& p = parsed.packets[i];
            repr::normalize_packet_into(p.payload, ds.inputs.row(i));
            rows.push_back({p.timestamp, p.src_addr, p.dst_addr, p.src_port, p.dst_port, p.transport, 1});
        }
    } else {
        const bool expert = ds.kind == repr::DatasetKind::Expert;
        const std::size_t m = expert ? flow::kKeepAllPackets : shape.at(0);
        const auto flows = flow::assemble_flows(parsed.packets, timeout, m);
        const auto contexts = features::flow_contexts(flows);
        if (expert) {
            ds.inputs = nn::Tensor({flows.size(), features::kFeatureCount});
        } else {
            ds.inputs = nn::Tensor({flows.size(), shape.at(0), shape.at(1)});
        }
        for (std::size_t i = 0; i < flows.size(); ++i) {
            const auto& f = flows[i];
            auto row = ds.inputs.row(i);
            if (expert) {
                const auto v = features::extract_expert_features(f, contexts[i]);
                for (std::size_t k = 0; k < v.size(); ++k) row[k] = static_cast<float>(v[k]);
            } else {
                const std::size_t n = shape.at(1);
                for (std::size_t k = 0; k < f.packets.size(); ++k) {
                    repr::normalize_packet_into(f.packets[k].payload, row.subspan(k * n, n));
                }
            }
            const auto& first = f.packets.front();
            rows.push_back({f.first_seen, first.src_addr, first.dst_addr, first.src_port, first.dst_port,
                            f.key.transport, f.total_packets});
        }
    }
    ds.labels.assign(rows.size(), 0);

    const auto scores = rows.empty() ? std::vector<double>{} : model.scores(ds);
    const std::size_t cols = model.columns();
    auto out = open_out(o.out);
    out << "index,timestamp,src,src_port,dst,dst_port,transport,packets";
    if (cols == 1) {
        out << ",score";
    } else {
        for (std::size_t c = 0; c < cols; ++c) out << ",score_" << (c < classes.size() ? classes[c] : std::to_string(c));
    }
    out << ",predicted\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        out << i << ',' << fmt(row.ts.seconds()) << ',' << row.src.to_string() << ',' << row.sport << ','
            << row.dst.to_string() << ',' << row.dport << ',' << capture::to_string(row.transport) << ','
            << row.packets;
        std::size_t pred = 0;
        for (std::size_t c = 0; c < cols; ++c) {
            const double s = scores[i * cols + c];
            out << ',' << fmt(s);
            if (cols > 1 && s > scores[i * cols + pred]) pred = c;
        }
        if (cols == 1) pred = scores[i] >= 0.5 ? 1 : 0;
        out << ',' << (pred < classes.size() ? classes[pred] : std::to_string(pred)) << '\n';
    }
    return rows.size();
}

}  // namespace deepmal::pipeline
