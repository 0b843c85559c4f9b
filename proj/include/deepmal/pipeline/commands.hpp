#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "deepmal/baselines/shallow.hpp"
#include "deepmal/eval/metrics.hpp"
#include "deepmal/models/architectures.hpp"
#include "deepmal/nn/trainer.hpp"
#include "deepmal/repr/dataset.hpp"
#include "deepmal/synth/corpus.hpp"

namespace deepmal::pipeline {

using Logger = std::function<void(const std::string&)>;

// --- synth --------------------------------------------------------------------

struct SynthOptions {
    std::optional<std::string> preset;
    std::optional<std::filesystem::path> spec_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;  // overrides the spec's seed
    std::optional<std::size_t> flows_per_class;
    unsigned threads = 1;
};

synth::GeneratedCorpus run_synth(const SynthOptions& options);

// --- extract ------------------------------------------------------------------

struct ExtractOptions {
    std::filesystem::path manifest;
    repr::DatasetKind representation = repr::DatasetKind::Flows;
    std::optional<std::size_t> n;  // default 1024 for packets, 100 for flows
    std::size_t m = 2;
    double idle_timeout = flow::kDefaultIdleTimeout;
    bool balance = true;
    std::optional<std::size_t> max_per_class;
    bool keep_empty = false;
    std::uint64_t seed = 1;
    std::filesystem::path out;
    std::optional<std::filesystem::path> csv;
    unsigned threads = 1;
};

struct ExtractSummary {
    repr::Dataset dataset;
    std::vector<capture::ParseStats> stats;
    std::size_t packets = 0;
    std::size_t flows = 0;
};

/// Builds the dataset in memory; `run_extract` also writes it out.
ExtractSummary build_dataset(const ExtractOptions& options);
ExtractSummary run_extract(const ExtractOptions& options);

std::size_t default_bytes(repr::DatasetKind kind);

// --- train --------------------------------------------------------------------

struct TrainOptions {
    std::filesystem::path dataset;
    std::optional<models::Architecture> architecture;
    std::optional<baselines::ShallowKind> baseline;
    std::optional<std::size_t> epochs;  // default per architecture
    std::size_t batch_size = 128;
    double learning_rate = 1e-3;
    double decay = 0.95;
    repr::SplitSpec split;  // seed is derived from `seed`
    std::uint64_t seed = 1;
    baselines::ShallowParams shallow;
    std::filesystem::path checkpoint;
    std::optional<std::filesystem::path> history;
    unsigned threads = 1;
};

/// Epochs used when none are requested: 100 packets-binary, 10 flows-binary,
/// 50 packets-multiclass.
std::size_t default_epochs(models::Architecture arch);

struct TrainSummary {
    nn::History history;  // one row for baselines
    double validation_accuracy = 0.0;
    std::string model;
};

TrainSummary run_train(const TrainOptions& options, const Logger& log = {});

// --- eval ---------------------------------------------------------------------

enum class Subset { Train, Validation, Test, All };
Subset subset_from_string(const std::string& name);
std::string to_string(Subset subset);

struct EvalOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path dataset;
    Subset subset = Subset::Test;
    std::optional<std::filesystem::path> report;
    std::optional<std::filesystem::path> roc;
    std::optional<std::filesystem::path> confusion;
    unsigned threads = 1;
};

eval::EvalReport run_eval(const EvalOptions& options);

// --- predict ------------------------------------------------------------------

struct PredictOptions {
    std::filesystem::path checkpoint;
    std::filesystem::path capture;
    std::filesystem::path out;
    unsigned threads = 1;
};

/// Scores every packet (packet models) or flow (flow and expert models) of
/// a capture. Returns the number of scored rows.
std::size_t run_predict(const PredictOptions& options);

// --- shared -------------------------------------------------------------------

/// A trained network or shallow model restored from a checkpoint, together
/// with the representation it was trained on.
class LoadedModel {
public:
    static LoadedModel load(const std::filesystem::path& checkpoint, unsigned threads = 1);

    /// Scores laid out (rows, columns()).
    std::vector<double> scores(const repr::Dataset& dataset);
    std::size_t columns() const;
    const nlohmann::json& header() const { return header_; }
    std::string name() const;
    repr::DatasetKind representation() const;
    std::vector<std::string> class_names() const;
    /// Throws ConfigError when the dataset's representation differs.
    void check_compatible(const repr::Dataset& dataset) const;

private:
    nlohmann::json header_;
    std::unique_ptr<nn::Network> network_;
    std::unique_ptr<baselines::ShallowModel> shallow_;
};

}  // namespace deepmal::pipeline
