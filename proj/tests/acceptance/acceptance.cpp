// Prints one PASS/FAIL line per acceptance criterion; exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "deepmal/capture/pcap.hpp"
#include "deepmal/eval/metrics.hpp"
#include "deepmal/pipeline/commands.hpp"
#include "deepmal/synth/corpus.hpp"
#include "deepmal/util/random.hpp"
#include "support/gradient_suite.hpp"
#include "support/table_fixture.hpp"

using namespace deepmal;
using namespace deepmal::pipeline;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

class Workspace {
public:
    Workspace() : root_(fs::temp_directory_path() / ("deepmal_acceptance_" + std::to_string(::getpid()))) {
        fs::create_directories(root_);
    }
    ~Workspace() {
        std::error_code ec;
        fs::remove_all(root_, ec);
    }
    fs::path operator/(const std::string& s) const { return root_ / s; }

private:
    fs::path root_;
};

fs::path synth(const Workspace& ws, const std::string& preset, const std::string& tag) {
    SynthOptions s;
    s.preset = preset;
    s.out_dir = ws / tag;
    s.threads = threads();
    run_synth(s);
    return s.out_dir / "manifest.tsv";
}

fs::path extract(const fs::path& manifest, repr::DatasetKind kind, std::optional<std::size_t> n,
                 std::optional<std::size_t> cap, const fs::path& out) {
    ExtractOptions e;
    e.manifest = manifest;
    e.representation = kind;
    e.n = n;
    e.max_per_class = cap;
    e.out = out;
    e.threads = threads();
    run_extract(e);
    return out;
}

eval::EvalReport train_eval(const fs::path& dataset, std::optional<models::Architecture> arch,
                            std::optional<baselines::ShallowKind> baseline, std::optional<std::size_t> epochs,
                            const fs::path& checkpoint) {
    TrainOptions t;
    t.dataset = dataset;
    t.architecture = arch;
    t.baseline = baseline;
    t.epochs = epochs;
    t.checkpoint = checkpoint;
    t.threads = threads();
    t.shallow.threads = threads();
    run_train(t);
    EvalOptions v;
    v.checkpoint = checkpoint;
    v.dataset = dataset;
    v.threads = threads();
    return run_eval(v);
}

// --- criteria -------------------------------------------------------------------

Outcome gradients() {
    const auto t0 = Clock::now();
    std::size_t cases = 0, failed = 0;
    std::string first;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        for (const auto& c : testing::run_gradient_suite(seed)) {
            ++cases;
            if (!c.ok()) {
                ++failed;
                if (first.empty()) first = c.name + " seed " + std::to_string(seed) + ": " + c.first_failure;
            }
        }
    }
    const double secs = seconds_since(t0);
    Outcome o{failed == 0 && secs < 60.0, std::to_string(cases) + " cases over 20 seeds, " +
                                              std::to_string(failed) + " failed, " + fmt("%.1f s", secs)};
    if (!first.empty()) o.detail += "; " + first;
    return o;
}

Outcome oracles() {
    const auto gap = testing::run_forward_oracles(77, 100);
    Rng rng(78);
    double auc_err = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 2 + rng.below(300);
        std::vector<double> s(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = i < 2 ? std::uint8_t(i) : rng.bernoulli(0.5);
            s[i] = trial % 3 == 0 ? double(rng.below(6)) : rng.uniform() + 0.2 * y[i];
        }
        double c = 0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                if (y[i] && !y[j]) {
                    ++pairs;
                    c += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
                }
        auc_err = std::max(auc_err, std::abs(eval::auc(eval::roc_curve(s, y)) - c / double(pairs)));
    }
    return {gap.conv < 1e-6 && gap.dense < 1e-6 && auc_err < 1e-9,
            "64-bit engine vs loops: conv " + fmt("%.2e", gap.conv) + ", dense " + fmt("%.2e", gap.dense) +
                "; AUC vs concordant pairs " + fmt("%.2e", auc_err) + " over 100 instances"};
}

Outcome separable(const Workspace& ws) {
    const auto t0 = Clock::now();
    const auto manifest = synth(ws, "separable", "separable");
    const auto ds = extract(manifest, repr::DatasetKind::Flows, std::nullopt, std::nullopt, ws / "sep_flows.dmds");
    const auto r = train_eval(ds, models::Architecture::FlowsBinary, std::nullopt, 10, ws / "sep.dmck");
    const double secs = seconds_since(t0);
    return {r.accuracy >= 0.95 && secs < 600.0, "5000 flows, test accuracy " + fmt("%.4f", r.accuracy) + ", AUC " +
                                                    fmt("%.4f", r.auc) + ", " + fmt("%.0f s", secs)};
}

struct HardResults {
    double flows_auc = 0;
    double packets_auc = 0;
    std::vector<std::pair<std::string, double>> baselines;
};

HardResults hard_runs(const Workspace& ws) {
    HardResults h;
    const auto manifest = synth(ws, "hard", "hard");
    const auto flows = extract(manifest, repr::DatasetKind::Flows, std::nullopt, std::nullopt, ws / "hard_flows.dmds");
    h.flows_auc = train_eval(flows, models::Architecture::FlowsBinary, std::nullopt, 10, ws / "hard_fb.dmck").auc;
    for (auto kind : baselines::all_shallow_kinds()) {
        const auto r = train_eval(flows, std::nullopt, kind, std::nullopt, ws / "hard_sh.dmck");
        h.baselines.emplace_back(baselines::to_string(kind), r.auc);
    }
    const auto packets = extract(manifest, repr::DatasetKind::Packets, 100, 5000, ws / "hard_packets.dmds");
    h.packets_auc = train_eval(packets, models::Architecture::PacketsBinary, std::nullopt, 10, ws / "hard_pb.dmck").auc;
    return h;
}

Outcome ordering(const HardResults& h) {
    bool pass = true;
    std::string detail = "flows-binary AUC " + fmt("%.4f", h.flows_auc);
    for (const auto& [name, a] : h.baselines) {
        pass &= h.flows_auc - a >= 0.05;
        detail += ", " + name + " " + fmt("%.4f", a);
    }
    return {pass, detail};
}

Outcome representation(const HardResults& h) {
    return {h.flows_auc >= h.packets_auc,
            "hard corpus: flows-binary AUC " + fmt("%.4f", h.flows_auc) + ", packets-binary " + fmt("%.4f", h.packets_auc)};
}

Outcome multiclass(const Workspace& ws) {
    const auto manifest = synth(ws, "multiclass4", "multi");
    const auto ds = extract(manifest, repr::DatasetKind::Packets, 100, 2500, ws / "multi.dmds");
    const auto r = train_eval(ds, models::Architecture::PacketsMulticlass, std::nullopt, 10, ws / "multi.dmck");
    const auto& cm = r.confusion;
    std::size_t neris = 0, virut = 0;
    for (std::size_t i = 0; i < r.class_names.size(); ++i) {
        if (r.class_names[i] == "Neris") neris = i;
        if (r.class_names[i] == "Virut") virut = i;
    }
    const std::size_t shared = cm.at(neris, virut) + cm.at(virut, neris);
    std::size_t other = 0;
    for (std::size_t i = 0; i < cm.classes; ++i)
        for (std::size_t j = i + 1; j < cm.classes; ++j)
            if (!(i == std::min(neris, virut) && j == std::max(neris, virut))) other = std::max(other, cm.at(i, j) + cm.at(j, i));
    double f1_err = 0;
    for (const auto& m : r.per_class) {
        if (m.f1_undefined) continue;
        f1_err = std::max(f1_err, std::abs(m.f1 - 2 * m.precision * m.recall / (m.precision + m.recall)));
    }
    return {r.accuracy >= 0.70 && shared > other && f1_err < 1e-6,
            "accuracy " + fmt("%.4f", r.accuracy) + ", Neris/Virut confusion " + std::to_string(shared) +
                " vs largest other pair " + std::to_string(other) + ", F1 err " + fmt("%.1e", f1_err)};
}

Outcome ingest_fidelity(const Workspace& ws) {
    std::size_t packets = 0, skipped = 0, mismatched = 0;
    for (const auto& name : synth::preset_names()) {
        auto spec = synth::CorpusSpec::preset(name);
        for (auto& c : spec.classes) c.flows = 400;
        const auto dir = ws / ("fidelity_" + name);
        synth::generate_corpus(spec, dir, threads());
        for (std::size_t k = 0; k < spec.classes.size(); ++k) {
            const auto expected = synth::synthesize_class(spec, k, nullptr);
            const auto parsed = capture::parse_capture(dir / (spec.classes[k].name + ".pcap"), 0);
            skipped += parsed.stats.skipped() + (parsed.stats.truncated ? 1 : 0);
            packets += parsed.packets.size();
            if (parsed.packets.size() != expected.size()) {
                mismatched += std::max(parsed.packets.size(), expected.size());
                continue;
            }
            for (std::size_t i = 0; i < expected.size(); ++i) mismatched += parsed.packets[i].payload != expected[i].payload;
        }
    }
    return {skipped == 0 && mismatched == 0 && packets > 0,
            std::to_string(packets) + " packets from 3 presets, " + std::to_string(skipped) + " skipped, " +
                std::to_string(mismatched) + " payload mismatches"};
}

Outcome determinism(const Workspace& ws) {
    auto run = [&](const std::string& tag, unsigned nthreads) {
        SynthOptions s;
        s.preset = "multiclass4";
        s.flows_per_class = 200;
        s.out_dir = ws / (tag + "_corpus");
        s.threads = nthreads;
        run_synth(s);
        ExtractOptions e;
        e.manifest = s.out_dir / "manifest.tsv";
        e.representation = repr::DatasetKind::Packets;
        e.n = 100;
        e.out = ws / (tag + ".dmds");
        e.threads = nthreads;
        run_extract(e);
        TrainOptions t;
        t.dataset = e.out;
        t.architecture = models::Architecture::PacketsMulticlass;
        t.epochs = 2;
        t.checkpoint = ws / (tag + ".dmck");
        t.threads = nthreads;
        run_train(t);
        EvalOptions v;
        v.checkpoint = t.checkpoint;
        v.dataset = e.out;
        v.report = ws / (tag + "_report.json");
        v.threads = nthreads;
        run_eval(v);
        return std::vector<std::string>{slurp(e.out), slurp(t.checkpoint), slurp(*v.report)};
    };
    const auto a = run("det_a", 1);
    const unsigned many = std::max(4u, threads());
    const auto b = run("det_b", many);
    const char* names[] = {"dataset", "checkpoint", "report"};
    bool pass = true;
    std::string detail;
    for (std::size_t i = 0; i < 3; ++i) {
        const bool same = !a[i].empty() && a[i] == b[i];
        pass &= same;
        detail += std::string(i ? ", " : "") + names[i] + (same ? " identical" : " differs") + " (" +
                  std::to_string(a[i].size()) + " bytes)";
    }
    return {pass, detail + "; runs used 1 and " + std::to_string(many) + " threads"};
}

Outcome table_consistency() {
    std::vector<std::string> names;
    for (const auto& r : testing::reference_rows()) names.push_back(r.name);
    const auto metrics = eval::per_class_metrics(eval::ConfusionMatrix{4, testing::reference_confusion()}, names);
    double worst = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& r = testing::reference_rows()[i];
        const auto& m = metrics[i];
        for (auto [got, want] : {std::pair{m.accuracy, r.accuracy}, {m.precision, r.precision}, {m.recall, r.recall},
                                 {m.f1, r.f1}})
            worst = std::max(worst, std::abs(got - want));
    }
    return {worst <= 0.001 + 1e-12, "largest deviation from the four reference rows " + fmt("%.5f", worst)};
}

}  // namespace

int main() {
    Workspace ws;
    int failures = 0;
    auto report = [&](const char* id, const char* what, const std::function<Outcome()>& fn) {
        Outcome o;
        const auto t0 = Clock::now();
        try {
            o = fn();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, what, o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    };

    report("AC1", "gradient checks", gradients);
    report("AC2", "oracle equivalence", oracles);
    report("AC3", "separable end to end", [&] { return separable(ws); });
    HardResults hard;
    std::string hard_error;
    const auto hard_t0 = Clock::now();
    try {
        hard = hard_runs(ws);
    } catch (const std::exception& e) {
        hard_error = e.what();
    }
    std::printf("hard corpus: flows-binary, six baselines and packets-binary trained in %.1f s\n", seconds_since(hard_t0));
    auto hard_guard = [&](Outcome (*fn)(const HardResults&)) {
        return [&, fn] {
            if (!hard_error.empty()) return Outcome{false, "hard corpus runs threw: " + hard_error};
            return fn(hard);
        };
    };
    report("AC4", "deep flows beat shallow baselines", hard_guard(ordering));
    report("AC5", "flows at least match packets", hard_guard(representation));
    report("AC6", "multi-class confusion", [&] { return multiclass(ws); });
    report("AC7", "ingest fidelity", [&] { return ingest_fidelity(ws); });
    report("AC8", "determinism", [&] { return determinism(ws); });
    report("AC9", "table-formula consistency", table_consistency);
    return failures;
}
