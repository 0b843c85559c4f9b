#include "deepmal/capture/manifest.hpp"

#include <fstream>
#include <future>
#include <set>
#include <sstream>

#include "deepmal/util/error.hpp"

namespace deepmal::capture {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream in(line);
    while (std::getline(in, field, '\t')) fields.push_back(field);
    return fields;
}

std::string rstrip(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
    return s;
}

}  // namespace

ClassSet::ClassSet(std::vector<std::string> names) {
    for (auto& n : names) add(n);
}

std::optional<ClassId> ClassSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return static_cast<ClassId>(i);
    }
    return std::nullopt;
}

ClassId ClassSet::id(const std::string& name) const {
    if (auto id = find(name)) return *id;
    throw ConfigError("undeclared class label '" + name + "'");
}

ClassId ClassSet::add(const std::string& name) {
    if (name.empty()) throw ConfigError("empty class name");
    if (auto id = find(name)) return *id;
    if (names_.size() >= 255) throw ConfigError("too many classes");
    names_.push_back(name);
    return static_cast<ClassId>(names_.size() - 1);
}

CaptureManifest CaptureManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IngestError("cannot open manifest " + path.string());
    CaptureManifest m;
    bool declared = false;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        line = rstrip(line);
        if (line.empty()) continue;
        if (line.rfind("#classes", 0) == 0) {
            auto fields = split_tabs(line);
            for (std::size_t i = 1; i < fields.size(); ++i) m.classes.add(fields[i]);
            declared = true;
            continue;
        }
        if (line.rfind("#max_packets", 0) == 0) {
            auto fields = split_tabs(line);
            try {
                if (fields.size() != 2) throw std::invalid_argument("arity");
                m.max_packets_per_file = std::stoul(fields[1]);
            } catch (const std::exception&) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) +
                                  ": expected #max_packets\t<count>");
            }
            continue;
        }
        if (line[0] == '#') continue;
        auto fields = split_tabs(line);
        if (fields.size() != 2) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) +
                              ": expected <path>\\t<label>");
        }
        std::filesystem::path p(fields[0]);
        if (p.is_relative()) p = path.parent_path() / p;
        const ClassId label = declared ? m.classes.id(fields[1]) : m.classes.add(fields[1]);
        m.entries.push_back({p, label});
    }
    m.validate();
    return m;
}

void CaptureManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IngestError("cannot write manifest " + path.string());
    out << "#classes";
    for (const auto& n : classes.names()) out << '\t' << n;
    out << '\n';
    if (max_packets_per_file) out << "#max_packets\t" << *max_packets_per_file << '\n';
    for (const auto& e : entries) {
        auto p = e.path;
        if (p.parent_path() == path.parent_path()) p = p.filename();
        out << p.string() << '\t' << classes.name(e.label) << '\n';
    }
}

void CaptureManifest::validate() const {
    std::set<std::filesystem::path> seen;
    for (const auto& e : entries) {
        if (!seen.insert(e.path.lexically_normal()).second) {
            throw ConfigError("duplicate capture in manifest: " + e.path.string());
        }
        if (e.label >= classes.size()) throw ConfigError("manifest label outside class set");
    }
}

IngestResult ingest(const CaptureManifest& manifest, unsigned threads) {
    manifest.validate();
    const std::size_t cap = manifest.max_packets_per_file.value_or(0);
    IngestResult result;
    result.per_file.resize(manifest.entries.size());
    result.stats.resize(manifest.entries.size());
    const std::size_t workers = std::max(1u, threads);
    for (std::size_t start = 0; start < manifest.entries.size(); start += workers) {
        std::vector<std::future<ParsedCapture>> jobs;
        const std::size_t end = std::min(manifest.entries.size(), start + workers);
        for (std::size_t i = start; i < end; ++i) {
            const auto& e = manifest.entries[i];
            jobs.push_back(std::async(workers > 1 ? std::launch::async : std::launch::deferred,
                                      [&e, cap] { return parse_capture(e.path, e.label, cap); }));
        }
        for (std::size_t i = start; i < end; ++i) {
            auto parsed = jobs[i - start].get();
            result.per_file[i] = std::move(parsed.packets);
            result.stats[i] = std::move(parsed.stats);
        }
    }
    return result;
}

}  // namespace deepmal::capture
