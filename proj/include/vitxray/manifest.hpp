#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "vitxray/rng.hpp"

namespace vitxray {

enum class Split { Train, Validation, Test };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Validation: return "validation";
        default: return "test";
    }
}

inline Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "validation" || s == "val") return Split::Validation;
    if (s == "test") return Split::Test;
    throw std::invalid_argument("unknown split '" + s + "'");
}

struct ManifestEntry {
    std::string path;
    int label = 0;  // COVID=1, NON-COVID=0
    Split split = Split::Train;
};

struct DatasetManifest {
    std::vector<ManifestEntry> entries;
    std::uint64_t seed = 0;

    std::size_t count(Split split, int label) const {
        std::size_t n = 0;
        for (const auto& e : entries)
            if (e.split == split && e.label == label) ++n;
        return n;
    }
    std::size_t count(Split split) const { return count(split, 0) + count(split, 1); }

    std::vector<ManifestEntry> split_entries(Split split) const {
        std::vector<ManifestEntry> out;
        for (const auto& e : entries)
            if (e.split == split) out.push_back(e);
        return out;
    }
};

// Requested per-split per-class sizes. COVID/NON-COVID counts per split.
struct SplitCounts {
    std::size_t train_covid = 0, train_noncovid = 0;
    std::size_t val_covid = 0, val_noncovid = 0;
    std::size_t test_covid = 0, test_noncovid = 0;
    std::size_t covid_total() const { return train_covid + val_covid + test_covid; }
    std::size_t noncovid_total() const { return train_noncovid + val_noncovid + test_noncovid; }
};

namespace detail {

inline std::vector<std::string> list_images(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
    std::vector<std::string> out;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file()) out.push_back(e.path().string());
    std::sort(out.begin(), out.end());
    if (out.empty()) throw std::runtime_error("no images in directory: " + dir);
    return out;
}

inline void shuffle_paths(std::vector<std::string>& paths, Rng& rng) {
    // Fisher-Yates on the stable RNG source
    for (std::size_t i = paths.size(); i > 1; --i) std::swap(paths[i - 1], paths[rng.below(i)]);
}

}  // namespace detail

// Deterministic shuffled split assignment. NON-COVID images are drawn in
// equal shares from the given class directories (remainder to the earliest
// directories).
inline DatasetManifest build_manifest(const std::string& covid_dir, const std::vector<std::string>& noncovid_dirs,
                                      const SplitCounts& counts, std::uint64_t seed) {
    if (noncovid_dirs.empty()) throw std::invalid_argument("build_manifest: no NON-COVID directories");
    std::set<std::string> canon;
    canon.insert(std::filesystem::weakly_canonical(covid_dir).string());
    for (const auto& d : noncovid_dirs)
        if (!canon.insert(std::filesystem::weakly_canonical(d).string()).second)
            throw std::invalid_argument("build_manifest: overlapping class directories: " + d);

    Rng rng(seed);
    auto covid = detail::list_images(covid_dir);
    detail::shuffle_paths(covid, rng);
    if (covid.size() < counts.covid_total())
        throw std::runtime_error("build_manifest: need " + std::to_string(counts.covid_total()) +
                                 " COVID images, only " + std::to_string(covid.size()) + " available in " + covid_dir);

    // equal shares per NON-COVID source
    std::size_t need = counts.noncovid_total();
    std::size_t k = noncovid_dirs.size();
    std::vector<std::string> noncovid;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t share = need / k + (i < need % k ? 1 : 0);
        auto pool = detail::list_images(noncovid_dirs[i]);
        detail::shuffle_paths(pool, rng);
        if (pool.size() < share)
            throw std::runtime_error("build_manifest: need " + std::to_string(share) + " images from " +
                                     noncovid_dirs[i] + ", only " + std::to_string(pool.size()) + " available");
        noncovid.insert(noncovid.end(), pool.begin(), pool.begin() + static_cast<long>(share));
    }
    detail::shuffle_paths(noncovid, rng);

    DatasetManifest m;
    m.seed = seed;
    auto take = [&](std::vector<std::string>& pool, std::size_t& idx, std::size_t n, int label, Split split) {
        for (std::size_t i = 0; i < n; ++i) m.entries.push_back({pool[idx++], label, split});
    };
    std::size_t ci = 0, ni = 0;
    take(covid, ci, counts.train_covid, 1, Split::Train);
    take(noncovid, ni, counts.train_noncovid, 0, Split::Train);
    take(covid, ci, counts.val_covid, 1, Split::Validation);
    take(noncovid, ni, counts.val_noncovid, 0, Split::Validation);
    take(covid, ci, counts.test_covid, 1, Split::Test);
    take(noncovid, ni, counts.test_noncovid, 0, Split::Test);

    std::set<std::string> unique(covid.begin(), covid.begin() + static_cast<long>(ci));
    for (std::size_t i = 0; i < ni; ++i)
        if (!unique.insert(noncovid[i]).second)
            throw std::runtime_error("build_manifest: duplicate path across classes: " + noncovid[i]);
    return m;
}

// Fractional split of everything available (fractions must sum to 1).
inline DatasetManifest build_manifest_fractions(const std::string& covid_dir,
                                                const std::vector<std::string>& noncovid_dirs, double train_frac,
                                                double val_frac, double test_frac, std::uint64_t seed) {
    if (train_frac < 0 || val_frac < 0 || test_frac < 0 || std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("build_manifest: split fractions must be nonnegative and sum to 1");
    std::size_t n_covid = detail::list_images(covid_dir).size();
    std::size_t n_non = 0;
    for (const auto& d : noncovid_dirs) n_non += detail::list_images(d).size();
    // equal shares cap the usable NON-COVID pool
    std::size_t k = noncovid_dirs.size();
    std::size_t min_pool = SIZE_MAX;
    for (const auto& d : noncovid_dirs) min_pool = std::min(min_pool, detail::list_images(d).size());
    n_non = std::min(n_non, min_pool * k);
    SplitCounts c;
    auto split3 = [&](std::size_t total, std::size_t& tr, std::size_t& va, std::size_t& te) {
        tr = static_cast<std::size_t>(total * train_frac);
        va = static_cast<std::size_t>(total * val_frac);
        te = total - tr - va;
        if (test_frac == 0.0) {  // avoid dumping rounding remainder into test
            tr = total - va;
            te = 0;
        }
    };
    split3(n_covid, c.train_covid, c.val_covid, c.test_covid);
    split3(n_non, c.train_noncovid, c.val_noncovid, c.test_noncovid);
    return build_manifest(covid_dir, noncovid_dirs, c, seed);
}

// ---- manifest file: header comments + one "path<TAB>label<TAB>split" per line

inline void save_manifest(const DatasetManifest& m, std::ostream& out) {
    out << "# seed=" << m.seed << "\n";
    for (Split s : {Split::Train, Split::Validation, Split::Test})
        out << "# " << split_name(s) << " covid=" << m.count(s, 1) << " noncovid=" << m.count(s, 0) << "\n";
    for (const auto& e : m.entries)
        out << e.path << "\t" << (e.label == 1 ? "COVID" : "NON-COVID") << "\t" << split_name(e.split) << "\n";
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path);
    save_manifest(m, out);
}

inline DatasetManifest load_manifest(std::istream& in) {
    DatasetManifest m;
    std::string line;
    std::set<std::string> seen;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') {
            auto p = line.find("seed=");
            if (p != std::string::npos && line.find(' ', p) == std::string::npos)
                m.seed = std::stoull(line.substr(p + 5));
            continue;
        }
        std::istringstream ls(line);
        std::string path, label, split;
        if (!std::getline(ls, path, '\t') || !std::getline(ls, label, '\t') || !std::getline(ls, split, '\t'))
            throw std::runtime_error("manifest line " + std::to_string(lineno) + ": expected path\\tlabel\\tsplit");
        if (!seen.insert(path).second)
            throw std::runtime_error("manifest line " + std::to_string(lineno) + ": duplicate path " + path);
        int lab;
        if (label == "COVID")
            lab = 1;
        else if (label == "NON-COVID")
            lab = 0;
        else
            throw std::runtime_error("manifest line " + std::to_string(lineno) + ": unknown label '" + label + "'");
        m.entries.push_back({path, lab, parse_split(split)});
    }
    return m;
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest: " + path);
    return load_manifest(in);
}

}  // namespace vitxray
