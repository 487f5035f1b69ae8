#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cxrssl/errors.hpp"
#include "cxrssl/image_io.hpp"
#include "cxrssl/random.hpp"
#include "cxrssl/tensor.hpp"

namespace cxrssl::data {

/// The four corpus categories, in the fixed order used by confusion matrices.
enum class ClassLabel : std::uint8_t { covid = 0, lung_opacity = 1, normal = 2, viral_pneumonia = 3 };

inline constexpr std::size_t kNumClasses = 4;
inline constexpr std::array<ClassLabel, kNumClasses> kAllClasses{ClassLabel::covid, ClassLabel::lung_opacity,
                                                                 ClassLabel::normal, ClassLabel::viral_pneumonia};

inline std::size_t index_of(ClassLabel c) { return static_cast<std::size_t>(c); }

inline ClassLabel class_from_index(std::size_t i) {
    if (i >= kNumClasses) {
        throw UsageError("class index " + std::to_string(i) + " out of range");
    }
    return static_cast<ClassLabel>(i);
}

inline std::string class_name(ClassLabel c) {
    switch (c) {
    case ClassLabel::covid:
        return "COVID";
    case ClassLabel::lung_opacity:
        return "LungOpacity";
    case ClassLabel::normal:
        return "Normal";
    case ClassLabel::viral_pneumonia:
        return "ViralPneumonia";
    }
    return "?";
}

/// Accepts canonical names and the corpus directory spellings
/// ("Lung_Opacity", "Viral Pneumonia", "covid", ...): case, spaces,
/// underscores and dashes are ignored.
inline std::optional<ClassLabel> parse_class_name(std::string_view name) {
    std::string key;
    for (char ch : name) {
        if (std::isalnum(static_cast<unsigned char>(ch))) {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
        }
    }
    if (key == "covid" || key == "covid19") {
        return ClassLabel::covid;
    }
    if (key == "lungopacity") {
        return ClassLabel::lung_opacity;
    }
    if (key == "normal") {
        return ClassLabel::normal;
    }
    if (key == "viralpneumonia") {
        return ClassLabel::viral_pneumonia;
    }
    return std::nullopt;
}

enum class Split : std::uint8_t { unassigned, train, test };

inline std::string split_name(Split s) {
    switch (s) {
    case Split::train:
        return "train";
    case Split::test:
        return "test";
    case Split::unassigned:
        return "unassigned";
    }
    return "?";
}

inline Split parse_split(std::string_view s) {
    if (s == "train") {
        return Split::train;
    }
    if (s == "test") {
        return Split::test;
    }
    if (s == "unassigned") {
        return Split::unassigned;
    }
    throw DataError("unknown split '" + std::string(s) + "'");
}

struct SampleRecord {
    std::string path;
    ClassLabel label = ClassLabel::covid;
    Split split = Split::unassigned;

    bool operator==(const SampleRecord&) const = default;
};

struct DatasetManifest {
    std::vector<SampleRecord> records;
    std::uint64_t seed = 0;
    double fraction = 1.0;

    std::size_t count(Split s) const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [s](const SampleRecord& r) { return r.split == s; }));
    }
    std::size_t count(Split s, ClassLabel c) const {
        return static_cast<std::size_t>(std::count_if(
            records.begin(), records.end(), [s, c](const SampleRecord& r) { return r.split == s && r.label == c; }));
    }
    std::size_t count(ClassLabel c) const {
        return static_cast<std::size_t>(
            std::count_if(records.begin(), records.end(), [c](const SampleRecord& r) { return r.label == c; }));
    }
    std::vector<SampleRecord> with_split(Split s) const {
        std::vector<SampleRecord> out;
        std::copy_if(records.begin(), records.end(), std::back_inserter(out),
                     [s](const SampleRecord& r) { return r.split == s; });
        return out;
    }

    bool operator==(const DatasetManifest&) const = default;
};

/// Image paths of one split with class labels removed. Self-supervised
/// pre-training only ever sees this view of the data.
struct UnlabeledView {
    std::vector<std::string> paths;
};

inline UnlabeledView unlabeled(const DatasetManifest& manifest, Split s) {
    UnlabeledView view;
    for (const auto& r : manifest.records) {
        if (r.split == s) {
            view.paths.push_back(r.path);
        }
    }
    return view;
}

/// Throws when any path occurs in both lists.
inline void require_disjoint(const std::vector<std::string>& used, const std::vector<std::string>& held_out) {
    const std::unordered_set<std::string> held(held_out.begin(), held_out.end());
    for (const auto& p : used) {
        if (held.contains(p)) {
            throw DataError("test-split image '" + p + "' would be used for training");
        }
    }
}

struct SkippedFile {
    std::string path;
    std::string reason;
};

struct ScanReport {
    DatasetManifest manifest;
    std::vector<std::string> warnings;
    std::vector<SkippedFile> skipped;
};

namespace detail {

inline bool has_png_extension(const std::filesystem::path& p) {
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png";
}

inline void scan_image_dir(const std::filesystem::path& dir, ClassLabel label, bool allow_nested, ScanReport& report,
                           std::size_t& found) {
    std::vector<std::filesystem::path> entries;
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
        if (std::filesystem::is_directory(p)) {
            if (allow_nested && p.filename() == "images") {
                scan_image_dir(p, label, false, report, found);
            } else {
                report.warnings.push_back("ignoring subdirectory '" + p.string() + "'");
            }
            continue;
        }
        if (!has_png_extension(p)) {
            report.skipped.push_back({p.string(), "not a .png file"});
            continue;
        }
        try {
            io::read_png_info(p);
        } catch (const Error& e) {
            report.skipped.push_back({p.string(), e.what()});
            continue;
        }
        report.manifest.records.push_back({p.string(), label, Split::unassigned});
        ++found;
    }
}

/// Length of the longest directory prefix (up to and including a '/') shared
/// by every record path.
inline std::size_t common_dir_prefix(const std::vector<SampleRecord>& records) {
    if (records.empty()) {
        return 0;
    }
    std::string_view common = records.front().path;
    for (const auto& r : records) {
        std::size_t n = 0;
        while (n < common.size() && n < r.path.size() && common[n] == r.path[n]) {
            ++n;
        }
        common = common.substr(0, n);
    }
    const auto slash = common.rfind('/');
    return slash == std::string_view::npos ? 0 : slash + 1;
}

/// Sort key that depends only on (seed, tag, path below the dataset root):
/// reordering the input records or moving the dataset cannot change the order.
inline std::vector<std::size_t> seeded_order(const std::vector<SampleRecord>& records,
                                             const std::vector<std::size_t>& members, std::uint64_t seed,
                                             std::string_view tag) {
    const std::size_t root = common_dir_prefix(records);
    std::vector<std::pair<std::uint64_t, std::size_t>> keyed;
    keyed.reserve(members.size());
    for (std::size_t i : members) {
        const std::string_view rel = std::string_view(records[i].path).substr(root);
        keyed.emplace_back(derive_seed(seed, tag, {cxrssl::detail::fnv1a(rel)}), i);
    }
    std::sort(keyed.begin(), keyed.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) {
            return a.first < b.first;
        }
        return records[a.second].path < records[b.second].path;
    });
    std::vector<std::size_t> out;
    out.reserve(keyed.size());
    for (const auto& [key, i] : keyed) {
        out.push_back(i);
    }
    return out;
}

/// Largest-remainder apportionment: total = floor(fraction * N); each class
/// gets floor(fraction * n_c), leftover units go to the largest fractional
/// parts (ties in seeded order).
inline std::array<std::size_t, kNumClasses> apportion(const std::array<std::size_t, kNumClasses>& sizes,
                                                      double fraction, std::uint64_t seed, std::string_view tag) {
    constexpr double eps = 1e-9;
    std::size_t n = 0;
    for (std::size_t s : sizes) {
        n += s;
    }
    const auto total = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + eps));
    std::array<std::size_t, kNumClasses> take{};
    std::array<double, kNumClasses> remainder{};
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const double exact = fraction * static_cast<double>(sizes[c]);
        take[c] = std::min(sizes[c], static_cast<std::size_t>(std::floor(exact + eps)));
        remainder[c] = exact - static_cast<double>(take[c]);
        assigned += take[c];
    }
    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (sizes[c] > take[c]) {
            order.push_back(c);
        }
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) {
            return remainder[a] > remainder[b];
        }
        return derive_seed(seed, tag, {a}) < derive_seed(seed, tag, {b});
    });
    for (std::size_t i = 0; i < order.size() && assigned < total; ++i, ++assigned) {
        ++take[order[i]];
    }
    return take;
}

} // namespace detail

/// Enumerates `<root>/<Class>/*.png` (and `<root>/<Class>/images/*.png`).
/// Unknown directories and empty classes produce warnings; unreadable files
/// go to the skip report. Records are sorted by path.
inline ScanReport scan_dataset(const std::filesystem::path& root) {
    if (!std::filesystem::is_directory(root)) {
        throw DataError("dataset root '" + root.string() + "' does not exist or is not a directory");
    }
    ScanReport report;
    std::vector<std::filesystem::path> dirs;
    for (const auto& e : std::filesystem::directory_iterator(root)) {
        if (e.is_directory()) {
            dirs.push_back(e.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        const auto label = parse_class_name(dir.filename().string());
        if (!label) {
            report.warnings.push_back("directory '" + dir.string() + "' does not name a known class; ignored");
            continue;
        }
        std::size_t found = 0;
        detail::scan_image_dir(dir, *label, true, report, found);
        if (found == 0) {
            report.warnings.push_back("class directory '" + dir.string() + "' holds no readable images");
        }
    }
    if (report.manifest.records.empty()) {
        report.warnings.push_back("no images found under '" + root.string() + "'");
    }
    std::sort(report.manifest.records.begin(), report.manifest.records.end(),
              [](const SampleRecord& a, const SampleRecord& b) { return a.path < b.path; });
    return report;
}

/// Stratified train/test assignment. floor(train_ratio * N) records go to
/// train, apportioned across classes by largest remainder; within a class the
/// train members are the first ones in a seeded order of their paths.
inline DatasetManifest split(const DatasetManifest& manifest, double train_ratio, std::uint64_t seed) {
    if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
        throw UsageError("train_ratio must lie strictly between 0 and 1");
    }
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        members[index_of(manifest.records[i].label)].push_back(i);
    }
    std::array<std::size_t, kNumClasses> sizes{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        sizes[c] = members[c].size();
        if (sizes[c] == 1) {
            throw DataError("class " + class_name(class_from_index(c)) + " has fewer than 2 samples; cannot stratify");
        }
    }
    const auto take = detail::apportion(sizes, train_ratio, seed, "split-remainder");
    DatasetManifest out = manifest;
    out.seed = seed;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        const auto order = detail::seeded_order(manifest.records, members[c], seed, "split");
        for (std::size_t j = 0; j < order.size(); ++j) {
            out.records[order[j]].split = j < take[c] ? Split::train : Split::test;
        }
    }
    return out;
}

/// Keeps a stratified `fraction` of the train split (test records untouched).
/// Per class, floor(fraction * n_c) records plus largest-remainder top-ups so
/// the train total is floor(fraction * N_train).
inline DatasetManifest stratified_subsample(const DatasetManifest& manifest, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw UsageError("label fraction must lie in (0, 1]");
    }
    std::array<std::vector<std::size_t>, kNumClasses> members;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].split == Split::train) {
            members[index_of(manifest.records[i].label)].push_back(i);
        }
    }
    std::array<std::size_t, kNumClasses> sizes{};
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        sizes[c] = members[c].size();
    }
    const auto take = detail::apportion(sizes, fraction, seed, "subsample-remainder");
    std::vector<bool> keep(manifest.records.size(), false);
    for (std::size_t c = 0; c < kNumClasses; ++c) {
        if (sizes[c] > 0 && take[c] == 0) {
            throw DataError("label fraction " + std::to_string(fraction) + " leaves no training samples of class " +
                            class_name(class_from_index(c)));
        }
        const auto order = detail::seeded_order(manifest.records, members[c], seed, "subsample");
        for (std::size_t j = 0; j < take[c]; ++j) {
            keep[order[j]] = true;
        }
    }
    DatasetManifest out;
    out.seed = manifest.seed;
    out.fraction = fraction;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        if (manifest.records[i].split != Split::train || keep[i]) {
            out.records.push_back(manifest.records[i]);
        }
    }
    return out;
}

/// Decodes an image to (channels_expected, H, W) in [0, 1]. Grayscale is
/// replicated across channels; color collapses to luminance when one channel
/// is expected.
inline Tensor<float> load_image(const std::string& path, std::size_t channels_expected) {
    if (channels_expected != 1 && channels_expected != 3) {
        throw UsageError("channels_expected must be 1 or 3");
    }
    Tensor<float> img = io::read_png(path);
    const std::size_t c = img.dim(0);
    const std::size_t h = img.dim(1);
    const std::size_t w = img.dim(2);
    const std::size_t plane = h * w;
    if (c == channels_expected) {
        return img;
    }
    Tensor<float> out({channels_expected, h, w});
    if (c == 1) {
        for (std::size_t k = 0; k < channels_expected; ++k) {
            std::copy_n(img.data(), plane, out.data() + k * plane);
        }
    } else {
        for (std::size_t p = 0; p < plane; ++p) {
            out[p] = 0.299f * img[p] + 0.587f * img[plane + p] + 0.114f * img[2 * plane + p];
        }
    }
    return out;
}

inline Tensor<float> load_image(const SampleRecord& record, std::size_t channels_expected) {
    return load_image(record.path, channels_expected);
}

/// Text form: an optional `# seed=<n> fraction=<f>` line, then one
/// `path<TAB>class<TAB>split` line per record.
inline void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
    std::ostringstream os;
    os.precision(17);
    os << "# seed=" << manifest.seed << " fraction=" << manifest.fraction << '\n';
    for (const auto& r : manifest.records) {
        if (r.path.find('\t') != std::string::npos || r.path.find('\n') != std::string::npos) {
            throw DataError("path '" + r.path + "' contains a tab or newline");
        }
        os << r.path << '\t' << class_name(r.label) << '\t' << split_name(r.split) << '\n';
    }
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) {
            throw DataError("cannot write manifest '" + path.string() + "'");
        }
        f << os.str();
    }
    std::filesystem::rename(tmp, path);
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) {
        throw DataError("cannot read manifest '" + path.string() + "'");
    }
    DatasetManifest m;
    std::set<std::string> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        if (line.front() == '#') {
            std::istringstream is(line.substr(1));
            std::string tok;
            while (is >> tok) {
                if (tok.starts_with("seed=")) {
                    m.seed = std::stoull(tok.substr(5));
                } else if (tok.starts_with("fraction=")) {
                    m.fraction = std::stod(tok.substr(9));
                }
            }
            continue;
        }
        const auto t1 = line.find('\t');
        const auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected path<TAB>class<TAB>split");
        }
        SampleRecord r;
        r.path = line.substr(0, t1);
        const auto label = parse_class_name(line.substr(t1 + 1, t2 - t1 - 1));
        if (!label) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": unknown class");
        }
        r.label = *label;
        r.split = parse_split(line.substr(t2 + 1));
        if (!seen.insert(r.path).second) {
            throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate path '" + r.path + "'");
        }
        m.records.push_back(std::move(r));
    }
    return m;
}

} // namespace cxrssl::data
