#pragma once

// Dataset discovery and the nested subset-sampling protocol.
//
// Layout on disk: <root>/images/<id>.png paired with <root>/labels/<id>.png.
// The label is an alpha matte for kind matte_fg (where images/ holds the
// foreground colors) and a two-valued mask for kind seg.

#include "matteblend/core/rng.hpp"
#include "matteblend/data/image_io.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace matteblend {

enum class LabelKind { seg, matte_fg };

inline const char* to_string(LabelKind k) { return k == LabelKind::seg ? "seg" : "matte_fg"; }

inline LabelKind label_kind_from_string(const std::string& s) {
  if (s == "seg") return LabelKind::seg;
  if (s == "matte_fg") return LabelKind::matte_fg;
  throw std::invalid_argument("unknown label kind '" + s + "'");
}

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string label_path;
};

struct DatasetManifest {
  std::string root;
  LabelKind kind = LabelKind::seg;
  std::uint64_t seed = 0;
  std::vector<ManifestEntry> entries;

  std::size_t size() const { return entries.size(); }
};

/// Foreground colors plus exact opacity; background is supplied at
/// composition time.
struct MatteSample {
  RgbImage<float> fg;
  AlphaMatte<float> matte;
  std::string source_id;
};

/// Photograph-like image with its coarse binary human-region label.
struct SegSample {
  RgbImage<float> image;
  SegMask seg;
  std::string source_id;
};

inline std::vector<std::string> list_png_files(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

inline DatasetManifest load_manifest(const std::string& root, LabelKind kind) {
  namespace fs = std::filesystem;
  const fs::path images = fs::path(root) / "images";
  const fs::path labels = fs::path(root) / "labels";
  if (!fs::is_directory(images))
    throw std::runtime_error("dataset root '" + root + "' has no images/ directory");

  DatasetManifest m;
  m.root = root;
  m.kind = kind;
  std::vector<std::string> missing;
  for (const std::string& img : list_png_files(images.string())) {
    const std::string id = fs::path(img).stem().string();
    const fs::path label = labels / (id + ".png");
    if (!fs::is_regular_file(label)) {
      missing.push_back(img);
      continue;
    }
    m.entries.push_back({id, img, label.string()});
  }
  if (!missing.empty()) {
    std::string msg = "missing labels for " + std::to_string(missing.size()) + " image(s):";
    for (const auto& f : missing) msg += "\n  " + f;
    throw std::runtime_error(msg);
  }
  if (m.entries.empty()) throw std::runtime_error("dataset root '" + root + "' holds no samples");
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.id < b.id; });
  return m;
}

/// Deterministic subset of exactly `count` entries, keeping manifest order.
/// Each entry ranks by a hash of (seed, id), so subsets under one seed are
/// nested: the n smallest keys are a subset of the n+k smallest.
inline DatasetManifest sample_subset(const DatasetManifest& m, std::size_t count,
                                     std::uint64_t seed) {
  if (count > m.entries.size())
    throw std::invalid_argument("sample_subset: requested " + std::to_string(count) +
                                " entries from a manifest of " + std::to_string(m.entries.size()));
  std::vector<std::size_t> idx(m.entries.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<std::uint64_t> key(m.entries.size());
  for (std::size_t i = 0; i < key.size(); ++i) key[i] = mix_seed(seed, hash_string(m.entries[i].id));
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return key[a] != key[b] ? key[a] < key[b] : m.entries[a].id < m.entries[b].id;
  });
  idx.resize(count);
  std::sort(idx.begin(), idx.end());

  DatasetManifest out;
  out.root = m.root;
  out.kind = m.kind;
  out.seed = seed;
  out.entries.reserve(count);
  for (std::size_t i : idx) out.entries.push_back(m.entries[i]);
  return out;
}

inline MatteSample load_matte_sample(const ManifestEntry& e) {
  MatteSample s{read_rgb_image<float>(e.image_path), read_alpha_matte<float>(e.label_path), e.id};
  require_same_dims(s.fg.height(), s.fg.width(), s.matte.height(), s.matte.width(),
                    "matte sample '" + e.id + "'");
  return s;
}

inline SegSample load_seg_sample(const ManifestEntry& e) {
  SegSample s{read_rgb_image<float>(e.image_path), read_seg_mask(e.label_path), e.id};
  require_same_dims(s.image.height(), s.image.width(), s.seg.height(), s.seg.width(),
                    "seg sample '" + e.id + "'");
  return s;
}

// -- JSON-lines manifest cache -------------------------------------------------

inline void write_manifest_jsonl(const std::string& path, const DatasetManifest& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest cache: " + path);
  for (const auto& e : m.entries) {
    nlohmann::json j{{"id", e.id}, {"image", e.image_path}, {"label", e.label_path},
                     {"kind", to_string(m.kind)}};
    out << j.dump() << "\n";
  }
}

inline DatasetManifest read_manifest_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest cache: " + path);
  DatasetManifest m;
  bool have_kind = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    const LabelKind k = label_kind_from_string(j.at("kind").get<std::string>());
    if (!have_kind) {
      m.kind = k;
      have_kind = true;
    } else if (k != m.kind) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": mixed label kinds");
    }
    m.entries.push_back({j.at("id").get<std::string>(), j.at("image").get<std::string>(),
                         j.at("label").get<std::string>()});
  }
  if (m.entries.empty()) throw std::runtime_error("manifest cache '" + path + "' is empty");
  return m;
}

}  // namespace matteblend
