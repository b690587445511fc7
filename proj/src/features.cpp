#include "mvr/features.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "mvr/io_util.hpp"

namespace mvr {

using nlohmann::json;

std::string to_string(Modality m) { return m == Modality::music ? "music" : "video"; }

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    default: return "test";
  }
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::runtime_error("unknown split '" + s + "' (expected train|val|test)");
}

ClipFeature aggregate_stats(const FrameFeatureSequence& seq) {
  const int t = seq.frames.rows, d = seq.frames.cols;
  if (t < 1) throw std::invalid_argument("aggregate_stats: empty frame sequence for clip '" +
                                         seq.clip_id + "'");
  ClipFeature out;
  out.clip_id = seq.clip_id;
  out.modality = seq.modality;
  out.source = "stats(mean,var,max)";
  out.values.resize(static_cast<std::size_t>(3) * d);
  for (int j = 0; j < d; ++j) {
    double sum = 0.0, maxv = seq.frames.at(0, j);
    for (int i = 0; i < t; ++i) {
      double v = seq.frames.at(i, j);
      sum += v;
      maxv = std::max(maxv, v);
    }
    double mean = sum / t;
    double sq = 0.0;
    for (int i = 0; i < t; ++i) {
      double c = seq.frames.at(i, j) - mean;
      sq += c * c;
    }
    out.values[j] = mean;
    out.values[d + j] = sq / t;  // population variance
    out.values[2 * d + j] = maxv;
  }
  return out;
}

ClipFeature aggregate_mean(const FrameFeatureSequence& seq) {
  const int t = seq.frames.rows, d = seq.frames.cols;
  if (t < 1) throw std::invalid_argument("aggregate_mean: empty frame sequence for clip '" +
                                         seq.clip_id + "'");
  ClipFeature out;
  out.clip_id = seq.clip_id;
  out.modality = seq.modality;
  out.source = "mean";
  out.values.resize(d);
  for (int j = 0; j < d; ++j) {
    double sum = 0.0;
    for (int i = 0; i < t; ++i) sum += seq.frames.at(i, j);
    out.values[j] = sum / t;
  }
  return out;
}

std::vector<FrameFeatureSequence> sample_segments(const FrameFeatureSequence& seq, int n_segments,
                                                  double segment_seconds, RngStream& rng) {
  if (n_segments < 1) throw std::invalid_argument("sample_segments: n_segments must be >= 1");
  if (seq.frame_rate <= 0.0) throw std::invalid_argument("sample_segments: frame_rate must be > 0");
  const int t = seq.frames.rows;
  const int len = static_cast<int>(std::ceil(segment_seconds * seq.frame_rate));
  if (len < 1 || len > t)
    throw std::invalid_argument("sample_segments: clip '" + seq.clip_id + "' lasts " +
                                format_double(seq.duration_seconds()) +
                                "s, shorter than one segment of " +
                                format_double(segment_seconds) + "s");
  std::vector<FrameFeatureSequence> out;
  out.reserve(n_segments);
  for (int s = 0; s < n_segments; ++s) {
    int start = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(t - len + 1)));
    FrameFeatureSequence seg;
    seg.clip_id = seq.clip_id;
    seg.modality = seq.modality;
    seg.frame_rate = seq.frame_rate;
    seg.frames = DenseMatrix(len, seq.frames.cols);
    for (int i = 0; i < len; ++i)
      for (int j = 0; j < seq.frames.cols; ++j) seg.frames.at(i, j) = seq.frames.at(start + i, j);
    out.push_back(std::move(seg));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

Manifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw std::runtime_error("manifest " + path + ": " + e.what());
  }
  Manifest m;
  if (!j.is_object() || !j.contains("pairs") || !j.contains("split"))
    throw std::runtime_error("manifest " + path + ": expected object with 'pairs' and 'split'");
  std::set<std::string> seen;
  for (const auto& p : j.at("pairs")) {
    ManifestPair mp;
    mp.clip_id = p.at("clip_id").get<std::string>();
    mp.music_ref = p.at("music_path_ref").get<std::string>();
    mp.video_ref = p.at("video_path_ref").get<std::string>();
    if (!seen.insert(mp.clip_id).second)
      throw std::runtime_error("manifest " + path + ": duplicate clip_id '" + mp.clip_id + "'");
    m.pairs.push_back(std::move(mp));
  }
  for (const auto& [id, sp] : j.at("split").items())
    m.split[id] = split_from_string(sp.get<std::string>());
  for (const auto& p : m.pairs)
    if (!m.split.count(p.clip_id))
      throw std::runtime_error("manifest " + path + ": split missing clip '" + p.clip_id + "'");
  return m;
}

void save_manifest(const std::string& path, const Manifest& m) {
  json pairs = json::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"clip_id", p.clip_id},
                     {"music_path_ref", p.music_ref},
                     {"video_path_ref", p.video_ref}});
  json split = json::object();
  for (const auto& [id, sp] : m.split) split[id] = to_string(sp);
  json j{{"pairs", pairs}, {"split", split}};
  write_text_file(path, j.dump(2) + "\n");
}

Manifest split_dataset(Manifest manifest, int val_count, RngStream& rng) {
  std::vector<std::string> pool;
  for (const auto& p : manifest.pairs)
    if (manifest.split.at(p.clip_id) != Split::test) pool.push_back(p.clip_id);
  if (val_count < 0 || val_count >= static_cast<int>(pool.size()))
    throw std::invalid_argument("split_dataset: val_count " + std::to_string(val_count) +
                                " out of range for a pool of " + std::to_string(pool.size()));
  rng.shuffle(pool);
  for (std::size_t i = 0; i < pool.size(); ++i)
    manifest.split[pool[i]] = static_cast<int>(i) < val_count ? Split::val : Split::train;
  return manifest;
}

// ---------------------------------------------------------------------------
// Feature tables
// ---------------------------------------------------------------------------

namespace {

void check_row_finite(const std::vector<double>& row, const std::string& clip_id,
                      const std::string& path) {
  for (double v : row)
    if (!std::isfinite(v))
      throw std::runtime_error("feature table " + path + ": non-finite value in clip '" +
                               clip_id + "'");
}

}  // namespace

FeatureTable load_feature_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature table: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("feature table " + path + ": empty file");
  auto header = split_csv(line);
  if (header.size() != 2 || header[0] != "clip_id" || header[1].substr(0, 4) != "dim=")
    throw std::runtime_error("feature table " + path + ": bad header '" + line + "'");
  FeatureTable table;
  table.dim = static_cast<int>(parse_long(header[1].substr(4), "feature table " + path));
  if (table.dim < 1) throw std::runtime_error("feature table " + path + ": dim must be >= 1");

  std::vector<double> all;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    std::string clip_id(fields[0]);
    if (static_cast<int>(fields.size()) != table.dim + 1)
      throw std::runtime_error("feature table " + path + ": clip '" + clip_id + "' has " +
                               std::to_string(fields.size() - 1) + " values, expected " +
                               std::to_string(table.dim));
    if (!seen.insert(clip_id).second)
      throw std::runtime_error("feature table " + path + ": duplicate clip '" + clip_id + "'");
    std::vector<double> row(table.dim);
    for (int j = 0; j < table.dim; ++j)
      row[j] = parse_double(fields[j + 1], "feature table " + path + ", clip '" + clip_id + "'");
    check_row_finite(row, clip_id, path);
    table.clip_ids.push_back(std::move(clip_id));
    all.insert(all.end(), row.begin(), row.end());
  }
  table.rows = DenseMatrix(static_cast<int>(table.clip_ids.size()), table.dim);
  table.rows.values = std::move(all);
  return table;
}

void save_feature_table(const std::string& path, const FeatureTable& table) {
  if (table.rows.rows != static_cast<int>(table.clip_ids.size()) || table.rows.cols != table.dim)
    throw std::invalid_argument("save_feature_table: inconsistent table shape");
  std::ostringstream out;
  out << "clip_id,dim=" << table.dim << "\n";
  for (int i = 0; i < table.rows.rows; ++i) {
    out << table.clip_ids[i];
    const double* row = table.rows.row(i);
    for (int j = 0; j < table.dim; ++j) out << ',' << format_double(row[j]);
    out << "\n";
  }
  write_text_file(path, out.str());
}

std::vector<FrameFeatureSequence> load_frame_features(const std::string& path, Modality modality) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open frame feature file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("frame feature file " + path + ": empty file");
  auto header = split_csv(line);
  if (header.size() != 3 || header[0] != "clip_id" || header[1].substr(0, 4) != "dim=" ||
      header[2].substr(0, 11) != "frame_rate=")
    throw std::runtime_error("frame feature file " + path + ": bad header '" + line + "'");
  const int dim = static_cast<int>(parse_long(header[1].substr(4), path));
  const double frame_rate = parse_double(header[2].substr(11), path);
  if (dim < 1 || frame_rate <= 0.0)
    throw std::runtime_error("frame feature file " + path + ": invalid dim or frame_rate");

  std::vector<FrameFeatureSequence> out;
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<double>> buffers;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_csv(line);
    if (static_cast<int>(fields.size()) != dim + 2)
      throw std::runtime_error("frame feature file " + path + ": bad frame line '" + line + "'");
    std::string clip_id(fields[0]);
    long frame_index = parse_long(fields[1], path);
    auto it = index.find(clip_id);
    if (it == index.end()) {
      index[clip_id] = out.size();
      FrameFeatureSequence seq;
      seq.clip_id = clip_id;
      seq.modality = modality;
      seq.frame_rate = frame_rate;
      out.push_back(std::move(seq));
      buffers.emplace_back();
      it = index.find(clip_id);
    }
    std::vector<double>& buf = buffers[it->second];
    if (frame_index != static_cast<long>(buf.size()) / dim)
      throw std::runtime_error("frame feature file " + path + ": clip '" + clip_id +
                               "' frame indices not consecutive from 0");
    for (int j = 0; j < dim; ++j) {
      double v = parse_double(fields[j + 2], path + ", clip '" + clip_id + "'");
      if (!std::isfinite(v))
        throw std::runtime_error("frame feature file " + path + ": non-finite value in clip '" +
                                 clip_id + "'");
      buf.push_back(v);
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].frames = DenseMatrix(static_cast<int>(buffers[i].size()) / dim, dim);
    out[i].frames.values = std::move(buffers[i]);
  }
  return out;
}

void save_frame_features(const std::string& path, const std::vector<FrameFeatureSequence>& seqs) {
  if (seqs.empty()) throw std::invalid_argument("save_frame_features: no sequences");
  const int dim = seqs.front().frames.cols;
  const double rate = seqs.front().frame_rate;
  std::ostringstream out;
  out << "clip_id,dim=" << dim << ",frame_rate=" << format_double(rate) << "\n";
  for (const auto& seq : seqs) {
    if (seq.frames.cols != dim || seq.frame_rate != rate)
      throw std::invalid_argument("save_frame_features: mixed dims or frame rates");
    for (int i = 0; i < seq.frames.rows; ++i) {
      out << seq.clip_id << ',' << i;
      const double* row = seq.frames.row(i);
      for (int j = 0; j < dim; ++j) out << ',' << format_double(row[j]);
      out << "\n";
    }
  }
  write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Ingest
// ---------------------------------------------------------------------------

ClipPair Dataset::pair(int i) const {
  ClipPair p;
  p.clip_id = clip_ids[i];
  p.music.clip_id = clip_ids[i];
  p.music.modality = Modality::music;
  p.music.source = music_source;
  p.music.values.assign(music.row(i), music.row(i) + music.cols);
  p.video.clip_id = clip_ids[i];
  p.video.modality = Modality::video;
  p.video.source = video_source;
  p.video.values.assign(video.row(i), video.row(i) + video.cols);
  return p;
}

std::vector<int> Dataset::rows_in_split(Split s) const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i)
    if (manifest.split.at(clip_ids[i]) == s) out.push_back(i);
  return out;
}

Dataset ingest_dataset(const std::string& manifest_path, const TableOverrides& overrides) {
  namespace fs = std::filesystem;
  Dataset ds;
  ds.manifest = load_manifest(manifest_path);
  if (ds.manifest.pairs.empty()) throw std::runtime_error("ingest: manifest has no pairs");

  const fs::path base = fs::path(manifest_path).parent_path();
  auto resolve = [&](const std::string& ref) {
    fs::path p(ref);
    return (p.is_absolute() ? p : base / p).string();
  };

  struct LoadedTable {
    FeatureTable table;
    std::map<std::string, int> row_of;
  };
  std::map<std::string, LoadedTable> tables;
  auto table_for = [&](const std::string& ref) -> const LoadedTable& {
    std::string path = resolve(ref);
    auto it = tables.find(path);
    if (it == tables.end()) {
      LoadedTable lt{load_feature_table(path), {}};
      for (std::size_t r = 0; r < lt.table.clip_ids.size(); ++r)
        lt.row_of[lt.table.clip_ids[r]] = static_cast<int>(r);
      it = tables.emplace(path, std::move(lt)).first;
    }
    return it->second;
  };

  const int n = static_cast<int>(ds.manifest.pairs.size());
  int music_dim = -1, video_dim = -1;
  std::vector<const double*> music_rows(n), video_rows(n);
  for (int i = 0; i < n; ++i) {
    const auto& p = ds.manifest.pairs[i];
    const std::string music_ref = overrides.music.value_or(p.music_ref);
    const std::string video_ref = overrides.video.value_or(p.video_ref);
    const LoadedTable& mt = table_for(music_ref);
    const LoadedTable& vt = table_for(video_ref);
    if (music_dim == -1) music_dim = mt.table.dim;
    if (video_dim == -1) video_dim = vt.table.dim;
    if (mt.table.dim != music_dim)
      throw std::runtime_error("ingest: music table '" + music_ref + "' has dim " +
                               std::to_string(mt.table.dim) + ", expected " +
                               std::to_string(music_dim));
    if (vt.table.dim != video_dim)
      throw std::runtime_error("ingest: video table '" + video_ref + "' has dim " +
                               std::to_string(vt.table.dim) + ", expected " +
                               std::to_string(video_dim));
    auto find_row = [&](const LoadedTable& t, Modality mod) -> const double* {
      auto rit = t.row_of.find(p.clip_id);
      if (rit == t.row_of.end())
        throw std::runtime_error("ingest: clip '" + p.clip_id + "' missing from " +
                                 to_string(mod) + " table");
      return t.table.rows.row(rit->second);
    };
    music_rows[i] = find_row(mt, Modality::music);
    video_rows[i] = find_row(vt, Modality::video);
    ds.clip_ids.push_back(p.clip_id);
  }
  ds.music = DenseMatrix(n, music_dim);
  ds.video = DenseMatrix(n, video_dim);
  for (int i = 0; i < n; ++i) {
    std::copy(music_rows[i], music_rows[i] + music_dim, ds.music.row(i));
    std::copy(video_rows[i], video_rows[i] + video_dim, ds.video.row(i));
  }
  ds.music_source = overrides.music.value_or(
      ds.manifest.pairs.front().music_ref);
  ds.video_source = overrides.video.value_or(ds.manifest.pairs.front().video_ref);
  return ds;
}

}  // namespace mvr
