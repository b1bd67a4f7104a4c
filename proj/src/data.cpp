/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "cslr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "cslr/checkpoint.hpp"
#include "cslr/provenance.hpp"

namespace cslr {
namespace {

constexpr char kMagic[4] = {'K', 'P', 'S', 'Q'};

std::string read_binary(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_binary(const std::filesystem::path& path, const std::string& data) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("cannot write file: " + path.string());
  os.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!os) throw Error("write failed: " + path.string());
}

std::string serialize_container(std::uint32_t version, std::uint32_t t,
                                std::uint32_t k, std::uint32_t c,
                                const FloatMatrix& payload) {
  std::string out;
  out.reserve(20 + payload.size() * 4);
  out.append(kMagic, 4);
  detail::put_le(out, version);
  detail::put_le(out, t);
  detail::put_le(out, k);
  detail::put_le(out, c);
  for (Eigen::Index i = 0; i < payload.rows(); ++i)
    for (Eigen::Index j = 0; j < payload.cols(); ++j) {
      std::uint32_t bits;
      const float f = payload(i, j);
      std::memcpy(&bits, &f, 4);
      detail::put_le(out, bits);
    }
  return out;
}

struct ContainerHeader {
  std::uint32_t version, t, k, c;
};

ContainerHeader parse_container(const std::string& raw,
                                const std::filesystem::path& path,
                                FloatMatrix* payload) {
  if (raw.size() < 20 || std::memcmp(raw.data(), kMagic, 4) != 0)
    throw ParseError("not a KPSQ container: " + path.string(), 0);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  ContainerHeader h;
  h.version = detail::get_le32(p + 4);
  h.t = detail::get_le32(p + 8);
  h.k = detail::get_le32(p + 12);
  h.c = detail::get_le32(p + 16);
  if (h.version != kContainerVersionKeypoints &&
      h.version != kContainerVersionFeatures)
    throw ParseError("unsupported KPSQ version " + std::to_string(h.version) +
                         " in " + path.string(),
                     4);
  if (h.t == 0 || h.k == 0 || h.c == 0)
    throw ParseError("KPSQ header has a zero dimension in " + path.string(),
                     8);
  const std::uint64_t values =
      std::uint64_t{h.t} * std::uint64_t{h.k} * std::uint64_t{h.c};
  const std::uint64_t need = 20 + values * 4;
  if (raw.size() != need)
    throw ParseError("KPSQ payload size mismatch in " + path.string() +
                         ": expected " + std::to_string(need) + " bytes, got " +
                         std::to_string(raw.size()),
                     static_cast<std::int64_t>(raw.size()));
  payload->resize(h.t, static_cast<Eigen::Index>(h.k) * h.c);
  const unsigned char* q = p + 20;
  for (Eigen::Index i = 0; i < payload->rows(); ++i)
    for (Eigen::Index j = 0; j < payload->cols(); ++j) {
      const std::uint32_t bits = detail::get_le32(q);
      float f;
      std::memcpy(&f, &bits, 4);
      (*payload)(i, j) = f;
      q += 4;
    }
  return h;
}

}  // namespace

void KeypointSequence::validate() const {
  if (num_frames() < 1)
    throw ValidationError("sample '" + sample_id + "': no frames");
  if (frames.cols() < 3 || frames.cols() % 3 != 0)
    throw ValidationError("sample '" + sample_id +
                          "': frame width is not a multiple of 3");
  for (Eigen::Index t = 0; t < num_frames(); ++t)
    for (Eigen::Index k = 0; k < num_keypoints(); ++k) {
      const float c = confidence(t, k);
      if (!(c >= 0.0f && c <= 1.0f))
        throw ValidationError("sample '" + sample_id + "': confidence " +
                              std::to_string(c) + " outside [0, 1] at frame " +
                              std::to_string(t) + " keypoint " +
                              std::to_string(k));
      if (c > 0.0f && (!std::isfinite(x(t, k)) || !std::isfinite(y(t, k))))
        throw ValidationError("sample '" + sample_id +
                              "': non-finite coordinates at frame " +
                              std::to_string(t) + " keypoint " +
                              std::to_string(k));
    }
}

void write_keypoint_file(const KeypointSequence& seq,
                         const std::filesystem::path& path) {
  seq.validate();
  write_binary(path,
               serialize_container(kContainerVersionKeypoints,
                                   static_cast<std::uint32_t>(seq.num_frames()),
                                   static_cast<std::uint32_t>(
                                       seq.num_keypoints()),
                                   3, seq.frames));
}

KeypointSequence read_keypoint_file(const std::filesystem::path& path) {
  KeypointSequence seq;
  const ContainerHeader h =
      parse_container(read_binary(path), path, &seq.frames);
  if (h.version != kContainerVersionKeypoints)
    throw ParseError("expected keypoint container (version 1) in " +
                         path.string(),
                     4);
  if (h.c != 3)
    throw ParseError("keypoint container must have 3 channels, got " +
                         std::to_string(h.c) + " in " + path.string(),
                     16);
  seq.sample_id = path.stem().string();
  seq.validate();
  return seq;
}

void write_feature_file(const FloatMatrix& features,
                        const std::filesystem::path& path) {
  if (features.rows() < 1 || features.cols() < 1)
    throw ValidationError("feature matrix is empty");
  write_binary(path,
               serialize_container(kContainerVersionFeatures,
                                   static_cast<std::uint32_t>(features.rows()),
                                   1,
                                   static_cast<std::uint32_t>(features.cols()),
                                   features));
}

FloatMatrix read_feature_file(const std::filesystem::path& path) {
  FloatMatrix features;
  const ContainerHeader h =
      parse_container(read_binary(path), path, &features);
  if (h.version != kContainerVersionFeatures)
    throw ParseError("expected feature container (version 2) in " +
                         path.string(),
                     4);
  if (h.k != 1)
    throw ParseError("feature container must have K == 1, got " +
                         std::to_string(h.k) + " in " + path.string(),
                     12);
  return features;
}

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

bool known_split(const std::string& s) {
  return s == "train" || s == "dev" || s == "test";
}

}  // namespace

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open manifest: " + path.string());
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      fields.push_back(line.substr(
          start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 5)
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": expected 5 tab-separated fields, got " +
                       std::to_string(fields.size()));
    ManifestRecord rec;
    rec.sample_id = fields[0];
    rec.split = fields[1];
    rec.signer_id = fields[2];
    rec.path = fields[3];
    rec.glosses = split_ws(fields[4]);
    if (rec.sample_id.empty())
      throw ParseError("manifest line " + std::to_string(line_no) +
                       ": empty sample_id");
    m.records.push_back(std::move(rec));
  }
  m.validate(false);
  return m;
}

void DatasetManifest::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write manifest: " + path.string());
  os << "# sample_id\tsplit\tsigner_id\tpath\tgloss\n";
  for (const auto& rec : records) {
    os << rec.sample_id << '\t' << rec.split << '\t' << rec.signer_id << '\t'
       << rec.path << '\t';
    for (std::size_t i = 0; i < rec.glosses.size(); ++i) {
      if (i) os << ' ';
      os << rec.glosses[i];
    }
    os << '\n';
  }
  if (!os) throw Error("manifest write failed: " + path.string());
}

std::vector<const ManifestRecord*> DatasetManifest::split_records(
    const std::string& split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& rec : records)
    if (rec.split == split) out.push_back(&rec);
  return out;
}

std::set<std::string> DatasetManifest::signers(const std::string& split) const {
  std::set<std::string> out;
  for (const auto& rec : records)
    if (rec.split == split) out.insert(rec.signer_id);
  return out;
}

void DatasetManifest::validate(bool check_files) const {
  std::set<std::string> seen;
  for (const auto& rec : records) {
    if (!seen.insert(rec.sample_id).second)
      throw ValidationError("manifest: duplicate sample_id '" + rec.sample_id +
                            "'");
    if (!known_split(rec.split))
      throw ValidationError("manifest: sample '" + rec.sample_id +
                            "' has unknown split '" + rec.split + "'");
    if (check_files && !std::filesystem::exists(resolve(rec)))
      throw ValidationError("manifest: sample '" + rec.sample_id +
                            "' references missing file " +
                            resolve(rec).string());
  }
}

GlossVocabulary::GlossVocabulary(std::vector<std::string> tokens)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw ValidationError("vocabulary is empty");
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty())
      throw ValidationError("vocabulary token " + std::to_string(i + 1) +
                            " is empty");
    if (tokens_[i].find_first_of(" \t\n") != std::string::npos)
      throw ValidationError("vocabulary token '" + tokens_[i] +
                            "' contains whitespace");
    if (!index_.emplace(tokens_[i], static_cast<int>(i) + 1).second)
      throw ValidationError("vocabulary token '" + tokens_[i] +
                            "' appears twice");
  }
}

GlossVocabulary GlossVocabulary::build(const DatasetManifest& manifest,
                                       const std::vector<std::string>& splits) {
  std::set<std::string> uniq;
  for (const auto& split : splits)
    for (const auto* rec : manifest.split_records(split))
      for (const auto& g : rec->glosses) uniq.insert(g);
  if (uniq.empty())
    throw ValidationError("vocabulary build: no gloss tokens in given splits");
  return GlossVocabulary(std::vector<std::string>(uniq.begin(), uniq.end()));
}

GlossVocabulary GlossVocabulary::read(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot open vocabulary: " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty())
      throw ParseError("vocabulary " + path.string() + ": empty line " +
                       std::to_string(tokens.size() + 1));
    tokens.push_back(line);
  }
  if (tokens.empty())
    throw ParseError("vocabulary " + path.string() + " is empty");
  return GlossVocabulary(std::move(tokens));
}

void GlossVocabulary::write(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write vocabulary: " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
  if (!os) throw Error("vocabulary write failed: " + path.string());
}

int GlossVocabulary::id(const std::string& token) const {
  const auto it = index_.find(token);
  if (it == index_.end())
    throw ValidationError("token '" + token + "' not in vocabulary");
  return it->second;
}

const std::string& GlossVocabulary::token(int id) const {
  static const std::string kBlankToken = "<blank>";
  if (id == kBlankId) return kBlankToken;
  if (id < 1 || id > size())
    throw ValidationError("vocabulary id " + std::to_string(id) +
                          " outside [1, " + std::to_string(size()) + "]");
  return tokens_[static_cast<std::size_t>(id) - 1];
}

std::vector<int> GlossVocabulary::to_ids(
    const std::vector<std::string>& glosses) const {
  std::vector<int> out;
  out.reserve(glosses.size());
  for (const auto& g : glosses) out.push_back(id(g));
  return out;
}

std::vector<std::string> GlossVocabulary::to_tokens(
    const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) out.push_back(token(i));
  return out;
}

std::uint64_t GlossVocabulary::hash() const {
  std::string blob;
  for (const auto& t : tokens_) {
    blob += t;
    blob += '\n';
  }
  return fnv1a64(blob);
}

}  // namespace cslr
