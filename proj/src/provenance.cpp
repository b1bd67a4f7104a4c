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

#include "cslr/provenance.hpp"

#include <fstream>
#include <sstream>

namespace cslr {

std::uint64_t hash_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open file for hashing: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return fnv1a64(ss.str());
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

void write_stamp(const std::filesystem::path& dir, const Stamp& stamp) {
  const auto path = dir / kStampFileName;
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write stamp: " + path.string());
  os << "stage " << stamp.stage << "\n";
  os << "artifact_version " << stamp.artifact_version << "\n";
  for (const auto& [rel, hex] : stamp.file_hashes)
    os << "file " << rel << " " << hex << "\n";
  if (!os) throw Error("stamp write failed: " + path.string());
}

Stamp read_stamp(const std::filesystem::path& dir) {
  const auto path = dir / kStampFileName;
  std::ifstream is(path);
  if (!is)
    throw ProvenanceError("no stamp in " + dir.string() +
                          "; run the producing stage first");
  Stamp stamp;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "stage") {
      ls >> stamp.stage;
    } else if (key == "artifact_version") {
      ls >> stamp.artifact_version;
    } else if (key == "file") {
      std::string rel, hex;
      if (!(ls >> rel >> hex))
        throw ParseError("stamp " + path.string() + " line " +
                         std::to_string(line_no) + ": bad file entry");
      stamp.file_hashes[rel] = hex;
    } else {
      throw ParseError("stamp " + path.string() + " line " +
                       std::to_string(line_no) + ": unknown key '" + key +
                       "'");
    }
  }
  if (stamp.stage.empty())
    throw ParseError("stamp " + path.string() + ": missing stage line");
  return stamp;
}

void stamp_add_file(Stamp* stamp, const std::filesystem::path& dir,
                    const std::filesystem::path& file) {
  const auto rel = std::filesystem::relative(file, dir);
  stamp->file_hashes[rel.generic_string()] = hash_hex(hash_file(file));
}

void verify_stamped_file(const std::filesystem::path& dir,
                         const std::filesystem::path& file) {
  const Stamp stamp = read_stamp(dir);
  const auto rel = std::filesystem::relative(file, dir).generic_string();
  const auto it = stamp.file_hashes.find(rel);
  if (it == stamp.file_hashes.end())
    throw ProvenanceError("file " + rel + " is not listed in the stamp of " +
                          dir.string() + " (stage '" + stamp.stage +
                          "'); re-run that stage");
  const std::string actual = hash_hex(hash_file(file));
  if (actual != it->second)
    throw ProvenanceError("file " + rel + " in " + dir.string() +
                          " does not match its stamp (stage '" + stamp.stage +
                          "'): expected " + it->second + ", found " + actual +
                          "; the artifact was modified, re-run stage '" +
                          stamp.stage + "'");
}

void verify_stamped_dir(const std::filesystem::path& dir) {
  const Stamp stamp = read_stamp(dir);
  for (const auto& [rel, hex] : stamp.file_hashes) {
    const auto path = dir / rel;
    if (!std::filesystem::exists(path))
      throw ProvenanceError("file " + rel + " listed in the stamp of " +
                            dir.string() + " (stage '" + stamp.stage +
                            "') is missing; re-run stage '" + stamp.stage +
                            "'");
    const std::string actual = hash_hex(hash_file(path));
    if (actual != hex)
      throw ProvenanceError("file " + rel + " in " + dir.string() +
                            " does not match its stamp (stage '" +
                            stamp.stage + "'); re-run stage '" + stamp.stage +
                            "'");
  }
}

}  // namespace cslr
