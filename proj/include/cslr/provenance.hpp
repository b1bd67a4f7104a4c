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

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "cslr/errors.hpp"

namespace cslr {

// FNV-1a over raw bytes; used for artifact fingerprints and seed derivation.
inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t hash_file(const std::filesystem::path& path);
std::string hash_hex(std::uint64_t h);

// Each pipeline stage writes a stamp.txt next to its outputs: the producing
// stage name, an artifact format version, and one content hash per output
// file (paths relative to the stamp's directory). Consumers verify inputs
// against the stamp so a modified or half-written artifact fails loudly with
// the name of the stage to re-run.
struct Stamp {
  std::string stage;
  int artifact_version = 1;
  std::map<std::string, std::string> file_hashes;  // relative path -> hex
};

inline constexpr const char* kStampFileName = "stamp.txt";

void write_stamp(const std::filesystem::path& dir, const Stamp& stamp);
Stamp read_stamp(const std::filesystem::path& dir);

// Adds an entry for `file` (which must live under `dir`) computed from its
// current on-disk bytes.
void stamp_add_file(Stamp* stamp, const std::filesystem::path& dir,
                    const std::filesystem::path& file);

// Verifies one file under `dir` against the stamp in that directory.
// Throws ProvenanceError naming the producing stage when the stamp is
// missing, the file is unlisted, or the hash differs.
void verify_stamped_file(const std::filesystem::path& dir,
                         const std::filesystem::path& file);

// Verifies every file listed in the stamp.
void verify_stamped_dir(const std::filesystem::path& dir);

}  // namespace cslr
