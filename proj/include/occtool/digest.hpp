#pragma once

#include <string>

namespace occtool {

// FNV-1a 64-bit content digest, hex encoded. Used for run manifests, where the
// point is change detection, not cryptographic integrity.
std::string fnv1a64_hex(const std::string& data);
std::string digest_file(const std::string& path);  // throws InputError if unreadable

}  // namespace occtool
