#ifndef AWE_ARCHIVE_HPP
#define AWE_ARCHIVE_HPP

#include <string>

#include "awe/segment.hpp"

namespace awe {

// Feature archive, the ingestion boundary of the toolkit.
//
// Layout (all integers little-endian):
//   magic "AWEF" | u32 format_version=1 | u32 feature_dim | u64 count
//   then per record:
//   id | word_label ("" = unlabeled) | speaker_id | language_id
//   | u32 T | u32 width | T*width float32, row-major
// Strings are u32 length + bytes. A record whose width disagrees with the
// header feature_dim is rejected naming the offending id. Frame values
// round-trip bit-exactly.

void save_segments(const SegmentStore& store, const std::string& path);
SegmentStore load_segments(const std::string& path);

}  // namespace awe

#endif  // AWE_ARCHIVE_HPP
