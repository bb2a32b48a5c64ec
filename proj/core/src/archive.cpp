#include "awe/archive.hpp"

#include <Eigen/Core>

#include "binary_io.hpp"

namespace awe {

namespace {
constexpr char kMagic[4] = {'A', 'W', 'E', 'F'};
constexpr std::uint32_t kFormatVersion = 1;
}  // namespace

void save_segments(const SegmentStore& store, const std::string& path) {
  auto os = detail::open_out(path);
  detail::write_bytes(os, kMagic, 4);
  detail::write_pod<std::uint32_t>(os, kFormatVersion);
  detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(store.feature_dim()));
  detail::write_pod<std::uint64_t>(os, store.size());
  for (const auto& seg : store.segments()) {
    detail::write_string(os, seg.id);
    detail::write_string(os, seg.word_label);
    detail::write_string(os, seg.speaker_id);
    detail::write_string(os, seg.language_id);
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seg.frames.rows()));
    detail::write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(seg.frames.cols()));
    // row-major on disk
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm =
        seg.frames;
    detail::write_floats(os, rm.data(), static_cast<std::size_t>(rm.size()));
  }
  os.flush();
  if (!os) throw Error("I/O failure writing '" + path + "'");
}

SegmentStore load_segments(const std::string& path) {
  auto is = detail::open_in(path);
  char magic[4];
  detail::read_bytes(is, magic, 4, "archive magic");
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw Error("'" + path + "' is not a feature archive");
  const auto version = detail::read_pod<std::uint32_t>(is, "archive version");
  if (version != kFormatVersion)
    throw Error("unsupported archive format_version " + std::to_string(version) +
                " (expected " + std::to_string(kFormatVersion) + ")");
  const auto dim = detail::read_pod<std::uint32_t>(is, "feature_dim");
  const auto count = detail::read_pod<std::uint64_t>(is, "record count");

  SegmentStore store(static_cast<int>(dim));
  for (std::uint64_t rec = 0; rec < count; ++rec) {
    const std::string where = "record " + std::to_string(rec);
    try {
      FeatureSegment seg;
      seg.id = detail::read_string(is, "id");
      seg.word_label = detail::read_string(is, "word_label");
      seg.speaker_id = detail::read_string(is, "speaker_id");
      seg.language_id = detail::read_string(is, "language_id");
      const auto T = detail::read_pod<std::uint32_t>(is, "frame count");
      if (T < 1) throw Error("T must be >= 1");
      const auto width = detail::read_pod<std::uint32_t>(is, "frame width");
      if (width != dim)
        throw Error("dimension mismatch for id '" + seg.id + "': record width " +
                    std::to_string(width) + " vs archive feature_dim " +
                    std::to_string(dim));
      Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(
          T, dim);
      detail::read_floats(is, rm.data(), static_cast<std::size_t>(rm.size()),
                          "frames");
      seg.frames = rm;
      store.add(std::move(seg));
    } catch (const Error& e) {
      throw Error("'" + path + "' " + where + ": " + e.what());
    }
  }
  return store;
}

}  // namespace awe
